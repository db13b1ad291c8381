import glob
import importlib.util
import os
import sys


def _load_build_tree(directory):
    package_dir = os.path.join(directory, "parsejargon")
    (core_path,) = glob.glob(os.path.join(package_dir, "_core*"))
    core_spec = importlib.util.spec_from_file_location("parsejargon._core", core_path)
    core = importlib.util.module_from_spec(core_spec)
    sys.modules["parsejargon._core"] = core
    core_spec.loader.exec_module(core)
    spec = importlib.util.spec_from_file_location(
        "parsejargon", os.path.join(package_dir, "__init__.py"),
        submodule_search_locations=[package_dir])
    package = importlib.util.module_from_spec(spec)
    sys.modules["parsejargon"] = package
    spec.loader.exec_module(package)


# ctest points here so an installed copy cannot shadow the fresh build
if os.environ.get("PARSEJARGON_PYTHON_BUILD_DIR"):
    _load_build_tree(os.environ["PARSEJARGON_PYTHON_BUILD_DIR"])
