#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "parsejargon/error.hpp"
#include "parsejargon/eval.hpp"
#include "parsejargon/gateway.hpp"
#include "parsejargon/pipeline.hpp"
#include "parsejargon/prompts.hpp"
#include "parsejargon/provider.hpp"
#include "parsejargon/response_parser.hpp"
#include "parsejargon/scheduler.hpp"

namespace py = pybind11;
namespace pj = parsejargon;
using json = nlohmann::json;

namespace {

py::object to_python(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

json from_python(const py::handle& obj) {
  return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

using Pair = std::pair<std::string, std::string>;

pj::TermList to_terms(const std::vector<Pair>& pairs) {
  pj::TermList out;
  for (const auto& [term, definition] : pairs) out.push_back({term, definition});
  return out;
}

std::vector<Pair> from_terms(const pj::TermList& terms) {
  std::vector<Pair> out;
  for (const auto& t : terms) out.emplace_back(t.term, t.definition);
  return out;
}

pj::Mode mode_from(const std::string& s) {
  if (s == "general") return pj::Mode::General;
  if (s == "personalized") return pj::Mode::Personalized;
  throw pj::Error(pj::ErrorCode::InvalidArgument, "mode must be general or personalized");
}

std::shared_ptr<pj::Gateway> gateway_for(const std::optional<std::filesystem::path>& fixtures) {
  std::shared_ptr<pj::CompletionProvider> provider;
  if (fixtures) provider = std::make_shared<pj::MockProvider>(*fixtures);
  else provider = std::make_shared<pj::OpenAIProvider>(pj::LiveProviderConfig::from_env());
  return std::make_shared<pj::Gateway>(provider, pj::completion_params_from_env());
}

py::dict change_dict(const pj::DisplayChange& c) {
  py::dict d;
  d["key"] = c.key;
  d["shown_since_ms"] = c.shown_since_ms;
  d["queue_depth"] = c.queue_depth;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Jargon identification, personalization and evaluation";

  static py::exception<pj::Error> error(m, "Error");
  static py::exception<pj::ProviderError> provider_error(m, "ProviderError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const pj::ProviderError& e) {
      PyErr_SetString(provider_error.ptr(), e.what());
    } catch (const pj::Error& e) {
      py::tuple args = py::make_tuple(std::string(pj::to_string(e.code())), std::string(e.detail()));
      PyErr_SetObject(error.ptr(), args.ptr());
    }
  });

  m.def("normalize_term", &pj::normalize_term, py::arg("term"));

  m.def("render_identify_prompt",
        [](const std::string& transcript, const std::vector<std::string>& defined,
           const std::string& preferences) {
          auto msgs = pj::render_identify_prompt(transcript, defined, preferences);
          return std::make_pair(msgs.system, msgs.user);
        },
        py::arg("transcript"), py::arg("defined_terms"), py::arg("preferences") = "none",
        "Returns (system, user).");
  m.def("render_filter_prompt",
        [](const std::string& background, const std::vector<Pair>& glossary) {
          auto msgs = pj::render_filter_prompt(background, to_terms(glossary));
          return std::make_pair(msgs.system, msgs.user);
        },
        py::arg("background"), py::arg("glossary"), "Returns (system, user).");
  m.def("render_preferences", &pj::render_preferences, py::arg("liked"), py::arg("disliked"));

  m.def("parse_term_list",
        [](const std::string& raw) { return from_terms(pj::parse_term_list(raw)); },
        py::arg("raw"), "Returns [(term, definition)].");
  m.def("parse_filter_result",
        [](const std::string& raw, const std::vector<Pair>& input) {
          auto r = pj::parse_filter_result(raw, to_terms(input));
          return std::make_pair(r.understood_terms, from_terms(r.refined_glossary));
        },
        py::arg("raw"), py::arg("input"), "Returns (understood_terms, refined_glossary).");

  m.def("highlight_terms",
        [](const std::string& text, const std::set<std::string>& keys, int64_t seq) {
          py::list out;
          for (const auto& h : pj::highlight_terms(text, keys, seq))
            out.append(py::make_tuple(h.start, h.end, h.key));
          return out;
        },
        py::arg("text"), py::arg("keys"), py::arg("seq") = 0,
        "Returns [(start, end, key)] in code points.");

  py::class_<pj::DisplayState>(m, "DisplayState")
      .def(py::init<int64_t>(), py::arg("min_display_ms") = pj::kDefaultMinDisplayMs)
      .def("push",
           [](pj::DisplayState& s, const std::string& key, int64_t now) -> py::object {
             auto c = s.push(key, now);
             return c ? py::object(change_dict(*c)) : py::none();
           },
           py::arg("key"), py::arg("now_ms"))
      .def("tick",
           [](pj::DisplayState& s, int64_t now) -> py::object {
             auto c = s.tick(now);
             return c ? py::object(change_dict(*c)) : py::none();
           },
           py::arg("now_ms"))
      .def_property_readonly("current", &pj::DisplayState::current)
      .def_property_readonly("shown_since_ms", &pj::DisplayState::shown_since_ms)
      .def_property_readonly("queue", [](const pj::DisplayState& s) {
        return std::vector<std::string>(s.queue().begin(), s.queue().end());
      });

  m.def("run_replay",
        [](const std::filesystem::path& transcript, const std::string& mode,
           std::optional<std::filesystem::path> profile,
           std::optional<std::filesystem::path> fixtures, std::optional<std::string> label) {
          pj::ReplayOptions options;
          options.transcript = transcript;
          options.mode = mode_from(mode);
          options.profile = std::move(profile);
          options.label = std::move(label);
          options.record_latency = !fixtures.has_value();
          auto gateway = gateway_for(fixtures);
          pj::SessionReport report;
          {
            py::gil_scoped_release release;
            report = pj::run_replay(options, *gateway);
          }
          return to_python(report.to_json());
        },
        py::arg("transcript"), py::arg("mode") = "general", py::arg("profile") = py::none(),
        py::arg("fixtures") = py::none(), py::arg("label") = py::none(),
        "Replays a transcript file. Uses the mock provider when fixtures is given.");
  m.def("compare_modes",
        [](const py::handle& general, const py::handle& personalized) {
          return to_python(pj::compare_modes(pj::SessionReport::from_json(from_python(general)),
                                             pj::SessionReport::from_json(from_python(personalized)))
                               .to_json());
        },
        py::arg("general"), py::arg("personalized"));
  m.def("compute_helpful_rate",
        [](const py::list& sheets) {
          std::vector<pj::RatingSheet> parsed;
          for (const auto& s : sheets) parsed.push_back(pj::RatingSheet::from_json(from_python(s)));
          return to_python(pj::compute_helpful_rate(parsed).to_json());
        },
        py::arg("sheets"));
}
