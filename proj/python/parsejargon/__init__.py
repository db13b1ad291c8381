"""Jargon identification, personalization and evaluation."""

from ._core import (
    DisplayState,
    Error,
    ProviderError,
    compare_modes,
    compute_helpful_rate,
    highlight_terms,
    normalize_term,
    parse_filter_result,
    parse_term_list,
    render_filter_prompt,
    render_identify_prompt,
    render_preferences,
    run_replay,
)

__all__ = [
    "DisplayState",
    "Error",
    "ProviderError",
    "compare_modes",
    "compute_helpful_rate",
    "highlight_terms",
    "normalize_term",
    "parse_filter_result",
    "parse_term_list",
    "render_filter_prompt",
    "render_identify_prompt",
    "render_preferences",
    "run_replay",
]
