"""Hybrid LDA and embedding topic extraction with cohort comparison."""

import json as _json

from . import _core
from ._core import (
    Error,
    ParseError,
    ValidationError,
    chi_square_independence,
    cosine_similarity,
    fit_lda,
    segment_sentences,
    tokenize,
    two_proportion_test,
    welch_t_test,
)

__all__ = [
    "Error", "ParseError", "ValidationError",
    "preprocess", "sweep", "fit", "assign", "analyze", "centers2d", "synth", "load_config",
    "segment_sentences", "tokenize", "cosine_similarity", "fit_lda",
    "two_proportion_test", "welch_t_test", "chi_square_independence",
]


def _run(fn, *args, **kwargs):
    return _json.loads(fn(*args, **kwargs))


def preprocess(config, *, threads=None, out=None):
    return _run(_core.preprocess, str(config), threads, out and str(out))


def sweep(config, *, threads=None, out=None):
    return _run(_core.sweep, str(config), threads, out and str(out))


def fit(config, k, *, partition_by=None, threads=None, out=None):
    return _run(_core.fit, str(config), k, partition_by, threads, out and str(out))


def assign(config, *, threads=None, out=None):
    return _run(_core.assign, str(config), threads, out and str(out))


def analyze(config, facet, *, within=None, threads=None, out=None):
    return _run(_core.analyze, str(config), facet, within, threads, out and str(out))


def centers2d(config, *, threads=None, out=None):
    return _run(_core.centers2d, str(config), threads, out and str(out))


def synth(spec, out):
    """spec: dict or JSON string."""
    text = spec if isinstance(spec, str) else _json.dumps(spec)
    return _run(_core.synth, text, str(out))


def load_config(config):
    """Parsed config with defaults filled in."""
    return _run(_core.normalize_config, str(config))
