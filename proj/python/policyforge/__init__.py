"""Python access to the policyforge core.

Structured results come back as plain dicts and lists.
"""

import json as _json

from . import _core
from ._core import PolicyforgeError, coherence_cv, ctfidf, segment_text, tokenize

__version__ = _core.version()

__all__ = [
    "PolicyforgeError",
    "classify",
    "coherence_cv",
    "ctfidf",
    "decide",
    "discover",
    "effective_settings",
    "evaluate",
    "hdbscan",
    "kmeans",
    "load_corpus",
    "schema",
    "segment_text",
    "sweep",
    "tokenize",
    "umap",
]


def schema():
    return _json.loads(_core.schema_json())


def classify(text, provider="rule"):
    return _json.loads(_core.classify(text, provider))


def evaluate(provider, dataset_path):
    """Returns the report as CSV text."""
    return _core.evaluate(provider, str(dataset_path))


def load_corpus(path):
    return _json.loads(_core.load_corpus(str(path)))


def discover(corpus_path, config=None):
    return _json.loads(_core.discover(str(corpus_path), _json.dumps(config or {})))


def sweep(plan, corpus_path, out_dir=None):
    return _json.loads(_core.sweep(_json.dumps(plan), str(corpus_path), str(out_dir or "")))


def effective_settings(values, overrides=None):
    return _json.loads(_core.effective_settings(_json.dumps(values), _json.dumps(overrides or {})))


def decide(values, kind, question, overrides=None, confirmed=True,
           assignment_similarity=None, assessment_similarity=None, policy=None):
    settings = {"values": values, "overrides": overrides or {}, "confirmed": confirmed}
    return _json.loads(_core.decide(_json.dumps(settings), kind, question,
                                    assignment_similarity, assessment_similarity,
                                    _json.dumps(policy or {})))


def kmeans(points, k, seed=42):
    """Returns (labels, inertia)."""
    labels, inertia = _core.kmeans(points, k, seed)
    return list(labels), inertia


def hdbscan(points, min_cluster_size, min_samples=None):
    """Returns (labels, summed stability); -1 marks noise."""
    labels, stability = _core.hdbscan(points, min_cluster_size, min_samples)
    return list(labels), stability


def umap(points, **config):
    """Returns (embedding as a numpy array, final cross-entropy)."""
    return _core.umap(points, _json.dumps(config))
