import os
from pathlib import Path

import numpy as np
import pytest

import policyforge as pf

FIXTURES = Path(os.environ.get("POLICYFORGE_FIXTURE_DIR", Path(__file__).resolve().parents[2] / "fixtures"))

LEARNING_ONLY = ("Students may use generative AI tools for learning, but not for assignments and assessments. "
         "Please contact the instructor with any questions.")


def test_schema():
    s = pf.schema()
    assert len(s["categories"]) == 8
    assert {c["key"] for c in s["categories"]} >= {"learning_use", "citation", "authority"}


def test_classify_rule():
    v = pf.classify(LEARNING_ONLY)["values"]
    assert v["learning_use"] == "Allowed"
    assert v["assignment_use"] == "NotAllowed"
    assert v["authority"] == "Instructor"


def test_tokenize():
    assert pf.tokenize("The AI-tools, 2024 and GPT4!") == ["ai", "tools", "gpt4"]


def test_kmeans():
    pts = np.array([[0, 0], [0, 1], [10, 10], [10, 11]], dtype=float)
    labels, inertia = pf.kmeans(pts, 2)
    assert labels[0] == labels[1] != labels[2] == labels[3]
    assert inertia == pytest.approx(1.0)


def test_hdbscan_noise_label():
    rng = np.random.default_rng(3)
    pts = np.vstack([rng.normal(0, 0.1, (10, 2)), rng.normal(10, 0.1, (10, 2)), [[5, 5]]])
    labels, _ = pf.hdbscan(pts, 5)
    assert len(set(labels[:10])) == 1 and len(set(labels[10:20])) == 1
    assert labels[0] != labels[10]
    assert labels[20] == -1


def test_ctfidf_hand_value():
    w = pf.ctfidf([[2, 0, 1, 0], [0, 1, 0, 1]])
    assert w[0][0] == pytest.approx(0.54062, abs=1e-5)


def test_coherence():
    docs = [["x", "y"], ["u", "v"], ["x", "y"], ["u", "v", "x"]]
    assert pf.coherence_cv(["x", "y"], docs) > pf.coherence_cv(["x", "u"], docs)


def test_decide():
    values = {c["key"]: c["absent"] for c in pf.schema()["categories"]}
    values["assignment_use"] = "NotAllowed"
    d = pf.decide(values, "assignment", "Solve problem 3")
    assert d["verdict"] == "ReferencesOnly"
    d = pf.decide(values, "learning", "Explain", overrides={"citation": "Required"})
    assert d["obligations"] == ["CitationNotice"]


def test_error_kind():
    with pytest.raises(pf.PolicyforgeError) as e:
        pf.kmeans(np.zeros((2, 2)), 5)
    assert e.value.kind == "TooManyClusters"
    assert e.value.error_class == "validation"


def test_corpus_and_evaluate():
    c = pf.load_corpus(FIXTURES / "univ_a.json")
    assert len(c["institutions"]) == 1
    report = pf.evaluate("gold", FIXTURES / "smoke12.csv")
    assert report.splitlines()[0].startswith("category")
