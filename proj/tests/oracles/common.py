"""Shared helpers for the oracle scripts. Kept independent of the C++ code."""

import json
import os
import re

from sklearn.feature_extraction.text import ENGLISH_STOP_WORDS

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")
ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))


def tokenize(text):
    out = []
    for tok in re.findall(r"[A-Za-z0-9]+", text):
        tok = tok.lower()
        if tok.isdigit() or len(tok) < 2 or tok in ENGLISH_STOP_WORDS:
            continue
        out.append(tok)
    return out


def segments(text):
    return [p.strip() for p in re.split(r"\n\s*\n", text) if p.strip()]


def write(name, payload):
    os.makedirs(DATA_DIR, exist_ok=True)
    path = os.path.join(DATA_DIR, name)
    with open(path, "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write("\n")
    print("wrote", path)
