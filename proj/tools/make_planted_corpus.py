"""Writes the planted 3-topic corpus used by the coherence and sweep tests.

Each segment draws most of its words from one topic's core list plus a few
topic-specific filler words, so topic words co-occur only inside their topic.
"""
import argparse
import json
import random

TOPICS = [
    ("citation", ["citation", "attribution", "acknowledge", "sources", "references",
                  "footnote", "credit", "cite", "bibliography", "quotation"]),
    ("privacy", ["privacy", "confidential", "personal", "sensitive", "upload",
                 "protected", "records", "security", "identifiable", "consent"]),
    ("exams", ["exam", "quiz", "proctored", "grading", "integrity",
               "cheating", "midterm", "graded", "misconduct", "invigilated"]),
]

FILLERS = [
    ["scholar", "journal", "author", "archive", "library", "article", "chapter", "edition",
     "publisher", "volume", "manuscript", "thesis", "paraphrase", "excerpt", "anthology"],
    ["vendor", "server", "account", "password", "breach", "storage", "cloud", "retention",
     "encryption", "compliance", "ferpa", "hipaa", "leak", "portal", "firewall"],
    ["semester", "syllabus", "rubric", "score", "hallway", "seating", "calculator", "timer",
     "booklet", "answer", "question", "format", "session", "room", "sheet"],
]


def make(seed, per_topic, core_per_doc, filler_per_doc):
    rng = random.Random(seed)
    segments = []
    for t, (_, core) in enumerate(TOPICS):
        for _ in range(per_topic):
            words = rng.sample(core, core_per_doc) + rng.sample(FILLERS[t], filler_per_doc)
            rng.shuffle(words)
            segments.append((t, " ".join(words)))
    rng.shuffle(segments)

    institutions = []
    per_node = 6
    for i in range(0, len(segments), per_node):
        chunk = segments[i:i + per_node]
        n = i // per_node
        institutions.append({
            "_id": f"inst-{n:02d}",
            "name": f"Planted University {n}",
            "url": f"https://planted{n}.example.edu/ai-policy",
            "last_update": "2024-08-01 00:00:00",
            "policy": [{"timestamp": "2024-08-01 00:00:00",
                        "text": "\n\n".join(text for _, text in chunk)}],
        })
    return {"version": "planted-3topic/v1", "institutions": institutions}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--per-topic", type=int, default=30)
    ap.add_argument("--core-per-doc", type=int, default=7)
    ap.add_argument("--filler-per-doc", type=int, default=3)
    args = ap.parse_args()
    doc = make(args.seed, args.per_topic, args.core_per_doc, args.filler_per_doc)
    with open(args.out, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
