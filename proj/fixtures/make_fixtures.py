#!/usr/bin/env python3
"""Regenerates the toy fixtures used by the CLI tests. Deterministic."""

import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent
rng = random.Random(11)

ASPECTS = ["pizza", "service", "wine list", "battery life", "screen", "keyboard",
           "price", "staff", "crust", "dessert menu", "trackpad", "fan noise"]
OPINIONS = ["great", "awful", "slow", "fantastic", "too small", "fine", "overpriced",
            "friendly", "noisy", "crisp"]
TEMPLATES = [
    "The {a} was {o} .",
    "I thought the {a} was {o} , honestly .",
    "{A} is {o} but the {b} is {p} .",
    "Nothing special here , just {o} .",
    "We loved the {a} !",
    "Their {a} and {b} were both {o} .",
]


def render(template):
    a, b = rng.sample(ASPECTS, 2)
    fill = {"a": a, "A": a.capitalize(), "b": b, "o": rng.choice(OPINIONS),
            "p": rng.choice(OPINIONS)}
    text = template.format(**fill)
    spans = []
    # Locate each aspect placeholder's filled text, left to right.
    cursor = 0
    for key in ("a", "A", "b"):
        if "{" + key + "}" not in template:
            continue
        word = fill[key]
        start = text.index(word, cursor)
        spans.append((start, start + len(word)))
        cursor = start + len(word)
    spans.sort()
    return {"text": text, "spans": [list(s) for s in spans]}


def write_jsonl(name, records):
    with open(HERE / name, "w") as f:
        for r in records:
            f.write(json.dumps(r) + "\n")


def vocab_of(records):
    words = set()
    for r in records:
        for w in r["text"].replace(",", " , ").split():
            words.add(w)
            words.add(w.lower())
    return sorted(words)


def write_vectors(name, words, dim):
    with open(HERE / name, "w") as f:
        f.write(f"{len(words)} {dim}\n")
        for w in words:
            f.write(w + " " + " ".join(f"{rng.uniform(-1, 1):.5f}" for _ in range(dim)) + "\n")


train = [render(rng.choice(TEMPLATES)) for _ in range(60)]
test = [render(rng.choice(TEMPLATES)) for _ in range(20)]
write_jsonl("toy_train.jsonl", train)
write_jsonl("toy_test.jsonl", test)
(HERE / "empty.jsonl").write_text("")

vocab = vocab_of(train + test)
write_vectors("toy_general.vec", vocab, 12)
# The domain table misses a few words so OOV handling is exercised.
write_vectors("toy_domain.vec", [w for w in vocab if w not in ("fantastic", "dessert")], 6)

with open(HERE / "toy_corpus.txt", "w") as f:
    for _ in range(400):
        f.write(render(rng.choice(TEMPLATES))["text"].lower() + "\n")

config = {
    "paths": {
        "general_emb": "toy_general.vec",
        "domain_emb": "toy_domain.vec",
        "train": "toy_train.jsonl",
        "test": "toy_test.jsonl",
        "corpus": "toy_corpus.txt",
    },
    "data_format": "jsonl_spans",
    "seed": 1,
    "model": {
        "layer1": [{"filters": 8, "kernel": 3}, {"filters": 8, "kernel": 5}],
        "upper_layers": [{"filters": 16, "kernel": 5}],
        "dropout": 0.2,
    },
    "train": {"lr": 0.003, "epochs": 40, "batch_size": 8, "holdout": 10, "patience": 15},
    "embeddings": {"dim": 16, "epochs": 2, "min_count": 1, "buckets": 10000},
}
(HERE / "toy_config.json").write_text(json.dumps(config, indent=2) + "\n")

incomplete = json.loads(json.dumps(config))
del incomplete["paths"]["general_emb"]
del incomplete["paths"]["train"]
(HERE / "incomplete_config.json").write_text(json.dumps(incomplete, indent=2) + "\n")

bad = json.loads(json.dumps(config))
bad["train"]["learning_rate"] = 0.1
(HERE / "bad_key_config.json").write_text(json.dumps(bad, indent=2) + "\n")
