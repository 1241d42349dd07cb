"""Text-classification corpora for the toy trainer.

The built-in "toy-sentiment" corpus is generated deterministically from a
seed: short reviews built from positive/negative word banks plus filler,
with a per-sample difficulty knob (easy samples carry several class words,
hard ones a single class word plus one from the opposite bank) and a little
label noise so intermediate exits have real headroom.  Splits are disjoint
by construction (one stream, sliced).

Real public datasets ("sst2", "rotten_tomatoes") load through the optional
``datasets`` package and need network access to the hub; in offline
environments use the built-in corpus.
"""

from __future__ import annotations

import numpy as np

POSITIVE = (
    "good great excellent wonderful delightful superb charming refreshing "
    "brilliant satisfying moving memorable sharp warm inventive"
).split()
NEGATIVE = (
    "bad awful terrible dreadful boring tedious clumsy disappointing messy "
    "grating hollow stale lifeless shallow forgettable"
).split()
FILLER = (
    "the a this that movie film story plot acting pacing scene script "
    "ending was felt seemed overall mostly quite rather somehow and with"
).split()

LABEL_NOISE = 0.02
HUB_DATASETS = {"sst2": ("sst2", "sentence"), "rotten_tomatoes": ("rotten_tomatoes", "text")}


def toy_sentiment(n: int, seed: int) -> tuple[list[str], np.ndarray]:
    """Generate n (text, label) pairs; a pure function of (n, seed)."""
    rng = np.random.default_rng([seed, 0xC0FFEE])
    texts: list[str] = []
    labels = np.zeros(n, dtype=np.int64)
    for j in range(n):
        y = int(rng.integers(0, 2))
        own = POSITIVE if y == 1 else NEGATIVE
        other = NEGATIVE if y == 1 else POSITIVE
        d = rng.random()
        if d < 0.5:
            n_own, n_other = 3 + int(rng.integers(0, 3)), 0
        elif d < 0.8:
            n_own, n_other = 2, 1
        else:
            n_own, n_other = 1, 1
        words = [own[int(rng.integers(0, len(own)))] for _ in range(n_own)]
        words += [other[int(rng.integers(0, len(other)))] for _ in range(n_other)]
        n_fill = int(rng.integers(4, 10))
        words += [FILLER[int(rng.integers(0, len(FILLER)))] for _ in range(n_fill)]
        order = rng.permutation(len(words))
        texts.append(" ".join(words[i] for i in order))
        if rng.random() < LABEL_NOISE:
            y = 1 - y
        labels[j] = y
    return texts, labels


def load_corpus(
    name: str, n_train: int, n_val: int, n_test: int, seed: int
) -> tuple[tuple[list[str], np.ndarray], tuple[list[str], np.ndarray], tuple[list[str], np.ndarray]]:
    """Return disjoint (train, val, test) splits of the named corpus."""
    if name == "toy-sentiment":
        total = n_train + n_val + n_test
        texts, labels = toy_sentiment(total, seed)
        a, b = n_train, n_train + n_val
        return (
            (texts[:a], labels[:a]),
            (texts[a:b], labels[a:b]),
            (texts[b:], labels[b:]),
        )
    if name in HUB_DATASETS:
        return _load_hub(name, n_train, n_val, n_test, seed)
    raise ValueError(f"unknown dataset {name!r}; available: toy-sentiment, {', '.join(HUB_DATASETS)}")


def _load_hub(name, n_train, n_val, n_test, seed):
    try:
        from datasets import load_dataset
    except ImportError as e:
        raise RuntimeError(
            f"dataset {name!r} needs the 'datasets' package and hub access; "
            "use 'toy-sentiment' offline"
        ) from e
    hub_name, text_key = HUB_DATASETS[name]
    ds = load_dataset(hub_name)
    rng = np.random.default_rng(seed)
    pool = list(ds["train"])
    rng.shuffle(pool)
    need = n_train + n_val + n_test
    if len(pool) < need:
        raise ValueError(f"{name} train split has {len(pool)} rows, need {need}")
    rows = pool[:need]
    texts = [r[text_key] for r in rows]
    labels = np.array([int(r["label"]) for r in rows], dtype=np.int64)
    a, b = n_train, n_train + n_val
    return (
        (texts[:a], labels[:a]),
        (texts[a:b], labels[a:b]),
        (texts[b:], labels[b:]),
    )
