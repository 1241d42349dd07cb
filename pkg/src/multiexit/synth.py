"""Seedable synthetic trace generator with controllable error structure.

Real multi-exit networks get the same samples right (or wrong) across most
of their depth, and exit policies that aggregate agreement are only
interesting under that correlation.  The generator therefore couples every
exit's correctness to one shared per-sample difficulty draw u ~ U(0,1): exit
i is correct iff u < 1 - q_i.  Marginal error rates hit the q_i targets
exactly in expectation while correctness stays comonotone across exits.

Wrong predictions repeat the previous exit's wrong label with probability
``rho`` (else a uniform other class), so disagreement among mistakes is also
controllable.  Argmax confidence is drawn from a Beta distribution rescaled
to [1/C, 1], with separate shapes for correct and wrong predictions; the
remaining mass is spread uniformly over the other classes, which keeps the
sampled prediction the argmax.

Generation is deterministic given the seed: samples are produced in blocks
of 1024, each block from its own (seed, block index) substream, so blocks
could be generated in parallel without changing the output.  Probabilities
are emitted on a 9-decimal grid, matching the canonical trace serialization
so saved datasets round-trip bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .traces import Dataset, SampleTrace

_BLOCK = 1024
# keeps the argmax strictly above the uniform floor even after 9-decimal rounding
_MIN_CONF_DRAW = 1e-6


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for one synthetic dataset.

    ``q`` lists the L target per-exit error rates; ``rho`` is the chance a
    wrong prediction repeats the previous exit's wrong label; the two
    ``conf_*`` pairs are Beta shape parameters for the argmax confidence of
    correct and wrong predictions (rescaled to [1/C, 1]).
    """

    L: int
    C: int
    n: int
    q: tuple[float, ...]
    rho: float = 0.5
    conf_correct: tuple[float, float] = (6.0, 2.0)
    conf_wrong: tuple[float, float] = (2.0, 4.0)
    seed: int = 0

    def __post_init__(self):
        if self.L < 1:
            raise ValidationError("range", f"need at least one layer, got L={self.L}")
        if self.C < 2:
            raise ValidationError("range", f"need at least two classes, got C={self.C}")
        if self.n < 0:
            raise ValidationError("range", f"sample count must be >= 0, got {self.n}")
        q = tuple(float(v) for v in self.q)
        if len(q) != self.L:
            raise ValidationError("shape", f"got {len(q)} error rates for L={self.L} exits")
        if any(not 0.0 <= v <= 1.0 for v in q):
            raise ValidationError("range", "target error rates must lie in [0, 1]")
        object.__setattr__(self, "q", q)
        if not 0.0 <= self.rho <= 1.0:
            raise ValidationError("range", f"rho must lie in [0, 1], got {self.rho}")
        for name in ("conf_correct", "conf_wrong"):
            pair = tuple(float(v) for v in getattr(self, name))
            if len(pair) != 2 or any(not v > 0 for v in pair):
                raise ValidationError("range", f"{name} must be a pair of positive shape parameters")
            object.__setattr__(self, name, pair)
        object.__setattr__(self, "seed", int(self.seed))


def generate(cfg: SynthConfig, split: str = "synthetic") -> Dataset:
    """Generate ``cfg.n`` traces; a pure function of ``cfg``."""
    traces: list[SampleTrace] = []
    q = np.array(cfg.q)
    for block_idx in range(0, (cfg.n + _BLOCK - 1) // _BLOCK):
        offset = block_idx * _BLOCK
        m = min(_BLOCK, cfg.n - offset)
        probs, labels = _generate_block(cfg, q, block_idx, m)
        for j in range(m):
            traces.append(
                SampleTrace(id=f"synth-{cfg.seed}-{offset + j:06d}", label=int(labels[j]), probs=probs[j])
            )
    return Dataset(traces=tuple(traces), split=split, L=cfg.L, C=cfg.C)


def _generate_block(cfg: SynthConfig, q: np.ndarray, block_idx: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng([cfg.seed, block_idx])
    L, C = cfg.L, cfg.C

    # fixed draw schedule so output never depends on data-dependent branching
    y = rng.integers(0, C, size=m)
    u = rng.random(m)
    draw_correct = rng.beta(*cfg.conf_correct, size=(m, L))
    draw_wrong = rng.beta(*cfg.conf_wrong, size=(m, L))
    wrong_pick = rng.integers(0, C - 1, size=(m, L))
    persist = rng.random((m, L))

    correct = u[:, None] < 1.0 - q[None, :]

    # wrong-label chain: repeat the previous exit's wrong label w.p. rho
    predictions = np.empty((m, L), dtype=np.int64)
    prev_wrong = np.full(m, -1, dtype=np.int64)
    for i in range(L):
        uniform_wrong = wrong_pick[:, i] + (wrong_pick[:, i] >= y)
        reuse = (prev_wrong >= 0) & (persist[:, i] < cfg.rho)
        wrong_label = np.where(reuse, prev_wrong, uniform_wrong)
        predictions[:, i] = np.where(correct[:, i], y, wrong_label)
        prev_wrong = np.where(correct[:, i], -1, wrong_label)

    draw = np.clip(np.where(correct, draw_correct, draw_wrong), _MIN_CONF_DRAW, 1.0)
    conf = 1.0 / C + (1.0 - 1.0 / C) * draw

    probs = np.repeat(((1.0 - conf) / (C - 1))[:, :, None], C, axis=2)
    rows = np.arange(m)[:, None]
    layers = np.arange(L)[None, :]
    probs[rows, layers, predictions] = conf
    probs = np.round(probs, 9)
    return probs, y
