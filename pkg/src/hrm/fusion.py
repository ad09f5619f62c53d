"""NPMI-based removal of duplicate detection hypotheses across scales.

The conditional probability that hypothesis j explains the same object as
hypothesis i is a kernel density estimate over patch locations, mapped
through the scale ratio between the two levels and normalized so that
self-conditioning equals 1.  Hypothesis probabilities are accumulator
scores normalized by the total vote mass.  NPMI > 0 marks a dependent
pair; the lower-scoring member is dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, ZeroSupport
from .voting import Hypothesis

_KERNELS = {
    "gaussian": lambda sq: np.exp(-0.5 * sq),
    "epanechnikov": lambda sq: np.maximum(1.0 - sq, 0.0),
}


@dataclass(frozen=True)
class FusionConfig:
    """Kernel, bandwidth (pixels), and the probability floor guarding logs."""

    kernel: str = "gaussian"
    bandwidth: float = 8.0
    probability_floor: float = 1e-12

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise InvalidInput("bandwidth must be positive")
        if self.probability_floor <= 0:
            raise InvalidInput("probability_floor must be positive")
        if self.kernel not in _KERNELS:
            raise InvalidInput(f"unknown kernel {self.kernel!r}")


@dataclass(frozen=True)
class CorrelatedPair:
    a: Hypothesis
    b: Hypothesis
    npmi: float


def conditional_prob(h_i: Hypothesis, h_j: Hypothesis, votes, cfg: FusionConfig) -> float:
    """KDE estimate of p(h_j | h_i), normalized so p(h_i | h_i) = 1.

    Patch locations supporting h_i are mapped to the level of h_j through
    the scale ratio; the weighted kernel mass at h_j's center, relative to
    the mass at zero offset, is the conditional probability.
    """
    if h_i.scale <= 0 or h_j.scale <= 0:
        raise InvalidInput("hypothesis scales must be positive")
    w = np.array([pv.weight for pv in votes])
    total = w.sum()
    if total <= 0:
        raise ZeroSupport("no patch weight supports the hypotheses")
    locs = np.array([pv.location for pv in votes])
    zi = np.asarray(h_i.center, dtype=np.float64)
    zj = np.asarray(h_j.center, dtype=np.float64)
    ratio = h_j.scale / h_i.scale
    offsets = (ratio * (zi - locs) + locs - zj) / cfg.bandwidth
    k = _KERNELS[cfg.kernel](np.sum(offsets**2, axis=1))
    return float(np.dot(k, w) / total)


def npmi(
    h_i: Hypothesis,
    h_j: Hypothesis,
    votes,
    cfg: FusionConfig,
    total_mass: float,
) -> float:
    """Normalized pointwise mutual information of a hypothesis pair.

    Scores are turned into probabilities by dividing by ``total_mass``
    (the full accumulated vote mass).  Boundary behavior: identical
    support gives 1, independence 0, disjoint support -1.
    """
    if total_mass <= 0:
        raise InvalidInput("total_mass must be positive")
    eps = cfg.probability_floor
    p_i = max(h_i.score / total_mass, eps)
    p_j = max(h_j.score / total_mass, eps)
    if p_i >= 1.0 or p_j >= 1.0:
        raise InvalidInput("hypothesis probabilities must stay below 1")

    cond = conditional_prob(h_i, h_j, votes, cfg)
    if cond <= eps:
        return -1.0
    denom = -math.log(p_i * cond)
    if denom <= 0:
        raise InvalidInput("degenerate joint probability >= 1")
    value = math.log(cond / p_j) / denom
    return float(min(1.0, max(-1.0, value)))


def _order_key(h: Hypothesis):
    return (-h.score, h.scale, h.center[0], h.center[1])


def fuse(hypotheses, votes, cfg: FusionConfig, total_mass: float):
    """Drop the weaker member of every positively correlated pair.

    Pairs are visited in descending order of the stronger member; removed
    hypotheses take part in no further pairs.  Returns survivors sorted by
    descending score.
    """
    survivors = []
    for h in sorted(hypotheses, key=_order_key):
        if all(npmi(s, h, votes, cfg, total_mass) <= 0 for s in survivors):
            survivors.append(h)
    return survivors
