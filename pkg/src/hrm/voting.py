"""Vote casting, multi-scale accumulation, and local-maxima extraction.

Every test patch produces m+1 predicted voting vectors plus m+1 label
estimates; the fraction of positive labels gates the patch's vote mass.
A single pass over the image fills S accumulator grids at once: a vote
``v`` cast from patch center ``l`` lands at ``l + (scale_s / train_scale) * v``
in level ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import pls
from .errors import InvalidInput
from .features import ContextSet
from .training import ModelBank


@dataclass(frozen=True)
class ScaleSet:
    """The detection scales and the scale objects were trained at."""

    scales: tuple[float, ...] = (0.75, 1.0, 1.25, 1.5)
    train_scale: float = 1.0

    def __post_init__(self):
        s = tuple(float(v) for v in self.scales)
        if not s or any(v <= 0 for v in s) or any(b <= a for a, b in zip(s, s[1:])):
            raise InvalidInput("scales must be positive and strictly increasing")
        if self.train_scale <= 0:
            raise InvalidInput("train_scale must be positive")
        object.__setattr__(self, "scales", s)


@dataclass(frozen=True)
class PatchVotes:
    """Votes, label estimates, and the resulting gate weight of one patch."""

    location: np.ndarray  # (2,) patch center, image pixels
    votes: np.ndarray  # (m+1, 2)
    labels: np.ndarray  # (m+1,)
    weight: float


@dataclass(frozen=True)
class Hypothesis:
    """A candidate detection: center (pixels), scale, accumulator score."""

    center: tuple[float, float]
    scale: float
    score: float
    category: str = "object"


@dataclass
class HoughCuboid:
    """S same-size accumulator grids over one image, one per scale.

    levels: (S, grid_h, grid_w) accumulated vote mass (post smoothing).
    level_mass: per-level total mass before border drops and smoothing.
    dropped: count of votes that landed outside the grid, per level.
    """

    levels: np.ndarray
    scales: ScaleSet
    bin_size: int
    smoothing: float
    image_size: tuple[int, int]  # (width, height)
    level_mass: np.ndarray = None
    dropped: np.ndarray = None


def patch_weight(labels: np.ndarray) -> float:
    """Fraction of strictly positive label estimates."""
    labels = np.asarray(labels)
    return float(np.count_nonzero(labels > 0)) / labels.shape[-1]


def cast_votes(context: ContextSet, bank: ModelBank, loc) -> PatchVotes:
    """Run every voting and label regressor on one patch's context set."""
    if context.vectors.shape[0] != bank.num_context:
        raise InvalidInput(
            f"context set has {context.vectors.shape[0]} vectors, bank expects "
            f"{bank.num_context}"
        )
    votes = np.array(
        [pls.predict(m, v) for m, v in zip(bank.hrms, context.vectors)]
    )
    labels = np.array(
        [float(pls.predict(m, v)[0]) for m, v in zip(bank.lrms, context.vectors)]
    )
    return PatchVotes(np.asarray(loc, dtype=np.float64), votes, labels, patch_weight(labels))


def cast_votes_batch(contexts: np.ndarray, bank: ModelBank, locs: np.ndarray):
    """Vectorized cast_votes over r patches.

    contexts: (r, m+1, d); locs: (r, 2).  Returns a list of PatchVotes
    identical to per-patch casting.
    """
    r, mplus1, _ = contexts.shape
    if mplus1 != bank.num_context:
        raise InvalidInput("context count does not match the bank")
    votes = np.empty((r, mplus1, 2))
    labels = np.empty((r, mplus1))
    for j in range(mplus1):
        votes[:, j, :] = pls.predict(bank.hrms[j], contexts[:, j, :])
        labels[:, j] = pls.predict(bank.lrms[j], contexts[:, j, :])[:, 0]
    weights = (labels > 0).sum(axis=1) / mplus1
    return [
        PatchVotes(locs[i], votes[i], labels[i], float(weights[i])) for i in range(r)
    ]


def accumulate_cuboid(
    all_votes,
    scales: ScaleSet,
    image_size: tuple[int, int],
    bin_size: int = 4,
    smoothing: float = 1.5,
) -> HoughCuboid:
    """Bin every (patch, vote, scale) landing point into the S-level cuboid.

    Each vote carries mass weight / (m+1); landings outside the grid are
    dropped and counted.  Optional Gaussian smoothing (sigma in cells) is
    applied per level afterward.
    """
    width, height = image_size
    gw = -(-width // bin_size)
    gh = -(-height // bin_size)
    S = len(scales.scales)
    levels = np.zeros((S, gh, gw))
    level_mass = np.zeros(S)
    dropped = np.zeros(S, dtype=np.int64)

    if all_votes:
        locs = np.array([pv.location for pv in all_votes])  # (r, 2)
        votes = np.array([pv.votes for pv in all_votes])  # (r, m+1, 2)
        mplus1 = votes.shape[1]
        mass = np.array([pv.weight for pv in all_votes]) / mplus1  # per vote

        for s, sigma in enumerate(scales.scales):
            ratio = sigma / scales.train_scale
            landing = locs[:, None, :] + ratio * votes  # (r, m+1, 2)
            cells = np.floor(landing / bin_size).astype(np.int64)
            cx = cells[..., 0].ravel()
            cy = cells[..., 1].ravel()
            m = np.broadcast_to(mass[:, None], (len(all_votes), mplus1)).ravel()
            inside = (cx >= 0) & (cx < gw) & (cy >= 0) & (cy < gh)
            np.add.at(levels[s], (cy[inside], cx[inside]), m[inside])
            level_mass[s] = float(m.sum())
            dropped[s] = int(np.count_nonzero(~inside))

    if smoothing > 0:
        for s in range(S):
            levels[s] = ndimage.gaussian_filter(levels[s], smoothing, mode="constant")

    return HoughCuboid(
        levels, scales, bin_size, smoothing, (width, height), level_mass, dropped
    )


def find_maxima(cuboid: HoughCuboid, min_score: float, radius: int = 3):
    """Per-level strict local maxima at or above min_score.

    A cell qualifies when it strictly exceeds every neighbor within
    ``radius`` cells (Chebyshev) in its own level.  Hypothesis centers are
    cell centers mapped back to image pixels.
    """
    if radius < 1:
        raise InvalidInput("radius must be >= 1")
    footprint = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    footprint[radius, radius] = False

    out = []
    for s, sigma in enumerate(cuboid.scales.scales):
        level = cuboid.levels[s]
        neigh = ndimage.maximum_filter(
            level, footprint=footprint, mode="constant", cval=-np.inf
        )
        ys, xs = np.nonzero((level > neigh) & (level >= min_score))
        for y, x in zip(ys, xs):
            center = ((x + 0.5) * cuboid.bin_size, (y + 0.5) * cuboid.bin_size)
            out.append(Hypothesis(center, sigma, float(level[y, x])))
    out.sort(key=lambda h: (-h.score, h.scale, h.center[0], h.center[1]))
    return out


def dump_levels_pgm(cuboid: HoughCuboid, directory, prefix: str = "level") -> list:
    """Debug dump of each level as an 8-bit PGM heatmap."""
    from pathlib import Path

    from .image_io import write_pgm

    paths = []
    top = float(cuboid.levels.max())
    for s, sigma in enumerate(cuboid.scales.scales):
        img = cuboid.levels[s] / top if top > 0 else cuboid.levels[s]
        path = Path(directory) / f"{prefix}_{sigma:g}.pgm"
        write_pgm(path, img)
        paths.append(path)
    return paths
