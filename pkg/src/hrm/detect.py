"""End-to-end detection on a single image.

Pipeline: feature volume -> dense context-encoded patches -> votes per
regressor -> multi-scale accumulation -> per-level maxima -> NPMI fusion.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import pls
from .errors import IncompatibleModel
from .evaluate import Detection, box_from_hypothesis
from .features import EXTRACTOR_VERSION, compute_channels, extract_patch_vector
from .fusion import FusionConfig, fuse
from .training import ModelBank
from .voting import (
    HoughCuboid,
    PatchVotes,
    ScaleSet,
    accumulate_cuboid,
    find_maxima,
)

_CHUNK = 2048  # patches per batched prediction block


@dataclass(frozen=True)
class VotingConfig:
    """Dense-sampling and accumulator settings."""

    stride: int = 1
    bin_size: int = 4
    smoothing: float = 1.5  # Gaussian sigma in cells, 0 = off
    min_score_fraction: float = 0.05  # of the global cuboid maximum
    maxima_radius: int = 3  # cells
    derivative_kernel: str = "sobel"


@dataclass
class DetectionResult:
    detections: list
    hypotheses_prefusion: list
    cuboid: HoughCuboid
    total_mass: float


def compute_patch_votes(image, bank: ModelBank, cfg: VotingConfig):
    """Cast votes for every patch on the sampling grid; returns PatchVotes."""
    vol = compute_channels(np.asarray(image, dtype=np.float64), cfg.derivative_kernel)
    geom = bank.geometry
    ps = geom.patch_size
    xs = np.arange(0, vol.width - ps + 1, cfg.stride)
    ys = np.arange(0, vol.height - ps + 1, cfg.stride)
    grid = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)  # (r, 2) topleft

    mplus1 = geom.num_context
    out: list[PatchVotes] = []
    for start in range(0, len(grid), _CHUNK):
        block = grid[start : start + _CHUNK]
        raw = np.empty((len(block), geom.vector_length))
        for i, (x, y) in enumerate(block):
            raw[i] = extract_patch_vector(vol, (x, y), geom)

        votes = np.empty((len(block), mplus1, 2))
        labels = np.empty((len(block), mplus1))
        for j in range(mplus1):
            if j == 0:
                Xc = raw
            else:
                dx, dy = geom.neighbor_offsets[j - 1]
                Xc = raw.copy()
                for i, (x, y) in enumerate(block):
                    nx, ny = x + dx, y + dy
                    if 0 <= nx and 0 <= ny and nx + ps <= vol.width and ny + ps <= vol.height:
                        Xc[i] -= extract_patch_vector(vol, (nx, ny), geom)
            votes[:, j, :] = pls.predict(bank.hrms[j], Xc)
            labels[:, j] = pls.predict(bank.lrms[j], Xc)[:, 0]

        weights = (labels > 0).sum(axis=1) / mplus1
        centers = block + ps / 2.0
        for i in range(len(block)):
            out.append(
                PatchVotes(centers[i], votes[i], labels[i], float(weights[i]))
            )
    return out


def detect(
    image,
    bank: ModelBank,
    scales: ScaleSet = ScaleSet(),
    voting_cfg: VotingConfig = VotingConfig(),
    fusion_cfg: FusionConfig | None = None,
    image_id: str = "",
    apply_fusion: bool = True,
) -> DetectionResult:
    """Run the full detection pipeline on one image."""
    if bank.extractor_version != EXTRACTOR_VERSION:
        raise IncompatibleModel(
            f"bank extractor {bank.extractor_version!r} != {EXTRACTOR_VERSION!r}"
        )
    if fusion_cfg is None:
        fusion_cfg = FusionConfig(bandwidth=2.0 * voting_cfg.bin_size)

    image = np.asarray(image, dtype=np.float64)
    patch_votes = compute_patch_votes(image, bank, voting_cfg)
    cuboid = accumulate_cuboid(
        patch_votes,
        scales,
        (image.shape[1], image.shape[0]),
        voting_cfg.bin_size,
        voting_cfg.smoothing,
    )
    min_score = voting_cfg.min_score_fraction * float(cuboid.levels.max())
    hypotheses = find_maxima(cuboid, min_score, voting_cfg.maxima_radius)

    total_mass = float(cuboid.level_mass.sum())
    if apply_fusion and total_mass > 0:
        kept = fuse(hypotheses, patch_votes, fusion_cfg, total_mass)
    else:
        kept = list(hypotheses)

    detections = [
        Detection(
            image_id,
            h.center,
            h.scale,
            h.score,
            box_from_hypothesis(h.center, h.scale, bank.reference_box),
        )
        for h in kept
    ]
    detections.sort(key=lambda d: (-d.score, d.center[0], d.center[1]))
    return DetectionResult(detections, hypotheses, cuboid, total_mass)
