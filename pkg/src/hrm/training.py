"""Patch sampling, context-encoded training sets, and model-bank fitting.

Positive patches are drawn (without replacement) from inside annotated
boxes and carry a voting vector pointing from the patch center to the box
center.  Negative patches avoid every box.  Each patch contributes m+1
context-encoded rows; the location models (voting targets) are fitted on
positive rows only, while the label models see both classes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import pls
from .errors import DegenerateFit, InvalidDataset
from .features import (
    EXTRACTOR_VERSION,
    PatchGeometry,
    compute_channels,
    context_vectors,
    extract_patch_vector,
)


@dataclass(frozen=True)
class TrainingSample:
    """One sampled patch: canvas index, top-left corner, class, vote target."""

    canvas_id: int
    topleft: tuple[int, int]
    label: int  # +1 or -1
    voting: np.ndarray | None = None  # (2,), positives only


@dataclass(frozen=True)
class SampleSet:
    """Sampled patches plus the canvases (images) they index into.

    With per-object scale normalization the canvases include rescaled
    copies of training images, so samples always see objects at the
    training scale.
    """

    canvases: tuple[np.ndarray, ...]
    samples: tuple[TrainingSample, ...]


@dataclass(frozen=True)
class TrainingSets:
    """The m+1 predictor/response pairs for both model families."""

    hrm: tuple[tuple[np.ndarray, np.ndarray], ...]  # (X_j, voting targets)
    lrm: tuple[tuple[np.ndarray, np.ndarray], ...]  # (X_j, +-1 labels)


@dataclass(frozen=True)
class ModelBank:
    """m+1 voting regressors and m+1 label regressors with shared geometry."""

    hrms: tuple[pls.RegressionModel, ...]
    lrms: tuple[pls.RegressionModel, ...]
    geometry: PatchGeometry
    train_scale: float = 1.0
    extractor_version: str = EXTRACTOR_VERSION
    reference_box: tuple[float, float] = (0.0, 0.0)

    @property
    def num_context(self) -> int:
        return len(self.hrms)


def _positive_candidates(boxes, shape, ps):
    """Top-left positions whose patch lies fully inside some box."""
    h, w = shape
    out = []
    for x0, y0, x1, y1 in boxes:
        xs = np.arange(max(0, x0), min(w - ps, x1 - ps) + 1)
        ys = np.arange(max(0, y0), min(h - ps, y1 - ps) + 1)
        if len(xs) and len(ys):
            cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
            out.append((xs, ys, (cx, cy)))
    return out


def _negative_candidates(boxes, shape, ps):
    """Boolean (H-ps+1, W-ps+1) mask of patches that miss every box."""
    h, w = shape
    if h < ps or w < ps:
        return np.zeros((0, 0), dtype=bool)
    ok = np.ones((h - ps + 1, w - ps + 1), dtype=bool)
    for x0, y0, x1, y1 in boxes:
        ys = slice(max(0, y0 - ps + 1), min(h - ps + 1, y1))
        xs = slice(max(0, x0 - ps + 1), min(w - ps + 1, x1))
        ok[ys, xs] = False
    return ok


def _resize(img: np.ndarray, factor: float) -> np.ndarray:
    return ndimage.zoom(img, factor, order=1, mode="nearest", grid_mode=True)


def sample_patches(
    entries,
    n_pos: int,
    n_neg: int,
    geom: PatchGeometry,
    seed: int = 0,
    reference_size: float | None = None,
) -> SampleSet:
    """Draw n_pos positive and n_neg negative patches from (image, boxes) pairs.

    When ``reference_size`` is given, each annotated box is normalized to
    that size before positive sampling: the image is resized by
    reference/box ratio and a rescaled canvas is added to the sample set.
    Deterministic under a fixed seed.
    """
    ps = geom.patch_size
    rng = np.random.default_rng(seed)

    canvases = [np.asarray(img, dtype=np.float64) for img, _ in entries]
    pos_pool = []  # (canvas_id, xs, ys, box_center)
    neg_pool = []  # (canvas_id, y, x) arrays

    for idx, (img, boxes) in enumerate(entries):
        img = canvases[idx]
        ok = _negative_candidates(boxes, img.shape, ps)
        if ok.size:
            ys, xs = np.nonzero(ok)
            if len(ys):
                neg_pool.append((idx, ys, xs))

        for box in boxes:
            x0, y0, x1, y1 = box
            if reference_size is not None:
                size = ((x1 - x0) + (y1 - y0)) / 2.0
                factor = reference_size / size
            else:
                factor = 1.0
            if abs(factor - 1.0) > 1e-3:
                canvas = _resize(img, factor)
                canvas_id = len(canvases)
                canvases.append(canvas)
                sbox = tuple(int(round(v * factor)) for v in box)
            else:
                canvas, canvas_id, sbox = img, idx, box
            for xs2, ys2, center in _positive_candidates([sbox], canvas.shape, ps):
                pos_pool.append((canvas_id, xs2, ys2, center))

    total_pos = sum(len(xs) * len(ys) for _, xs, ys, _ in pos_pool)
    total_neg = sum(len(ys) for _, ys, _ in neg_pool)
    if total_pos < n_pos:
        raise InvalidDataset(f"only {total_pos} distinct positive patches, need {n_pos}")
    if total_neg < n_neg:
        raise InvalidDataset(f"only {total_neg} distinct negative patches, need {n_neg}")

    samples: list[TrainingSample] = []

    # positives: flatten the per-box grids into one global index space
    sizes = [len(xs) * len(ys) for _, xs, ys, _ in pos_pool]
    bounds = np.cumsum([0] + sizes)
    chosen = rng.choice(total_pos, size=n_pos, replace=False)
    for flat in np.sort(chosen):
        k = np.searchsorted(bounds, flat, side="right") - 1
        cid, xs, ys, (cx, cy) = pos_pool[k]
        local = flat - bounds[k]
        x = int(xs[local % len(xs)])
        y = int(ys[local // len(xs)])
        voting = np.array([cx - (x + ps / 2.0), cy - (y + ps / 2.0)])
        samples.append(TrainingSample(cid, (x, y), +1, voting))

    sizes = [len(ys) for _, ys, _ in neg_pool]
    bounds = np.cumsum([0] + sizes)
    chosen = rng.choice(total_neg, size=n_neg, replace=False)
    for flat in np.sort(chosen):
        k = np.searchsorted(bounds, flat, side="right") - 1
        cid, ys, xs = neg_pool[k]
        local = flat - bounds[k]
        samples.append(TrainingSample(cid, (int(xs[local]), int(ys[local])), -1))

    return SampleSet(tuple(canvases), tuple(samples))


def build_training_sets(
    sample_set: SampleSet,
    geom: PatchGeometry,
    derivative_kernel: str = "sobel",
) -> TrainingSets:
    """Assemble the m+1 context-encoded (X_j, Y) pairs for both families."""
    used = sorted({s.canvas_id for s in sample_set.samples})
    volumes = {
        cid: compute_channels(sample_set.canvases[cid], derivative_kernel)
        for cid in used
    }

    mplus1 = geom.num_context
    rows = np.empty((len(sample_set.samples), mplus1, geom.vector_length))
    labels = np.empty(len(sample_set.samples))
    for i, s in enumerate(sample_set.samples):
        rows[i] = context_vectors(volumes[s.canvas_id], s.topleft, geom).vectors
        labels[i] = s.label

    pos = labels > 0
    votes = np.array(
        [s.voting for s in sample_set.samples if s.label > 0], dtype=np.float64
    ).reshape(int(pos.sum()), 2)

    hrm = tuple((rows[pos, j, :], votes) for j in range(mplus1))
    lrm = tuple((rows[:, j, :], labels[:, None]) for j in range(mplus1))
    return TrainingSets(hrm, lrm)


def train_from_samples(
    sample_set: SampleSet,
    geom: PatchGeometry,
    cfg: pls.LatentConfig,
    method: str = "bpls",
    derivative_kernel: str = "sobel",
    reference_box: tuple[float, float] = (0.0, 0.0),
) -> ModelBank:
    """Fit the bank one context index at a time.

    Equivalent to build_training_sets followed by train_bank, but holds a
    single (n, d) predictor matrix in memory at once, which matters for
    real patch dimensionalities.
    """
    used = sorted({s.canvas_id for s in sample_set.samples})
    volumes = {
        cid: compute_channels(sample_set.canvases[cid], derivative_kernel)
        for cid in used
    }

    samples = sample_set.samples
    labels = np.array([s.label for s in samples], dtype=np.float64)
    pos = labels > 0
    votes = np.array(
        [s.voting for s in samples if s.label > 0], dtype=np.float64
    ).reshape(int(pos.sum()), 2)

    raw = np.empty((len(samples), geom.vector_length))
    for i, s in enumerate(samples):
        raw[i] = extract_patch_vector(volumes[s.canvas_id], s.topleft, geom)

    def context_matrix(j):
        if j == 0:
            return raw
        dx, dy = geom.neighbor_offsets[j - 1]
        X = raw.copy()
        for i, s in enumerate(samples):
            vol = volumes[s.canvas_id]
            nx, ny = s.topleft[0] + dx, s.topleft[1] + dy
            ps = geom.patch_size
            if 0 <= nx and 0 <= ny and nx + ps <= vol.width and ny + ps <= vol.height:
                X[i] -= extract_patch_vector(vol, (nx, ny), geom)
        return X

    def fit(X, Y, j, family):
        try:
            if method == "pls":
                return pls.pls_fit(X, Y, cfg.components)
            return pls.bpls_fit(X, Y, cfg.components, cfg.ridge)
        except DegenerateFit as e:
            raise DegenerateFit(f"{family} model j={j}: {e}") from e

    hrms, lrms = [], []
    for j in range(geom.num_context):
        X = context_matrix(j)
        hrms.append(fit(X[pos], votes, j, "voting"))
        lrms.append(fit(X, labels[:, None], j, "label"))
    return ModelBank(tuple(hrms), tuple(lrms), geom, reference_box=reference_box)


def train_bank(
    sets: TrainingSets,
    cfg: pls.LatentConfig,
    method: str = "bpls",
    geometry: PatchGeometry | None = None,
    reference_box: tuple[float, float] = (0.0, 0.0),
) -> ModelBank:
    """Fit every voting and label regressor; method picks pls or bpls."""
    if method not in ("pls", "bpls"):
        raise ValueError(f"unknown method {method!r}")

    def fit(X, Y, j, family):
        try:
            if method == "pls":
                return pls.pls_fit(X, Y, cfg.components)
            return pls.bpls_fit(X, Y, cfg.components, cfg.ridge)
        except DegenerateFit as e:
            raise DegenerateFit(f"{family} model j={j}: {e}") from e

    hrms = tuple(fit(X, Y, j, "voting") for j, (X, Y) in enumerate(sets.hrm))
    lrms = tuple(fit(X, Y, j, "label") for j, (X, Y) in enumerate(sets.lrm))
    return ModelBank(
        hrms,
        lrms,
        geometry if geometry is not None else PatchGeometry(),
        reference_box=reference_box,
    )
