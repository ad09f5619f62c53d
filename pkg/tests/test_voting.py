import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrm import pls, voting
from hrm.errors import InvalidInput
from hrm.features import ContextSet, PatchGeometry
from hrm.training import ModelBank


def constant_model(dim, out):
    """A regressor that returns `out` for every input."""
    out = np.atleast_1d(np.asarray(out, dtype=np.float64))
    q = out.shape[0]
    return pls.RegressionModel(
        weights=np.zeros((dim, 1)),
        scores=np.zeros((2, 1)),
        coefficients=np.zeros((dim, q)),
        residual=np.zeros((2, q)),
        mean_x=np.zeros(dim),
        mean_y=out,
        components=1,
        ridge=0.0,
    )


def constant_bank(dim, votes, labels, geom=None):
    """Bank whose j-th models always output votes[j] / labels[j]."""
    if geom is None:
        offsets = tuple((k + 1, 0) for k in range(len(votes) - 1))
        geom = PatchGeometry(4, offsets)
    hrms = tuple(constant_model(dim, v) for v in votes)
    lrms = tuple(constant_model(dim, [l]) for l in labels)
    return ModelBank(hrms, lrms, geom)


def patch(loc, votes, labels):
    votes = np.asarray(votes, dtype=np.float64).reshape(-1, 2)
    labels = np.asarray(labels, dtype=np.float64)
    return voting.PatchVotes(
        np.asarray(loc, dtype=np.float64), votes, labels,
        voting.patch_weight(labels),
    )


class TestScaleSet:
    def test_defaults(self):
        s = voting.ScaleSet()
        assert s.scales == (0.75, 1.0, 1.25, 1.5)
        assert s.train_scale == 1.0

    def test_rejects_unsorted(self):
        with pytest.raises(InvalidInput):
            voting.ScaleSet((1.0, 0.5))

    def test_rejects_nonpositive(self):
        with pytest.raises(InvalidInput):
            voting.ScaleSet((0.0, 1.0))
        with pytest.raises(InvalidInput):
            voting.ScaleSet((1.0,), train_scale=0.0)


class TestPatchWeight:
    def test_extremes(self):
        assert voting.patch_weight(np.ones(17)) == 1.0
        assert voting.patch_weight(-np.ones(17)) == 0.0
        assert voting.patch_weight(np.zeros(17)) == 0.0  # sign(max(0,0)) = 0

    def test_nine_of_seventeen(self):
        labels = np.array([1.0] * 9 + [-1.0] * 8)
        assert voting.patch_weight(labels) == pytest.approx(9.0 / 17.0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 20))
    def test_multiples_of_context_fraction(self, seed, mplus1):
        labels = np.random.default_rng(seed).standard_normal(mplus1)
        w = voting.patch_weight(labels)
        assert 0.0 <= w <= 1.0
        assert (w * mplus1) == pytest.approx(round(w * mplus1))


class TestCastVotes:
    def test_matches_per_model_predict(self):
        dim = 3
        votes_out = [(1.0, 2.0), (0.5, -1.0), (-2.0, 0.0)]
        labels_out = [1.0, -0.5, 0.2]
        bank = constant_bank(dim, votes_out, labels_out)
        ctx = ContextSet(np.random.default_rng(0).random((3, dim)), (False,) * 3)
        pv = voting.cast_votes(ctx, bank, (10.0, 20.0))
        for j in range(3):
            assert np.allclose(pv.votes[j], pls.predict(bank.hrms[j], ctx.vectors[j]))
            assert pv.labels[j] == pytest.approx(
                float(pls.predict(bank.lrms[j], ctx.vectors[j])[0])
            )
        assert pv.weight == pytest.approx(2.0 / 3.0)

    def test_context_count_mismatch(self):
        bank = constant_bank(3, [(0, 0)] * 3, [1.0] * 3)
        ctx = ContextSet(np.zeros((2, 3)), (False, False))
        with pytest.raises(InvalidInput):
            voting.cast_votes(ctx, bank, (0, 0))

    def test_batch_matches_scalar_path(self):
        rng = np.random.default_rng(1)
        dim, mplus1, r = 4, 3, 6
        hrms = tuple(
            pls.bpls_fit(rng.standard_normal((10, dim)),
                         rng.standard_normal((10, 2)), 2, 1e-10)
            for _ in range(mplus1)
        )
        lrms = tuple(
            pls.bpls_fit(rng.standard_normal((10, dim)),
                         rng.standard_normal((10, 1)), 2, 1e-10)
            for _ in range(mplus1)
        )
        bank = ModelBank(hrms, lrms, PatchGeometry(4, ((4, 0), (0, 4))))
        contexts = rng.standard_normal((r, mplus1, dim))
        locs = rng.random((r, 2)) * 50
        batched = voting.cast_votes_batch(contexts, bank, locs)
        for i in range(r):
            single = voting.cast_votes(
                ContextSet(contexts[i], (False,) * mplus1), bank, locs[i]
            )
            assert np.allclose(batched[i].votes, single.votes)
            assert np.allclose(batched[i].labels, single.labels)
            assert batched[i].weight == single.weight


class TestAccumulateCuboid:
    def test_landing_geometry(self):
        # vote (d, 0) from location l lands at l + (scale/train) * (d, 0)
        d = 6.0
        pv = patch((10.0, 10.0), [(d, 0.0)], [1.0])
        scales = voting.ScaleSet((1.5,), train_scale=1.0)
        cub = voting.accumulate_cuboid([pv], scales, (40, 40), bin_size=1,
                                       smoothing=0.0)
        assert cub.levels[0, 10, 19] == pytest.approx(1.0)
        assert cub.levels.sum() == pytest.approx(1.0)

    def test_unit_ratio_reproduces_single_scale(self):
        rng = np.random.default_rng(2)
        pvs = [
            patch(rng.random(2) * 30 + 5, rng.standard_normal((3, 2)) * 3,
                  rng.standard_normal(3))
            for _ in range(10)
        ]
        multi = voting.accumulate_cuboid(
            pvs, voting.ScaleSet((0.5, 1.0, 2.0)), (48, 48), 1, 0.0
        )
        single = voting.accumulate_cuboid(
            pvs, voting.ScaleSet((1.0,)), (48, 48), 1, 0.0
        )
        assert np.array_equal(multi.levels[1], single.levels[0])

    def test_hand_accumulation(self):
        # three patches, two votes each, all aimed at one cell, with gate
        # weights 1, 0.5 and 0; each vote carries weight / 2 of mass
        target = np.array([20.0, 20.0])
        configs = (
            ((10.0, 10.0), [1.0, 1.0]),   # weight 1
            ((30.0, 10.0), [1.0, -1.0]),  # weight 0.5
            ((10.0, 30.0), [-1.0, -1.0]), # weight 0
        )
        pvs = [
            patch(loc, [target - np.asarray(loc)] * 2, labels)
            for loc, labels in configs
        ]
        cub = voting.accumulate_cuboid(pvs, voting.ScaleSet((1.0,)),
                                       (40, 40), 1, 0.0)
        assert cub.levels[0, 20, 20] == pytest.approx(1.0 + 0.5 + 0.0)

    def test_mass_conservation_across_levels(self):
        rng = np.random.default_rng(3)
        pvs = [
            patch(rng.random(2) * 40, rng.standard_normal((4, 2)) * 5,
                  rng.standard_normal(4))
            for _ in range(20)
        ]
        cub = voting.accumulate_cuboid(pvs, voting.ScaleSet(), (64, 64), 4, 1.5)
        total_weight = sum(pv.weight for pv in pvs)
        assert np.allclose(cub.level_mass, total_weight)
        # accumulated mass = level mass minus what fell off the grid
        assert np.all(cub.dropped >= 0)

    def test_scale_covariance(self):
        rng = np.random.default_rng(4)
        lam = 2.0
        pvs = [
            patch(rng.random(2) * 30 + 10, rng.standard_normal((3, 2)) * 4,
                  rng.standard_normal(3))
            for _ in range(15)
        ]
        scaled = [
            voting.PatchVotes(pv.location, pv.votes * lam, pv.labels, pv.weight)
            for pv in pvs
        ]
        base = voting.accumulate_cuboid(
            pvs, voting.ScaleSet((0.75, 1.0, 1.5)), (64, 64), 1, 0.0
        )
        cov = voting.accumulate_cuboid(
            scaled, voting.ScaleSet((0.75 / lam, 1.0 / lam, 1.5 / lam)),
            (64, 64), 1, 0.0,
        )
        assert np.array_equal(base.levels, cov.levels)

    def test_brute_force_equivalence(self):
        rng = np.random.default_rng(5)
        pvs = [
            patch(rng.random(2) * 50, rng.standard_normal((5, 2)) * 8,
                  rng.standard_normal(5))
            for _ in range(25)
        ]
        scales = voting.ScaleSet((1.25,), train_scale=1.0)
        cub = voting.accumulate_cuboid(pvs, scales, (60, 60), 1, 0.0)

        oracle = np.zeros((60, 60))
        for pv in pvs:
            for v in pv.votes:
                land = pv.location + 1.25 * v
                x, y = int(np.floor(land[0])), int(np.floor(land[1]))
                if 0 <= x < 60 and 0 <= y < 60:
                    oracle[y, x] += pv.weight / len(pv.votes)
        assert np.allclose(cub.levels[0], oracle)

    def test_empty_votes(self):
        cub = voting.accumulate_cuboid([], voting.ScaleSet(), (32, 32), 4, 0.0)
        assert cub.levels.shape == (4, 8, 8)
        assert cub.levels.sum() == 0.0

    def test_nonnegative_and_finite(self):
        rng = np.random.default_rng(6)
        pvs = [
            patch(rng.random(2) * 40, rng.standard_normal((3, 2)) * 6,
                  rng.standard_normal(3))
            for _ in range(10)
        ]
        cub = voting.accumulate_cuboid(pvs, voting.ScaleSet(), (48, 48), 4, 1.5)
        assert np.all(np.isfinite(cub.levels))
        assert np.all(cub.levels >= 0)


class TestFindMaxima:
    def make_cuboid(self, levels, bin_size=1):
        levels = np.asarray(levels, dtype=np.float64)
        scales = voting.ScaleSet(tuple(1.0 + 0.25 * s for s in range(levels.shape[0])))
        return voting.HoughCuboid(
            levels, scales, bin_size, 0.0,
            (levels.shape[2] * bin_size, levels.shape[1] * bin_size),
            np.ones(levels.shape[0]), np.zeros(levels.shape[0], dtype=np.int64),
        )

    def test_single_impulse(self):
        levels = np.zeros((2, 10, 10))
        levels[1, 4, 7] = 3.0
        hyps = voting.find_maxima(self.make_cuboid(levels), 0.1, radius=2)
        assert len(hyps) == 1
        assert hyps[0].center == (7.5, 4.5)
        assert hyps[0].scale == 1.25
        assert hyps[0].score == 3.0

    def test_uniform_level_no_maxima(self):
        levels = np.ones((1, 8, 8))
        assert voting.find_maxima(self.make_cuboid(levels), 0.0, radius=1) == []

    def test_two_separated_peaks(self):
        r = 3
        levels = np.zeros((1, 20, 20))
        levels[0, 5, 5] = 1.0
        levels[0, 5, 5 + 2 * r + 2] = 0.9
        hyps = voting.find_maxima(self.make_cuboid(levels), 0.0, radius=r)
        assert len(hyps) == 2

    def test_min_score_filter(self):
        levels = np.zeros((1, 10, 10))
        levels[0, 2, 2] = 1.0
        levels[0, 8, 8] = 0.2
        hyps = voting.find_maxima(self.make_cuboid(levels), 0.5, radius=2)
        assert len(hyps) == 1 and hyps[0].score == 1.0

    def test_bin_size_maps_to_cell_centers(self):
        levels = np.zeros((1, 5, 5))
        levels[0, 1, 3] = 2.0
        hyps = voting.find_maxima(self.make_cuboid(levels, bin_size=4), 0.0, 1)
        assert hyps[0].center == (14.0, 6.0)

    def test_exhaustive_scan_oracle(self):
        rng = np.random.default_rng(7)
        levels = rng.random((2, 12, 12))
        r = 2
        hyps = voting.find_maxima(self.make_cuboid(levels), 0.0, radius=r)
        found = {(h.scale, h.center) for h in hyps}

        expected = set()
        scales = (1.0, 1.25)
        for s in range(2):
            for y in range(12):
                for x in range(12):
                    v = levels[s, y, x]
                    is_max = True
                    for dy in range(-r, r + 1):
                        for dx in range(-r, r + 1):
                            if (dx, dy) == (0, 0):
                                continue
                            ny, nx = y + dy, x + dx
                            if 0 <= ny < 12 and 0 <= nx < 12 and levels[s, ny, nx] >= v:
                                is_max = False
                    if is_max:
                        expected.add((scales[s], (x + 0.5, y + 0.5)))
        assert found == expected

    def test_radius_guard(self):
        with pytest.raises(InvalidInput):
            voting.find_maxima(self.make_cuboid(np.zeros((1, 4, 4))), 0.0, radius=0)

    def test_sorted_by_descending_score(self):
        rng = np.random.default_rng(8)
        levels = rng.random((3, 15, 15))
        hyps = voting.find_maxima(self.make_cuboid(levels), 0.0, radius=1)
        scores = [h.score for h in hyps]
        assert scores == sorted(scores, reverse=True)
