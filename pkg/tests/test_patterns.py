import numpy as np
import pytest
from scipy.stats import kstest

from ksopt.numerics import RngStream
from ksopt.patterns import (
    SamplingPattern,
    calib_points,
    discretize,
    gen_uniform,
    gen_vd_gaussian,
    gen_vd_poisson,
    load_pattern,
    project,
    save_pattern,
    target_count,
)


GRID = (64, 64)
CALIB = 8


class TestCalib:
    def test_block_size_and_distinctness(self):
        pts = calib_points(20, 256, 256)
        assert pts.shape == (400, 2)
        assert len(np.unique(pts, axis=0)) == 400

    def test_on_grid_and_centered(self):
        pts = calib_points(8, 64, 64)
        snapped = np.round(pts * 64) / 64
        assert np.array_equal(pts, snapped)
        assert np.allclose(pts.mean(axis=0), [-0.5 / 64, -0.5 / 64])


class TestUniform:
    def test_exact_count(self):
        pat = gen_uniform(RngStream(0), GRID, 5.0, calib=CALIB)
        assert pat.m == target_count(64, 64, 5.0)

    def test_calibration_only_boundary(self):
        # accel chosen so the budget equals the calibration block exactly
        accel = 64 * 64 / CALIB**2
        pat = gen_uniform(RngStream(0), GRID, accel, calib=CALIB)
        assert pat.m == CALIB**2
        assert np.all(pat.calib_mask)

    def test_budget_error(self):
        with pytest.raises(ValueError):
            gen_uniform(RngStream(0), GRID, 4096.0, calib=CALIB)

    def test_small_disc_support(self):
        pat = gen_uniform(RngStream(1), GRID, 5.0, radius_frac=0.5, calib=CALIB)
        r = pat.radii()[~pat.calib_mask]
        assert np.all(r <= 0.25 + 1e-12)

    def test_full_disc_mean_radius(self):
        # mean radius of a uniform unit-density disc of radius a is (2/3) a
        pat = gen_uniform(RngStream(2), (256, 256), 1.3, calib=0)
        r = pat.radii()
        n = len(r)
        expect = 2.0 / 3.0 * 0.5
        stderr = np.sqrt(0.5**2 / 18.0 / n)  # var of radius = a^2/18
        assert abs(r.mean() - expect) < 3 * stderr

    def test_square_support_when_no_corner_cut(self):
        pat = gen_uniform(RngStream(3), GRID, 5.0, corner_cut=False, calib=CALIB)
        assert np.all(np.abs(pat.points) <= 0.5)
        # squares have corner mass: some radius should exceed 0.5
        assert pat.radii().max() > 0.5

    def test_deterministic(self):
        a = gen_uniform(RngStream(9), GRID, 5.0, calib=CALIB)
        b = gen_uniform(RngStream(9), GRID, 5.0, calib=CALIB)
        assert np.array_equal(a.points, b.points)


class TestVdGaussian:
    def test_ellipse_constraint(self):
        pat = gen_vd_gaussian(RngStream(0), GRID, 5.0, corner_cut=True, calib=CALIB)
        p = pat.points[~pat.calib_mask]
        assert np.all((p[:, 0] / 0.5) ** 2 + (p[:, 1] / 0.5) ** 2 <= 1.0 + 1e-12)

    def test_density_decays_with_radius(self):
        pat = gen_vd_gaussian(RngStream(1), (128, 128), 128 * 128 / 10**4, std_frac=0.25,
                              corner_cut=True, calib=0)
        r = pat.radii()
        hist, edges = np.histogram(r, bins=8, range=(0.0, 0.4))
        mids = 0.5 * (edges[1:] + edges[:-1])
        density = hist / (2 * np.pi * mids * np.diff(edges))
        assert np.all(np.diff(density) < 0)

    def test_wide_limit_approaches_uniform_disc(self):
        pat = gen_vd_gaussian(RngStream(2), (128, 128), 128 * 128 / 10**4, std_frac=10.0,
                              corner_cut=True, calib=0)
        r = pat.radii()
        stat = kstest(r, lambda x: np.clip((x / 0.5) ** 2, 0, 1)).statistic
        assert stat < 0.05

    def test_invalid_std(self):
        with pytest.raises(ValueError):
            gen_vd_gaussian(RngStream(0), GRID, 5.0, std_frac=0.0)


class TestVdPoisson:
    @pytest.mark.parametrize("accel", [5.0, 10.0])
    def test_count_within_tolerance(self, accel):
        pat = gen_vd_poisson(RngStream(3), GRID, accel, calib=CALIB)
        target = target_count(64, 64, accel)
        assert abs(pat.m - target) <= 0.02 * target

    def test_min_distance_property(self):
        pat = gen_vd_poisson(RngStream(4), GRID, 10.0, calib=CALIB)
        p = pat.points[~pat.calib_mask]
        base = 1.0 / 64
        slope = pat.fitted_slope
        d = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)
        mid_r = np.linalg.norm(0.5 * (p[:, None, :] + p[None, :, :]), axis=-1)
        local = base * (1.0 + slope * mid_r)
        iu = np.triu_indices(len(p), k=1)
        assert np.all(d[iu] >= 0.8 * local[iu])

    def test_slope_monotone_in_accel(self):
        slopes = []
        for accel in (5.0, 10.0, 15.0, 20.0):
            pat = gen_vd_poisson(RngStream(5), GRID, accel, calib=CALIB)
            slopes.append(pat.fitted_slope)
        assert all(s2 > s1 for s1, s2 in zip(slopes, slopes[1:]))

    def test_deterministic(self):
        a = gen_vd_poisson(RngStream(6), GRID, 10.0, calib=CALIB)
        b = gen_vd_poisson(RngStream(6), GRID, 10.0, calib=CALIB)
        assert np.array_equal(a.points, b.points)


class TestProject:
    def test_in_range_unchanged(self):
        pts = np.array([[0.1, -0.3]])
        assert np.array_equal(project(pts), pts)

    def test_clamp_values(self):
        out = project(np.array([[0.7, -0.6]]))
        assert out[0, 0] == 0.5 - 2.0**-20
        assert out[0, 1] == -0.5

    def test_idempotent(self):
        pts = np.array([[0.7, -0.6], [0.2, 0.49999]])
        assert np.array_equal(project(project(pts)), project(pts))


class TestDiscretize:
    def test_snap_example(self):
        pat = SamplingPattern(np.array([[0.126, -0.374]]), 1.0, 0, False, 8, 8)
        out = discretize(pat)
        assert np.allclose(out.points, [[0.125, -0.375]])

    def test_cartesian_fixed_point(self):
        pat = gen_uniform(RngStream(0), GRID, 20.0, calib=CALIB)
        snapped = discretize(pat)
        again = discretize(snapped)
        assert np.array_equal(snapped.points, again.points)
        assert np.array_equal(snapped.mult, again.mult)

    def test_max_displacement_bound(self):
        pat = gen_uniform(RngStream(1), GRID, 5.0, calib=CALIB)
        out = discretize(pat)
        exp = out.expanded_points()
        # compare against snapping each original point independently
        ref = pat.points.copy()
        ref[:, 0] = np.round(ref[:, 0] * 64) / 64
        ref[:, 1] = np.round(ref[:, 1] * 64) / 64
        disp = np.abs(pat.points - np.where(ref >= 0.5, ref - 1.0, ref))
        disp = np.minimum(disp, 1.0 - disp)  # periodic metric
        assert np.all(np.hypot(disp[:, 0], disp[:, 1]) <= np.sqrt(2) / (2 * 64) + 1e-12)

    def test_multiplicity_conserved(self):
        pts = np.array([[0.1249, 0.0], [0.1251, 0.0], [0.3, 0.3]])
        pat = SamplingPattern(pts, 1.0, 0, False, 8, 8)
        out = discretize(pat)
        assert out.m == 2
        assert sorted(out.mult.tolist()) == [1, 2]
        assert out.mult.sum() == 3


class TestIo:
    def test_round_trip(self, tmp_path):
        pat = gen_vd_gaussian(RngStream(7), GRID, 8.0, calib=CALIB)
        stem = save_pattern(tmp_path / "pat", pat)
        back = load_pattern(stem)
        assert np.array_equal(back.points, pat.points)
        assert np.array_equal(back.mult, pat.mult)
        assert back.accel == pat.accel and back.calib == pat.calib
        assert back.grid_h == 64 and back.grid_w == 64

    def test_round_trip_with_multiplicity(self, tmp_path):
        pat = SamplingPattern(np.array([[0.125, 0.0], [0.25, -0.25]]), 2.0, 0, False, 8, 8,
                              mult=np.array([2, 1]))
        stem = save_pattern(tmp_path / "m", pat)
        back = load_pattern(stem)
        assert np.array_equal(back.points, pat.points)
        assert np.array_equal(back.mult, pat.mult)
