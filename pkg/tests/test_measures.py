import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import special_ortho_group

from entropy_gas_lab.errors import UsageError
from entropy_gas_lab.measures import (ParticleConfiguration, RadialCdf, build_histogram, empirical_moments,
                                      radial_ks_distance, read_snapshot, uniform_ball_cdf, write_snapshot)


def disc_sample(rng, n):
    r = np.sqrt(rng.random(n))
    t = 2 * np.pi * rng.random(n)
    return ParticleConfiguration(np.column_stack([r * np.cos(t), r * np.sin(t)]))


def ball_sample(rng, n, radius, d):
    u = rng.standard_normal((n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return ParticleConfiguration(u * (radius * rng.random(n) ** (1 / d))[:, None])


class TestParticleConfiguration:
    def test_rejects_non_finite(self):
        with pytest.raises(UsageError):
            ParticleConfiguration([[0.0, np.nan]])

    def test_rejects_empty(self):
        with pytest.raises(UsageError):
            ParticleConfiguration(np.zeros((0, 2)))

    def test_points_are_read_only(self):
        c = ParticleConfiguration([[1.0, 2.0]])
        with pytest.raises(ValueError):
            c.points[0, 0] = 3.0

    def test_one_dimensional_input_becomes_column(self):
        assert ParticleConfiguration([1.0, 2.0, 3.0]).points.shape == (3, 1)


class TestEmpiricalMoments:
    def test_point_mass_at_origin(self):
        m = empirical_moments(ParticleConfiguration([[0.0, 0.0]]), [0, 1, 2], kind="radial")
        assert m.values == (1.0, 0.0, 0.0)

    def test_symmetric_pair_on_line(self):
        m = empirical_moments(ParticleConfiguration([[-1.0], [1.0]]), [1, 2], kind="coordinate")
        assert m.values == (0.0, 1.0)

    def test_uniform_disc_second_radial_moment(self, rng):
        m = empirical_moments(disc_sample(rng, 100_000), [2], kind="radial")
        assert m[2] == pytest.approx(0.5, abs=0.01)

    def test_empty_orders_rejected(self):
        with pytest.raises(UsageError):
            empirical_moments(ParticleConfiguration([[0.0]]), [])

    @given(arrays(float, (7, 3), elements=st.floats(-1e3, 1e3)))
    def test_order_zero_is_exactly_one(self, pts):
        m = empirical_moments(ParticleConfiguration(pts), [0, 3], kind="radial")
        assert m[0] == 1.0


class TestRadialKs:
    def test_quantile_construction(self):
        cdf = uniform_ball_cdf(1.0, 2)
        radii = np.sqrt((np.arange(1, 101) - 0.5) / 100)
        cfg = ParticleConfiguration(np.column_stack([radii, np.zeros(100)]))
        assert radial_ks_distance(cfg, cdf) <= 1 / 100

    def test_all_outside_support(self):
        cfg = ParticleConfiguration(np.full((10, 3), 2.0 / np.sqrt(3)))
        assert radial_ks_distance(cfg, uniform_ball_cdf(1.0, 3)) == 1.0

    def test_uniform_ball_sample(self, rng):
        cfg = ball_sample(rng, 10_000, 0.7, 3)
        assert radial_ks_distance(cfg, uniform_ball_cdf(0.7, 3)) < 0.02

    def test_rotation_invariance(self, rng):
        cfg = ball_sample(rng, 500, 1.0, 3)
        rot = special_ortho_group.rvs(3, random_state=1)
        turned = ParticleConfiguration(cfg.points @ rot.T)
        cdf = uniform_ball_cdf(1.0, 3)
        assert radial_ks_distance(turned, cdf) == pytest.approx(radial_ks_distance(cfg, cdf), abs=1e-12)

    def test_converges_with_sample_size(self):
        cdf = uniform_ball_cdf(1.0, 2)
        medians = []
        for n in (100, 1000, 10_000):
            vals = [radial_ks_distance(disc_sample(np.random.default_rng(s), n), cdf) for s in range(20)]
            medians.append(np.median(vals))
        assert medians[0] > medians[1] > medians[2]

    def test_radial_cdf_clamps(self):
        cdf = RadialCdf(2.0, lambda r: r / 2)
        assert cdf(0.0) == 0.0 and cdf(3.0) == 1.0 and cdf(1.0) == 0.5


class TestHistogram:
    def test_single_point_half_open(self):
        h = build_histogram(ParticleConfiguration([[0.5]]), ("coordinate", 0), 2, (0.0, 1.0))
        assert h == [(0.25, 0), (0.75, 1)]

    def test_points_outside_range(self):
        h = build_histogram(ParticleConfiguration([[5.0], [-3.0]]), ("coordinate", 0), 4, (0.0, 1.0))
        assert all(c == 0 for _, c in h)

    def test_bad_range(self):
        with pytest.raises(UsageError):
            build_histogram(ParticleConfiguration([[0.5]]), "radial", 2, (1.0, 1.0))

    def test_disc_radial_histogram_matches_density(self, rng):
        cfg = disc_sample(rng, 10_000)
        h = build_histogram(cfg, "radial", 20, (0.0, 1.0))
        edges = np.linspace(0, 1, 21)
        expected = 10_000 * np.diff(edges**2)
        counts = np.array([c for _, c in h])
        assert sum(counts) == 10_000
        # relative 5% per bin is within Poisson noise only for the populated bins
        big = expected > 1600
        assert np.all(np.abs(counts[big] - expected[big]) <= 0.05 * expected[big])
        assert np.all(np.abs(counts - expected) <= 4 * np.sqrt(expected) + 1)

    def test_permutation_invariance(self, rng):
        pts = rng.standard_normal((200, 2))
        a = build_histogram(ParticleConfiguration(pts), "radial", 7, (0.0, 2.0))
        b = build_histogram(ParticleConfiguration(pts[rng.permutation(200)]), "radial", 7, (0.0, 2.0))
        assert a == b


def test_snapshot_round_trip(tmp_path, rng):
    cfg = ParticleConfiguration(rng.standard_normal((13, 3)), seed=2**64 - 1, step_index=42)
    back = read_snapshot(write_snapshot(cfg, tmp_path / "s.txt"))
    assert np.array_equal(back.points, cfg.points)
    assert (back.seed, back.step_index) == (cfg.seed, cfg.step_index)
    assert (tmp_path / "s.txt").read_text().splitlines()[0] == f"# d=3 N=13 seed={2**64 - 1} step=42"
