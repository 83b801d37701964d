import math

import numpy as np
import pytest

from entropy_gas_lab.errors import UsageError
from entropy_gas_lab.free import PlanarDensity
from entropy_gas_lab.gas.equilibrium import (default_probes, equilibrium_prediction, lagrange_residual,
                                             rate_function, uniform_ball_potential)
from entropy_gas_lab.gas.model import ConfinementPotential, GasModel, InteractionKernel, configuration_energy
from entropy_gas_lab.measures import ParticleConfiguration


def coulomb(d, c=1.0, n=100):
    return GasModel(d, n, float(n * n), ConfinementPotential("quadratic", c), InteractionKernel("coulomb", d))


def ginibre(n=100):
    return GasModel(2, n, float(n * n), ConfinementPotential("quadratic", 1.0),
                    InteractionKernel("log2d", 2, scale=2.0))


class TestPrediction:
    def test_ginibre_unit_disc(self):
        p = equilibrium_prediction(ginibre())
        assert p.kind == "uniform_ball" and p.radius == pytest.approx(1.0)
        assert p.second_radial_moment() == pytest.approx(0.5)
        assert p.radial_cdf(0.5) == pytest.approx(0.25)

    def test_coulomb_three_dimensions(self):
        p = equilibrium_prediction(coulomb(3))
        assert p.radius == pytest.approx(2 ** (-1 / 3), abs=1e-15)
        assert p.second_radial_moment() == pytest.approx(0.377976, abs=1e-6)

    def test_coulomb_four_dimensions(self):
        assert equilibrium_prediction(coulomb(4)).radius == pytest.approx(1.0)

    def test_coulomb_line(self):
        p = equilibrium_prediction(coulomb(1, c=0.5))
        assert p.kind == "uniform_ball" and p.radius == pytest.approx(1.0)

    def test_semicircle(self):
        m = GasModel(1, 50, 2500.0, ConfinementPotential("quadratic", 0.5), InteractionKernel("log2d", 1, scale=2.0))
        p = equilibrium_prediction(m)
        assert p.kind == "semicircle" and p.radius == pytest.approx(2.0)
        assert [p.moment(k) for k in (1, 2, 4, 6)] == pytest.approx([0.0, 1.0, 2.0, 5.0])

    def test_unknown(self):
        riesz = GasModel(2, 10, 100.0, ConfinementPotential("quadratic"), InteractionKernel("riesz", 2, alpha=1.0))
        power = GasModel(3, 10, 100.0, ConfinementPotential("radial_power", 1.0, 4.0), InteractionKernel("coulomb", 3))
        for m in (riesz, power):
            p = equilibrium_prediction(m)
            assert p.kind == "unknown" and p.second_radial_moment() is None


class TestBallPotential:
    @pytest.mark.parametrize("d", [3, 4, 5])
    def test_newton_closed_form(self, d):
        # |x|^(2-d) against the unit ball: (d - (d-2) r^2) / 2 inside, r^(2-d) outside
        k = InteractionKernel("coulomb", d)
        r = np.array([0.0, 0.3, 0.8, 1.5, 3.0])
        expected = np.where(r < 1, (d - (d - 2) * r**2) / 2, np.maximum(r, 1.0) ** (2.0 - d))
        assert uniform_ball_potential(1.0, d, k, r) == pytest.approx(expected, abs=1e-12)

    def test_log_disc_closed_form(self):
        k = InteractionKernel("coulomb", 2)
        r = np.array([0.0, 0.5, 2.0])
        expected = np.where(r < 1, (1 - r**2) / 2, -np.log(np.maximum(r, 1.0)))
        assert uniform_ball_potential(1.0, 2, k, r) == pytest.approx(expected, abs=1e-12)

    def test_segment(self):
        k = InteractionKernel("coulomb", 1)
        # -int |z - y| dy / 2 over [-1, 1] is -(1 + z^2)/2 inside and -|z| outside
        assert uniform_ball_potential(1.0, 1, k, [0.5, 2.0]) == pytest.approx([-0.625, -2.0])


class TestLagrange:
    @pytest.mark.parametrize("d", [1, 2, 3, 4])
    def test_exact_ball(self, d):
        m = coulomb(d, c=0.5 if d == 1 else 1.0)
        p = equilibrium_prediction(m)
        rep = lagrange_residual(None, m, p, default_probes(p), exact=True)
        assert rep.inside_variation < 1e-3 and rep.outside_violation < 1e-3
        assert rep.plateau == pytest.approx(p.modified_robin_constant, abs=1e-10)
        assert rep.inside_count == 50 and rep.outside_count == 50

    def test_three_dimensional_plateau(self):
        m = coulomb(3)
        p = equilibrium_prediction(m)
        rep = lagrange_residual(None, m, p, default_probes(p), exact=True)
        assert rep.plateau == pytest.approx(1.5 * 2 ** (1 / 3), abs=1e-5)

    def test_shrunk_ball_fails(self):
        m = coulomb(3)
        p = equilibrium_prediction(m)
        wrong = type(p)("uniform_ball", 3, 0.6 * p.radius, None, None)
        rep = lagrange_residual(None, m, wrong, default_probes(wrong), exact=True)
        assert rep.inside_variation > 1e-2 or rep.outside_violation > 1e-2

    def test_sample_probe_collision_skipped(self, rng):
        m = coulomb(3)
        p = equilibrium_prediction(m)
        pts = rng.uniform(-0.3, 0.3, (50, 3))
        probes = np.vstack([pts[:1], default_probes(p, 10)])
        rep = lagrange_residual(ParticleConfiguration(pts), m, p, probes)
        assert rep.skipped == (0,)

    def test_needs_ball(self):
        m = GasModel(1, 10, 100.0, ConfinementPotential("quadratic", 0.5), InteractionKernel("log2d", 1, scale=2.0))
        with pytest.raises(UsageError):
            lagrange_residual(None, m, equilibrium_prediction(m), [[0.0]], exact=True)


class TestRateFunction:
    def test_disc_minimum(self):
        mu = PlanarDensity.from_function(lambda x, y: (x * x + y * y <= 1).astype(float), 1.1, 256)
        assert rate_function(mu, ginibre()) == pytest.approx(0.75, abs=3e-3)

    def test_configuration_is_energy(self, rng):
        m = ginibre(40)
        cfg = ParticleConfiguration(rng.standard_normal((40, 2)))
        assert rate_function(cfg, m) == configuration_energy(m, cfg)

    def test_convex_along_mixtures(self):
        m = ginibre()
        f = lambda x, y: (x * x + y * y <= 1).astype(float)
        g = lambda x, y: np.exp(-4 * (x * x + y * y)) * (x * x + y * y < 4)
        a = PlanarDensity.from_function(f, 2.2, 128)
        b = PlanarDensity.from_function(g, 2.2, 128)
        ia, ib = rate_function(a, m), rate_function(b, m)
        for t in (0.25, 0.5, 0.75):
            mix = PlanarDensity(a.x0, a.y0, a.h, t * a.weights + (1 - t) * b.weights)
            assert rate_function(mix, m) <= t * ia + (1 - t) * ib + 1e-12

    def test_disc_beats_other_laws(self):
        m = ginibre()
        disc = PlanarDensity.from_function(lambda x, y: (x * x + y * y <= 1).astype(float), 1.6, 256)
        wide = PlanarDensity.from_function(lambda x, y: (x * x + y * y <= 1.44).astype(float), 1.6, 256)
        gauss = PlanarDensity.from_function(lambda x, y: np.exp(-2 * (x * x + y * y)) * (x * x + y * y < 2.25),
                                            1.6, 256)
        assert rate_function(disc, m) < min(rate_function(wide, m), rate_function(gauss, m))

    def test_edge_mass_rejected(self):
        w = np.full((8, 8), 1 / 64)
        with pytest.raises(UsageError, match="boundary"):
            rate_function(PlanarDensity(-1.0, -1.0, 0.25, w), ginibre())
