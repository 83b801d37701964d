import math

import numpy as np
import pytest
from scipy.spatial.distance import pdist
from scipy.stats import special_ortho_group

from entropy_gas_lab.errors import UsageError
from entropy_gas_lab.gas.model import (ConfinementPotential, GasModel, InteractionKernel, configuration_energy,
                                       energy_gradient, evaluate)
from entropy_gas_lab.measures import ParticleConfiguration


def model(d, n, kernel="coulomb", potential=None, beta=None, **kw):
    pot = potential or ConfinementPotential("quadratic", 1.0)
    return GasModel(d, n, float(beta or n * n), pot, InteractionKernel(kernel, d, **kw))


def oracle_energy(m, x):
    # I_N = (1/N) sum V(x_i) + (1/N^2) sum_{i<j} W(x_i, x_j), straight from the definition
    n = x.shape[0]
    return float(np.sum(m.potential.value(x)) / n + np.sum(m.kernel(pdist(x))) / n**2)


KERNELS = [
    ("coulomb", {}),
    ("log2d", {"scale": 2.0}),
    ("riesz", {"alpha": 0.5}),
    ("none", {}),
]


class TestEnergy:
    def test_two_point_example(self):
        m = model(2, 2, "log2d", scale=2.0)
        x = np.array([[0.5, 0.0], [-0.5, 0.0]])
        # V: (0.25 + 0.25)/2, W: 2 log(1/1) / 4
        assert configuration_energy(m, ParticleConfiguration(x)) == pytest.approx(0.25, abs=1e-15)

    def test_three_dimensional_example(self):
        m = model(3, 2)
        x = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
        assert configuration_energy(m, ParticleConfiguration(x)) == pytest.approx(1.0 + 0.5 / 4, abs=1e-15)

    @pytest.mark.parametrize("d", [1, 2, 3])
    @pytest.mark.parametrize("tag,kw", KERNELS)
    def test_matches_definition(self, d, tag, kw, rng):
        if tag == "riesz" and d == 1:
            kw = {"alpha": 0.5}
        m = model(d, 40, tag, **kw)
        x = rng.standard_normal((40, d))
        assert evaluate(m, x).energy == pytest.approx(oracle_energy(m, x), rel=1e-12)

    def test_coincidence_is_infinite(self):
        m = model(2, 3)
        x = np.array([[0.1, 0.2], [0.5, 0.5], [0.1, 0.2]])
        energy, pair = configuration_energy(m, ParticleConfiguration(x), with_pair=True)
        assert energy == math.inf and pair == (0, 2)
        with pytest.raises(ZeroDivisionError, match="0 and 2"):
            energy_gradient(m, ParticleConfiguration(x))

    def test_coincidence_finite_for_regular_kernels(self):
        x = np.array([[0.1], [0.1], [0.7]])
        for tag in ("coulomb", "none"):
            m = model(1, 3, tag)
            energy, pair = configuration_energy(m, ParticleConfiguration(x), with_pair=True)
            assert math.isfinite(energy) and pair is None

    def test_rotation_and_permutation_invariance(self, rng):
        m = model(3, 30)
        x = rng.standard_normal((30, 3))
        q = special_ortho_group.rvs(3, random_state=1)
        base = evaluate(m, x).energy
        assert evaluate(m, x @ q.T).energy == pytest.approx(base, rel=1e-12)
        assert evaluate(m, x[rng.permutation(30)]).energy == pytest.approx(base, rel=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(UsageError):
            configuration_energy(model(2, 2), ParticleConfiguration(np.zeros((2, 3)) + np.arange(3)))


class TestGradient:
    @pytest.mark.parametrize("d", [1, 2, 3])
    @pytest.mark.parametrize("tag,kw", KERNELS)
    @pytest.mark.parametrize("pot", [ConfinementPotential("quadratic", 0.7),
                                     ConfinementPotential("radial_power", 1.3, 4.0)])
    def test_finite_difference(self, d, tag, kw, pot, rng):
        m = model(d, 12, tag, potential=pot, **kw)
        h = 1e-6
        for _ in range(20 if tag == "coulomb" else 3):
            x = rng.standard_normal((12, d))
            while np.min(pdist(x)) < 0.05:  # keep the difference quotient out of near-collisions
                x = rng.standard_normal((12, d))
            g = evaluate(m, x).gradient
            fd = np.zeros_like(x)
            for idx in np.ndindex(*x.shape):
                e = np.zeros_like(x)
                e[idx] = h
                fd[idx] = (oracle_energy(m, x + e) - oracle_energy(m, x - e)) / (2 * h)
            assert np.max(np.abs(g - fd)) <= 1e-6 * max(1.0, np.max(np.abs(fd)))

    def test_mirror_symmetry(self):
        m = model(2, 2)
        g = evaluate(m, np.array([[0.3, -0.2], [-0.3, 0.2]])).gradient
        assert np.allclose(g[0], -g[1], atol=1e-15)

    def test_pair_formula_three_dimensions(self):
        # V = 0 is not available, so subtract the confinement part: grad_x |x - y|^-1 = -(x - y)/|x - y|^3
        m = model(3, 2)
        x = np.array([[0.2, 0.1, 0.0], [-0.4, 0.3, 0.5]])
        g = evaluate(m, x).gradient - m.potential.gradient(x) / 2
        diff = x[0] - x[1]
        assert g[0] == pytest.approx(-diff / np.linalg.norm(diff) ** 3 / 4, abs=1e-14)

    def test_custom_potential(self, rng):
        table = (np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 5.0]))
        pot = ConfinementPotential("custom", table=table)
        x = np.array([[0.5, 0.0], [0.0, -1.5]])
        assert pot.value(x) == pytest.approx([0.5, 3.0])
        assert np.allclose(pot.gradient(x), [[1.0, 0.0], [0.0, -4.0]])
        assert pot.radial(3.0) == pytest.approx(9.0)


class TestModel:
    def test_validation(self):
        with pytest.raises(UsageError):
            model(2, 1)
        with pytest.raises(UsageError):
            model(2, 5, beta=-1.0)
        with pytest.raises(UsageError):
            InteractionKernel("riesz", 2, alpha=2.5)
        with pytest.raises(UsageError):
            InteractionKernel("yukawa", 2)
        with pytest.raises(UsageError):
            GasModel(2, 5, 1.0, ConfinementPotential("quadratic"), InteractionKernel("coulomb", 3))

    def test_weak_confinement_warns(self):
        pot = ConfinementPotential("custom", table=((0.0, 1.0), (0.0, 0.0)))
        with pytest.warns(RuntimeWarning, match="confinement"):
            GasModel(1, 3, 9.0, pot, InteractionKernel("coulomb", 1))

    def test_cooling_flag(self):
        assert model(2, 100).cooling_satisfied
        assert not model(2, 100, beta=100.0).cooling_satisfied

    def test_kernel_values(self):
        assert InteractionKernel("coulomb", 1)(2.0) == -2.0
        assert InteractionKernel("coulomb", 2)(math.e) == pytest.approx(-1.0)
        assert InteractionKernel("coulomb", 3)(4.0) == pytest.approx(0.25)
        assert InteractionKernel("coulomb", 3)(0.0) == math.inf
        assert InteractionKernel("riesz", 2, alpha=1.0)(2.0) == pytest.approx(0.5)
        assert not InteractionKernel("coulomb", 1).singular
