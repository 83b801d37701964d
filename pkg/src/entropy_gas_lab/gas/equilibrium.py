"""Limiting rate function ``I(mu) = int V dmu + 1/2 iint W dmu dmu``, predicted
equilibrium measures for quadratic confinement, and the Lagrange conditions
``U_mu + V = C`` on the support and ``>= C`` off it, where
``U_mu(z) = int W(z, y) dmu(y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gamma

from ..clt import GridDensity
from ..errors import UsageError
from ..free import PlanarDensity, catalan, lattice_pair_sum
from ..measures import ParticleConfiguration, RadialCdf, uniform_ball_cdf
from .model import _LOG, _NEG_ABS, _NONE, _POWER, GasModel, InteractionKernel, configuration_energy

__all__ = [
    "EquilibriumPrediction",
    "LagrangeReport",
    "equilibrium_prediction",
    "rate_function",
    "uniform_ball_potential",
    "lagrange_residual",
    "default_probes",
]

EDGE_MASS_TOL = 1e-9
QUAD_NODES = 200


@dataclass(frozen=True)
class EquilibriumPrediction:
    """Predicted minimizer of the rate function.

    ``kind`` is ``uniform_ball`` (radius R, radial CDF (r/R)^d), ``semicircle``
    (on [-R, R], even moments ``C_m (R/2)^(2m)``) or ``unknown``.
    ``modified_robin_constant`` is the value of U + V on the support.
    """

    kind: str
    dimension: int
    radius: float | None = None
    radial_cdf: RadialCdf | None = field(default=None, repr=False)
    modified_robin_constant: float | None = None

    def __post_init__(self):
        if self.kind not in ("uniform_ball", "semicircle", "unknown"):
            raise UsageError(f"unknown prediction kind {self.kind!r}")
        if self.kind != "unknown" and not (self.radius and self.radius > 0):
            raise UsageError("a predicted support needs a positive radius")

    def second_radial_moment(self) -> float | None:
        """``E|x|^2`` under the prediction."""
        if self.kind == "uniform_ball":
            d = self.dimension
            return d * self.radius**2 / (d + 2)
        if self.kind == "semicircle":
            return self.moment(2)
        return None

    def moment(self, k: int) -> float | None:
        """Coordinate moment of order k for the semicircle prediction."""
        if self.kind != "semicircle":
            return None
        if k % 2:
            return 0.0
        return catalan(k // 2) * (self.radius / 2) ** k


def equilibrium_prediction(model: GasModel) -> EquilibriumPrediction:
    """Equilibrium for quadratic V = c|x|^2 with a Coulomb or log interaction.

    Gauss averaging makes the interior field of a uniform ball linear in |x|,
    which balances grad V = 2c x exactly when

    * Coulomb, d >= 3:  R^d = (d - 2) / (2c)
    * Coulomb, d = 1 (W = -|x - y|):  R = 1 / (2c)
    * ``s log 1/r`` in d = 2:  R^2 = s / (2c)

    On the line, ``s log 1/r`` gives the semicircle on [-R, R] with R^2 = s / c.
    Anything else returns ``unknown``.
    """
    d = model.dimension
    v, w = model.potential, model.kernel
    if v.tag != "quadratic" or w.tag not in ("coulomb", "log2d"):
        return EquilibriumPrediction("unknown", d)
    c = v.coefficient
    kind, p = w.code
    if kind == _LOG and d == 1:
        radius = math.sqrt(p / c)
        robin = p * (0.5 - math.log(radius / 2))
        return EquilibriumPrediction("semicircle", 1, radius, None, robin)
    if kind == _LOG and d == 2:
        radius = math.sqrt(p / (2 * c))
        robin = p * (0.5 - math.log(radius))
    elif kind == _POWER and w.tag == "coulomb":
        radius = ((d - 2) / (2 * c)) ** (1 / d)
        robin = d / (2 * radius ** (d - 2))
    elif kind == _NEG_ABS:
        radius = 1 / (2 * c)
        robin = -radius / 2
    else:
        return EquilibriumPrediction("unknown", d)
    return EquilibriumPrediction("uniform_ball", d, radius, uniform_ball_cdf(radius, d), robin)


def _self_cell(kernel: InteractionKernel, diameter: float) -> float:
    return float(kernel(0.5 * diameter))


def _check_edges(weights: np.ndarray) -> None:
    w = np.asarray(weights)
    edge = sum(float(np.sum(np.take(w, idx, axis=ax))) for ax in range(w.ndim) for idx in (0, -1))
    if edge > EDGE_MASS_TOL:
        raise UsageError("density carries mass on the grid boundary; support is not known to be bounded")


def rate_function(mu, model: GasModel) -> float:
    """``I(mu)`` for a density on a lattice or for the empirical measure of a configuration.

    Lattice densities use center-to-center kernel values off the diagonal and
    ``W`` at half the cell diameter for a cell's self-interaction.  For a
    configuration the diagonal is dropped, which gives ``I_N`` exactly.
    """
    if isinstance(mu, ParticleConfiguration):
        return configuration_energy(model, mu)
    if isinstance(mu, PlanarDensity):
        if model.dimension != 2:
            raise UsageError("planar density needs a d = 2 model")
        weights, spacing, diameter = mu.weights, mu.h, mu.cell_diameter
        xx, yy = mu.centers()
        pts = np.column_stack([xx.ravel(), yy.ravel()])
    elif isinstance(mu, GridDensity):
        if model.dimension != 1:
            raise UsageError("grid density needs a d = 1 model")
        weights, spacing, diameter = mu.masses, mu.step, mu.step
        pts = mu.x[:, None]
    else:
        raise UsageError(f"rate_function cannot evaluate {type(mu).__name__}")
    _check_edges(weights)
    potential = float(np.sum(weights.ravel() * model.potential.value(pts)))
    if model.kernel.code[0] == _NONE:
        return potential
    off, sq = lattice_pair_sum(weights, spacing, model.kernel)
    return potential + 0.5 * (off + sq * _self_cell(model.kernel, diameter))


def _radial_primitive(kernel: InteractionKernel, d: int, t: np.ndarray) -> np.ndarray:
    # Antiderivative of w(t) t^(d-1), vanishing at t = 0.
    kind, p = kernel.code
    t = np.asarray(t, dtype=float)
    if kind == _POWER:
        return t ** (d - p) / (d - p)
    if kind == _LOG:
        with np.errstate(divide="ignore", invalid="ignore"):
            val = -p * t**d * (np.log(t) / d - 1.0 / d**2)
        return np.where(t > 0, val, 0.0)
    if kind == _NEG_ABS:
        return -t ** (d + 1) / (d + 1)
    return np.zeros_like(t)


@lru_cache(maxsize=None)
def _gauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def uniform_ball_potential(radius: float, dimension: int, kernel: InteractionKernel, r) -> np.ndarray:
    """``U(z) = int W(z, y) dmu(y)`` for mu uniform on the ball, at distances r = |z|.

    The ball is swept by rays from z: the radial integral along a ray is
    done in closed form and the angle integral by Gauss-Legendre, so no
    shell theorem is used.
    """
    if kernel.dimension != dimension:
        raise UsageError("kernel dimension does not match")
    R, d = float(radius), int(dimension)
    rs = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty_like(rs)
    if d == 1:
        for k, z in enumerate(rs):
            segs = [(z - R, z + R)] if z >= R else [(0.0, R - z), (0.0, R + z)]
            out[k] = sum(_radial_primitive(kernel, 1, b) - _radial_primitive(kernel, 1, a)
                         for a, b in segs) / (2 * R)
        return out if np.ndim(r) else out[0]
    nodes, weights = _gauss(QUAD_NODES)
    sphere = 2 * math.pi ** ((d - 1) / 2) / gamma((d - 1) / 2)
    volume = math.pi ** (d / 2) * R**d / gamma(d / 2 + 1)
    for k, z in enumerate(rs):
        if z < R:
            theta = 0.5 * math.pi * (nodes + 1)
            jac = 0.5 * math.pi * weights
            chord = np.sqrt(R**2 - (z * np.sin(theta)) ** 2)
            radial = _radial_primitive(kernel, d, -z * np.cos(theta) + chord)
        else:
            # impact parameter b = R sin(psi) keeps the chord R cos(psi) smooth
            psi = 0.25 * math.pi * (nodes + 1)
            sin_t = R * np.sin(psi) / z
            theta = math.pi - np.arcsin(sin_t)
            jac = 0.25 * math.pi * weights * R * np.cos(psi) / np.sqrt(z**2 - (R * np.sin(psi)) ** 2)
            chord = R * np.cos(psi)
            near = -z * np.cos(theta) - chord
            far = -z * np.cos(theta) + chord
            radial = _radial_primitive(kernel, d, far) - _radial_primitive(kernel, d, near)
        out[k] = sphere * float(np.sum(jac * np.sin(theta) ** (d - 2) * radial)) / volume
    return out if np.ndim(r) else out[0]


@dataclass(frozen=True)
class LagrangeReport:
    inside_variation: float
    outside_violation: float
    plateau: float
    skipped: tuple = ()
    inside_count: int = 0
    outside_count: int = 0


def default_probes(prediction: EquilibriumPrediction, count: int = 100) -> np.ndarray:
    """Deterministic probes: half at radii in [0, 0.9R], half in [1.1R, 2R], on a spiral of directions."""
    if prediction.kind != "uniform_ball":
        raise UsageError("probes need a uniform_ball prediction")
    d, R = prediction.dimension, prediction.radius
    half = count // 2
    radii = np.concatenate([np.linspace(0.0, 0.9 * R, half), np.linspace(1.1 * R, 2.0 * R, count - half)])
    rng = np.random.default_rng(12345)
    dirs = rng.standard_normal((count, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return radii[:, None] * dirs


def lagrange_residual(samples: ParticleConfiguration | None, model: GasModel,
                      prediction: EquilibriumPrediction, probes, *, exact: bool = False) -> LagrangeReport:
    """Spread of ``U + V`` over inside probes and its dip below the inside mean outside.

    U is the empirical average ``(1/N) sum_i W(z, x_i)`` over ``samples``;
    with ``exact=True`` (and ``samples=None``) it is the quadrature potential of
    the predicted uniform ball instead.  Probes coinciding with a sample point
    are skipped and listed in ``skipped``.
    """
    if prediction.kind != "uniform_ball":
        raise UsageError("Lagrange residual needs a uniform_ball prediction")
    z = np.atleast_2d(np.asarray(probes, dtype=float))
    if z.shape[1] != model.dimension:
        raise UsageError("probe dimension does not match the model")
    R = prediction.radius
    rz = np.linalg.norm(z, axis=1)
    keep = np.abs(rz - R) > 1e-12 * R
    skipped = []
    if exact:
        u = uniform_ball_potential(R, model.dimension, model.kernel, rz)
    else:
        if samples is None:
            raise UsageError("samples required unless exact=True")
        pts = samples.points
        u = np.empty(z.shape[0])
        for k, probe in enumerate(z):
            dist = np.sqrt(np.sum((pts - probe) ** 2, axis=1))
            if np.min(dist) < 1e-12:
                skipped.append(k)
                keep[k] = False
                u[k] = np.nan
                continue
            u[k] = float(np.mean(model.kernel(dist)))
    total = u + model.potential.value(z)
    inside = keep & (rz < R)
    outside = keep & (rz > R)
    if not np.any(inside):
        raise UsageError("no usable probe inside the predicted support")
    vals = total[inside]
    plateau = float(np.mean(vals))
    variation = float(np.max(vals) - np.min(vals))
    violation = max(0.0, plateau - float(np.min(total[outside]))) if np.any(outside) else 0.0
    return LagrangeReport(variation, violation, plateau, tuple(skipped), int(inside.sum()), int(outside.sum()))
