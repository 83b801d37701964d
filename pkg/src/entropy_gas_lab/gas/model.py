"""Mean-field gas models: confinement V, pair interaction W and the
configuration energy

    I_N(x) = (1/N) sum_i V(x_i) + (1/N^2) sum_{i<j} W(x_i, x_j).

Pair sums run in numba-compiled loops with a fixed summation order, so results
are bit-reproducible in sequential mode.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from ..errors import UsageError
from ..measures import ParticleConfiguration

__all__ = [
    "InteractionKernel",
    "ConfinementPotential",
    "GasModel",
    "EnergyEvaluation",
    "configuration_energy",
    "energy_gradient",
    "evaluate",
    "COINCIDENCE_DISTANCE",
]

COINCIDENCE_DISTANCE = 1e-12
CONFINEMENT_EPSILON = 0.5

# Reassociation flags only: coincident pairs must still produce inf, not garbage.
_FASTMATH = {"reassoc", "contract", "arcp", "nsz", "afn"}

# Pair-kernel codes understood by the compiled loops.
_NONE, _NEG_ABS, _LOG, _POWER = 0, 1, 2, 3


@dataclass(frozen=True)
class InteractionKernel:
    """Pair interaction W(x, y) = w(|x - y|).

    ``coulomb``: ``-r`` (d=1), ``log 1/r`` (d=2), ``r^(2-d)`` (d>=3).
    ``riesz``: ``r^-(d - alpha)`` with ``0 < alpha < d``.
    ``log2d``: ``scale * log 1/r`` in any dimension (scale 2 gives the matrix ensembles).
    ``none``: no interaction.
    """

    tag: str
    dimension: int
    alpha: float | None = None
    scale: float | None = None

    def __post_init__(self):
        if self.tag not in ("coulomb", "riesz", "log2d", "none"):
            raise UsageError(f"unknown kernel {self.tag!r}")
        if self.dimension < 1:
            raise UsageError("kernel dimension must be >= 1")
        if self.tag == "riesz":
            if self.alpha is None or not 0 < self.alpha < self.dimension:
                raise UsageError(f"riesz kernel needs 0 < alpha < d = {self.dimension}, got {self.alpha}")
        if self.tag == "log2d" and not (self.scale is not None and self.scale > 0):
            raise UsageError("log2d kernel needs a positive scale")

    @property
    def code(self) -> tuple[int, float]:
        """``(kind, parameter)`` pair consumed by the compiled loops."""
        d = self.dimension
        if self.tag == "none":
            return _NONE, 0.0
        if self.tag == "log2d":
            return _LOG, float(self.scale)
        if self.tag == "riesz":
            return _POWER, float(d - self.alpha)
        if d == 1:
            return _NEG_ABS, 0.0
        if d == 2:
            return _LOG, 1.0
        return _POWER, float(d - 2)

    @property
    def singular(self) -> bool:
        return self.code[0] in (_LOG, _POWER)

    def __call__(self, r) -> np.ndarray:
        """Evaluate w(r) for distances r (vectorized; +inf at r = 0 for singular kernels)."""
        r = np.asarray(r, dtype=float)
        kind, p = self.code
        with np.errstate(divide="ignore"):
            if kind == _NONE:
                return np.zeros_like(r)
            if kind == _NEG_ABS:
                return -r
            if kind == _LOG:
                return -p * np.log(r)
            return r**-p


@dataclass(frozen=True)
class ConfinementPotential:
    """Radial confinement V(x) = v(|x|).

    ``quadratic``: ``c |x|^2``; ``radial_power``: ``c |x|^p`` with p >= 1;
    ``custom``: piecewise-linear ``v`` through the table ``(radii, values)``,
    extended linearly past the last node.
    """

    tag: str
    coefficient: float = 1.0
    power: float = 2.0
    table: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.tag not in ("quadratic", "radial_power", "custom"):
            raise UsageError(f"unknown potential {self.tag!r}")
        if self.tag != "custom" and not self.coefficient > 0:
            raise UsageError("confinement coefficient must be positive")
        if self.tag == "radial_power" and self.power < 1:
            raise UsageError("radial_power needs p >= 1")
        if self.tag == "quadratic":
            object.__setattr__(self, "power", 2.0)
        if self.tag == "custom":
            if self.table is None:
                raise UsageError("custom potential needs a (radii, values) table")
            r, v = (np.asarray(a, dtype=float) for a in self.table)
            if r.ndim != 1 or r.shape != v.shape or r.size < 2 or r[0] != 0 or np.any(np.diff(r) <= 0):
                raise UsageError("custom table needs increasing radii starting at 0 and matching values")
            if not np.all(np.isfinite(v)):
                raise UsageError("custom table values must be finite")
            object.__setattr__(self, "table", (r, v))

    def radial(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.tag != "custom":
            return self.coefficient * r**self.power
        rt, vt = self.table
        slope = (vt[-1] - vt[-2]) / (rt[-1] - rt[-2])
        return np.where(r <= rt[-1], np.interp(r, rt, vt), vt[-1] + slope * (r - rt[-1]))

    def radial_derivative(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.tag != "custom":
            return self.coefficient * self.power * r ** (self.power - 1)
        rt, vt = self.table
        slopes = np.diff(vt) / np.diff(rt)
        idx = np.clip(np.searchsorted(rt, r, side="right") - 1, 0, slopes.size - 1)
        return slopes[idx]

    def value(self, x: np.ndarray) -> np.ndarray:
        """V at each row of an (N, d) array."""
        x = np.asarray(x, dtype=float)
        if self.tag == "quadratic":
            return self.coefficient * np.einsum("ij,ij->i", x, x)
        return self.radial(np.sqrt(np.einsum("ij,ij->i", x, x)))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.tag == "quadratic":
            return 2.0 * self.coefficient * x
        r = np.sqrt(np.einsum("ij,ij->i", x, x))
        safe = np.where(r > 0, r, 1.0)
        return (self.radial_derivative(r) / safe)[:, None] * x * (r > 0)[:, None]


@dataclass(frozen=True)
class GasModel:
    """N particles in R^d with inverse temperature beta, confinement V and interaction W."""

    dimension: int
    n_particles: int
    beta: float
    potential: ConfinementPotential
    kernel: InteractionKernel

    def __post_init__(self):
        if self.dimension < 1:
            raise UsageError("dimension must be >= 1")
        if self.n_particles < 2:
            raise UsageError("a gas needs at least 2 particles")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise UsageError("beta must be positive and finite")
        if self.kernel.dimension != self.dimension:
            raise UsageError(
                f"kernel dimension {self.kernel.dimension} does not match model dimension {self.dimension}")
        if not self.confinement_beats_repulsion():
            warnings.warn("confinement does not dominate the interaction at infinity", RuntimeWarning,
                          stacklevel=2)

    @property
    def cooling_satisfied(self) -> bool:
        """Whether beta >= N log N, the cooling-scheme assumption of the large deviation principle."""
        n = self.n_particles
        return self.beta >= n * math.log(n)

    def confinement_beats_repulsion(self) -> bool:
        """Coarse check that W(x, y) + eps (V(x) + V(y)) stays bounded below at infinity.

        Evaluated on antipodal pairs ``x = r e1, y = -r e1`` over a geometric
        range of r; the check fails when the lower bound still decreases at the
        far end of the range.
        """
        r = np.geomspace(1.0, 1e6, 61)
        e1 = np.zeros((r.size, self.dimension))
        e1[:, 0] = r
        f = self.kernel(2 * r) + CONFINEMENT_EPSILON * 2 * self.potential.value(e1)
        return bool(f[-1] >= f[-2] and np.all(np.isfinite(f)))


@dataclass(frozen=True)
class EnergyEvaluation:
    """Energy, per-particle gradient and the closest pair distance of a configuration.

    ``closest_pair`` holds the indices only when the pair is coincident, else (-1, -1).
    """

    energy: float
    gradient: np.ndarray
    closest_pair: tuple[int, int]
    closest_distance: float

    @property
    def coincident(self) -> bool:
        return self.closest_distance < COINCIDENCE_DISTANCE


@numba.njit(cache=True, fastmath=_FASTMATH, error_model="numpy")
def _log_pairs(x, p):
    # sum_{i<j} -p log r_ij, its gradient, and the smallest squared distance.
    n, d = x.shape
    g = np.zeros_like(x)
    total = 0.0
    best = np.inf
    for i in range(n):
        row = 0.0
        prod = 1.0
        cnt = 0
        for j in range(i + 1, n):
            a = 0.0
            for k in range(d):
                t = x[i, k] - x[j, k]
                a += t * t
            best = min(best, a)
            # one log per 8 pairs: log of a product of squared distances
            prod *= a
            cnt += 1
            if cnt == 8:
                row += math.log(prod)
                prod = 1.0
                cnt = 0
            f = p / a
            for k in range(d):
                t = (x[i, k] - x[j, k]) * f
                g[i, k] -= t
                g[j, k] += t
        row += math.log(prod)
        total -= 0.5 * p * row
    return total, g, best


@numba.njit(cache=True, fastmath=_FASTMATH, error_model="numpy")
def _power_pairs(x, p):
    n, d = x.shape
    unit = p == 1.0
    g = np.zeros_like(x)
    total = 0.0
    best = np.inf
    for i in range(n):
        row = 0.0
        for j in range(i + 1, n):
            a = 0.0
            for k in range(d):
                t = x[i, k] - x[j, k]
                a += t * t
            best = min(best, a)
            w = 1.0 / math.sqrt(a) if unit else a ** (-0.5 * p)
            row += w
            f = p * w / a
            for k in range(d):
                t = (x[i, k] - x[j, k]) * f
                g[i, k] -= t
                g[j, k] += t
        total += row
    return total, g, best


@numba.njit(cache=True, fastmath=_FASTMATH, error_model="numpy")
def _abs_pairs(x, p):
    # -r interaction; the gradient at r = 0 is taken as 0.
    n, d = x.shape
    g = np.zeros_like(x)
    total = 0.0
    best = np.inf
    for i in range(n):
        row = 0.0
        for j in range(i + 1, n):
            a = 0.0
            for k in range(d):
                t = x[i, k] - x[j, k]
                a += t * t
            best = min(best, a)
            r = math.sqrt(a)
            row -= r
            f = 1.0 / r if r > 0.0 else 0.0
            for k in range(d):
                t = (x[i, k] - x[j, k]) * f
                g[i, k] -= t
                g[j, k] += t
        total += row
    return total, g, best


def _pair_loop(x, kind, p):
    if kind == _LOG:
        return _log_pairs(x, p)
    if kind == _POWER:
        return _power_pairs(x, p)
    if kind == _NEG_ABS:
        return _abs_pairs(x, p)
    n = x.shape[0]
    diff = x[:, None, :] - x[None, :, :]
    a = np.einsum("ijk,ijk->ij", diff, diff)[np.triu_indices(n, 1)]
    return 0.0, np.zeros_like(x), float(a.min())


def _closest_pair(x: np.ndarray) -> tuple[int, int]:
    best, pair = np.inf, (0, 1)
    for i in range(x.shape[0] - 1):
        a = np.sum((x[i + 1:] - x[i]) ** 2, axis=1)
        j = int(np.argmin(a))
        if a[j] < best:
            best, pair = a[j], (i, i + 1 + j)
    return pair


@numba.njit(parallel=True, cache=True, error_model="numpy")
def _pair_loop_parallel(x, kind, p):
    # Full rows per particle: no write conflicts, twice the work of the sequential loop.
    n, d = x.shape
    g = np.zeros_like(x)
    rows = np.zeros(n)
    mins = np.full(n, np.inf)
    for i in numba.prange(n):
        row = 0.0
        for j in range(n):
            if j == i:
                continue
            a = 0.0
            for k in range(d):
                t = x[i, k] - x[j, k]
                a += t * t
            mins[i] = min(mins[i], a)
            if kind == 2:
                row -= 0.5 * p * math.log(a) if a > 0.0 else -np.inf
                f = p / a if a > 0.0 else 0.0
            elif kind == 3:
                w = a ** (-0.5 * p) if a > 0.0 else np.inf
                row += w
                f = p * w / a if a > 0.0 else 0.0
            elif kind == 1:
                r = math.sqrt(a)
                row -= r
                f = 1.0 / r if r > 0.0 else 0.0
            else:
                f = 0.0
            for k in range(d):
                g[i, k] -= (x[i, k] - x[j, k]) * f
        rows[i] = row
    return 0.5 * rows.sum(), g, mins.min()


def _threads() -> int:
    import os

    try:
        return max(1, int(os.environ.get("ENTROPY_LAB_THREADS", "1")))
    except ValueError as exc:
        raise UsageError("ENTROPY_LAB_THREADS must be a positive integer") from exc


def evaluate(model: GasModel, x: np.ndarray) -> EnergyEvaluation:
    """Energy and gradient of I_N at an (N, d) array in one pass over the pairs.

    With ``ENTROPY_LAB_THREADS > 1`` the pair loop runs in parallel; results then
    agree with sequential mode to rounding but are not bit-identical.
    """
    x = np.ascontiguousarray(x, dtype=float)
    n = x.shape[0]
    kind, p = model.kernel.code
    threads = _threads()
    if threads > 1:
        numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
        pair, gpair, best = _pair_loop_parallel(x, kind, p)
    else:
        pair, gpair, best = _pair_loop(x, kind, p)
    dmin = math.sqrt(best)
    i, j = _closest_pair(x) if dmin < COINCIDENCE_DISTANCE else (-1, -1)
    energy = float(np.sum(model.potential.value(x)) / n + pair / n**2)
    grad = model.potential.gradient(x) / n + gpair / n**2
    if model.kernel.singular and dmin < COINCIDENCE_DISTANCE:
        energy = float("inf")
    return EnergyEvaluation(energy, grad, (int(i), int(j)), dmin)


def _check(model: GasModel, config: ParticleConfiguration) -> np.ndarray:
    if config.dimension != model.dimension:
        raise UsageError(f"configuration has dimension {config.dimension}, model has {model.dimension}")
    return config.points


def configuration_energy(model: GasModel, config: ParticleConfiguration, *, with_pair: bool = False):
    """I_N of a configuration (any N; the model's N is not required to match).

    Coincident points under a singular kernel give ``+inf``; with
    ``with_pair=True`` the closest pair's indices are returned alongside.
    """
    ev = evaluate(model, _check(model, config))
    if with_pair:
        return ev.energy, (ev.closest_pair if ev.coincident and model.kernel.singular else None)
    return ev.energy


def energy_gradient(model: GasModel, config: ParticleConfiguration) -> np.ndarray:
    """Gradient of I_N with respect to every particle, shape (N, d)."""
    ev = evaluate(model, _check(model, config))
    if model.kernel.singular and ev.coincident:
        i, j = ev.closest_pair
        raise ZeroDivisionError(f"singular gradient: particles {i} and {j} coincide")
    return ev.gradient
