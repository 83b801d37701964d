"""Entropy calculus for probability densities on a uniform 1-D grid.

Densities are sampled at nodes ``origin + i*step``.  Convolution is the exact
discrete convolution of the node masses, which keeps means and variances
additive; rescalings are interpolated back onto the input grid.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import xlogy

from .errors import UsageError

__all__ = [
    "GridDensity",
    "gaussian_density",
    "uniform_density",
    "entropy",
    "fisher_information",
    "convolve",
    "dilate",
    "clt_step",
    "heat_evolve",
    "de_bruijn_residual",
    "read_density_csv",
    "write_density_csv",
    "GAUSSIAN_ENTROPY",
]

GAUSSIAN_ENTROPY = 0.5 * np.log(2 * np.pi * np.e)
FISHER_FLOOR = 1e-300
MASS_TOL = 1e-9


@dataclass(frozen=True)
class GridDensity:
    origin: float
    step: float
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.ndim != 1 or v.size < 8:
            raise UsageError("a grid density needs at least 8 values")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise UsageError("density values must be finite and non-negative")
        if not self.step > 0:
            raise UsageError("grid step must be positive")
        mass = v.sum() * self.step
        if abs(mass - 1.0) > MASS_TOL:
            raise UsageError(f"density has mass {mass!r}; use GridDensity.normalized")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def normalized(cls, origin: float, step: float, values) -> "GridDensity":
        v = np.clip(np.asarray(values, dtype=float), 0.0, None)
        return cls(origin, step, v / (v.sum() * step))

    @classmethod
    def from_function(cls, func, lo: float, hi: float, step: float) -> "GridDensity":
        n = int(round((hi - lo) / step)) + 1
        x = lo + step * np.arange(n)
        return cls.normalized(lo, step, func(x))

    @property
    def x(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.values.size)

    @property
    def masses(self) -> np.ndarray:
        return self.values * self.step

    def mean(self) -> float:
        return float(np.sum(self.x * self.masses))

    def variance(self) -> float:
        m = self.mean()
        return float(np.sum((self.x - m) ** 2 * self.masses))

    def shifted(self, cells: int) -> "GridDensity":
        return GridDensity(self.origin + cells * self.step, self.step, self.values)


def gaussian_density(sigma: float = 1.0, step: float = 1 / 512, half_width: float = 8.0,
                     mean: float = 0.0) -> GridDensity:
    """Gaussian sampled on ``[mean - half_width*sigma, mean + half_width*sigma]``."""
    lo = mean - half_width * sigma
    return GridDensity.from_function(
        lambda x: np.exp(-0.5 * ((x - mean) / sigma) ** 2), lo, mean + half_width * sigma, step)


def uniform_density(a: float, b: float, step: float = 1 / 512, lo: float | None = None,
                    hi: float | None = None) -> GridDensity:
    """Uniform law on [a, b] sampled on a grid spanning [lo, hi] (default [a, b])."""
    lo = a if lo is None else lo
    hi = b if hi is None else hi
    eps = 1e-9 * step
    return GridDensity.from_function(lambda x: ((x >= a - eps) & (x <= b + eps)).astype(float), lo, hi, step)


def entropy(f: GridDensity) -> float:
    """Boltzmann entropy ``-sum f log f * step`` with 0 log 0 = 0."""
    return float(-np.sum(xlogy(f.values, f.values)) * f.step)


def fisher_information(f: GridDensity, *, with_flag: bool = False):
    """``sum (f')^2 / f * step`` with centered differences.

    Values are floored at 1e-300; with ``with_flag=True`` returns
    ``(value, floored)`` where ``floored`` reports whether the floor was hit
    at a node with non-zero slope.
    """
    fp = np.gradient(f.values, f.step)
    denom = np.maximum(f.values, FISHER_FLOOR)
    active = fp != 0
    floored = bool(np.any(active & (f.values < FISHER_FLOOR)))
    with np.errstate(over="ignore"):
        terms = np.where(active, fp**2 / denom, 0.0)
    value = float(np.sum(terms) * f.step)
    if floored and not with_flag:
        warnings.warn("fisher_information floored zero density values", RuntimeWarning, stacklevel=2)
    return (value, floored) if with_flag else value


def _same_step(f: GridDensity, g: GridDensity) -> None:
    if abs(f.step - g.step) > 1e-12 * f.step:
        raise UsageError(f"grid steps differ: {f.step!r} vs {g.step!r}")


def convolve(f: GridDensity, g: GridDensity) -> GridDensity:
    """Density of X + Y for independent X ~ f, Y ~ g (direct summation)."""
    _same_step(f, g)
    values = np.convolve(f.values, g.values) * f.step
    return GridDensity.normalized(f.origin + g.origin, f.step, values)


def dilate(f: GridDensity, alpha: float, onto: GridDensity | None = None) -> GridDensity:
    """Density ``alpha^-1 f(x / alpha)`` of ``alpha X``, interpolated onto ``onto``'s grid."""
    target = f if onto is None else onto
    x = target.x
    values = np.interp(x / alpha, f.x, f.values, left=0.0, right=0.0) / alpha
    return GridDensity.normalized(target.origin, target.step, values)


def clt_step(f: GridDensity) -> GridDensity:
    """One doubling of the CLT: density of ``(X1 + X2)/sqrt(2)`` on f's grid."""
    if abs(f.mean()) > 1e-6:
        raise UsageError(f"clt_step needs a centered density (mean {f.mean():.3e})")
    return dilate(convolve(f, f), 1 / np.sqrt(2.0), onto=f)


def _gaussian_kernel(t: float, step: float, max_cells: int) -> np.ndarray:
    # Truncate only where exp(-x^2/2t) underflows (about 38 sd), or at the grid
    # span; an earlier cut leaves a support edge that Fisher information sees.
    sd = np.sqrt(t)
    m = max(min(int(np.ceil(38.0 * sd / step)), max_cells), 1)
    x = step * np.arange(-m, m + 1)
    k = np.exp(-0.5 * x**2 / t)
    return k / (k.sum() * step)


def heat_evolve(f: GridDensity, t: float) -> GridDensity:
    """Density of ``X + sqrt(t) G``, G standard Gaussian, on f's grid."""
    if not t > 0:
        raise UsageError("t must be positive")
    kernel = _gaussian_kernel(t, f.step, f.values.size - 1)
    full = np.convolve(f.values, kernel) * f.step
    m = (kernel.size - 1) // 2
    return GridDensity.normalized(f.origin, f.step, full[m:m + f.values.size])


def de_bruijn_residual(f: GridDensity, t: float, h: float) -> float:
    """``|dS/dt - F/2|`` along the heat flow at time t, dS/dt by a centered difference."""
    if not t > 0:
        raise UsageError("t must be positive")
    if not 0 < h < t / 2:
        raise UsageError("need 0 < h < t/2")
    ds = (entropy(heat_evolve(f, t + h)) - entropy(heat_evolve(f, t - h))) / (2 * h)
    return abs(ds - 0.5 * fisher_information(heat_evolve(f, t)))


def write_density_csv(f: GridDensity, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "f"])
        for x, v in zip(f.x, f.values):
            w.writerow([f"{x:.17g}", f"{v:.17g}"])
    return path


def read_density_csv(path) -> GridDensity:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["x", "f"]:
        raise UsageError(f"{path}: density CSV must have header 'x,f'")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    x = data[:, 0]
    steps = np.diff(x)
    step = float(np.mean(steps))
    if np.max(np.abs(steps - step)) > 1e-9 * max(1.0, abs(step)):
        raise UsageError(f"{path}: x values are not uniformly spaced")
    return GridDensity.normalized(float(x[0]), step, data[:, 1])
