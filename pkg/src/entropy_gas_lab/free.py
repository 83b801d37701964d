"""Moment calculus of the semicircle, arcsine and Kesten-McKay laws, and the
logarithmic energy ``chi(mu) = iint log|x - y| dmu(x) dmu(y)``.

Kesten-McKay moments are computed two independent ways: Gauss-Legendre
quadrature of the density, and exact counting of closed walks on the
d-regular tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Callable

import numpy as np
from scipy.signal import fftconvolve

from .clt import GridDensity
from .errors import CountOverflowError, UsageError

__all__ = [
    "catalan",
    "MomentFamily",
    "reference_moment",
    "kesten_mckay_density",
    "tree_walk_count",
    "free_clt_scaled_moment",
    "PlanarDensity",
    "LogEnergy",
    "log_energy",
    "log_potential",
    "lattice_pair_sum",
]

MAX_CATALAN = 30
MAX_WALK = 40
KM_NODES = 400


def catalan(m: int) -> int:
    """Catalan number ``binom(2m, m) / (m + 1)``, exact for 0 <= m <= 30."""
    if m < 0:
        raise UsageError("m must be non-negative")
    if m > MAX_CATALAN:
        raise CountOverflowError(f"catalan({m}) exceeds the 64-bit range supported (m <= 30)")
    return comb(2 * m, m) // (m + 1)


@dataclass(frozen=True)
class MomentFamily:
    """``semicircle``, ``arcsine`` or ``kesten_mckay`` (with tree degree ``d >= 3``)."""

    tag: str
    d: int | None = None

    def __post_init__(self):
        if self.tag not in ("semicircle", "arcsine", "kesten_mckay"):
            raise UsageError(f"unknown moment family {self.tag!r}")
        if self.tag == "kesten_mckay" and (self.d is None or self.d < 3):
            raise UsageError("kesten_mckay needs d >= 3 (d = 2 is the arcsine law)")

    @property
    def support_radius(self) -> float:
        if self.tag == "kesten_mckay":
            return 2.0 * np.sqrt(self.d - 1)
        return 2.0


def kesten_mckay_density(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 2 * np.sqrt(d - 1)
    root = np.sqrt(np.where(inside, 4 * (d - 1) - x**2, 0.0))
    return np.where(inside, d * root / (2 * np.pi * (d**2 - x**2)), 0.0)


@lru_cache(maxsize=None)
def _km_rule(d: int):
    # x = 2 sqrt(d-1) sin(theta) turns the square-root edges into cos^2 factors.
    theta, w = np.polynomial.legendre.leggauss(KM_NODES)
    theta = theta * np.pi / 2
    w = w * np.pi / 2
    a = 2.0 * np.sqrt(d - 1)
    x = a * np.sin(theta)
    weights = w * d * (a * np.cos(theta)) ** 2 / (2 * np.pi * (d**2 - x**2))
    return x, weights


def reference_moment(family: MomentFamily, k: int) -> float:
    """k-th moment of the family's law; odd moments are exactly 0."""
    if k < 0:
        raise UsageError("k must be non-negative")
    if k % 2:
        return 0.0
    m = k // 2
    if family.tag == "semicircle":
        return float(comb(2 * m, m) // (m + 1))
    if family.tag == "arcsine":
        return float(comb(2 * m, m))
    x, w = _km_rule(family.d)
    return float(np.sum(w * x**k))


def tree_walk_count(d: int, length: int) -> int:
    """Closed walks of the given length from the root of the infinite d-regular tree.

    Dynamic programming over the distance from the root: from the root there
    are d ways out; from distance k >= 1, one way in and d - 1 ways out.
    """
    if d < 2:
        raise UsageError("d must be >= 2")
    if length < 0:
        raise UsageError("length must be non-negative")
    if length > MAX_WALK:
        raise CountOverflowError(f"walk length {length} exceeds the supported maximum {MAX_WALK}")
    if length % 2:
        return 0
    counts = [1] + [0] * (length + 1)
    for _ in range(length):
        nxt = [0] * (length + 2)
        nxt[1] += d * counts[0]
        for k in range(1, length + 1):
            c = counts[k]
            if c:
                nxt[k - 1] += c
                nxt[k + 1] += (d - 1) * c
        counts = nxt
    return counts[0]


def free_clt_scaled_moment(d: int, m: int) -> float:
    """``tree_walk_count(d, 2m) / (d - 1)^m``, which tends to ``catalan(m)`` as d grows."""
    if d < 3:
        raise UsageError("d must be >= 3")
    return float(Fraction(tree_walk_count(d, 2 * m), (d - 1) ** m))


@dataclass(frozen=True)
class PlanarDensity:
    """Probability weights on a uniform square lattice of cells.

    ``weights[i, j]`` is the mass of the cell whose center is
    ``(x0 + (j + 0.5) h, y0 + (i + 0.5) h)``.
    """

    x0: float
    y0: float
    h: float
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, copy=True)
        if w.ndim != 2 or not np.all(np.isfinite(w)) or np.any(w < 0):
            raise UsageError("planar weights must be a finite non-negative 2-D array")
        if abs(w.sum() - 1.0) > 1e-9:
            raise UsageError("planar weights must sum to 1")
        if not self.h > 0:
            raise UsageError("cell size must be positive")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_function(cls, density: Callable, half_width: float, n: int = 256,
                      subsample: int = 4) -> "PlanarDensity":
        """Discretize ``density(x, y)`` on ``[-half_width, half_width]^2`` with n^2 cells.

        Cell masses average the density over ``subsample^2`` points per cell.
        """
        h = 2.0 * half_width / n
        offsets = (np.arange(subsample) + 0.5) / subsample
        fine = -half_width + h * (np.arange(n)[:, None] + offsets[None, :]).ravel()
        xx, yy = np.meshgrid(fine, fine)
        vals = np.asarray(density(xx, yy), dtype=float)
        w = vals.reshape(n, subsample, n, subsample).sum(axis=(1, 3))
        if w.sum() <= 0:
            raise UsageError("density has no mass on the grid")
        if np.any(w[0, :]) or np.any(w[-1, :]) or np.any(w[:, 0]) or np.any(w[:, -1]):
            raise UsageError("bounding box must strictly contain the support")
        return cls(-half_width, -half_width, h, w / w.sum())

    @property
    def shape(self):
        return self.weights.shape

    def centers(self):
        ny, nx = self.shape
        cx = self.x0 + self.h * (np.arange(nx) + 0.5)
        cy = self.y0 + self.h * (np.arange(ny) + 0.5)
        return np.meshgrid(cx, cy)

    @property
    def cell_diameter(self) -> float:
        return self.h * np.sqrt(2.0)

    def second_moment(self) -> float:
        xx, yy = self.centers()
        return float(np.sum(self.weights * (xx**2 + yy**2)))


@dataclass(frozen=True)
class LogEnergy:
    """Off-diagonal lattice sum, diagonal self-cell correction, and their total."""

    off_diagonal: float
    diagonal: float
    degenerate: bool = False

    @property
    def total(self) -> float:
        return self.off_diagonal + self.diagonal


def lattice_pair_sum(weights: np.ndarray, spacing: float, kernel: Callable[[np.ndarray], np.ndarray]):
    """``(sum_{i != j} w_i w_j k(|c_i - c_j|), sum_i w_i^2)`` on a uniform lattice.

    The kernel depends only on lattice offsets, so the double sum is a
    correlation of the weights with the tabulated kernel, computed by FFT.
    """
    w = np.asarray(weights, dtype=float)
    axes = [np.arange(-(n - 1), n) * spacing for n in w.shape]
    grids = np.meshgrid(*axes, indexing="ij")
    dist = np.sqrt(sum(g**2 for g in grids))
    center = tuple(n - 1 for n in w.shape)
    dist[center] = 1.0
    table = np.asarray(kernel(dist), dtype=float)
    table[center] = 0.0
    potential = fftconvolve(w, table, mode="full")
    window = tuple(slice(n - 1, 2 * n - 1) for n in w.shape)
    off = float(np.sum(w * potential[window]))
    return off, float(np.sum(w**2))


def log_energy(mu) -> LogEnergy:
    """``chi(mu)`` for a :class:`PlanarDensity` or 1-D :class:`GridDensity`.

    Cells interact through ``log`` of the distance between their centers.  A
    cell's interaction with itself uses ``log(0.5 * cell_diameter)`` weighted
    by its squared mass; this approximation is reported as ``diagonal``.
    """
    if isinstance(mu, PlanarDensity):
        weights, spacing, diameter = mu.weights, mu.h, mu.cell_diameter
    elif isinstance(mu, GridDensity):
        weights, spacing, diameter = mu.masses, mu.step, mu.step
    else:
        raise UsageError(f"log_energy expects a PlanarDensity or GridDensity, got {type(mu).__name__}")
    if np.count_nonzero(weights) <= 1:
        return LogEnergy(float("-inf"), float("-inf"), degenerate=True)
    off, sq = lattice_pair_sum(weights, spacing, np.log)
    return LogEnergy(off, sq * float(np.log(0.5 * diameter)))


def log_potential(mu: PlanarDensity, z) -> float:
    """``U_mu(z) = -sum_cells w log|z - c|``; the cell containing z uses ``log(0.5 * diameter)``."""
    zx, zy = float(z[0]), float(z[1])
    xx, yy = mu.centers()
    dist = np.hypot(xx - zx, yy - zy)
    j = int(np.floor((zx - mu.x0) / mu.h))
    i = int(np.floor((zy - mu.y0) / mu.h))
    ny, nx = mu.shape
    with np.errstate(divide="ignore"):
        logs = np.log(dist)
    for ii in (i, i - 1) if (zy - mu.y0) / mu.h == i else (i,):
        for jj in (j, j - 1) if (zx - mu.x0) / mu.h == j else (j,):
            if 0 <= ii < ny and 0 <= jj < nx and dist[ii, jj] < 0.5 * mu.cell_diameter:
                logs[ii, jj] = np.log(0.5 * mu.cell_diameter)
    mask = mu.weights > 0
    return float(-np.sum(mu.weights[mask] * logs[mask]))
