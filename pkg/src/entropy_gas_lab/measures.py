"""Empirical measures of particle configurations and the statistics used to
compare them with predicted equilibria.

A configuration of N points in R^d is stored as an ``(N, d)`` array.  The
comparisons offered here (moments, radial Kolmogorov-Smirnov distance,
histograms) act on the radial or first-coordinate marginal of the empirical
measure ``(1/N) sum_i delta_{x_i}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import UsageError

__all__ = [
    "ParticleConfiguration",
    "RadialCdf",
    "MomentSequence",
    "uniform_ball_cdf",
    "empirical_moments",
    "radial_ks_distance",
    "build_histogram",
    "write_snapshot",
    "read_snapshot",
    "format_float",
]


def format_float(x: float) -> str:
    """Render a float with 17 significant digits (round-trip exact)."""
    return f"{float(x):.17g}"


@dataclass(frozen=True)
class ParticleConfiguration:
    """N points in R^d with the seed and step that produced them."""

    points: np.ndarray
    seed: int = 0
    step_index: int = 0

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise UsageError(f"points must have shape (N, d) with N, d >= 1, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise UsageError("points must be finite")
        if not 0 <= int(self.seed) < 2**64:
            raise UsageError("seed must be a 64-bit unsigned integer")
        if int(self.step_index) < 0:
            raise UsageError("step_index must be non-negative")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def radii(self) -> np.ndarray:
        return np.sqrt(np.sum(self.points**2, axis=1))

    @classmethod
    def merged(cls, configs: Sequence["ParticleConfiguration"]) -> "ParticleConfiguration":
        """Pool several configurations into one point cloud (the averaged empirical measure)."""
        if not configs:
            raise UsageError("nothing to merge")
        pts = np.concatenate([c.points for c in configs], axis=0)
        last = configs[-1]
        return cls(pts, seed=last.seed, step_index=last.step_index)


@dataclass(frozen=True)
class RadialCdf:
    """Cumulative distribution of |x| under a radially symmetric target law."""

    radius_support: float
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.asarray(self.evaluator(np.clip(r, 0.0, self.radius_support)), dtype=float)
        out = np.where(r >= self.radius_support, 1.0, out)
        return np.clip(np.where(r <= 0.0, 0.0, out), 0.0, 1.0)


def uniform_ball_cdf(radius: float, dimension: int) -> RadialCdf:
    """Radial CDF ``(r/R)^d`` of the uniform law on the ball of radius R in R^d."""
    if radius <= 0:
        raise UsageError("radius must be positive")
    return RadialCdf(float(radius), lambda r: (r / radius) ** dimension)


@dataclass(frozen=True)
class MomentSequence:
    orders: tuple
    values: tuple

    def __post_init__(self):
        orders = tuple(int(k) for k in self.orders)
        values = tuple(float(v) for v in self.values)
        if len(orders) != len(values):
            raise UsageError("orders and values differ in length")
        if any(b <= a for a, b in zip(orders, orders[1:])):
            raise UsageError("orders must be strictly increasing")
        if any(k < 0 for k in orders):
            raise UsageError("orders must be non-negative")
        object.__setattr__(self, "orders", orders)
        object.__setattr__(self, "values", values)

    def __getitem__(self, order: int) -> float:
        return self.values[self.orders.index(order)]

    def as_dict(self) -> dict:
        return dict(zip(self.orders, self.values))


def _marginal(config: ParticleConfiguration, kind: str) -> np.ndarray:
    if kind == "radial":
        return config.radii
    if kind in ("coordinate", "coordinate-first-axis"):
        return config.points[:, 0]
    raise UsageError(f"unknown moment kind {kind!r}")


def empirical_moments(config: ParticleConfiguration, orders: Sequence[int],
                      kind: str = "radial") -> MomentSequence:
    """Moments ``(1/N) sum_i s_i^k`` of the radial or first-coordinate marginal.

    Orders are sorted and de-duplicated; order 0 is exactly 1.
    """
    if len(orders) == 0:
        raise UsageError("orders must be non-empty")
    ks = sorted({int(k) for k in orders})
    if ks[0] < 0:
        raise UsageError("orders must be non-negative")
    s = _marginal(config, kind)
    values = [1.0 if k == 0 else float(np.mean(s**k)) for k in ks]
    return MomentSequence(tuple(ks), tuple(values))


def radial_ks_distance(config: ParticleConfiguration, target: RadialCdf) -> float:
    """Kolmogorov-Smirnov distance between the empirical CDF of |x_i| and ``target``.

    The empirical CDF is right-continuous; both one-sided limits at every
    sample radius are compared, so the supremum over all r is returned.
    """
    r = np.sort(config.radii)
    n = r.size
    upper = np.searchsorted(r, r, side="right") / n
    lower = np.searchsorted(r, r, side="left") / n
    f = target(r)
    return float(min(1.0, max(np.max(np.abs(upper - f)), np.max(np.abs(lower - f)))))


def build_histogram(config: ParticleConfiguration, axis="radial", bins: int = 10,
                    range: tuple = (0.0, 1.0)) -> list[tuple[float, int]]:
    """Equal-width histogram of a marginal over ``range``.

    ``axis`` is ``"radial"`` or ``("coordinate", index)``.  Bins are half-open
    ``[a, b)`` except the last, which is closed; points outside are dropped.
    """
    lo, hi = float(range[0]), float(range[1])
    if not lo < hi:
        raise UsageError("histogram range needs lo < hi")
    if int(bins) < 1:
        raise UsageError("bins must be >= 1")
    if axis == "radial":
        s = config.radii
    else:
        tag, index = axis
        if tag != "coordinate" or not 0 <= int(index) < config.dimension:
            raise UsageError(f"bad histogram axis {axis!r}")
        s = config.points[:, int(index)]
    counts, edges = np.histogram(s, bins=int(bins), range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])
    return [(float(c), int(k)) for c, k in zip(centers, counts)]


def write_snapshot(config: ParticleConfiguration, path) -> Path:
    """Write the snapshot text format (header line, then one point per line)."""
    path = Path(path)
    lines = [f"# d={config.dimension} N={config.n} seed={config.seed} step={config.step_index}"]
    lines.extend(" ".join(format_float(v) for v in row) for row in config.points)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_snapshot(path) -> ParticleConfiguration:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise UsageError(f"{path}: missing snapshot header")
    header = dict(tok.split("=", 1) for tok in text[0][1:].split())
    try:
        d, n = int(header["d"]), int(header["N"])
        seed, step = int(header["seed"]), int(header["step"])
    except (KeyError, ValueError) as exc:
        raise UsageError(f"{path}: malformed header {text[0]!r}") from exc
    rows = [line.split() for line in text[1:] if line.strip()]
    if len(rows) != n or any(len(row) != d for row in rows):
        raise UsageError(f"{path}: expected {n} rows of {d} numbers")
    return ParticleConfiguration(np.array(rows, dtype=float).reshape(n, d), seed=seed, step_index=step)
