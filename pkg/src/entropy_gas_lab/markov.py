"""Free energy of finite Markov chains.

For a chain with invariant law ``mu_*`` the discrete Helmholtz free energy of
a law ``mu`` is the relative entropy ``sum_x Phi(mu(x)/mu_*(x)) mu_*(x)`` with
``Phi(u) = u log u``.  It is non-increasing along ``mu P^n`` (discrete time)
and along ``mu exp(tL)`` (continuous time).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.special import xlog1py
from scipy.stats import poisson

from .errors import DomainError, NumericError, StructuralError, UsageError

__all__ = [
    "FiniteChain",
    "prob_vector",
    "invariant_measure",
    "relative_entropy",
    "total_variation",
    "free_energy_trajectory",
    "ct_evolve",
    "free_energy_derivatives",
    "mm_infinity_generator",
    "decay_rate_regression",
    "read_chain",
    "write_chain",
    "random_kernel",
    "random_generator",
]

ROW_TOL = 1e-12
ZERO_EDGE = 1e-14
POISSON_TAIL = 1e-14
DENSE_LIMIT = 2000


@dataclass(frozen=True)
class FiniteChain:
    """Markov kernel (``kind="kernel"``) or generator (``kind="generator"``) on S states."""

    matrix: np.ndarray
    kind: str = "kernel"
    states: tuple = ()

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise UsageError(f"chain matrix must be square with S >= 2, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise UsageError("chain matrix must be finite")
        rows = m.sum(axis=1)
        if self.kind == "kernel":
            if np.any(m < 0):
                raise UsageError("kernel entries must be non-negative")
            if np.max(np.abs(rows - 1.0)) > ROW_TOL:
                raise UsageError("kernel rows must sum to 1")
        elif self.kind == "generator":
            off = m - np.diag(np.diag(m))
            if np.any(off < 0):
                raise UsageError("generator off-diagonal entries must be non-negative")
            if np.max(np.abs(rows)) > ROW_TOL:
                raise UsageError("generator rows must sum to 0")
        else:
            raise UsageError(f"unknown chain kind {self.kind!r}")
        states = tuple(self.states) if self.states else tuple(range(m.shape[0]))
        if len(states) != m.shape[0]:
            raise UsageError("number of state labels does not match the matrix")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "states", states)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def prob_vector(weights, size: int | None = None) -> np.ndarray:
    """Validate and return a probability vector as a float array."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or (size is not None and w.size != size):
        raise UsageError(f"probability vector of length {size} expected, got shape {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise UsageError("probability weights must be finite and non-negative")
    if abs(w.sum() - 1.0) > ROW_TOL * max(1, w.size):
        raise UsageError(f"probability weights sum to {w.sum()!r}, not 1")
    return w


def _check_irreducible(chain: FiniteChain) -> None:
    adj = np.abs(chain.matrix) > ZERO_EDGE
    np.fill_diagonal(adj, False)
    ncomp, labels = connected_components(sparse.csr_matrix(adj), directed=True, connection="strong")
    if ncomp > 1:
        # Report a class that cannot be reached from state 0's class.
        other = sorted(i for i in range(chain.size) if labels[i] != labels[0])
        names = [chain.states[i] for i in other]
        raise StructuralError(f"chain is reducible: states {names} are not in the communicating class of {chain.states[0]}")


def _gth(rates: np.ndarray) -> np.ndarray:
    # Grassmann-Taksar-Heyman state reduction: only the off-diagonal rates are
    # used and nothing is subtracted, so tiny invariant masses keep full
    # relative accuracy and stay positive.
    a = np.array(rates, dtype=float)
    np.fill_diagonal(a, 0.0)
    n = a.shape[0]
    for k in range(n - 1, 0, -1):
        out = a[k, :k].sum()
        a[:k, k] /= out
        a[:k, :k] += np.outer(a[:k, k], a[k, :k])
    mu = np.zeros(n)
    mu[0] = 1.0
    for k in range(1, n):
        mu[k] = mu[:k] @ a[:k, k]
    return mu


def invariant_measure(chain: FiniteChain) -> np.ndarray:
    """Invariant law of an irreducible chain.

    Dense direct solve by state reduction (exact up to rounding, entrywise
    positive); power iteration is used above 2000 states.
    """
    _check_irreducible(chain)
    s = chain.size
    q = chain.matrix - np.eye(s) if chain.kind == "kernel" else chain.matrix
    if s <= DENSE_LIMIT:
        mu = _gth(chain.matrix)
    else:
        if chain.kind == "kernel":
            p = 0.5 * (np.eye(s) + chain.matrix)  # lazy version, aperiodic
        else:
            rate = np.max(-np.diag(chain.matrix))
            p = np.eye(s) + chain.matrix / (2.0 * rate)
        mu = np.full(s, 1.0 / s)
        for _ in range(100_000):
            nxt = mu @ p
            if np.sum(np.abs(nxt - mu)) < 1e-14:
                mu = nxt
                break
            mu = nxt
    mu = np.where(np.abs(mu) < 1e-300, 0.0, mu)
    mu = mu / mu.sum()
    residual = float(np.sum(np.abs(mu @ q)))
    if residual > 1e-10 or np.any(mu <= 0):
        raise NumericError(f"invariant measure solve did not converge (residual {residual:.3e})")
    return mu


def relative_entropy(mu, ref) -> float:
    """``sum_x Phi(mu(x)/ref(x)) ref(x)``; ``inf`` if mu charges a state where ref vanishes."""
    mu = np.asarray(mu, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if np.any((ref == 0) & (mu > 0)):
        return float("inf")
    support = ref > 0
    # Phi(1 + d) = (1 + d) log(1 + d) - d is summed in this form because each
    # term is non-negative and stays accurate (about d^2/2) when mu is close to ref.
    r = ref[support]
    d = (mu[support] - r) / r
    value = float(np.sum(r * (xlog1py(1.0 + d, d) - d)))
    return max(value, 0.0)


def total_variation(mu, nu) -> float:
    return float(np.sum(np.abs(np.asarray(mu, dtype=float) - np.asarray(nu, dtype=float))))


def free_energy_trajectory(chain: FiniteChain, mu0, steps: int) -> list[float]:
    """``[KL(mu0 P^n | mu_*) for n = 0..steps]`` for a discrete-time kernel."""
    if chain.kind != "kernel":
        raise UsageError("free_energy_trajectory needs a discrete-time kernel")
    if steps < 1:
        raise UsageError("steps must be positive")
    mu_star = invariant_measure(chain)
    mu = prob_vector(mu0, chain.size)
    out = [relative_entropy(mu, mu_star)]
    for _ in range(steps):
        mu = mu @ chain.matrix
        out.append(relative_entropy(mu, mu_star))
    return out


def _uniformized(chain: FiniteChain):
    rate = float(np.max(-np.diag(chain.matrix)))
    if rate == 0.0:
        return 0.0, np.eye(chain.size)
    return rate, np.eye(chain.size) + chain.matrix / rate


def ct_evolve(chain: FiniteChain, mu0, t: float) -> np.ndarray:
    """``mu0 exp(tL)`` by uniformization.

    With ``q = max_x |L(x,x)|`` and ``K = I + L/q``, the law at time t is the
    Poisson(qt) mixture of ``mu0 K^k``, truncated once the tail drops below 1e-14.
    """
    if chain.kind != "generator":
        raise UsageError("ct_evolve needs a continuous-time generator")
    if t < 0:
        raise UsageError("t must be non-negative")
    mu = prob_vector(mu0, chain.size).copy()
    rate, k = _uniformized(chain)
    lam = rate * t
    if lam == 0.0:
        return mu
    kmax = int(poisson.isf(POISSON_TAIL, lam)) + 1
    kmin = max(0, int(poisson.ppf(POISSON_TAIL, lam)) - 1)
    weights = poisson.pmf(np.arange(kmax + 1), lam)
    out = np.zeros_like(mu)
    for j in range(kmax + 1):
        if j >= kmin:
            out += weights[j] * mu
        mu = mu @ k
    out = np.clip(out, 0.0, None)
    return out / out.sum()


def free_energy_derivatives(chain: FiniteChain, mu_t) -> tuple[float, float]:
    """First and second time derivatives of the free energy at the law ``mu_t``.

    With ``g = mu_t / mu_*`` and ``L*`` the adjoint of L in l2(mu_*):

        first  = sum_x [Phi'(g) L*g](x) mu_*(x)
        second = sum_x [g LL log(g) + (L*g)^2 / g](x) mu_*(x)
    """
    if chain.kind != "generator":
        raise UsageError("free_energy_derivatives needs a continuous-time generator")
    mu_t = prob_vector(mu_t, chain.size)
    if np.any(mu_t <= 0):
        raise DomainError("mu_t has zero entries; smooth it by mixing 1e-12 of the invariant law")
    lmat = chain.matrix
    mu_star = invariant_measure(chain)
    g = mu_t / mu_star
    lstar_g = (mu_t @ lmat) / mu_star
    first = float(np.sum((1.0 + np.log(g)) * lstar_g * mu_star))
    ll_log_g = lmat @ (lmat @ np.log(g))
    second = float(np.sum((g * ll_log_g + lstar_g**2 / g) * mu_star))
    return first, second


def mm_infinity_generator(lam: float, mu: float, truncation: int) -> FiniteChain:
    """M/M/inf queue on {0..K}: up-rate lam (suppressed at K), down-rate x*mu."""
    if truncation < 2:
        raise UsageError("truncation K must be >= 2")
    if lam <= 0 or mu <= 0:
        raise UsageError("rates must be positive")
    size = truncation + 1
    m = np.zeros((size, size))
    for x in range(size):
        if x < truncation:
            m[x, x + 1] = lam
        if x > 0:
            m[x, x - 1] = x * mu
        m[x, x] = -m[x].sum()
    return FiniteChain(m, kind="generator")


def decay_rate_regression(trajectory: Sequence[float], dt: float) -> float:
    """Least-squares rate from ``log A_n ~ const - 2 rho n dt`` (diagnostic only)."""
    y = np.asarray(trajectory, dtype=float)
    if y.size < 3:
        raise UsageError("need at least 3 trajectory values")
    if dt <= 0:
        raise UsageError("dt must be positive")
    if np.any(y <= 0):
        raise DomainError("trajectory values must be strictly positive")
    t = dt * np.arange(y.size)
    slope = np.polyfit(t, np.log(y), 1)[0]
    return float(-slope / 2.0)


def random_kernel(rng: np.random.Generator, size: int) -> FiniteChain:
    """Dense random kernel (all entries positive, hence irreducible and aperiodic)."""
    m = rng.random((size, size)) + 1e-3
    m /= m.sum(axis=1, keepdims=True)
    m[:, -1] = 1.0 - m[:, :-1].sum(axis=1)
    return FiniteChain(m, kind="kernel")


def random_generator(rng: np.random.Generator, size: int) -> FiniteChain:
    m = rng.random((size, size)) + 1e-3
    np.fill_diagonal(m, 0.0)
    np.fill_diagonal(m, -m.sum(axis=1))
    return FiniteChain(m, kind="generator")


def read_chain(path) -> FiniteChain:
    """Parse the chain file format: ``kind=...``, ``S=<n>``, then S rows."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if len(lines) < 2 or not lines[0].startswith("kind=") or not lines[1].startswith("S="):
        raise UsageError(f"{path}: chain file must start with 'kind=...' and 'S=...' lines")
    kind = lines[0].split("=", 1)[1].strip()
    try:
        size = int(lines[1].split("=", 1)[1])
        rows = [[float(v) for v in ln.split()] for ln in lines[2:]]
    except ValueError as exc:
        raise UsageError(f"{path}: non-numeric chain entry") from exc
    if len(rows) != size or any(len(r) != size for r in rows):
        raise UsageError(f"{path}: expected {size} rows of {size} numbers")
    return FiniteChain(np.array(rows), kind=kind)


def write_chain(chain: FiniteChain, path) -> Path:
    path = Path(path)
    rows = [" ".join(f"{v:.17g}" for v in row) for row in chain.matrix]
    path.write_text("\n".join([f"kind={chain.kind}", f"S={chain.size}", *rows]) + "\n")
    return path
