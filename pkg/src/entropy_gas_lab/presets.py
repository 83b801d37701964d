"""Shipped experiment configurations, one per named experiment."""

from __future__ import annotations

from .config import ExperimentConfig, parse_config
from .errors import UsageError

__all__ = ["PRESETS", "load_preset"]

# name -> (subcommand, config text)
PRESETS: dict[str, tuple[str, str]] = {
    "ginibre-circular-law": ("gas", """\
# complex Ginibre eigenvalues as a 2-D log-gas: uniform law on the unit disc
dim=2
n_particles=500
beta=N^2
potential=quadratic:1
kernel=log2d:2
steps=200000
burn_in=20000
thin=100
dt=auto
seed=1
"""),
    "gue-semicircle": ("gas", """\
# GUE eigenvalues as a log-gas on the line: semicircle on [-2, 2]
dim=1
n_particles=200
beta=N^2
potential=quadratic:0.5
kernel=log2d:2
steps=100000
burn_in=20000
thin=100
dt=auto
seed=1
"""),
    "coulomb-ball-3d": ("gas", """\
# 3-D Coulomb gas in a quadratic trap: uniform law on the ball of radius 2^(-1/3)
dim=3
n_particles=500
beta=N^2
potential=quadratic:1
kernel=coulomb
steps=100000
burn_in=20000
thin=100
dt=auto
seed=1
"""),
    "mm-infinity-free-energy": ("markov", """\
# M/M/inf queue with lambda = mu = 1 started from 10 customers
chain=mm_infinity
lambda=1
mu=1
truncation=30
init_state=10
t_max=10
t_points=101
seed=1
"""),
}


def load_preset(name: str, subcommand: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Parse a shipped preset, optionally checking its subcommand and applying overrides."""
    if name not in PRESETS:
        raise UsageError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    sub, text = PRESETS[name]
    if subcommand is not None and subcommand != sub:
        raise UsageError(f"preset {name} belongs to the {sub} subcommand, not {subcommand}")
    return parse_config(sub, text=text, overrides=overrides)
