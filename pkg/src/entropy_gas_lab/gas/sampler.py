"""Metropolis-adjusted Langevin sampling of the Boltzmann measure
``exp(-beta I_N(x)) dx``.

The proposal is the Euler step of ``dX = -grad I_N dt + sqrt(2/beta) dB``,

    y = x - dt grad I_N(x) + sqrt(2 dt / beta) xi,

corrected by the Metropolis-Hastings ratio, so the target is exactly
invariant whatever dt is.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericError, UsageError
from ..measures import ParticleConfiguration
from .model import EnergyEvaluation, GasModel, evaluate

__all__ = ["SamplerState", "SamplerResult", "mala_step", "run_sampler", "initial_configuration",
           "TARGET_ACCEPTANCE", "ACCEPTANCE_BAND"]

TARGET_ACCEPTANCE = 0.574
ACCEPTANCE_BAND = (0.3, 0.8)
TUNE_WINDOW = 50
MAX_JITTER = 100


@dataclass
class SamplerState:
    """Current position of one chain together with its cached energy and gradient."""

    x: np.ndarray
    eval: EnergyEvaluation

    @classmethod
    def at(cls, model: GasModel, x: np.ndarray) -> "SamplerState":
        x = np.array(x, dtype=float)
        return cls(x, evaluate(model, x))


def _log_q(y: np.ndarray, x: np.ndarray, grad_x: np.ndarray, dt: float, beta: float) -> float:
    # log density (up to a constant) of proposing y from x
    r = y - x + dt * grad_x
    return -beta * float(np.sum(r * r)) / (4.0 * dt)


def _advance(model: GasModel, state: SamplerState, dt: float, rng: np.random.Generator,
             descent: bool) -> bool:
    beta = model.beta
    x, cur = state.x, state.eval
    if descent:
        y = x - dt * cur.gradient
    else:
        y = x - dt * cur.gradient + np.sqrt(2.0 * dt / beta) * rng.standard_normal(x.shape)
    prop = evaluate(model, y)
    if not np.isfinite(prop.energy) or prop.coincident and model.kernel.singular:
        if not descent:
            rng.random()
        return False
    if descent:
        accept = prop.energy <= cur.energy
    else:
        log_ratio = (-beta * (prop.energy - cur.energy)
                     + _log_q(x, y, prop.gradient, dt, beta) - _log_q(y, x, cur.gradient, dt, beta))
        accept = np.log(rng.random()) < log_ratio
    if accept:
        state.x, state.eval = y, prop
    return bool(accept)


def mala_step(model: GasModel, config: ParticleConfiguration, dt: float, rng: np.random.Generator,
              *, descent: bool = False) -> tuple[ParticleConfiguration, bool]:
    """One MALA transition from ``config``; returns the new configuration and whether it moved.

    With ``descent=True`` the noise is switched off and the deterministic
    gradient step is accepted only if it does not increase I_N.
    """
    if not dt > 0:
        raise UsageError("dt must be positive")
    if config.dimension != model.dimension:
        raise UsageError("configuration and model dimensions differ")
    state = SamplerState.at(model, config.points)
    accepted = _advance(model, state, dt, rng, descent)
    out = ParticleConfiguration(state.x, seed=config.seed, step_index=config.step_index + 1)
    return out, accepted


def initial_configuration(model: GasModel, rng: np.random.Generator, sigma: float = 1.0,
                          snapshot: ParticleConfiguration | None = None) -> np.ndarray:
    """Gaussian cloud of standard deviation ``sigma`` (or a given snapshot), jittered off coincidences."""
    n, d = model.n_particles, model.dimension
    if snapshot is not None:
        if snapshot.points.shape != (n, d):
            raise UsageError(f"snapshot has shape {snapshot.points.shape}, model needs {(n, d)}")
        x = np.array(snapshot.points)
        scale = max(float(np.std(x)), 1.0) * 1e-9
    else:
        if not sigma > 0:
            raise UsageError("initial sigma must be positive")
        x = sigma * rng.standard_normal((n, d))
        scale = sigma * 1e-9
    for _ in range(MAX_JITTER):
        ev = evaluate(model, x)
        if np.isfinite(ev.energy) and not (ev.coincident and model.kernel.singular):
            return x
        x = x + scale * rng.standard_normal(x.shape)
    raise NumericError(f"could not separate coincident initial points after {MAX_JITTER} jitters")


@dataclass
class SamplerResult:
    """Snapshots and diagnostics of one chain."""

    snapshots: list
    energy_trace: np.ndarray  # columns: step, energy, accepted
    dt: float
    acceptance_rate: float
    burn_in_acceptance: float
    tuned: bool
    seed: int
    extras: dict = field(default_factory=dict)

    @property
    def merged(self) -> ParticleConfiguration:
        return ParticleConfiguration.merged(self.snapshots)


def auto_dt(model: GasModel, sigma: float) -> float:
    """Starting step: proposal noise about 1e-3 of the initial cloud width per coordinate."""
    noise = 1e-3 * sigma
    return 0.5 * model.beta * noise**2


def run_sampler(model: GasModel, steps: int, burn_in: int, thin: int, seed: int, *,
                init_sigma: float = 1.0, init_snapshot: ParticleConfiguration | None = None,
                dt: float | None = None, descent: bool = False) -> SamplerResult:
    """Run one MALA chain and collect a snapshot every ``thin`` steps after burn-in.

    ``dt=None`` tunes the step on windows of 50 steps during burn-in toward
    acceptance 0.574 and then freezes it.  The run is a deterministic function
    of its arguments in sequential mode.
    """
    steps, burn_in, thin = int(steps), int(burn_in), int(thin)
    if steps < 1 or burn_in < 0 or thin < 1:
        raise UsageError("need steps >= 1, burn_in >= 0, thin >= 1")
    if steps <= burn_in:
        raise UsageError("steps must exceed burn_in")
    if not 0 <= int(seed) < 2**64:
        raise UsageError("seed must be a 64-bit unsigned integer")
    if dt is not None and not dt > 0:
        raise UsageError("dt must be positive")
    rng = np.random.default_rng(int(seed))
    x0 = initial_configuration(model, rng, init_sigma, init_snapshot)
    state = SamplerState.at(model, x0)
    tuned = dt is None
    step_size = auto_dt(model, init_sigma) if tuned else float(dt)

    trace = np.empty((steps + 1, 3))
    trace[0] = (0, state.eval.energy, 1)
    snapshots = []
    window = 0
    burn_accepts = 0
    post_accepts = 0
    for step in range(1, steps + 1):
        acc = _advance(model, state, step_size, rng, descent)
        trace[step] = (step, state.eval.energy, acc)
        if step <= burn_in:
            burn_accepts += acc
            window += acc
            if tuned and step % TUNE_WINDOW == 0:
                rate = window / TUNE_WINDOW
                step_size *= float(np.exp(2.0 * (rate - TARGET_ACCEPTANCE)))
                window = 0
        else:
            post_accepts += acc
            if (step - burn_in) % thin == 0:
                snapshots.append(ParticleConfiguration(state.x, seed=int(seed), step_index=step))
    return SamplerResult(
        snapshots=snapshots,
        energy_trace=trace,
        dt=step_size,
        acceptance_rate=post_accepts / (steps - burn_in),
        burn_in_acceptance=burn_accepts / burn_in if burn_in else float("nan"),
        tuned=tuned,
        seed=int(seed),
    )
