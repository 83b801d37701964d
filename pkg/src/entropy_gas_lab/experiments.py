"""Experiment drivers behind the CLI: each turns a validated configuration into
a :class:`ReportBundle` and writes its artifacts under ``out_dir``."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .clt import (GAUSSIAN_ENTROPY, clt_step, de_bruijn_residual, entropy, fisher_information,
                  gaussian_density, read_density_csv, uniform_density, write_density_csv)
from .config import ExperimentConfig, render_config
from .errors import EntropyLabError, UsageError
from .free import (MomentFamily, PlanarDensity, catalan, free_clt_scaled_moment, log_energy,
                   reference_moment, tree_walk_count)
from .gas.equilibrium import default_probes, equilibrium_prediction, lagrange_residual
from .gas.model import ConfinementPotential, GasModel, InteractionKernel, configuration_energy
from .gas.sampler import run_sampler
from .markov import (ct_evolve, decay_rate_regression, free_energy_derivatives, free_energy_trajectory,
                     invariant_measure, mm_infinity_generator, read_chain, relative_entropy,
                     total_variation)
from .measures import empirical_moments, radial_ks_distance, read_snapshot, write_snapshot
from .report import Metric, ReportBundle, write_csv, write_report

__all__ = ["run_experiment", "build_gas_model", "ensure_writable"]


def ensure_writable(out_dir: Path) -> None:
    """Fail before any computation if ``out_dir`` cannot hold the outputs."""
    out_dir.mkdir(parents=True, exist_ok=True)
    fd, probe = tempfile.mkstemp(dir=out_dir, prefix=".probe.")
    os.close(fd)
    os.unlink(probe)


def build_gas_model(params: dict) -> GasModel:
    d = params["dim"]
    pot = params["potential"]
    if pot[0] == "quadratic":
        potential = ConfinementPotential("quadratic", pot[1])
    else:
        potential = ConfinementPotential("radial_power", pot[2], power=pot[1])
    ker = params["kernel"]
    if ker[0] == "riesz":
        kernel = InteractionKernel("riesz", d, alpha=ker[1])
    elif ker[0] == "log2d":
        kernel = InteractionKernel("log2d", d, scale=ker[1])
    else:
        kernel = InteractionKernel(ker[0], d)
    return GasModel(d, params["n_particles"], float(params["beta"]), potential, kernel)


def _relative(value: float, target: float, tol: float) -> Metric:
    return Metric(float(value), "within", float(tol * abs(target)), float(target))


def _gas(cfg: ExperimentConfig, out: Path, bundle: ReportBundle) -> None:
    p = cfg.params
    model = build_gas_model(p)
    prediction = equilibrium_prediction(model)
    init = read_snapshot(p["init_snapshot"]) if p["init_snapshot"] else None
    res = run_sampler(model, p["steps"], p["burn_in"], p["thin"], cfg.seed, init_sigma=p["init_sigma"],
                      init_snapshot=init, dt=None if p["dt"] == "auto" else p["dt"])

    trace = res.energy_trace
    write_csv(out / "energy_trace.csv", ["step", "energy", "accepted"],
              ((int(s), float(e), int(a)) for s, e, a in trace))
    bundle.artifacts.append("energy_trace.csv")
    if p["write_snapshots"] == "all":
        (out / "snapshots").mkdir(exist_ok=True)
        for snap in res.snapshots:
            name = f"snapshots/step_{snap.step_index:09d}.txt"
            write_snapshot(snap, out / name)
            bundle.artifacts.append(name)
    else:
        write_snapshot(res.snapshots[-1], out / "snapshot_last.txt")
        bundle.artifacts.append("snapshot_last.txt")

    rates = [configuration_energy(model, s) for s in res.snapshots]
    write_csv(out / "rate_function_trace.csv", ["step", "rate_function"],
              ((s.step_index, float(r)) for s, r in zip(res.snapshots, rates)))
    bundle.artifacts.append("rate_function_trace.csv")

    merged = res.merged
    bundle.metrics["acceptance_rate"] = Metric(res.acceptance_rate, "between", tuple(p["acceptance_band"]))
    bundle.metrics["energy_finite"] = Metric(bool(np.all(np.isfinite(trace[:, 1]))), "true")
    bundle.diagnostics.update({
        "prediction": prediction.kind,
        "dt": res.dt,
        "dt_tuned": res.tuned,
        "burn_in_acceptance": res.burn_in_acceptance,
        "cooling_satisfied": model.cooling_satisfied,
        "beta": model.beta,
        "snapshots": len(res.snapshots),
        "initial_energy": float(trace[0, 1]),
        "final_energy": float(trace[-1, 1]),
    })
    if prediction.kind == "unknown":
        m = empirical_moments(merged, [2, 4], kind="radial")
        bundle.diagnostics.update({"m2_radial": m[2], "m4_radial": m[4]})
        return

    c = model.potential.coefficient
    m2_target = prediction.second_radial_moment()
    minimum = 0.5 * (prediction.modified_robin_constant + c * m2_target)
    bundle.diagnostics.update({
        "predicted_radius": prediction.radius,
        "modified_robin_constant": prediction.modified_robin_constant,
        "predicted_minimum": minimum,
    })
    bundle.metrics["rate_function_trace"] = Metric(float(np.mean(rates)), "within", p["rate_tolerance"], minimum)

    if prediction.kind == "semicircle":
        m = empirical_moments(merged, [2, 4], kind="coordinate")
        bundle.metrics["m2_coordinate"] = _relative(m[2], prediction.moment(2), p["m2_tolerance"])
        bundle.metrics["m4_coordinate"] = _relative(m[4], prediction.moment(4), p["m4_tolerance"])
        return

    ks = radial_ks_distance(merged, prediction.radial_cdf)
    m2 = empirical_moments(merged, [2], kind="radial")[2]
    inside = float(np.mean(merged.radii <= p["support_factor"] * prediction.radius))
    bundle.metrics["radial_ks"] = Metric(ks, "<", p["ks_tolerance"])
    bundle.metrics["m2_radial"] = _relative(m2, m2_target, p["m2_tolerance"])
    bundle.metrics["support_fraction"] = Metric(inside, ">=", p["support_fraction"])
    lag = lagrange_residual(merged, model, prediction, default_probes(prediction, p["probes"]))
    bundle.metrics["lagrange_inside_variation"] = Metric(lag.inside_variation, "<", p["lagrange_inside_tolerance"])
    bundle.metrics["lagrange_outside_violation"] = Metric(lag.outside_violation, "<",
                                                          p["lagrange_outside_tolerance"])
    bundle.diagnostics["lagrange_plateau"] = lag.plateau
    bundle.diagnostics["lagrange_skipped_probes"] = list(lag.skipped)


def _markov(cfg: ExperimentConfig, out: Path, bundle: ReportBundle) -> None:
    p = cfg.params
    if p["chain"] == "mm_infinity":
        chain = mm_infinity_generator(p["lambda"], p["mu"], p["truncation"])
    else:
        chain = read_chain(p["chain"])
    if p["init_state"] >= chain.size:
        raise UsageError(f"key init_state: state {p['init_state']} outside 0..{chain.size - 1}")
    mu_star = invariant_measure(chain)
    mu0 = np.zeros(chain.size)
    mu0[p["init_state"]] = 1.0
    slack = p["monotone_slack"]

    if chain.kind == "kernel":
        kl = free_energy_trajectory(chain, mu0, p["steps"])
        mu, tv = mu0, []
        for _ in range(len(kl)):
            tv.append(total_variation(mu, mu_star))
            mu = mu @ chain.matrix
        rows = [(n, float(a), float(b)) for n, (a, b) in enumerate(zip(kl, tv))]
        write_csv(out / "free_energy.csv", ["n", "free_energy", "total_variation"], rows)
        times = np.arange(len(kl), dtype=float)
    else:
        times = np.linspace(0.0, p["t_max"], p["t_points"])
        h = p["fd_step"]
        laws, kl, tv, first, second, fd1, fd2 = [], [], [], [], [], [], []
        mu = mu0
        prev = 0.0
        for t in times:
            mu = ct_evolve(chain, mu, t - prev)
            prev = t
            laws.append(mu)
            kl.append(relative_entropy(mu, mu_star))
            tv.append(total_variation(mu, mu_star))
        for t, mu in zip(times, laws):
            if t < h:
                first.append(np.nan), second.append(np.nan), fd1.append(np.nan), fd2.append(np.nan)
                continue
            smooth = (1 - 1e-12) * mu + 1e-12 * mu_star
            a, b = free_energy_derivatives(chain, smooth)
            ap = relative_entropy(ct_evolve(chain, mu, h), mu_star)
            am = relative_entropy(ct_evolve(chain, mu0, t - h), mu_star)
            a0 = relative_entropy(mu, mu_star)
            first.append(a), second.append(b)
            fd1.append((ap - am) / (2 * h)), fd2.append((ap - 2 * a0 + am) / h**2)
        rows = [tuple(float(v) for v in r) for r in zip(times, kl, tv, first, fd1, second, fd2)]
        write_csv(out / "free_energy.csv",
                  ["t", "free_energy", "total_variation", "first", "first_fd", "second", "second_fd"], rows)
        ok = ~np.isnan(first)
        tol = p["derivative_tolerance"]
        # errors are scaled by max(1, |fd|): right after a point-mass start the
        # derivatives are large and the finite-difference truncation error with them
        for name, exact, approx in (("first", first, fd1), ("second", second, fd2)):
            exact, approx = np.array(exact)[ok], np.array(approx)[ok]
            err = float(np.max(np.abs(exact - approx) / np.maximum(1.0, np.abs(approx))))
            bundle.metrics[f"{name}_derivative_fd_error"] = Metric(err, "<=", tol)
        bundle.metrics["first_derivative_max"] = Metric(float(np.max(np.array(first)[ok])), "<=", slack)
    bundle.artifacts.append("free_energy.csv")

    kl = np.array(kl)
    tv = np.array(tv)
    bundle.metrics["free_energy_max_increment"] = Metric(float(np.max(np.diff(kl))), "<=", slack)
    pinsker = float(np.max(tv**2 - 2 * kl))
    bundle.metrics["pinsker_excess"] = Metric(pinsker, "<=", slack)
    positive = kl > 1e-12
    if positive.sum() >= 3:
        dt = float(times[1] - times[0])
        idx = np.flatnonzero(positive)
        bundle.diagnostics["decay_rate_estimate"] = decay_rate_regression(kl[idx[-min(idx.size, 50):]], dt)
    bundle.diagnostics.update({"states": chain.size, "kind": chain.kind,
                               "initial_free_energy": float(kl[0]), "final_free_energy": float(kl[-1]),
                               "invariant_mass_state0": float(mu_star[0])})


def _clt(cfg: ExperimentConfig, out: Path, bundle: ReportBundle) -> None:
    p = cfg.params
    step, hw = p["grid_step"], p["half_width"]
    if p["density"] == "uniform":
        f = uniform_density(-np.sqrt(3.0), np.sqrt(3.0), step, -hw, hw)
    elif p["density"] == "gaussian":
        f = gaussian_density(1.0, step, hw)
    else:
        f = read_density_csv(p["density"])
    rows = []
    current = f
    for n in range(p["doublings"] + 1):
        fisher, _ = fisher_information(current, with_flag=True)
        rows.append((n, entropy(current), fisher, current.variance()))
        if n < p["doublings"]:
            current = clt_step(current)
    write_csv(out / "entropy_sequence.csv", ["doubling", "entropy", "fisher", "variance"], rows)
    write_density_csv(current, out / "density_final.csv")
    bundle.artifacts += ["entropy_sequence.csv", "density_final.csv"]
    ent = np.array([r[1] for r in rows])
    var = np.array([r[3] for r in rows])
    bundle.metrics["entropy_min_increment"] = Metric(float(np.min(np.diff(ent))), ">", 0.0)
    bundle.metrics["entropy_gaussian_gap"] = Metric(float(np.max(ent) - (GAUSSIAN_ENTROPY + 0.5 * np.log(var[0]))),
                                                    "<=", 1e-9)
    bundle.metrics["variance_drift"] = Metric(float(np.max(np.abs(var - var[0]))), "<=", 1e-5 * p["doublings"])
    res = de_bruijn_residual(f, p["de_bruijn_t"], p["de_bruijn_h"])
    bundle.metrics["de_bruijn_residual"] = Metric(res, "<", p["de_bruijn_tolerance"])
    bundle.diagnostics.update({"initial_entropy": float(ent[0]), "final_entropy": float(ent[-1]),
                               "gaussian_entropy": float(GAUSSIAN_ENTROPY + 0.5 * np.log(var[0]))})


def _free(cfg: ExperimentConfig, out: Path, bundle: ReportBundle) -> None:
    p = cfg.params
    degrees = sorted(p["degrees"])
    if degrees[0] < 3:
        raise UsageError("key degrees: every degree must be >= 3")
    rows, gaps = [], {}
    for m in range(1, p["max_m"] + 1):
        cm = catalan(m)
        for d in degrees:
            s = free_clt_scaled_moment(d, m)
            gaps[(d, m)] = abs(s - cm)
            rows.append((d, m, s, cm, abs(s - cm)))
    write_csv(out / "free_clt.csv", ["d", "m", "scaled_moment", "catalan", "gap"], rows)
    monotone = all(gaps[(a, m)] > gaps[(b, m)] for m in range(1, p["max_m"] + 1)
                   for a, b in zip(degrees, degrees[1:]))
    worst = max(gaps[(degrees[-1], m)] / catalan(m) for m in range(1, p["max_m"] + 1))
    bundle.metrics["gap_monotone_in_d"] = Metric(monotone, "true")
    bundle.metrics["relative_gap_at_max_d"] = Metric(float(worst), "<", p["gap_fraction"])

    km_rows, km_err = [], 0.0
    for d in p["km_degrees"]:
        fam = MomentFamily("kesten_mckay", d)
        for k in range(0, p["km_max_order"] + 1, 2):
            q, w = reference_moment(fam, k), tree_walk_count(d, k)
            km_err = max(km_err, abs(q - w) / w)
            km_rows.append((d, k, q, w))
    write_csv(out / "kesten_mckay.csv", ["d", "k", "quadrature", "walk_count"], km_rows)
    bundle.metrics["kesten_mckay_relative_error"] = Metric(km_err, "<=", p["km_tolerance"])

    disc = PlanarDensity.from_function(lambda x, y: (x * x + y * y <= 1.0).astype(float), 1.05, p["chi_grid"])
    chi = log_energy(disc)
    bundle.metrics["chi_disc_off_diagonal"] = Metric(chi.off_diagonal, "within", p["chi_tolerance"], -0.25)
    bundle.diagnostics["chi_disc_diagonal"] = chi.diagonal
    bundle.artifacts += ["free_clt.csv", "kesten_mckay.csv"]


_DRIVERS = {"gas": _gas, "markov": _markov, "clt": _clt, "free": _free}


def run_experiment(cfg: ExperimentConfig, *, write: bool = True) -> ReportBundle:
    """Run ``cfg`` and write its summary; module errors yield a ``FAILED`` bundle."""
    out = cfg.out_dir
    ensure_writable(out)
    bundle = ReportBundle(cfg.subcommand)
    bundle.provenance = {
        "seed": cfg.seed,
        "config": render_config(cfg),
        "version": __version__,
        "threads": int(os.environ.get("ENTROPY_LAB_THREADS", "1") or 1),
    }
    try:
        _DRIVERS[cfg.subcommand](cfg, out, bundle)
    except EntropyLabError as exc:
        bundle.error = f"{type(exc).__name__}: {exc}"
        bundle.provenance["exit_code"] = exc.exit_code
    if write:
        write_report(bundle, out)
    return bundle

