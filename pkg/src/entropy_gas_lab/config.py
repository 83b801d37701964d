"""Flat ``key=value`` experiment configuration.

Each subcommand has a schema of known keys with a parser and a default
(``REQUIRED`` when there is none).  Unknown keys are rejected with a
suggestion, all missing keys are reported together, and the parsed values
plus defaults are echoed back in the report.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

from .errors import UsageError

__all__ = ["ExperimentConfig", "parse_config", "parse_text", "SCHEMAS", "REQUIRED", "render_config"]

REQUIRED = object()
SUBCOMMANDS = ("markov", "clt", "free", "gas")


def _int(v: str) -> int:
    return int(v)


def _nonneg_int(v: str) -> int:
    n = int(v)
    if n < 0:
        raise ValueError("must be non-negative")
    return n


def _pos_int(v: str) -> int:
    n = int(v)
    if n < 1:
        raise ValueError("must be positive")
    return n


def _float(v: str) -> float:
    # fractions such as 1/512 are accepted
    return float(Fraction(v)) if "/" in v else float(v)


def _pos_float(v: str) -> float:
    x = _float(v)
    if not x > 0:
        raise ValueError("must be positive")
    return x


def _seed(v: str) -> int:
    n = int(v)
    if not 0 <= n < 2**64:
        raise ValueError("must be a 64-bit unsigned integer")
    return n


def _int_list(v: str) -> tuple:
    out = tuple(int(p) for p in v.split(",") if p.strip())
    if not out:
        raise ValueError("empty list")
    return out


def _beta(v: str):
    if v.replace(" ", "") in ("N^2", "N**2"):
        return "N^2"
    return _pos_float(v)


def _potential(v: str) -> tuple:
    tag, _, arg = v.partition(":")
    if tag == "quadratic":
        return ("quadratic", _pos_float(arg or "1"))
    if tag == "radial_power":
        p, _, c = arg.partition(":")
        return ("radial_power", _pos_float(p), _pos_float(c or "1"))
    raise ValueError("expected quadratic:<c> or radial_power:<p>:<c>")


def _kernel(v: str) -> tuple:
    tag, _, arg = v.partition(":")
    if tag in ("coulomb", "none") and not arg:
        return (tag,)
    if tag == "riesz" and arg:
        return ("riesz", _pos_float(arg))
    if tag == "log2d" and arg:
        return ("log2d", _pos_float(arg))
    raise ValueError("expected coulomb, none, riesz:<alpha> or log2d:<s>")


def _dt(v: str):
    return "auto" if v == "auto" else _pos_float(v)


def _choice(*options) -> Callable[[str], str]:
    def parse(v: str) -> str:
        if v not in options:
            raise ValueError("expected one of " + "|".join(options))
        return v
    parse.expected = "|".join(options)
    return parse


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    form: str


_COMMON = {
    "seed": Key(_seed, 0, "64-bit unsigned integer"),
    "out_dir": Key(str, "out", "directory path"),
}

SCHEMAS: dict[str, dict[str, Key]] = {
    "gas": {
        "dim": Key(_pos_int, REQUIRED, "positive integer"),
        "n_particles": Key(_pos_int, REQUIRED, "integer >= 2"),
        "beta": Key(_beta, "N^2", "positive float or N^2"),
        "potential": Key(_potential, ("quadratic", 1.0), "quadratic:<c> or radial_power:<p>:<c>"),
        "kernel": Key(_kernel, ("coulomb",), "coulomb|none|riesz:<alpha>|log2d:<s>"),
        "steps": Key(_pos_int, 100000, "positive integer"),
        "burn_in": Key(_nonneg_int, 20000, "non-negative integer"),
        "thin": Key(_pos_int, 100, "positive integer"),
        "dt": Key(_dt, "auto", "auto or positive float"),
        "init_sigma": Key(_pos_float, 1.0, "positive float"),
        "init_snapshot": Key(str, "", "snapshot file path or empty"),
        "write_snapshots": Key(_choice("last", "all"), "last", "last|all"),
        "probes": Key(_pos_int, 100, "positive integer"),
        "ks_tolerance": Key(_pos_float, 0.05, "positive float"),
        "m2_tolerance": Key(_pos_float, 0.05, "positive float (relative)"),
        "m4_tolerance": Key(_pos_float, 0.075, "positive float (relative)"),
        "support_factor": Key(_pos_float, 1.1, "positive float"),
        "support_fraction": Key(_pos_float, 0.99, "float in (0, 1]"),
        "rate_tolerance": Key(_pos_float, 0.05, "positive float"),
        "lagrange_inside_tolerance": Key(_pos_float, 0.1, "positive float"),
        "lagrange_outside_tolerance": Key(_pos_float, 0.05, "positive float"),
        "acceptance_band": Key(lambda v: tuple(_float(p) for p in v.split(":")), (0.3, 0.8), "<lo>:<hi>"),
    },
    "markov": {
        "chain": Key(str, REQUIRED, "mm_infinity or chain file path"),
        "lambda": Key(_pos_float, 1.0, "positive float"),
        "mu": Key(_pos_float, 1.0, "positive float"),
        "truncation": Key(_pos_int, 30, "integer >= 2"),
        "init_state": Key(_nonneg_int, 0, "state index"),
        "steps": Key(_pos_int, 50, "positive integer (kernel chains)"),
        "t_max": Key(_pos_float, 10.0, "positive float (generator chains)"),
        "t_points": Key(_pos_int, 101, "integer >= 3 (generator chains)"),
        "fd_step": Key(_pos_float, 1e-4, "positive float"),
        "derivative_tolerance": Key(_pos_float, 1e-5, "positive float"),
        "monotone_slack": Key(_pos_float, 1e-12, "positive float"),
    },
    "clt": {
        "density": Key(str, REQUIRED, "uniform, gaussian or CSV path"),
        "grid_step": Key(_pos_float, 1 / 512, "positive float"),
        "half_width": Key(_pos_float, 8.0, "positive float"),
        "doublings": Key(_pos_int, 4, "positive integer"),
        "de_bruijn_t": Key(_pos_float, 0.5, "positive float"),
        "de_bruijn_h": Key(_pos_float, 1e-3, "positive float"),
        "de_bruijn_tolerance": Key(_pos_float, 1e-3, "positive float"),
    },
    "free": {
        "degrees": Key(_int_list, (4, 8, 16, 32, 64), "comma-separated integers >= 3"),
        "max_m": Key(_pos_int, 5, "positive integer"),
        "gap_fraction": Key(_pos_float, 0.1, "positive float"),
        "km_degrees": Key(_int_list, (3, 4, 5, 6), "comma-separated integers >= 3"),
        "km_max_order": Key(_pos_int, 12, "positive integer <= 40"),
        "km_tolerance": Key(_pos_float, 1e-8, "positive float (relative)"),
        "chi_grid": Key(_pos_int, 256, "positive integer"),
        "chi_tolerance": Key(_pos_float, 2e-3, "positive float"),
    },
}
for _schema in SCHEMAS.values():
    _schema.update(_COMMON)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated parameters of one experiment with defaults filled in."""

    subcommand: str
    params: dict = field(default_factory=dict)

    @property
    def out_dir(self) -> Path:
        return Path(self.params["out_dir"])

    @property
    def seed(self) -> int:
        return self.params["seed"]

    def __getitem__(self, key: str):
        return self.params[key]


def parse_text(text: str, origin: str = "<config>") -> dict[str, str]:
    """Split ``key=value`` lines; ``#`` starts a comment, blank lines are ignored."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"{origin}:{lineno}: expected key=value, got {line!r}")
        raw[key.strip()] = value.strip()
    return raw


def parse_config(subcommand: str, path=None, *, text: str | None = None,
                 overrides: dict[str, str] | None = None) -> ExperimentConfig:
    """Validate a configuration for ``subcommand`` from a file, text and/or overrides.

    Later sources win: file (or text), then ``overrides``.
    """
    if subcommand not in SCHEMAS:
        raise UsageError(f"unknown subcommand {subcommand!r}; expected one of {', '.join(SUBCOMMANDS)}")
    raw: dict[str, str] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise UsageError(f"config file {p} does not exist")
        raw.update(parse_text(p.read_text(), str(p)))
    if text is not None:
        raw.update(parse_text(text))
    raw.update({k: str(v) for k, v in (overrides or {}).items()})
    schema = SCHEMAS[subcommand]

    for key in raw:
        if key not in schema:
            close = difflib.get_close_matches(key, schema.keys(), n=1)
            hint = f"; did you mean {close[0]}" if close else ""
            raise UsageError(f"unknown key {key}{hint}")
    missing = [k for k, entry in schema.items() if entry.default is REQUIRED and k not in raw]
    if missing:
        raise UsageError("missing required keys: " + ", ".join(missing))

    params: dict[str, Any] = {}
    for key, entry in schema.items():
        if key in raw:
            try:
                params[key] = entry.parse(raw[key])
            except (ValueError, ZeroDivisionError) as exc:
                raise UsageError(f"key {key}: cannot parse {raw[key]!r}; expected {entry.form}") from exc
        else:
            params[key] = entry.default

    if subcommand == "gas":
        if params["n_particles"] < 2:
            raise UsageError("key n_particles: expected integer >= 2")
        if params["beta"] == "N^2":
            params["beta"] = float(params["n_particles"]) ** 2
        if params["steps"] <= params["burn_in"]:
            raise UsageError("key steps: must exceed burn_in")
        lo, hi = params["acceptance_band"] if len(params["acceptance_band"]) == 2 else (None, None)
        if lo is None or not 0 <= lo < hi <= 1:
            raise UsageError("key acceptance_band: expected <lo>:<hi> with 0 <= lo < hi <= 1")
    if subcommand == "markov" and params["t_points"] < 3:
        raise UsageError("key t_points: expected integer >= 3")
    return ExperimentConfig(subcommand, params)


def _render_value(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, tuple):
        if v and isinstance(v[0], str):
            return ":".join([v[0], *(_render_value(x) for x in v[1:])])
        sep = ":" if all(isinstance(x, float) for x in v) else ","
        return sep.join(_render_value(x) for x in v)
    return str(v)


def render_config(config: ExperimentConfig) -> dict[str, str]:
    """Key-sorted string echo of every parameter, defaults included."""
    return {k: _render_value(config.params[k]) for k in sorted(config.params)}
