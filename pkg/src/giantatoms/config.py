"""Experiment configuration: YAML files, built-in scenarios and validation.

A config is a nested mapping.  Every key is optional except ``atoms``;
missing keys take the values in ``DEFAULTS``.  A ``scenario`` key pulls in
a built-in preset first, and the rest of the file overrides it::

    scenario: comb-m-sweep      # optional preset name
    method: master              # sse | master | lindblad | dressed1 | dressed2
    initial: eg                 # ee eg ge gg bell+ bell- or four [re, im] pairs
    atoms:
      a: {type: comb, points: [0.0, 1.5], strength: 0.707}
      b: {type: gaussian, center: 4.0, width: 0.1, strength: 1.0}
    grid: {k_max: 10.0, n_modes: auto, dispersion: linear, omega_c: 0.0}
    time: {dt: 0.01, t_max: 10.0}
    atom_frequencies: [1.0, 1.0]
    ensemble: {n_traj: 2000, seed: 1234, batch_size: 256, workers: 1, antithetic: true}
    bath: {kind: vacuum}        # thermal: {kind: thermal, beta: 2.0}
    sweep: {separation: {start: 0, stop: 3.14159, num: 13}, width: [0.1, 1.0]}
    observable: {time: 8.0}
    outputs: {dir: runs}

Atom types are ``comb`` (``points`` or ``m``/``start``/``length``),
``gaussian`` (``center``, ``width``) and ``double_gaussian`` (``centers``,
``width``).  All lengths are in units of ``lambda = c / omega``.

Sweep axes: ``separation`` shifts atom ``b`` so the center offset from
``a`` takes each value, ``width`` sets both widths, ``m`` sets both comb
point counts, ``strength`` sets both strengths.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .coupling import (
    Comb,
    DoubleGaussian,
    Gaussian,
    ModeGrid,
    build_mode_grid,
    center_separation,
    translate,
)
from .errors import ConfigurationError

METHODS = ("sse", "master", "lindblad", "dressed1", "dressed2")
NAMED_STATES = ("ee", "eg", "ge", "gg", "bell+", "bell-")
SWEEP_AXES = ("separation", "width", "m", "strength")
OUTPUT_ENV = "GIANTATOMS_OUTPUT_DIR"

DEFAULTS: dict[str, Any] = {
    "scenario": None,
    "method": "master",
    "initial": "eg",
    "grid": {"k_max": 10.0, "n_modes": "auto", "dispersion": "linear", "omega_c": 0.0},
    "time": {"dt": 0.01, "t_max": 10.0},
    "atom_frequencies": [1.0, 1.0],
    "ensemble": {"n_traj": 2000, "seed": 1234, "batch_size": 256, "workers": 1, "antithetic": True},
    "bath": {"kind": "vacuum"},
    "sweep": {},
    "observable": {"time": None},
    "outputs": {"dir": "runs"},
}


def _comb(m: int, start: float, length: float, strength: float) -> dict:
    return {"type": "comb", "m": m, "start": start, "length": length, "strength": strength}


# Presets for the standard desk-scale studies.  Parameters not fixed by the
# physics (strengths, ranges, probe times) were chosen so each run stays
# within a few minutes; see README.
SCENARIOS: dict[str, dict] = {
    "standard": {
        "method": "master",
        "initial": "eg",
        "atoms": {
            "a": {"type": "comb", "points": [0.0, 1.5], "strength": 0.70710678},
            "b": {"type": "comb", "points": [4.0, 5.5], "strength": 0.70710678},
        },
        "grid": {"k_max": 10.0, "n_modes": 128},
        "time": {"dt": 0.01, "t_max": 10.0},
    },
    "comb-kernels": {
        "atoms": {"a": _comb(2, 0.0, 1.5, 1.0), "b": _comb(2, 4.0, 1.5, 1.0)},
        "grid": {"k_max": 128.0},
        "time": {"dt": 1.0 / 1280.0, "t_max": 7.0},
        "sweep": {"m": [1, 2, 10]},
    },
    "comb-m-sweep": {
        "method": "master",
        "initial": "eg",
        "atoms": {"a": _comb(2, 0.0, 3.0, 0.85), "b": _comb(2, 4.0, 3.0, 0.85)},
        "time": {"dt": 0.01, "t_max": 15.0},
        "sweep": {"m": [1, 2, 10]},
    },
    "double-peak": {
        "method": "master",
        "initial": "eg",
        "atoms": {
            "a": {"type": "double_gaussian", "centers": [0.0, float(np.pi)], "width": 0.1, "strength": 0.5},
            "b": {"type": "double_gaussian", "centers": [0.0, float(np.pi)], "width": 0.1, "strength": 0.5},
        },
        "grid": {"k_max": 8.0},
        "time": {"dt": 0.01, "t_max": 8.0},
        "sweep": {"width": [0.1, 1.0, 1.5], "separation": {"start": 0.0, "stop": float(np.pi), "num": 13}},
        "observable": {"time": 8.0},
    },
    "gaussian-ee": {
        "method": "dressed2",
        "initial": "ee",
        "atoms": {
            "a": {"type": "gaussian", "center": 0.0, "width": 0.1, "strength": 1.5},
            "b": {"type": "gaussian", "center": 0.0, "width": 0.1, "strength": 1.5},
        },
        "grid": {"k_max": 10.0, "n_modes": 200},
        "time": {"dt": 0.005, "t_max": 3.0},
        "sweep": {"width": [0.1, 2.0], "separation": {"start": 0.0, "stop": 2.0, "num": 11}},
        "observable": {"time": 1.8},
    },
    "gaussian-width": {
        "method": "dressed2",
        "initial": "ee",
        "atoms": {
            "a": {"type": "gaussian", "center": 0.0, "width": 0.1, "strength": 1.5},
            "b": {"type": "gaussian", "center": 0.16, "width": 0.1, "strength": 1.5},
        },
        "grid": {"k_max": 10.0, "n_modes": 200},
        "time": {"dt": 0.005, "t_max": 3.0},
        "sweep": {"width": [0.01, 0.1, 2.0]},
    },
}


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | Path) -> dict:
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    return raw


def resolve(raw: dict) -> dict:
    """Apply preset and defaults, then validate.  Returns a plain nested dict."""
    name = raw.get("scenario")
    cfg = copy.deepcopy(DEFAULTS)
    if name is not None:
        if name not in SCENARIOS:
            raise ConfigurationError(f"scenario: unknown preset {name!r}; choose from {sorted(SCENARIOS)}")
        cfg = deep_merge(cfg, SCENARIOS[name])
    cfg = deep_merge(cfg, raw)
    if isinstance(cfg["sweep"], dict):
        cfg["sweep"] = {k: v for k, v in cfg["sweep"].items() if v is not None}
    validate(cfg)
    return cfg


def _require(cond: bool, where: str, msg: str) -> None:
    if not cond:
        raise ConfigurationError(f"{where}: {msg}")


def _positive(value, where: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{where}: expected a number, got {value!r}") from None
    _require(v > 0, where, f"must be positive, got {v}")
    return v


def validate(cfg: dict) -> None:
    _require(cfg.get("method") in METHODS, "method", f"must be one of {METHODS}, got {cfg.get('method')!r}")
    atoms = cfg.get("atoms")
    _require(isinstance(atoms, dict) and set(atoms) == {"a", "b"}, "atoms", "needs exactly the keys 'a' and 'b'")
    for mu in ("a", "b"):
        distribution(atoms[mu], f"atoms.{mu}")
    _positive(cfg["time"]["dt"], "time.dt")
    _positive(cfg["time"]["t_max"], "time.t_max")
    _positive(cfg["grid"]["k_max"], "grid.k_max")
    n = cfg["grid"]["n_modes"]
    _require(n == "auto" or (isinstance(n, int) and n >= 2 and n % 2 == 0), "grid.n_modes", f"must be 'auto' or an even integer, got {n!r}")
    _require(cfg["grid"].get("dispersion", "linear") in ("linear", "band"), "grid.dispersion", "must be 'linear' or 'band'")
    freqs = cfg["atom_frequencies"]
    _require(isinstance(freqs, (list, tuple)) and len(freqs) == 2, "atom_frequencies", "needs two values")
    initial_vector(cfg["initial"])
    kind = cfg["bath"].get("kind", "vacuum")
    _require(kind in ("vacuum", "thermal"), "bath.kind", f"must be 'vacuum' or 'thermal', got {kind!r}")
    if kind == "thermal":
        _positive(cfg["bath"].get("beta"), "bath.beta")
        _require(cfg["method"] in ("master", "sse", "lindblad"), "bath.kind", "thermal baths need method sse, master or lindblad")
    init = cfg["initial"]
    if cfg["method"] == "dressed1":
        vec = initial_vector(init)
        _require(abs(vec[0]) < 1e-12 and abs(vec[3]) < 1e-12, "initial", "method dressed1 needs a state in span{eg, ge}")
    if cfg["method"] == "dressed2":
        _require(init == "ee", "initial", "method dressed2 starts from 'ee'")
    if cfg["method"] == "sse":
        ens = cfg["ensemble"]
        _require(isinstance(ens["n_traj"], int) and ens["n_traj"] >= 4, "ensemble.n_traj", "needs an integer >= 4")
        if ens.get("antithetic", True):
            _require(ens["n_traj"] % 2 == 0 and ens["batch_size"] % 2 == 0, "ensemble", "antithetic pairs need even n_traj and batch_size")
    sweep = cfg.get("sweep") or {}
    _require(isinstance(sweep, dict), "sweep", "must be a mapping of axis -> values")
    for axis, spec in sweep.items():
        _require(axis in SWEEP_AXES, f"sweep.{axis}", f"unknown axis; choose from {SWEEP_AXES}")
        values = axis_values(spec, f"sweep.{axis}")
        _require(len(values) > 0, f"sweep.{axis}", "grid is empty")
        if axis == "m":
            _require(all(float(v).is_integer() and v >= 1 for v in values), "sweep.m", "point counts must be positive integers")
            for mu in ("a", "b"):
                _require(atoms[mu].get("type") == "comb", "sweep.m", "needs comb atoms")
        if axis == "width":
            for mu in ("a", "b"):
                _require(atoms[mu].get("type") != "comb", "sweep.width", "combs have no width")
    t_obs = cfg["observable"].get("time")
    if t_obs is not None:
        _require(0 <= float(t_obs) <= float(cfg["time"]["t_max"]) + 1e-12, "observable.time", "must lie inside [0, t_max]")


def axis_values(spec, where: str = "sweep") -> list[float]:
    if isinstance(spec, dict):
        try:
            return [float(x) for x in np.linspace(spec["start"], spec["stop"], int(spec["num"]))]
        except KeyError as exc:
            raise ConfigurationError(f"{where}: range needs start, stop and num") from exc
    if isinstance(spec, (list, tuple)):
        return [float(x) for x in spec]
    return [float(spec)]


def distribution(spec: dict, where: str = "atom"):
    if not isinstance(spec, dict):
        raise ConfigurationError(f"{where}: expected a mapping")
    kind = spec.get("type")
    strength = float(spec.get("strength", 1.0))
    try:
        if kind == "comb":
            if "points" in spec:
                pts = tuple(float(x) for x in spec["points"])
            else:
                m = int(spec["m"])
                _require(m >= 1, f"{where}.m", "must be >= 1")
                start, length = float(spec.get("start", 0.0)), float(spec.get("length", 0.0))
                pts = tuple(np.linspace(start, start + length, m)) if m > 1 else (start,)
            return Comb(pts, strength, spec.get("norm"))
        if kind == "gaussian":
            return Gaussian(float(spec["center"]), float(spec["width"]), strength)
        if kind == "double_gaussian":
            c1, c2 = (float(x) for x in spec["centers"])
            return DoubleGaussian(c1, c2, float(spec["width"]), strength)
    except KeyError as exc:
        raise ConfigurationError(f"{where}: missing field {exc.args[0]!r}") from None
    except ConfigurationError as exc:
        raise ConfigurationError(f"{where}: {exc}") from None
    raise ConfigurationError(f"{where}.type: unknown distribution {kind!r}")


def initial_vector(spec) -> np.ndarray:
    from .hilbert import ket

    if isinstance(spec, str):
        if spec not in NAMED_STATES:
            raise ConfigurationError(f"initial: unknown state {spec!r}; choose from {NAMED_STATES}")
        if spec in ("bell+", "bell-"):
            sign = 1.0 if spec == "bell+" else -1.0
            return (ket("eg") + sign * ket("ge")) / np.sqrt(2)
        return ket(spec)
    try:
        arr = np.asarray(spec, dtype=float)
    except (TypeError, ValueError):
        raise ConfigurationError("initial: custom state must be four [re, im] pairs") from None
    if arr.shape != (4, 2):
        raise ConfigurationError("initial: custom state must be four [re, im] pairs")
    vec = arr[:, 0] + 1j * arr[:, 1]
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise ConfigurationError("initial: custom state is the zero vector")
    return vec / norm


def apply_cell(cfg: dict, cell: dict) -> dict:
    """Config for one sweep cell; ``cell`` maps axis name to value."""
    out = copy.deepcopy(cfg)
    out["sweep"] = {}
    atoms = out["atoms"]
    for axis in ("m", "width", "strength"):
        if axis not in cell:
            continue
        for mu in ("a", "b"):
            if axis == "m":
                atoms[mu].pop("points", None)
                atoms[mu]["m"] = int(cell["m"])
            else:
                atoms[mu][axis] = float(cell[axis])
    if "separation" in cell:
        out["_separation"] = float(cell["separation"])
    return out


def atom_pair(cfg: dict):
    a = distribution(cfg["atoms"]["a"], "atoms.a")
    b = distribution(cfg["atoms"]["b"], "atoms.b")
    if "_separation" in cfg:
        b = translate(b, cfg["_separation"] - center_separation(a, b))
    return a, b


def auto_modes(k_max: float, t_max: float, margin: float = 1.3) -> int:
    """Smallest even mode count whose recurrence time exceeds ``2 * margin * t_max``."""
    n = int(np.ceil(2 * margin * k_max * t_max / np.pi)) + 1
    return n + (n % 2)


def mode_grid(cfg: dict) -> ModeGrid:
    g, t = cfg["grid"], cfg["time"]
    t_max = float(t["t_max"])
    n = auto_modes(float(g["k_max"]), t_max) if g["n_modes"] == "auto" else int(g["n_modes"])
    return build_mode_grid(float(g["k_max"]), n, t_max, dispersion=g.get("dispersion", "linear"), omega_c=float(g.get("omega_c", 0.0)))


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()

