"""Experiment configuration: TOML or JSON documents merged over defaults.

Schema (every key optional; defaults below)::

    theorem    = "thm1"        # geometry | thm1 | fit | thm2 | thm3 | thm4 | eigen
    d          = 1
    M          = 1.0
    seed       = 0             # feeds every random choice unless overridden locally
    deltas     = [0.25]        # ball radii swept by the run
    K          = 1.0           # number, or "fit" to take K_hat from [fit].config
    jobs       = 1
    oracle_max_n = 256         # brute-force cross-checks run when N <= this

    [grid]       L, n
    [potential]  family + family parameters (see hamiltonian.build_potential)
    [sequence]   kind = "periodic" | "perturbed", seed (defaults to top-level seed)
    [eigen]      how_many, tol, method, max_iter
    [fit]        config (stock name or path), mode, margin, heldout_seeds
    [interval]   E0, center (number or "eigen:j"), width_fraction | width, complex_samples
    [weyl]       E, indices, strategy, sigma0, growth, defect, center
    [residual]   packets = [{sigma, xi, center}], random_fields, band, ball
    [geometry]   dims, count
    [tolerances] ratio_slack, chain, oracle, projector
"""
from __future__ import annotations

import copy
import json
import math
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError

THEOREMS = ("geometry", "thm1", "fit", "thm2", "thm3", "thm4", "eigen")

DEFAULTS = {
    "theorem": "thm1",
    "d": 1,
    "M": 1.0,
    "seed": 0,
    "deltas": [0.25],
    "K": 1.0,
    "jobs": 1,
    "oracle_max_n": 256,
    "grid": {"L": 8.0, "n": 511},
    "potential": {"family": "constant"},
    "sequence": {"kind": "periodic", "seed": None},
    "eigen": {"how_many": 1, "tol": 1e-9, "method": "auto", "max_iter": None},
    "fit": {"config": "fit_exponent_1d", "mode": 0, "margin": 0.1, "heldout_seeds": [1, 2, 3, 4, 5]},
    "interval": {"E0": 1.0, "center": "eigen:0", "width_fraction": 1.0, "width": None,
                 "complex_samples": 4},
    "weyl": {"E": 4 * math.pi ** 2, "indices": [1, 2, 5, 10], "strategy": "gaussian-packet",
             "sigma0": 0.5, "growth": 1.25, "defect": 0.0, "center": None},
    "residual": {"packets": [], "random_fields": 0, "band": 8, "ball": True},
    "geometry": {"dims": [1, 2, 3], "count": 1000},
    "tolerances": {"ratio_slack": 1e-12, "chain": 1e-8, "oracle": 1e-8, "projector": 1e-10},
}

# tables whose keys are free-form (family parameters)
_OPEN_TABLES = ("potential",)


def stock_dir():
    return resources.files("ucplab") / "configs"


def stock_names() -> list[str]:
    return sorted(p.name[:-5] for p in stock_dir().iterdir() if p.name.endswith(".toml"))


def _read(path_or_name) -> tuple[dict, str]:
    p = Path(path_or_name)
    if not p.exists():
        cand = stock_dir() / (str(path_or_name) + ("" if str(path_or_name).endswith(".toml") else ".toml"))
        if not cand.is_file():
            raise ConfigError(f"config {path_or_name!r} not found (stock configs: {', '.join(stock_names())})")
        return tomllib.loads(cand.read_text()), cand.name[:-5]
    text = p.read_text()
    try:
        if p.suffix == ".json":
            return json.loads(text), p.stem
        return tomllib.loads(text), p.stem
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc


def _merge(base, extra, path=""):
    for key, val in extra.items():
        where = f"{path}{key}"
        if key not in base and path.rstrip(".") not in _OPEN_TABLES:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base.get(key), dict) and isinstance(val, dict) and key not in _OPEN_TABLES:
            _merge(base[key], val, where + ".")
        elif key in _OPEN_TABLES and isinstance(val, dict):
            base[key] = dict(val)
        else:
            base[key] = val
    return base


def _parse_value(text):
    try:
        return json.loads(text)
    except ValueError:
        try:
            return tomllib.loads(f"v = {text}")["v"]
        except tomllib.TOMLDecodeError:
            return text


def apply_override(cfg: dict, assignment: str):
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not key=value")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for i, part in enumerate(parts[:-1]):
        if part not in node or not isinstance(node[part], dict):
            raise ConfigError(f"override key {key!r} does not exist in the schema")
        node = node[part]
    leaf = parts[-1]
    if leaf not in node and parts[0] not in _OPEN_TABLES:
        raise ConfigError(f"override key {key!r} does not exist in the schema")
    node[leaf] = _parse_value(raw.strip())


def load_config(path_or_name=None, overrides=(), seed=None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    name = "defaults"
    if path_or_name is not None:
        doc, name = _read(path_or_name)
        _merge(cfg, doc)
    for item in overrides:
        apply_override(cfg, item)
    if seed is not None:
        cfg["seed"] = int(seed)
        cfg["sequence"]["seed"] = None
    cfg["name"] = name
    check_config(cfg)
    return cfg


def check_config(cfg: dict):
    if cfg["theorem"] not in THEOREMS:
        raise ConfigError(f"unknown theorem {cfg['theorem']!r}; expected one of {THEOREMS}")
    if cfg["sequence"]["kind"] not in ("periodic", "perturbed"):
        raise ConfigError(f"unknown sequence kind {cfg['sequence']['kind']!r}")
    if not isinstance(cfg["deltas"], list) or not cfg["deltas"]:
        raise ConfigError("deltas must be a nonempty list")
    K = cfg["K"]
    if not (K == "fit" or isinstance(K, (int, float))):
        raise ConfigError(f"K must be a number or \"fit\", got {K!r}")
