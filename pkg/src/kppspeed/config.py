"""Run configuration: presets, JSON-schema validation and medium construction."""

from __future__ import annotations

import copy
import json
import math
from collections.abc import Mapping
from importlib import resources
from pathlib import Path

import jsonschema

from kppspeed import media
from kppspeed.errors import ConfigError, HypothesisError

STAGES = ("validate", "eigen", "pde", "speed")

_mode = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}
_modes = {"type": "array", "items": _mode}
_range = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

MEDIUM_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["homogeneous", "periodic", "compact_perturbation", "almost_periodic", "asymptotic",
                          "random_ergodic", "slow_oscillation"]},
        "a0": {"type": "number"}, "q0": {"type": "number"}, "c0": {"type": "number"},
        "a_modes": _modes, "q_modes": _modes, "c_modes": _modes, "mu0_modes": _modes,
        "period": {"type": "number", "exclusiveMinimum": 0},
        "baselines": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
        "divergence_form": {"type": "boolean"},
        "b0": {"type": "number"}, "bump_amplitude": {"type": "number"}, "bump_radius": {"type": "number"},
        "limit": {"type": "object"},
        "transient_amplitude": {"type": "number"}, "decay_rate": {"type": "number"},
        "fields": {"type": "array", "items": {"enum": ["a", "q", "c"]}},
        "seed": {"type": ["integer", "null"]},
        "correlation_length": {"type": "number"}, "c_range": _range, "a_range": _range,
        "alpha": {"type": "number"}, "mu0_baseline": {"type": "number"}, "mu0_period": {"type": "number"},
        "c_shift": {"type": "number"},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "preset": {"type": "string"},
        "description": {"type": "string"},
        "aliases": {"type": "array", "items": {"type": "string"}},
        "seed": {"type": ["integer", "null"]},
        "medium": MEDIUM_SCHEMA,
        "stages": {"type": "array", "items": {"enum": list(STAGES)}, "uniqueItems": True},
        "validation": {
            "type": "object",
            "properties": {"window": _range, "samples": {"type": "integer", "minimum": 2},
                           "radius": {"type": "number", "minimum": 0}},
            "additionalProperties": False,
        },
        "eigen": {
            "type": "object",
            "properties": {
                "engine": {"enum": ["const_testfn", "periodic", "corrector", "corrector_window", "riccati",
                                    "dirichlet_window"]},
                "p_grid": {"oneOf": [
                    {"type": "array", "items": {"type": "number"}, "minItems": 3},
                    {"type": "object", "required": ["start", "stop", "step"],
                     "properties": {"start": {"type": "number"}, "stop": {"type": "number"},
                                    "step": {"type": "number", "exclusiveMinimum": 0}},
                     "additionalProperties": False}]},
                "policy": {"type": "object"},
                "refine": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "pde": {
            "type": "object",
            "properties": {
                "T": {"type": "number", "exclusiveMinimum": 0},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "dx": {"type": "number", "exclusiveMinimum": 0},
                "theta": {"type": "number", "minimum": 0, "maximum": 1},
                "right_margin": {"type": "number", "exclusiveMinimum": 0},
                "growth_chunk": {"type": "integer", "minimum": 1},
                "left_buffer": {"type": "number", "minimum": 0},
                "check_every": {"type": "integer", "minimum": 1},
                "max_nodes": {"type": "integer", "minimum": 3},
                "snapshot_times": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "domain": {"oneOf": [_range, {"type": "null"}]},
                "u0": {"type": "object"},
                "levels": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0,
                                                      "exclusiveMaximum": 1}},
                "record_every": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "speed": {
            "type": "object",
            "properties": {
                "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
                "tail_start": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "fit_start": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "w_grid": {"type": "object", "required": ["start", "stop", "step"],
                           "properties": {"start": {"type": "number"}, "stop": {"type": "number"},
                                          "step": {"type": "number", "exclusiveMinimum": 0}}},
                "expect": {
                    "type": "object",
                    "properties": {"w_theory": {"type": "number"}, "w_under": {"type": "number"},
                                   "w_over": {"type": "number"},
                                   "theory_tol": {"type": "number", "exclusiveMinimum": 0},
                                   "gap": {"type": "boolean"}},
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {"dir": {"type": "string"},
                           "formats": {"type": "array", "items": {"enum": ["csv", "json"]}},
                           "snapshots": {"type": "boolean"}},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


# --------------------------------------------------------------------- presets

def _preset_files() -> dict[str, dict]:
    out = {}
    root = resources.files("kppspeed") / "presets"
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            out[entry.name[:-5]] = json.loads(entry.read_text())
    return out


def presets() -> dict[str, dict]:
    """Preset name -> config (aliases included, pointing at the same config)."""
    base = _preset_files()
    out = dict(base)
    for name, cfg in base.items():
        for alias in cfg.get("aliases", []):
            out[alias] = cfg
    return out


def list_presets() -> list[tuple[str, str]]:
    return [(name, cfg.get("description", "")) for name, cfg in _preset_files().items()]


def deep_merge(base: Mapping, over: Mapping) -> dict:
    out = copy.deepcopy(dict(base))
    for k, v in over.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping) and k != "medium":
            out[k] = deep_merge(out[k], v)
        elif k == "medium" and isinstance(v, Mapping) and isinstance(out.get(k), Mapping) \
                and v.get("kind", out[k].get("kind")) == out[k].get("kind"):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _schema_error(err: jsonschema.ValidationError) -> ConfigError:
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    return ConfigError(f"config field {where}: {err.message}")


def resolve(config: Mapping) -> dict:
    """Merge a config onto its preset (if any) and validate the result."""
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as err:
        raise _schema_error(err) from None
    cfg = dict(config)
    name = cfg.get("preset")
    if name is not None:
        table = presets()
        if name not in table:
            raise ConfigError(f"config field preset: unknown preset {name!r}; known: {', '.join(sorted(table))}")
        cfg = deep_merge(table[name], {k: v for k, v in cfg.items() if k != "preset"})
        cfg["preset"] = name
    if "medium" not in cfg:
        raise ConfigError("config field medium: missing (give a preset or an inline medium)")
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as err:
        raise _schema_error(err) from None
    cfg.setdefault("stages", list(STAGES))
    return cfg


def load(path) -> dict:
    """Read and resolve a JSON config file; parse errors carry line and column."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: line {err.lineno} column {err.colno}: {err.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return resolve(raw)


# --------------------------------------------------------------------- media

def build_medium(spec: Mapping, seed: int | None = None) -> media.Medium:
    """Construct a Medium from its declarative description."""
    s = dict(spec)
    kind = s.pop("kind")
    shift = s.pop("c_shift", 0.0)
    try:
        if kind == "homogeneous":
            m = media.make_homogeneous(s.get("a0", 1.0), s.get("q0", 0.0), s.get("c0", 1.0))
        elif kind == "periodic":
            m = media.make_periodic(s.get("a_modes", []), s.get("q_modes", []), s.get("c_modes", []),
                                    s.get("period", 1.0), tuple(s.get("baselines", (1.0, 0.0, 1.0))),
                                    divergence_form=s.get("divergence_form", False))
        elif kind == "compact_perturbation":
            m = media.make_compact_perturbation(s["b0"], s.get("bump_amplitude", 0.0), s.get("bump_radius", 5.0))
        elif kind == "almost_periodic":
            m = media.make_almost_periodic(s.get("a_modes", []), s.get("q_modes", []), s.get("c_modes", []),
                                           tuple(s.get("baselines", (1.0, 0.0, 1.0))))
        elif kind == "asymptotic":
            limit = build_medium(s["limit"], seed)
            m = media.make_asymptotic(limit, s.get("transient_amplitude", 0.0), s.get("decay_rate", 0.05),
                                      tuple(s.get("fields", ("c",))))
        elif kind == "random_ergodic":
            sd = s.get("seed")
            sd = seed if sd is None else sd
            if sd is None:
                raise ConfigError("config field medium/seed: random media need a seed")
            m = media.make_random_ergodic(sd, s.get("correlation_length", 1.0), tuple(s.get("c_range", (0.5, 1.5))),
                                          tuple(s.get("a_range", (1.0, 1.0))))
        elif kind == "slow_oscillation":
            m = media.make_slowly_oscillating(s.get("mu0_modes", [[0.5, 1, 0.0]]), s.get("alpha", 0.5),
                                              s.get("mu0_baseline", 1.0), s.get("mu0_period", 1.0))
        else:
            raise ConfigError(f"config field medium/kind: unknown kind {kind!r}")
    except KeyError as err:
        raise ConfigError(f"config field medium/{err.args[0]}: required for kind {kind!r}") from None
    except HypothesisError as err:
        raise ConfigError(f"config field medium: {err}") from None
    if shift:
        m = m.with_c_shift(shift)
    return m


# --------------------------------------------------------------------- sweeps

SWEEP_ALIASES = {
    "seed": ("seed",),
    "b0": ("medium", "b0"),
    "alpha": ("medium", "alpha"),
    "epsilon": ("eigen", "policy", "epsilons"),
    "c0": ("medium", "c0"),
    "T": ("pde", "T"),
    "dx": ("pde", "dx"),
    "dt": ("pde", "dt"),
}


def apply_parameter(config: Mapping, name: str, value) -> dict:
    """Set one sweep parameter (alias or dotted path) in a resolved config.

    ``b0`` keeps the bump-to-baseline ratio of compact perturbations so every
    swept value stays admissible; ``epsilon`` sets the list (e, e/2, e/4).
    Expected speeds pinned by a preset describe its original medium, so a
    medium sweep drops them (b0 re-derives w = 2 sqrt(b0)).
    """
    cfg = copy.deepcopy(dict(config))
    path = SWEEP_ALIASES.get(name) or tuple(name.split("."))
    if name == "epsilon":
        value = [float(value), float(value) / 2, float(value) / 4]
    if name == "b0" and cfg.get("medium", {}).get("kind") == "compact_perturbation":
        old = cfg["medium"]["b0"]
        cfg["medium"]["bump_amplitude"] = cfg["medium"].get("bump_amplitude", 0.0) * float(value) / old
    expect = cfg.get("speed", {}).get("expect")
    if path[0] == "medium" and expect:
        for key in ("w_theory", "w_under", "w_over", "gap"):
            expect.pop(key, None)
        if name == "b0" and cfg["medium"].get("kind") == "compact_perturbation":
            expect["w_theory"] = 2.0 * math.sqrt(float(value))
    if name == "seed" and cfg.get("medium", {}).get("kind") == "random_ergodic":
        cfg["medium"]["seed"] = int(value)
    node = cfg
    for key in path[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"sweep parameter {name}: {key} is not a section")
    node[path[-1]] = value
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as err:
        raise _schema_error(err) from None
    return cfg
