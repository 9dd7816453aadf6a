"""Experiment configuration: JSON schema, loading and precondition checks."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from .disorder import DistributionSpec
from .errors import ConfigurationError, TrimwaveError
from .geometry import GeometrySpec, single_layer_gamma0
from .spectral import sigma0_single_layer

EXPERIMENTS = ("spectrum", "endpoints", "extended-check", "green", "wegner", "mobility-scan", "ucp")

_INT_LIST = {"type": "array", "items": {"type": "integer"}, "minItems": 1}
_NUM_LIST = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_ZETA = {
    "zeta_max": {"type": "number", "exclusiveMinimum": 0},
    "zeta_min": {"type": "number", "exclusiveMinimum": 0},
    "zeta_points": {"type": "integer", "minimum": 2},
}
_SIZE = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"m1": {"type": "integer"}, "m2": {"type": "integer"}, "k": _INT_LIST},
}

PARAM_SCHEMAS = {
    "spectrum": {
        "realizations": {"type": "integer", "minimum": 1},
        "dump_operator": {"type": "boolean"},
        "dump_potential": {"type": "boolean"},
    },
    "endpoints": {
        "fd_step": {"type": "number", "exclusiveMinimum": 0},
        "gap_threshold": {"type": "number", "minimum": 0},
    },
    "extended-check": {
        "realizations": {"type": "integer", "minimum": 1},
        "allow_odd": {"type": "boolean"},
        "dump_states": {"type": "boolean"},
    },
    "green": {
        "energies": _NUM_LIST,
        "source": _INT_LIST,
        "realization": {"type": "integer", "minimum": 0},
        **_ZETA,
    },
    "wegner": {
        "energy": {"type": "number"},
        "eps": _NUM_LIST,
        "boxes": {"type": "array", "items": _SIZE, "minItems": 1},
        "realizations": {"type": "integer", "minimum": 1},
        "gamma_floor": {"type": "number", "minimum": 0},
    },
    "mobility-scan": {
        "energies": _NUM_LIST,
        "energy_count": {"type": "integer", "minimum": 2},
        "energy_margin": {"type": "number", "minimum": 0},
        "realizations": {"type": "integer", "minimum": 1},
        "source": _INT_LIST,
        **_ZETA,
    },
    "ucp": {
        "realizations": {"type": "integer", "minimum": 1},
        "gamma_floor": {"type": "number", "exclusiveMinimum": 0},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["experiment", "geometry", "trim", "distribution", "seed"],
    "properties": {
        "schema": {"const": 1},
        "experiment": {"enum": list(EXPERIMENTS)},
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "required": ["d1", "d2", "periods", "m1", "m2", "k"],
            "properties": {
                "d1": {"type": "integer", "minimum": 1},
                "d2": {"type": "integer", "minimum": 1},
                "periods": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 2},
                "m1": {"type": "integer"},
                "m2": {"type": "integer"},
                "k": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "bc": {"type": "array", "items": {"enum": ["simple", "periodic"]}},
            },
        },
        "trim": {
            "oneOf": [
                {"const": "single-layer"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["gamma0"],
                    "properties": {"gamma0": {"type": "array", "items": _INT_LIST, "minItems": 1}},
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["single-layer"],
                    "properties": {
                        "single-layer": {
                            "type": "object",
                            "additionalProperties": False,
                            "properties": {
                                "directions": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                                "subset": {"type": "array", "items": _INT_LIST},
                            },
                        }
                    },
                },
            ]
        },
        "distribution": {
            "type": "object",
            "additionalProperties": False,
            "required": ["a", "b"],
            "properties": {"kind": {"const": "uniform"}, "a": {"type": "number"}, "b": {"type": "number"}},
        },
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "output": {"type": "string"},
        "params": {"type": "object"},
    },
}


@dataclass
class ExperimentConfig:
    experiment: str
    geometry: GeometrySpec
    bc: tuple[str, ...] | None
    gamma0: set
    distribution: DistributionSpec
    seed: int
    params: dict[str, Any]
    output: str | None
    raw: dict[str, Any] = field(repr=False, default_factory=dict)
    single_layer_default: bool = False

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _line_of(text: str, path) -> int | None:
    """Best-effort line number of the JSON element at ``path``."""
    pos = 0
    for key in path:
        if isinstance(key, str):
            hit = text.find(f'"{key}"', pos)
            if hit < 0:
                break
            pos = hit
    return text.count("\n", 0, pos) + 1 if pos else None


def _schema_errors(raw: Any, text: str) -> list[str]:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    out = []
    for err in sorted(validator.iter_errors(raw), key=lambda e: list(map(str, e.path))):
        where = "/".join(str(p) for p in err.path) or "<root>"
        path = list(err.path)
        if err.validator == "additionalProperties" and isinstance(err.instance, dict):
            extras = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            path += extras[:1]
        line = _line_of(text, path)
        prefix = f"line {line}: " if line else ""
        out.append(f"{prefix}{where}: {err.message}")
    if out or not isinstance(raw, dict):
        return out
    allowed = PARAM_SCHEMAS[raw["experiment"]]
    params_schema = {"type": "object", "additionalProperties": False, "properties": allowed}
    for err in jsonschema.Draft202012Validator(params_schema).iter_errors(raw.get("params", {})):
        path = ["params"] + list(err.path)
        anchor = list(path)
        if err.validator == "additionalProperties" and isinstance(err.instance, dict):
            anchor += sorted(set(err.instance) - set(allowed if not err.path else {}))[:1]
        line = _line_of(text, anchor)
        prefix = f"line {line}: " if line else ""
        out.append(f"{prefix}{'/'.join(map(str, path))}: {err.message}")
    return out


def parse_config(text: str) -> ExperimentConfig:
    """Parse and schema-check a config; raises :class:`ConfigurationError`."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"line {exc.lineno}: invalid JSON: {exc.msg}") from exc
    errors = _schema_errors(raw, text)
    if errors:
        raise ConfigurationError("\n".join(errors))
    g = raw["geometry"]
    try:
        spec = GeometrySpec(g["d1"], g["d2"], tuple(g["periods"]), g["m1"], g["m2"], tuple(g["k"]))
        bc = tuple(g["bc"]) if "bc" in g else None
        if bc is not None and len(bc) != spec.d:
            raise ConfigurationError(f"geometry/bc: needs {spec.d} entries, got {len(bc)}")
        trim = raw["trim"]
        default_layer = trim == "single-layer"
        if default_layer:
            gamma0 = single_layer_gamma0(spec)
        elif "gamma0" in trim:
            gamma0 = {tuple(x) for x in trim["gamma0"]}
        else:
            opts = trim["single-layer"]
            gamma0 = single_layer_gamma0(spec, opts.get("directions"), opts.get("subset"))
            default_layer = spec.d1 == 1 and "subset" not in opts
        dist = DistributionSpec(raw["distribution"]["a"], raw["distribution"]["b"],
                                raw["distribution"].get("kind", "uniform"))
    except TrimwaveError as exc:
        line = _line_of(text, ["geometry"]) if "geometry" in str(exc).lower() else None
        raise ConfigurationError((f"line {line}: " if line else "") + str(exc)) from exc
    return ExperimentConfig(raw["experiment"], spec, bc, gamma0, dist, raw["seed"],
                            dict(raw.get("params", {})), raw.get("output"), raw, default_layer)


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def physics_diagnostics(cfg: ExperimentConfig) -> list[str]:
    """Preconditions that can be checked without any eigensolve."""
    out = []
    spec = cfg.geometry
    closed = (sigma0_single_layer(spec.periods[0], spec.d2)
              if spec.d1 == 1 and cfg.single_layer_default else None)
    p = cfg.params
    if cfg.experiment == "extended-check":
        bc = cfg.bc or ("periodic",) * spec.d
        if "periodic" in bc[: spec.d1] and (spec.m2 - spec.m1) % 2 and not p.get("allow_odd", False):
            out.append(f"m2 - m1 = {spec.m2 - spec.m1} is odd with periodic confined bc; "
                       "exact extended states need an even strip width")
        if not cfg.single_layer_default and not _gamma0_single_layer(cfg):
            out.append("extended-check needs a single-layer trim set")
    if cfg.experiment == "wegner" and closed is not None:
        e = p.get("energy")
        if e is not None:
            gamma = closed.distance_to(e)
            floor = p.get("gamma_floor", 0.5)
            if gamma < floor:
                out.append(f"energy {e} is at distance {gamma:.4g} from Sigma0 {closed.components()}, "
                           f"below gamma_floor {floor}")
            elif max(p.get("eps", [0.04])) > gamma / 2:
                out.append(f"eps exceeds gamma/2 = {gamma / 2:.4g}")
    if cfg.experiment == "wegner" and "energy" not in p:
        out.append("wegner needs params.energy")
    if cfg.experiment == "green" and p.get("zeta_min", 1e-4) >= p.get("zeta_max", 1e-1):
        out.append("zeta_min must be below zeta_max")
    if cfg.experiment == "mobility-scan" and p.get("zeta_min", 1e-4) >= p.get("zeta_max", 1e-1):
        out.append("zeta_min must be below zeta_max")
    return out


def _gamma0_single_layer(cfg: ExperimentConfig) -> bool:
    d1 = cfg.geometry.d1
    return all(any(x[nu] == 0 for nu in range(d1)) for x in cfg.gamma0)


def validate(path: str | Path) -> list[str]:
    """Schema and precondition diagnostics; an empty list means valid."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        return [f"cannot read config: {exc}"]
    try:
        cfg = parse_config(text)
    except ConfigurationError as exc:
        return str(exc).splitlines()
    return physics_diagnostics(cfg)
