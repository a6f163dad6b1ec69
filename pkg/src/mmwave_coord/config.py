"""Experiment files: parsing, validation and parameter sweeps.

An experiment file is JSON with two top-level objects.  ``network`` holds
the physical parameters with units spelled out in the key names;
``experiment`` says what to compute.  Example::

    {
      "network": {
        "propagation": {"alpha_los": 2, "alpha_nlos": 4, "intercept_los_db": -60,
                        "intercept_nlos_db": -70, "mu": 144},
        "antenna": {"n_antennas": 12, "side_lobe_db": -10, "relative_gain": 0.6},
        "noise_dbm_per_hz": -174,
        "operators": [
          {"density_per_m2": 5e-5, "tx_power_dbm": 20, "bandwidth_mhz": 100, "coord_size": 1},
          {"density_per_m2": 1e-4, "tx_power_dbm": 25, "bandwidth_mhz": 200, "coord_size": 6}
        ]
      },
      "experiment": {
        "mode": "coverage_both",
        "grid": {"min": 1e7, "max": 3e9, "count": 60, "spacing": "linear"},
        "sim": {"n_realizations": 100000, "base_seed": 1}
      }
    }

``mu`` may be ``null`` for an all-LoS network.  Sweeps name parameters by
path, e.g. ``network.operators[1].coord_size``.
"""
from __future__ import annotations

import copy
import itertools
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .propagation import (AntennaParams, NetworkConfig, OperatorParams, PropagationParams, db_to_linear,
                          dbm_to_watts)

__all__ = [
    "ConfigError",
    "ValidationReport",
    "ExperimentSpec",
    "MODES",
    "load_document",
    "parse_document",
    "validate_document",
    "network_from_dict",
    "set_path",
    "get_path",
    "expand_sweep",
]

MODES = ("cdf_verify", "los_ratio", "coverage_analytic", "coverage_sim", "coverage_both", "sweep")

_NUMBER = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "required": ["network", "experiment"],
    "additionalProperties": False,
    "properties": {
        "network": {
            "type": "object",
            "required": ["propagation", "antenna", "operators"],
            "additionalProperties": False,
            "properties": {
                "propagation": {
                    "type": "object",
                    "required": ["alpha_los", "alpha_nlos", "intercept_los_db", "intercept_nlos_db", "mu"],
                    "additionalProperties": False,
                    "properties": {
                        "alpha_los": _POS,
                        "alpha_nlos": _POS,
                        "intercept_los_db": _NUMBER,
                        "intercept_nlos_db": _NUMBER,
                        "mu": {"type": ["number", "null"], "exclusiveMinimum": 0},
                        "fixed_los_probability": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
                    },
                },
                "antenna": {
                    "type": "object",
                    "required": ["n_antennas", "side_lobe_db", "relative_gain"],
                    "additionalProperties": False,
                    "properties": {
                        "n_antennas": {"type": "integer", "minimum": 1},
                        "side_lobe_db": _NUMBER,
                        "relative_gain": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                    },
                },
                "noise_dbm_per_hz": _NUMBER,
                "operators": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["density_per_m2", "tx_power_dbm", "bandwidth_mhz", "coord_size"],
                        "additionalProperties": False,
                        "properties": {
                            "density_per_m2": _POS,
                            "tx_power_dbm": _NUMBER,
                            "bandwidth_mhz": _POS,
                            "coord_size": {"type": "integer", "minimum": 0},
                        },
                    },
                },
            },
        },
        "experiment": {
            "type": "object",
            "required": ["mode"],
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": list(MODES)},
                "grid": {
                    "type": "object",
                    "required": ["count"],
                    "additionalProperties": False,
                    "properties": {
                        "min": _POS,
                        "max": _POS,
                        "count": {"type": "integer", "minimum": 2},
                        "spacing": {"enum": ["linear", "log"]},
                    },
                },
                "sim": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "n_realizations": {"type": "integer", "minimum": 1},
                        "base_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                        "window_radius": {"type": ["number", "null"], "exclusiveMinimum": 0},
                    },
                },
                "ranks": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
                "operator_index": {"type": "integer", "minimum": 0},
                "tolerance": {"type": "number", "exclusiveMinimum": 1e-12, "exclusiveMaximum": 1e-2},
                "sweep": {
                    "type": "object",
                    "required": ["mode", "axes"],
                    "additionalProperties": False,
                    "properties": {
                        "mode": {"enum": [m for m in MODES if m != "sweep"]},
                        "axes": {
                            "type": "array",
                            "minItems": 1,
                            "items": {
                                "type": "object",
                                "required": ["path", "values"],
                                "additionalProperties": False,
                                "properties": {
                                    "path": {"type": "string"},
                                    "values": {"type": "array", "minItems": 1},
                                },
                            },
                        },
                        "no_sharing_baseline": {"type": "boolean"},
                    },
                },
            },
        },
    },
}


class ConfigError(ValueError):
    """Malformed experiment file; ``problems`` lists every offending key."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def render(self) -> str:
        lines = [f"error: {e}" for e in self.errors] + [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines) if lines else "ok: configuration is valid"


def load_document(path) -> dict:
    """Read a JSON experiment file or a run manifest (which embeds one)."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from None
    if isinstance(doc, dict) and "experiment_spec" in doc and "network" not in doc:
        doc = doc["experiment_spec"]
    return doc


def _where(err) -> str:
    parts = []
    for p in err.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else (f".{p}" if parts else str(p)))
    return "".join(parts) or "<root>"


_PATH_TOKEN = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)|\[(\d+)\]")


def _tokens(path: str):
    out, pos = [], 0
    for m in _PATH_TOKEN.finditer(path):
        gap = path[pos:m.start()]
        if gap not in ("", "."):
            raise ConfigError([f"cannot parse parameter path {path!r}"])
        out.append(m.group(1) if m.group(1) is not None else int(m.group(2)))
        pos = m.end()
    if pos != len(path) or not out:
        raise ConfigError([f"cannot parse parameter path {path!r}"])
    return out


def get_path(doc: dict, path: str):
    node = doc
    for tok in _tokens(path):
        try:
            node = node[tok]
        except (KeyError, IndexError, TypeError):
            raise ConfigError([f"parameter path {path!r} does not exist"]) from None
    return node


def set_path(doc: dict, path: str, value) -> dict:
    """Copy of ``doc`` with the parameter at ``path`` replaced."""
    out = copy.deepcopy(doc)
    toks = _tokens(path)
    node = out
    for tok in toks[:-1]:
        try:
            node = node[tok]
        except (KeyError, IndexError, TypeError):
            raise ConfigError([f"parameter path {path!r} does not exist"]) from None
    last = toks[-1]
    if isinstance(last, int):
        if not isinstance(node, list) or last >= len(node):
            raise ConfigError([f"parameter path {path!r} does not exist"])
    elif not isinstance(node, dict) or last not in node:
        if not (isinstance(node, dict) and path.startswith("network.")):
            raise ConfigError([f"parameter path {path!r} does not exist"])
    node[last] = value
    return out


def network_from_dict(net: dict) -> NetworkConfig:
    pp = net["propagation"]
    mu = pp["mu"]
    propagation = PropagationParams(
        alpha_los=float(pp["alpha_los"]),
        alpha_nlos=float(pp["alpha_nlos"]),
        c_los=float(db_to_linear(pp["intercept_los_db"])),
        c_nlos=float(db_to_linear(pp["intercept_nlos_db"])),
        mu=math.inf if mu is None else float(mu),
        fixed_los_probability=pp.get("fixed_los_probability"),
    )
    ant = net["antenna"]
    antenna = AntennaParams(int(ant["n_antennas"]), float(db_to_linear(ant["side_lobe_db"])),
                            float(ant["relative_gain"]))
    operators = tuple(
        OperatorParams(float(op["density_per_m2"]), float(dbm_to_watts(op["tx_power_dbm"])),
                       float(op["bandwidth_mhz"]) * 1e6, int(op["coord_size"]))
        for op in net["operators"]
    )
    return NetworkConfig(operators, propagation, antenna,
                         float(dbm_to_watts(net.get("noise_dbm_per_hz", -174.0))))


def _semantic_checks(doc: dict, report: ValidationReport):
    net = doc["network"]
    try:
        config = network_from_dict(net)
    except ValueError as exc:
        report.errors.append(f"network: {exc}")
        return
    for key in ("intercept_los_db", "intercept_nlos_db"):
        if net["propagation"][key] > 0:
            report.warnings.append(
                f"network.propagation.{key} = {net['propagation'][key]} dB is positive; "
                "path-loss intercepts are normally negative")
    if config.total_coord_size > config.antenna.n_antennas:
        report.warnings.append(
            f"{config.total_coord_size} coordinated BSs exceed n_antennas = {config.antenna.n_antennas}; "
            "the model assumes one RF chain per coordinated BS, so the nulling is infeasible in practice "
            "(results are computed anyway)")
    exp = doc["experiment"]
    mode = exp["mode"]
    inner = exp.get("sweep", {}).get("mode") if mode == "sweep" else mode
    if mode == "sweep" and "sweep" not in exp:
        report.errors.append("experiment: 'sweep' is required when mode is 'sweep'")
    grid = exp.get("grid")
    if inner and inner.startswith("coverage") and (grid is None or "min" not in grid or "max" not in grid):
        report.errors.append("experiment.grid: coverage modes need 'min', 'max' and 'count' (bit/s)")
    if grid and "min" in grid and "max" in grid and grid["min"] >= grid["max"]:
        report.errors.append("experiment.grid: 'min' must be below 'max'")
    if inner in ("cdf_verify", "los_ratio") and "ranks" not in exp:
        report.errors.append(f"experiment: 'ranks' is required for mode {inner!r}")
    idx = exp.get("operator_index", 0)
    if idx >= len(net["operators"]):
        report.errors.append(f"experiment.operator_index = {idx} but only {len(net['operators'])} operators")
    if inner and inner.startswith("coverage") and net["operators"][0]["coord_size"] < 1:
        report.errors.append("network.operators[0].coord_size must be at least 1 (the serving BS)")
    if mode == "sweep" and "sweep" in exp:
        for axis in exp["sweep"]["axes"]:
            try:
                get_path(doc, axis["path"])
            except ConfigError as exc:
                report.errors.extend(exc.problems)


def validate_document(doc) -> ValidationReport:
    """Schema and sanity checks; never raises for content problems."""
    report = ValidationReport()
    validator = jsonschema.Draft202012Validator(SCHEMA)
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path))):
        report.errors.append(f"{_where(err)}: {err.message}")
    if report.errors:
        return report
    _semantic_checks(doc, report)
    if report.ok and doc["experiment"]["mode"] == "sweep":
        for point, _ in expand_sweep(doc):
            sub = ValidationReport()
            _semantic_checks(point, sub)
            report.errors.extend(e for e in sub.errors if e not in report.errors)
            report.warnings.extend(w for w in sub.warnings if w not in report.warnings)
    return report


@dataclass(frozen=True)
class ExperimentSpec:
    """A validated experiment: resolved network plus what to compute."""

    document: dict
    mode: str
    config: NetworkConfig

    @property
    def experiment(self) -> dict:
        return self.document["experiment"]

    @property
    def grid(self) -> dict | None:
        return self.experiment.get("grid")

    @property
    def sim(self) -> dict:
        sim = {"n_realizations": 100000, "base_seed": 0, "window_radius": None}
        sim.update(self.experiment.get("sim", {}))
        return sim

    def grid_values(self):
        import numpy as np

        g = self.grid
        if g is None or "min" not in g:
            return None
        if g.get("spacing", "linear") == "log":
            return np.geomspace(g["min"], g["max"], g["count"])
        return np.linspace(g["min"], g["max"], g["count"])


def parse_document(doc) -> ExperimentSpec:
    """Validate and resolve; raises :class:`ConfigError` listing every problem."""
    report = validate_document(doc)
    if not report.ok:
        raise ConfigError(report.errors)
    return ExperimentSpec(doc, doc["experiment"]["mode"], network_from_dict(doc["network"]))


def _label(value) -> str:
    return re.sub(r"[^A-Za-z0-9._+-]", "", str(value))


def _axis_name(path: str) -> str:
    """Compact file-name tag, e.g. ``operators1.coord_size``."""
    toks = [t for t in _tokens(path) if t not in ("network", "experiment")]
    name = ""
    for t in toks:
        name += str(t) if isinstance(t, int) else (f".{t}" if name else t)
    return _label(name)


def expand_sweep(doc: dict):
    """Yield ``(document, tag)`` for each point of the cartesian sweep."""
    sweep = doc["experiment"]["sweep"]
    axes = sweep["axes"]
    for combo in itertools.product(*(a["values"] for a in axes)):
        point = copy.deepcopy(doc)
        tags = []
        for axis, value in zip(axes, combo):
            point = set_path(point, axis["path"], value)
            tags.append(f"{_axis_name(axis['path'])}={_label(value)}")
        point["experiment"] = {k: v for k, v in point["experiment"].items() if k != "sweep"}
        point["experiment"]["mode"] = sweep["mode"]
        yield point, "__".join(tags)
