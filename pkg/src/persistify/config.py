"""Scenario files: JSON text validated against ``scenario.schema.json``.

A scenario is parsed into a canonical document (defaults filled in, keys
sorted on output) and then turned into a :class:`~persistify.sim.SimConfig`.
``emit_config`` writes the canonical text; parsing it back gives the same
document.
"""
from __future__ import annotations

import copy
import json
import re
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

import jsonschema

from .energy import EnergyParams
from .environment import FieldSpec, GaussianComponent, InfoDensity, Modulation, Workspace
from .persistence import CascadeGains
from .sim import PersistenceConfig, SimConfig, TaskConfig

DEFAULTS: dict[str, Any] = {
    "workspace": {"lower": [-1.5, -1.0], "upper": [1.5, 1.0]},
    "field": {"kind": "constant", "value": 0.5},
    "density": {"kind": "gaussian", "center": [0.0, 0.0], "variance": 0.1, "value": 1.0},
    "energy": {"k": 0.05, "lambda": 3.0, "i_c": 0.85, "e_min": 0.2, "e_chg": 0.9},
    "persistence": {
        "enabled": True, "clf": True, "gamma1": 1.0, "gamma2": 1.0, "clf_gain": 1.0,
        "kappa_max": 100.0, "kappa_floor": 1e-6, "activation_fraction": 0.1,
        "release_steps": 50, "release_margin": 1e-3, "eps_row": 1e-10, "u_sat": None,
    },
    "task": {"kind": "explore", "K": 10, "kp": 1.0, "grid": [120, 90], "u_max": 0.3,
             "basis_resolution": 200},
    "sim": {"n_robots": 1, "dt": 0.02, "T": 100.0, "integrator": "euler", "seed": 0,
            "initial_positions": None, "initial_energies": None},
    "output": {"dir": "out", "trace": "trace.csv", "summary": "summary.json"},
}

# sections whose defaults are merged key by key; ``field`` is taken whole
_MERGED = ("workspace", "density", "energy", "persistence", "task", "sim", "output")


class ConfigError(ValueError):
    """Invalid scenario; the message names the offending key and line."""


def _schema() -> dict:
    text = resources.files("persistify").joinpath("scenario.schema.json").read_text("utf-8")
    return json.loads(text)


_VALIDATOR = None


def _validator():
    global _VALIDATOR
    if _VALIDATOR is None:
        _VALIDATOR = jsonschema.Draft202012Validator(_schema())
    return _VALIDATOR


def _line_of(text: str | None, path: Iterable) -> int | None:
    """Line of the last key of ``path``, searched after its parents' lines."""
    if not text:
        return None
    keys = [str(p) for p in path if isinstance(p, str)]
    if not keys:
        return None
    pos, found = 0, None
    for key in keys:
        m = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, pos)
        if m is None:
            break
        pos, found = m.end(), m.start()
    if found is None:
        return None
    return text.count("\n", 0, found) + 1


def _where(text, path, source) -> str:
    dotted = ".".join(str(p) for p in path) or "<root>"
    line = _line_of(text, path)
    loc = f"{source}:{line}" if line is not None else source
    return f"{loc}: key '{dotted}'"


def validate(doc: dict, text: str | None = None, source: str = "<config>") -> None:
    errors = sorted(_validator().iter_errors(doc), key=lambda e: list(e.absolute_path))
    if not errors:
        return
    err = errors[0]
    path = list(err.absolute_path)
    if err.validator == "additionalProperties":
        extra = re.findall(r"'([^']+)' was unexpected", err.message)
        if extra:
            path = path + [extra[0]]
            raise ConfigError(f"{_where(text, path, source)}: unknown key")
    raise ConfigError(f"{_where(text, path, source)}: {err.message}")


def canonical(doc: dict) -> dict:
    """Fill defaults.  A ``field`` section replaces the default one entirely."""
    out = copy.deepcopy(DEFAULTS)
    for section, body in doc.items():
        if section in _MERGED:
            out[section].update(copy.deepcopy(body))
        else:
            out[section] = copy.deepcopy(body)
    return out


def parse_config(text: str, source: str = "<config>") -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: malformed JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}:1: top level must be an object")
    validate(doc, text, source)
    doc = canonical(doc)
    build_sim_config(doc, text, source)  # semantic checks
    return doc


def emit_config(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(doc: dict, overrides: Iterable[str]) -> dict:
    """Apply ``section.key=value`` assignments; values are read as JSON when possible."""
    doc = copy.deepcopy(doc)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        if len(parts) < 2 or not all(parts):
            raise ConfigError(f"--set {item!r}: key must look like section.name")
        node = doc
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                node[p] = {}
            node = node[p]
        node[parts[-1]] = _parse_value(raw)
    validate(doc, None, "--set")
    return doc


def load_config(path, overrides: Iterable[str] = ()) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(path)!r}: {exc.strerror}") from None
    doc = parse_config(text, str(path))
    overrides = list(overrides)
    if overrides:
        doc = apply_overrides(doc, overrides)
        build_sim_config(doc, None, "--set")
    return doc


def _field(body: dict) -> FieldSpec:
    body = dict(body)
    if body.pop("preset", None) == "two-lobe":
        if body:
            raise ValueError("the two-lobe preset takes no other field keys")
        return FieldSpec.two_lobe()
    kind = body.get("kind", "constant")
    comps = tuple(
        GaussianComponent(
            center=tuple(c["center"]),
            width=c.get("width", 1.0),
            weight=c.get("weight", 1.0),
            modulation=tuple(Modulation(**m) for m in c.get("modulation", [{}, {}])),
        )
        for c in body.get("components", [])
    )
    return FieldSpec(
        kind=kind,
        value=body.get("value", 0.5),
        components=comps,
        stations=tuple(tuple(s) for s in body.get("stations", [])),
        station_radius=body.get("station_radius", 0.1),
        plateau=body.get("plateau", 1.0),
        falloff=body.get("falloff", 1.0),
    )


def build_sim_config(doc: dict, text: str | None = None, source: str = "<config>") -> SimConfig:
    section = "sim"
    try:
        section = "workspace"
        ws = Workspace(tuple(doc["workspace"]["lower"]), tuple(doc["workspace"]["upper"]))
        section = "field"
        field = _field(doc["field"])
        section = "density"
        d = doc["density"]
        density = InfoDensity(d["kind"], tuple(d["center"]), d["variance"], d["value"])
        section = "energy"
        e = doc["energy"]
        params = EnergyParams(k=e["k"], lam=e["lambda"], i_c=e["i_c"],
                              e_min=e["e_min"], e_chg=e["e_chg"])
        section = "persistence"
        p = doc["persistence"]
        pers = PersistenceConfig(
            enabled=p["enabled"], clf=p["clf"], cbf_gains=CascadeGains(p["gamma1"], p["gamma2"]),
            clf_gain=p["clf_gain"], kappa_max=p["kappa_max"], kappa_floor=p["kappa_floor"],
            activation_fraction=p["activation_fraction"], release_steps=p["release_steps"],
            release_margin=p["release_margin"], eps_row=p["eps_row"], u_sat=p["u_sat"])
        section = "task"
        tk = doc["task"]
        task = TaskConfig(kind=tk["kind"], K=tk["K"], kp=tk["kp"], grid=tuple(tk["grid"]),
                          u_max=tk["u_max"], basis_resolution=tk["basis_resolution"])
        section = "sim"
        s = doc["sim"]
        n = s["n_robots"]
        for key in ("initial_positions", "initial_energies"):
            if s[key] is not None and len(s[key]) != n:
                section = f"sim.{key}"
                raise ValueError(f"expected {n} entries, got {len(s[key])}")
        return SimConfig(n_robots=n, dt=s["dt"], T=s["T"], integrator=s["integrator"],
                         seed=s["seed"], initial_positions=s["initial_positions"],
                         initial_energies=s["initial_energies"], workspace=ws, field=field,
                         density=density, energy=params, persistence=pers, task=task)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"{_where(text, section.split('.'), source)}: {exc}") from None
