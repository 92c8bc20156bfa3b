"""Scenario JSON files.

Top-level keys are ``agents``, ``link``, ``game``, ``roi``, ``solver`` and
``sim``. ``agents`` and every ``link`` field are required; everything else
falls back to the defaults below. ``agents`` is either a list of
``{"id": int, "position": [x, y, z]}`` objects (ids 0..N-1) or a random
placement block ``{"count", "center", "spread_m", "altitude_m"}`` drawn
with ``sim.seed``.
"""
import hashlib
import json
from importlib import resources

import numpy as np

from .coverage import RoiGaussian
from .game import PayoffWeights
from .meanfield import SolverConfig
from .sim import ScenarioConfig, default_scenario
from .topology import LinkModelParams

__all__ = ["ConfigError", "load_scenario", "parse_scenario", "resolve", "config_hash",
           "default_scenario_document"]

SECTIONS = ("agents", "link", "game", "roi", "solver", "sim")
LINK_FIELDS = ("tx_power_dbm", "ref_loss_db", "path_loss_exponent", "rx_sensitivity_dbm", "ref_distance_m")
DEFAULTS = {
    "game": {"h": 2, "alpha_a": 1.0, "alpha_b": 0.001, "action_step_m": 20.0, "action_dims": 2,
             "virtual_neighbors": True},
    "roi": {"mean": [0.0, 0.0], "covariance": [[40000.0, 0.0], [0.0, 40000.0]], "confidence": 0.95,
            "resolution": 40},
    "solver": {"delta": 1e-4, "max_sweeps": 100, "update_order": "round_robin", "seed": 0},
    "sim": {"steps": 20, "seed": 0},
}
RANDOM_AGENT_DEFAULTS = {"center": [-300.0, -300.0], "spread_m": 100.0, "altitude_m": 30.0}


class ConfigError(ValueError):
    """Invalid scenario; ``field`` is the dotted path of the offending entry."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


def default_scenario_document() -> dict:
    text = resources.files("stagegame").joinpath("data/default_scenario.json").read_text()
    return json.loads(text)


def load_scenario(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
    return doc


def _number(section, key, value, kind=float):
    path = f"{section}.{key}"
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if kind is int and value != int(value):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return kind(value)


def resolve(doc) -> dict:
    """Fill defaults and type-check; returns a normalized document."""
    if not isinstance(doc, dict):
        raise ConfigError("", "scenario must be a JSON object")
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown top-level key")
    for name in ("agents", "link"):
        if name not in doc:
            raise ConfigError(name, "missing required field")

    out = {}
    link = doc["link"]
    if not isinstance(link, dict):
        raise ConfigError("link", "expected an object")
    for key in LINK_FIELDS:
        if key not in link:
            raise ConfigError(f"link.{key}", "missing required field")
    for key in set(link) - set(LINK_FIELDS):
        raise ConfigError(f"link.{key}", "unknown field")
    out["link"] = {k: _number("link", k, link[k]) for k in LINK_FIELDS}

    for name, defaults in DEFAULTS.items():
        section = doc.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(name, "expected an object")
        for key in section:
            if key not in defaults:
                raise ConfigError(f"{name}.{key}", "unknown field")
        out[name] = {**defaults, **section}

    g = out["game"]
    g["h"] = _number("game", "h", g["h"], int)
    g["action_dims"] = _number("game", "action_dims", g["action_dims"], int)
    for k in ("alpha_a", "alpha_b", "action_step_m"):
        g[k] = _number("game", k, g[k])
    if not isinstance(g["virtual_neighbors"], bool):
        raise ConfigError("game.virtual_neighbors", "expected true or false")
    r = out["roi"]
    r["confidence"] = _number("roi", "confidence", r["confidence"])
    r["resolution"] = _number("roi", "resolution", r["resolution"], int)
    s = out["solver"]
    s["delta"] = _number("solver", "delta", s["delta"])
    s["max_sweeps"] = _number("solver", "max_sweeps", s["max_sweeps"], int)
    s["seed"] = _number("solver", "seed", s["seed"], int)
    for k in ("steps", "seed"):
        out["sim"][k] = _number("sim", k, out["sim"][k], int)

    agents = doc["agents"]
    if isinstance(agents, dict):
        if "count" not in agents:
            raise ConfigError("agents.count", "missing required field")
        for key in set(agents) - {"count", *RANDOM_AGENT_DEFAULTS}:
            raise ConfigError(f"agents.{key}", "unknown field")
        block = {**RANDOM_AGENT_DEFAULTS, **agents}
        block["count"] = _number("agents", "count", block["count"], int)
        block["spread_m"] = _number("agents", "spread_m", block["spread_m"])
        block["altitude_m"] = _number("agents", "altitude_m", block["altitude_m"])
        out["agents"] = block
    elif isinstance(agents, list):
        if not agents:
            raise ConfigError("agents", "at least one agent is required")
        rows = []
        for idx, a in enumerate(agents):
            path = f"agents[{idx}]"
            if not isinstance(a, dict) or "position" not in a:
                raise ConfigError(f"{path}.position", "missing required field")
            if a.get("id", idx) != idx:
                raise ConfigError(f"{path}.id", f"ids must be 0..N-1 in order (expected {idx})")
            p = a["position"]
            if not (isinstance(p, list) and len(p) == 3):
                raise ConfigError(f"{path}.position", "expected [x, y, z]")
            rows.append({"id": idx, "position": [_number(path, f"position[{c}]", v) for c, v in enumerate(p)]})
        out["agents"] = rows
    else:
        raise ConfigError("agents", "expected a list of agents or a random placement object")
    return out


def config_hash(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def parse_scenario(doc) -> tuple:
    """Validate a scenario document; returns (ScenarioConfig, resolved document)."""
    resolved = resolve(doc)
    g, r, s, sim = resolved["game"], resolved["roi"], resolved["solver"], resolved["sim"]
    section = "link"
    try:
        link = LinkModelParams(**resolved["link"])
        section = "game"
        weights = PayoffWeights(g["alpha_a"], g["alpha_b"])
        section = "roi"
        roi = RoiGaussian(np.asarray(r["mean"], dtype=float), np.asarray(r["covariance"], dtype=float),
                          r["confidence"])
        section = "solver"
        solver = SolverConfig(s["delta"], s["max_sweeps"], s["update_order"], s["seed"])
        section = "agents"
        common = dict(link=link, h=g["h"], weights=weights, action_step_m=g["action_step_m"],
                      action_dims=g["action_dims"], roi=roi, resolution=r["resolution"], solver=solver,
                      steps=sim["steps"], virtual_neighbors=g["virtual_neighbors"])
        agents = resolved["agents"]
        if isinstance(agents, dict):
            config = default_scenario(agents["count"], sim["seed"], center=agents["center"],
                                      spread_m=agents["spread_m"], altitude_m=agents["altitude_m"], **common)
        else:
            config = ScenarioConfig(positions=[a["position"] for a in agents], seed=sim["seed"], **common)
        section = "game"
        config.action_set()
    except (ValueError, TypeError) as exc:
        raise ConfigError(section, str(exc)) from None
    return config, resolved
