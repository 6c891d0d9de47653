"""
Experiment configuration: a line-oriented ``key = value`` file.

Keys are dotted (``pricing.strike = 0.4``). ``#`` starts a comment. Lists
are comma-separated. Schedules are written ``t:source:on|off`` with
1-based source numbers, e.g. ``field.schedule = 0.3:2:on, 0.7:2:off``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .asymmetry import AgentView
from .errors import ConfigurationError
from .infoflow import SourceSpec
from .pricing import CallSpec, DiscountCurve
from .stochastic import PointFieldSpec, SignalLaw, TimeGrid

_FIELD_KEYS = ("mode", "rate_on", "rate_off", "initial", "initial_prob", "schedule")

KNOWN_KEYS = {
    "seed", "n_paths",
    "grid.n_steps", "grid.delta",
    "prior.kind", "prior.atoms", "prior.weights", "prior.mean", "prior.sd", "prior.n_quad", "prior.value",
    "sources.sigma",
    "pricing.strike", "pricing.exercise", "pricing.rate", "pricing.mc_paths",
    "verify.reduction_cases", "verify.bayes_cases", "verify.mc_paths", "verify.mc_steps",
    "verify.brownian_paths", "verify.jump_samples", "verify.euler_paths", "verify.fk_grid",
    "verify.price_specs", "verify.price_paths", "verify.asymmetry_paths", "verify.bridge_paths",
    "verify.spot_paths",
}
KNOWN_KEYS |= {f"field.{k}" for k in _FIELD_KEYS}
KNOWN_KEYS |= {f"asymmetry.agent{a}.{k}" for a in (1, 2) for k in _FIELD_KEYS}

VERIFY_DEFAULTS = {
    "reduction_cases": 1000,
    "bayes_cases": 1000,
    "mc_paths": 20000,
    "mc_steps": 50,
    "brownian_paths": 4000,
    "jump_samples": 100000,
    "euler_paths": 100,
    "fk_grid": 401,
    "price_specs": 10,
    "price_paths": 200000,
    "asymmetry_paths": 200,
    "bridge_paths": 20000,
    "spot_paths": 50,
}


def parse_lines(text: str) -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigurationError(f"line {n}: unknown key {key!r}")
        if key in out:
            raise ConfigurationError(f"line {n}: duplicate key {key!r}")
        out[key] = value
    return out


def _float(raw: dict, key: str, default=None) -> Optional[float]:
    if key not in raw:
        if default is None:
            return None
        return float(default)
    try:
        v = float(raw[key])
    except ValueError:
        raise ConfigurationError(f"{key} must be a number, got {raw[key]!r}") from None
    if not math.isfinite(v):
        raise ConfigurationError(f"{key} must be finite")
    return v


def _int(raw: dict, key: str, default: int) -> int:
    if key not in raw:
        return default
    try:
        return int(raw[key])
    except ValueError:
        raise ConfigurationError(f"{key} must be an integer, got {raw[key]!r}") from None


def _floats(raw: dict, key: str):
    if key not in raw:
        return None
    try:
        vals = tuple(float(v) for v in raw[key].split(",") if v.strip())
    except ValueError:
        raise ConfigurationError(f"{key} must be a comma-separated list of numbers") from None
    if any(not math.isfinite(v) for v in vals):
        raise ConfigurationError(f"{key} entries must be finite")
    return vals


def _bools(raw: dict, key: str):
    if key not in raw:
        return None
    out = []
    for v in raw[key].split(","):
        v = v.strip().lower()
        if v in ("1", "true", "on"):
            out.append(True)
        elif v in ("0", "false", "off"):
            out.append(False)
        else:
            raise ConfigurationError(f"{key} entries must be 0/1, got {v!r}")
    return tuple(out)


def _schedule(text: str, n: int):
    events = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 3 or parts[2] not in ("on", "off"):
            raise ConfigurationError(f"schedule entry {item!r} must look like t:source:on|off")
        try:
            t, src = float(parts[0]), int(parts[1])
        except ValueError:
            raise ConfigurationError(f"schedule entry {item!r} has a bad time or source") from None
        if not (1 <= src <= n):
            raise ConfigurationError(f"schedule entry {item!r} references source {src} outside 1..{n}")
        events.append((t, src - 1, parts[2] == "on"))
    return tuple(events)


def _field(raw: dict, prefix: str, n: int, required: bool = True) -> Optional[PointFieldSpec]:
    mode_key = f"{prefix}.mode"
    if mode_key not in raw:
        if required:
            raise ConfigurationError(f"{mode_key} is required")
        return None
    mode = raw[mode_key]
    init = _bools(raw, f"{prefix}.initial") or (False,) * n
    if len(init) != n:
        raise ConfigurationError(f"{prefix}.initial needs {n} entries")
    if mode == "schedule":
        return PointFieldSpec(n, "schedule", init, schedule=_schedule(raw.get(f"{prefix}.schedule", ""), n))
    on = _floats(raw, f"{prefix}.rate_on") or (0.0,) * n
    off = _floats(raw, f"{prefix}.rate_off") or (0.0,) * n
    prob = _floats(raw, f"{prefix}.initial_prob")
    return PointFieldSpec(n, mode, init, on, off, initial_prob=prob)


def _prior(raw: dict) -> SignalLaw:
    kind = raw.get("prior.kind", "discrete")
    if kind == "discrete":
        atoms = _floats(raw, "prior.atoms")
        if not atoms:
            raise ConfigurationError("prior.atoms is required for a discrete prior")
        return SignalLaw.discrete(atoms, _floats(raw, "prior.weights"))
    if kind == "gaussian":
        mean = _float(raw, "prior.mean", 0.0)
        sd = _float(raw, "prior.sd", 1.0)
        if sd <= 0.0:
            raise ConfigurationError("prior.sd must be > 0")
        return SignalLaw.gaussian(mean, sd, _int(raw, "prior.n_quad", 129))
    if kind == "point":
        return SignalLaw.point_mass(_float(raw, "prior.value", 0.0))
    raise ConfigurationError(f"unknown prior.kind {kind!r}")


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    seed: int
    n_paths: int
    grid: TimeGrid
    prior: SignalLaw
    sources: SourceSpec
    field: PointFieldSpec
    call: Optional[CallSpec] = None
    curve: Optional[DiscountCurve] = None
    mc_paths: int = 100000
    agents: Optional[tuple] = None
    verify: dict = field(default_factory=dict)
    digest: str = ""

    def with_seed(self, seed: int) -> "ExperimentConfig":
        d = dict(self.__dict__)
        d["seed"] = int(seed)
        return ExperimentConfig(**d)


def parse_config(text: str) -> ExperimentConfig:
    raw = parse_lines(text)
    seed = _int(raw, "seed", 0)
    n_paths = _int(raw, "n_paths", 1)
    if n_paths < 1:
        raise ConfigurationError("n_paths must be >= 1")
    n_steps = _int(raw, "grid.n_steps", 100)
    delta = _float(raw, "grid.delta", 1e-8)
    if n_steps < 1:
        raise ConfigurationError("grid.n_steps must be >= 1")
    if not (0.0 < delta < 1.0 / n_steps):
        raise ConfigurationError("grid.delta must lie in (0, 1 / n_steps)")
    grid = TimeGrid(n_steps, delta)
    prior = _prior(raw)
    sig = _floats(raw, "sources.sigma")
    if not sig:
        raise ConfigurationError("sources.sigma is required")
    sources = SourceSpec(sig)
    n = len(sources)
    fs = _field(raw, "field", n)

    call = curve = None
    if "pricing.strike" in raw or "pricing.exercise" in raw:
        strike = _float(raw, "pricing.strike")
        exercise = _float(raw, "pricing.exercise")
        if strike is None or exercise is None:
            raise ConfigurationError("pricing needs both pricing.strike and pricing.exercise")
        curve = DiscountCurve.flat(_float(raw, "pricing.rate", 0.0))
        call = CallSpec(strike, exercise, prior, sources, fs)
    mc_paths = _int(raw, "pricing.mc_paths", 100000)
    if mc_paths < 2:
        raise ConfigurationError("pricing.mc_paths must be >= 2")

    agents = None
    a1 = _field(raw, "asymmetry.agent1", n, required=False)
    a2 = _field(raw, "asymmetry.agent2", n, required=False)
    if (a1 is None) != (a2 is None):
        raise ConfigurationError("the asymmetry block needs both agent1 and agent2")
    if a1 is not None:
        agents = (AgentView(1, a1), AgentView(2, a2))

    verify = dict(VERIFY_DEFAULTS)
    for k in VERIFY_DEFAULTS:
        verify[k] = _int(raw, f"verify.{k}", VERIFY_DEFAULTS[k])
        if verify[k] < 1:
            raise ConfigurationError(f"verify.{k} must be >= 1")

    return ExperimentConfig(seed, n_paths, grid, prior, sources, fs, call, curve, mc_paths, agents, verify,
                            hashlib.sha256(text.encode()).hexdigest())


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)
