"""
Random-variate generation: time grids, Brownian bridges, switching point
fields and signal laws.

Every random quantity is drawn from a substream keyed by
``(seed, index, role)`` so that a path can be regenerated in isolation, in
any order, on any worker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from itertools import product
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError

Array = np.ndarray

__all__ = [
    "Stream",
    "substream",
    "TimeGrid",
    "SignalLaw",
    "PointFieldSpec",
    "SwitchPath",
    "BridgePath",
    "sample_bridge",
    "sample_bridges",
    "sample_source_bridges",
    "refine_bridges",
    "sample_switch_path",
    "state_probabilities",
]

_SEED_MASK = (1 << 64) - 1


class Stream(IntEnum):
    """Roles of the independent random substreams attached to one path."""

    SIGNAL = 0
    SWITCH = 1
    BRIDGE = 2
    BRIDGE_FILL = 3
    AGENT_SWITCH = 4
    MC_BLOCK = 5
    JUMP = 6
    CHECK = 7


def substream(seed: int, index: int, role: int) -> np.random.Generator:
    """Counter-based generator for ``(seed, index, role)``.

    Philox keyed through a SeedSequence; the result depends only on the
    three integers, never on call order.
    """
    ss = np.random.SeedSequence(int(seed) & _SEED_MASK, spawn_key=(int(index), int(role)))
    return np.random.Generator(np.random.Philox(ss))


def _readonly(a: Array) -> Array:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------- #
# Time grid
# --------------------------------------------------------------------------- #

@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Nodes ``k/N`` capped at ``1 - delta`` plus an exact terminal node at 1."""

    n_steps: int
    delta: float = 1e-8
    nodes: Array = field(init=False, repr=False)

    def __post_init__(self):
        n = self.n_steps
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ConfigurationError(f"n_steps must be a positive integer, got {n!r}")
        if not (0.0 < self.delta <= 1e-3):
            raise ConfigurationError(f"terminal guard must lie in (0, 1e-3], got {self.delta}")
        interior = np.minimum(np.arange(n + 1) / n, 1.0 - self.delta)
        nodes = np.append(interior, 1.0)
        if np.any(np.diff(nodes) <= 0.0):
            raise ConfigurationError("grid nodes are not strictly increasing; lower n_steps or delta")
        object.__setattr__(self, "nodes", _readonly(nodes))

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def dt(self) -> float:
        return 1.0 / self.n_steps


# --------------------------------------------------------------------------- #
# Signal law
# --------------------------------------------------------------------------- #

@dataclass(frozen=True, eq=False)
class SignalLaw:
    """Finite atomic law of the signal X.

    Continuous priors are discretized once, at construction, and every
    downstream computation is exact on the resulting atoms.
    """

    atoms: Array
    weights: Array
    origin: str = "native-discrete"
    log_weights: Array = field(init=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.atoms, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if x.shape != w.shape or x.size == 0:
            raise ConfigurationError("atoms and weights must be non-empty and of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
            raise ConfigurationError("atoms and weights must be finite")
        if np.any(w <= 0.0):
            raise ConfigurationError("prior weights must be strictly positive")
        order = np.argsort(x, kind="stable")
        x, w = x[order], w[order]
        if np.any(np.diff(x) <= 0.0):
            raise ConfigurationError("atoms must be distinct")
        total = w.sum()
        w = w / total
        object.__setattr__(self, "atoms", _readonly(x))
        object.__setattr__(self, "weights", _readonly(w))
        object.__setattr__(self, "log_weights", _readonly(np.log(w)))

    # constructors --------------------------------------------------------- #

    @classmethod
    def discrete(cls, atoms: Sequence[float], weights: Optional[Sequence[float]] = None) -> "SignalLaw":
        atoms = np.asarray(atoms, dtype=float)
        if weights is None:
            weights = np.full(atoms.shape, 1.0 / atoms.size)
        return cls(atoms, np.asarray(weights, dtype=float))

    @classmethod
    def point_mass(cls, c: float) -> "SignalLaw":
        return cls(np.array([float(c)]), np.array([1.0]))

    @classmethod
    def gaussian(cls, mean: float, sd: float, n_nodes: int = 129) -> "SignalLaw":
        """Gauss-Hermite (probabilists') discretization of N(mean, sd^2)."""
        if sd <= 0 or n_nodes < 1:
            raise ConfigurationError("gaussian prior needs sd > 0 and n_nodes >= 1")
        z, w = np.polynomial.hermite_e.hermegauss(n_nodes)
        keep = w > 0.0
        return cls(mean + sd * z[keep], w[keep], origin=f"quadrature(gaussian, {n_nodes})")

    @classmethod
    def from_density(
        cls,
        pdf: Callable[[Array], Array],
        lower: float,
        upper: float,
        n_nodes: int = 129,
        name: str = "density",
    ) -> "SignalLaw":
        """Uniform-grid discretization of a density on ``[lower, upper]``."""
        if not upper > lower:
            raise ConfigurationError("density support must have upper > lower")
        x = np.linspace(lower, upper, n_nodes)
        w = np.asarray(pdf(x), dtype=float)
        keep = w > 0.0
        if not np.any(keep):
            raise ConfigurationError("density vanishes on the whole grid")
        return cls(x[keep], w[keep], origin=f"quadrature({name}, {n_nodes})")

    # accessors ------------------------------------------------------------ #

    def __len__(self) -> int:
        return self.atoms.size

    def moment(self, k: int = 1) -> float:
        return float(np.dot(self.weights, self.atoms ** k))

    def mean(self) -> float:
        return self.moment(1)

    def variance(self) -> float:
        m = self.mean()
        return float(np.dot(self.weights, (self.atoms - m) ** 2))

    def sample(self, rng: np.random.Generator, size=None):
        """Inverse-CDF draws from the atomic law."""
        u = rng.random(size)
        cdf = np.cumsum(self.weights)
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), self.atoms.size - 1)
        return self.atoms[idx]


# --------------------------------------------------------------------------- #
# Point fields and switch paths
# --------------------------------------------------------------------------- #

_MODES = ("independent", "monotone", "schedule")


@dataclass(frozen=True)
class PointFieldSpec:
    """Law of the activity vector of ``n_sources`` information sources.

    ``independent``: each source is a two-state chain with its own on/off
    rates. ``monotone``: activation only. ``schedule``: a fixed list of
    ``(time, source, on)`` events (source indices are 0-based).
    ``initial_prob``, when given, replaces ``initial_mask`` by independent
    per-source Bernoulli draws.
    """

    n_sources: int
    mode: str
    initial_mask: tuple = ()
    rate_on: tuple = ()
    rate_off: tuple = ()
    schedule: tuple = ()
    initial_prob: Optional[tuple] = None

    def __post_init__(self):
        n = self.n_sources
        if n < 1:
            raise ConfigurationError("a point field needs at least one source")
        if self.mode not in _MODES:
            raise ConfigurationError(f"unknown point-field mode {self.mode!r}")
        mask = tuple(bool(b) for b in (self.initial_mask or (False,) * n))
        object.__setattr__(self, "initial_mask", mask)
        if len(mask) != n:
            raise ConfigurationError("initial_mask length must equal n_sources")
        if self.initial_prob is not None:
            p = tuple(float(v) for v in self.initial_prob)
            if len(p) != n or any(not (0.0 <= v <= 1.0) for v in p):
                raise ConfigurationError("initial_prob needs n_sources values in [0, 1]")
            object.__setattr__(self, "initial_prob", p)

        if self.mode == "schedule":
            events = tuple((float(t), int(i), bool(on)) for t, i, on in self.schedule)
            object.__setattr__(self, "schedule", events)
            self._check_schedule(events, mask)
            return

        on = tuple(float(r) for r in self.rate_on)
        off = tuple(float(r) for r in (self.rate_off or (0.0,) * n))
        object.__setattr__(self, "rate_on", on)
        object.__setattr__(self, "rate_off", off)
        if len(on) != n or len(off) != n:
            raise ConfigurationError("rate vectors must have n_sources entries")
        if any(not (math.isfinite(r) and r >= 0.0) for r in on + off):
            raise ConfigurationError("switching rates must be finite and >= 0")
        if self.mode == "monotone" and any(r != 0.0 for r in off):
            raise ConfigurationError("monotone point fields forbid deactivation")

    def _check_schedule(self, events, mask):
        n = self.n_sources
        last = [-1.0] * n
        state = list(mask)
        for t, i, on in sorted(events, key=lambda e: e[0]):
            if not (0 <= i < n):
                raise ConfigurationError(f"schedule references source {i} outside 0..{n - 1}")
            if not (0.0 < t < 1.0):
                raise ConfigurationError("scheduled event times must lie in (0, 1)")
            if t <= last[i]:
                raise ConfigurationError(f"schedule times for source {i} must be strictly increasing")
            if state[i] == on:
                raise ConfigurationError(f"scheduled event at t={t} does not change source {i}")
            last[i] = t
            state[i] = on

    # constructors --------------------------------------------------------- #

    @classmethod
    def independent(cls, rate_on, rate_off, initial_mask=None, initial_prob=None):
        n = len(rate_on)
        return cls(n, "independent", tuple(initial_mask or (False,) * n), tuple(rate_on), tuple(rate_off),
                   initial_prob=initial_prob)

    @classmethod
    def monotone(cls, rate_on, initial_mask=None):
        n = len(rate_on)
        return cls(n, "monotone", tuple(initial_mask or (False,) * n), tuple(rate_on), (0.0,) * n)

    @classmethod
    def deterministic(cls, n_sources: int, events, initial_mask=None):
        return cls(n_sources, "schedule", tuple(initial_mask or (False,) * n_sources), schedule=tuple(events))

    @classmethod
    def always_on(cls, n_sources: int):
        return cls.monotone((0.0,) * n_sources, (True,) * n_sources)


@dataclass(frozen=True, eq=False)
class SwitchPath:
    """Piecewise-constant, right-continuous activity path.

    ``states[0]`` holds on ``[0, event_times[0])`` and ``states[k]`` on
    ``[event_times[k-1], event_times[k])``.
    """

    event_times: Array
    states: Array

    def __post_init__(self):
        times = np.asarray(self.event_times, dtype=float)
        states = np.asarray(self.states, dtype=bool)
        if states.ndim != 2 or states.shape[0] != times.size + 1:
            raise ConfigurationError("states must have one more row than event_times")
        if np.any(np.diff(times) <= 0.0):
            raise ConfigurationError("event times must be strictly increasing")
        times.setflags(write=False)
        states.setflags(write=False)
        object.__setattr__(self, "event_times", times)
        object.__setattr__(self, "states", states)

    @classmethod
    def constant(cls, mask) -> "SwitchPath":
        return cls(np.empty(0), np.asarray([mask], dtype=bool))

    @property
    def n_sources(self) -> int:
        return self.states.shape[1]

    @property
    def initial(self) -> Array:
        return self.states[0]

    def masks_at(self, t) -> Array:
        """Activity at time(s) ``t`` (right-continuous)."""
        k = np.searchsorted(self.event_times, t, side="right")
        return self.states[k]

    def masks_before(self, t) -> Array:
        """Left limits of the activity at time(s) ``t``."""
        k = np.searchsorted(self.event_times, t, side="left")
        return self.states[k]

    def activations(self) -> Array:
        """Per event: does at least one source switch on."""
        return np.any(self.states[1:] & ~self.states[:-1], axis=1)

    def occupation(self, source: int, t: float = 1.0) -> float:
        """Time source ``source`` spends active on ``[0, t]``."""
        edges = np.concatenate(([0.0], self.event_times[self.event_times < t], [t]))
        on = self.states[: edges.size - 1, source]
        return float(np.dot(np.diff(edges), on))


def _merge_events(n: int, initial: Array, raw: list) -> SwitchPath:
    """Collapse per-source toggles into state changes; equal times form one change."""
    raw.sort(key=lambda e: (e[0], e[1]))
    times, states = [], [np.array(initial, dtype=bool)]
    cur = states[0].copy()
    k = 0
    while k < len(raw):
        t = raw[k][0]
        nxt = cur.copy()
        while k < len(raw) and raw[k][0] == t:
            _, i, on = raw[k]
            nxt[i] = on
            k += 1
        if np.any(nxt != cur):
            times.append(t)
            states.append(nxt)
            cur = nxt
    return SwitchPath(np.array(times, dtype=float), np.array(states, dtype=bool))


def sample_switch_path(spec: PointFieldSpec, grid: Optional[TimeGrid], rng: np.random.Generator) -> SwitchPath:
    """Draw one activity path on [0, 1]; event times are exact, not snapped."""
    n = spec.n_sources
    if spec.initial_prob is not None:
        initial = rng.random(n) < np.asarray(spec.initial_prob)
    else:
        initial = np.array(spec.initial_mask, dtype=bool)

    raw = []
    if spec.mode == "schedule":
        raw = [(t, i, on) for t, i, on in spec.schedule]
        return _merge_events(n, initial, raw)

    for i in range(n):
        on = bool(initial[i])
        t = 0.0
        while True:
            rate = spec.rate_off[i] if on else spec.rate_on[i]
            if rate <= 0.0:
                break
            t += rng.exponential(1.0 / rate)
            if t >= 1.0:
                break
            on = not on
            raw.append((t, i, on))
    return _merge_events(n, initial, raw)


def state_probabilities(spec: PointFieldSpec, t: float) -> dict:
    """Exact law of the activity vector at time ``t``.

    Sources are independent two-state chains, so the joint law is the
    product of the closed-form marginals
    ``p(t) = pi + (p0 - pi) exp(-(on + off) t)``. Schedules are
    deterministic and yield a single state. Only states with positive
    probability are returned, keyed by 0/1 tuples in lexicographic order.
    """
    n = spec.n_sources
    if spec.mode == "schedule":
        state = np.array(spec.initial_mask, dtype=bool)
        for s, i, on in sorted(spec.schedule, key=lambda e: e[0]):
            if s <= t:
                state[i] = on
        return {tuple(int(b) for b in state): 1.0}

    p0 = np.asarray(spec.initial_prob if spec.initial_prob is not None else spec.initial_mask, dtype=float)
    on = np.asarray(spec.rate_on)
    off = np.asarray(spec.rate_off)
    total = on + off
    p_on = p0.copy()
    moving = total > 0.0
    pi = np.where(moving, on / np.where(moving, total, 1.0), p0)
    p_on[moving] = pi[moving] + (p0[moving] - pi[moving]) * np.exp(-total[moving] * t)

    out = {}
    for state in product((0, 1), repeat=n):
        s = np.asarray(state, dtype=bool)
        prob = float(np.prod(np.where(s, p_on, 1.0 - p_on)))
        if prob > 0.0:
            out[state] = prob
    return out


# --------------------------------------------------------------------------- #
# Brownian bridges
# --------------------------------------------------------------------------- #

@dataclass(frozen=True, eq=False)
class BridgePath:
    """Standard Brownian bridge values at ``times``, scaled by ``sigma`` on use."""

    times: Array
    values: Array
    sigma: float = 1.0

    def __post_init__(self):
        times = _readonly(self.times)
        values = _readonly(self.values)
        if times.shape != values.shape:
            raise ConfigurationError("bridge times and values differ in length")
        if not self.sigma > 0.0:
            raise ConfigurationError("bridge sigma must be positive")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)


def _bridge_from_normals(nodes: Array, z: Array) -> Array:
    """Bridge values on ``nodes`` from ``len(nodes) - 2`` normals per row.

    Uses beta_t = (1 - t) W(t / (1 - t)); the values agree in law with the
    sequential conditioning beta_{t+d} | beta_t ~ N(beta_t (1-t-d)/(1-t),
    d (1-t-d)/(1-t)) and share its Markov structure node by node.
    """
    inner = nodes[1:-1]
    u = inner / (1.0 - inner)
    du = np.diff(np.concatenate(([0.0], u)))
    w = np.cumsum(np.sqrt(du) * z, axis=-1)
    out = np.zeros(z.shape[:-1] + (nodes.size,))
    out[..., 1:-1] = (1.0 - inner) * w
    return out


def sample_bridges(grid: TimeGrid, rngs: Sequence[np.random.Generator], n_rows: int = 1) -> Array:
    """Bridge values for a batch of paths, one generator per path.

    Returns an array of shape ``(len(rngs), n_rows, len(grid))``; row ``r``
    of path ``p`` depends only on ``rngs[p]``.
    """
    m = len(grid) - 2
    z = np.stack([g.standard_normal((n_rows, m)) for g in rngs]) if m > 0 else np.zeros((len(rngs), n_rows, 0))
    return _bridge_from_normals(np.asarray(grid.nodes), z)


def sample_bridge(grid: TimeGrid, rng: np.random.Generator, sigma: float = 1.0) -> BridgePath:
    """One standard Brownian bridge on the grid (pinned at t=0 and t=1)."""
    values = sample_bridges(grid, [rng], 1)[0, 0]
    return BridgePath(grid.nodes, values, sigma)


def sample_source_bridges(grid: TimeGrid, sigmas: Sequence[float], rng: np.random.Generator) -> list:
    """Independent bridges, one per source, from a single generator."""
    values = sample_bridges(grid, [rng], len(sigmas))[0]
    return [BridgePath(grid.nodes, values[i], float(s)) for i, s in enumerate(sigmas)]


def refine_bridges(bridges: Sequence[BridgePath], new_times, rng: np.random.Generator) -> list:
    """Insert exact conditional bridge values at ``new_times``.

    Given its values at the enclosing nodes ``a < u < b`` the bridge at
    ``u`` is N(b_a + (u-a)/(b-a) (b_b - b_a), (u-a)(b-u)/(b-a)). Times are
    inserted in increasing order so later insertions condition on earlier
    ones. All bridges must share the same time axis.
    """
    if not bridges:
        return []
    times = np.array(bridges[0].times)
    for b in bridges[1:]:
        if b.times.shape != times.shape or np.any(b.times != times):
            raise ConfigurationError("bridges to refine must share one time axis")
    values = np.stack([np.array(b.values) for b in bridges])
    for u in np.unique(np.asarray(new_times, dtype=float)):
        if not (times[0] < u < times[-1]):
            raise ConfigurationError(f"refinement time {u} outside the open interval of the bridge")
        j = int(np.searchsorted(times, u, side="left"))
        if times[j] == u:
            continue
        a, b = times[j - 1], times[j]
        frac = (u - a) / (b - a)
        mean = values[:, j - 1] + frac * (values[:, j] - values[:, j - 1])
        sd = math.sqrt((u - a) * (b - u) / (b - a))
        new = mean + sd * rng.standard_normal(len(bridges))
        times = np.insert(times, j, u)
        values = np.insert(values, j, new, axis=1)
    return [BridgePath(times, values[i], b.sigma) for i, b in enumerate(bridges)]

