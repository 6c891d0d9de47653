"""
Two agents watching the same raw sources through different switch paths,
compared by the symmetric Kullback-Leibler divergence of their posteriors.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, PositivityError
from .filter import PosteriorMeasure, natural_parameters, posterior_log_weight_matrix
from .infoflow import InfoSystemPath, SourceSpec, build_info_path
from .stochastic import (
    PointFieldSpec,
    SignalLaw,
    Stream,
    SwitchPath,
    TimeGrid,
    refine_bridges,
    sample_source_bridges,
    sample_switch_path,
    substream,
)

Array = np.ndarray

__all__ = [
    "AgentView",
    "KLResult",
    "kl_symmetric",
    "kl_from_log_weights",
    "AsymmetryPath",
    "asymmetry_path",
    "simulate_asymmetry_path",
    "field_key",
]


def field_key(spec: PointFieldSpec) -> int:
    """Stable 32-bit key of a point-field spec."""
    return int.from_bytes(hashlib.sha256(repr(spec).encode()).digest()[:4], "little")


def agent_switch_rng(seed: int, path_index: int, spec: PointFieldSpec) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1),
                                spawn_key=(int(path_index), int(Stream.AGENT_SWITCH), field_key(spec)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class AgentView:
    agent_id: int
    field: PointFieldSpec


@dataclass(frozen=True)
class KLResult:
    value: float
    a_half: float
    b_half: float


def kl_from_log_weights(lp: Array, lq: Array):
    """Symmetric divergence from normalized log-weights, row-wise.

    Returns ``(value, a_half, b_half)`` with ``a_half = sum p (lp - lq)``,
    ``b_half = sum q (lq - lp)`` and ``value = (a_half + b_half) / 2``,
    computed as ``sum (p - q)(lp - lq) / 2`` so it is symmetric and
    nonnegative term by term.
    """
    lp = np.asarray(lp, dtype=float)
    lq = np.asarray(lq, dtype=float)
    p = np.exp(lp)
    q = np.exp(lq)
    d = lp - lq
    a = np.sum(p * d, axis=-1)
    b = -np.sum(q * d, axis=-1)
    value = 0.5 * np.sum((p - q) * d, axis=-1)
    return value, a, b


def kl_symmetric(p: PosteriorMeasure, q: PosteriorMeasure) -> KLResult:
    """``(KL(p || q) + KL(q || p)) / 2`` on shared atoms."""
    if p.atoms.shape != q.atoms.shape or np.any(p.atoms != q.atoms):
        raise ConfigurationError("posteriors must live on the same atoms")
    if not (np.all(np.isfinite(p.log_weights)) and np.all(np.isfinite(q.log_weights))):
        raise PositivityError("every posterior weight must be strictly positive")
    v, a, b = kl_from_log_weights(p.log_weights, q.log_weights)
    return KLResult(float(v), float(a), float(b))


@dataclass(frozen=True, eq=False)
class AsymmetryPath:
    """Divergence between two agents on the merged time axis.

    ``events`` lists ``(time, agent_id, kind)`` with ``kind`` either
    ``"on"`` (at least one activation) or ``"off"``.
    """

    times: Array
    kl: Array
    a_half: Array
    b_half: Array
    mask1: Array
    mask2: Array
    events: tuple
    path1: InfoSystemPath
    path2: InfoSystemPath


def _events(agent_id: int, switch: SwitchPath) -> list:
    out = []
    for j, t in enumerate(switch.event_times):
        before, after = switch.states[j], switch.states[j + 1]
        kind = "on" if np.any(after & ~before) else "off"
        out.append((float(t), agent_id, kind))
    return out


def _log_weight_rows(prior: SignalLaw, path: InfoSystemPath) -> Array:
    a, b = natural_parameters(path)
    live = path.times < 1.0
    return posterior_log_weight_matrix(prior, a[live], b[live])


def asymmetry_path(
    prior: SignalLaw,
    x: float,
    bridges,
    switch1: SwitchPath,
    switch2: SwitchPath,
    grid: TimeGrid,
    fill_rng: np.random.Generator | None = None,
    agent_ids=(1, 2),
) -> AsymmetryPath:
    """Divergence series for two switch paths over shared raw observations.

    Both agents' event times are inserted into the bridges once, so both
    see identical raw values on one time axis. Values are reported for
    nodes with ``t < 1``. Log-weights are kept in log-space throughout,
    so weights too small for ``exp`` near ``t = 1`` still enter exactly.
    """
    times_all = np.union1d(switch1.event_times, switch2.event_times)
    missing = times_all[~np.isin(times_all, bridges[0].times)]
    if missing.size:
        if fill_rng is None:
            raise ConfigurationError("event times are off the bridge axis and no fill generator was given")
        bridges = refine_bridges(bridges, missing, fill_rng)
    p1 = build_info_path(x, bridges, switch1, grid)
    p2 = build_info_path(x, bridges, switch2, grid)
    live = p1.times < 1.0
    lp = _log_weight_rows(prior, p1)
    lq = _log_weight_rows(prior, p2)
    kl, a, b = kl_from_log_weights(lp, lq)
    events = sorted(_events(agent_ids[0], switch1) + _events(agent_ids[1], switch2))
    return AsymmetryPath(
        times=p1.times[live], kl=kl, a_half=a, b_half=b,
        mask1=p1.active[live], mask2=p2.active[live], events=tuple(events), path1=p1, path2=p2,
    )


def simulate_asymmetry_path(
    prior: SignalLaw,
    sources: SourceSpec,
    agent1: AgentView,
    agent2: AgentView,
    grid: TimeGrid,
    seed: int,
    path_index: int,
) -> AsymmetryPath:
    """Draw shared raw paths and one switch path per agent.

    An agent's switch path is keyed by its point-field spec, so agents
    with identical fields see the same realization and swapping the
    agents swaps the output columns.
    """
    for view in (agent1, agent2):
        if view.field.n_sources != len(sources):
            raise ConfigurationError(f"agent {view.agent_id} point field disagrees with the source count")
    x = float(prior.sample(substream(seed, path_index, Stream.SIGNAL)))
    sw1 = sample_switch_path(agent1.field, grid, agent_switch_rng(seed, path_index, agent1.field))
    sw2 = sample_switch_path(agent2.field, grid, agent_switch_rng(seed, path_index, agent2.field))
    bridges = sample_source_bridges(grid, sources.sigmas, substream(seed, path_index, Stream.BRIDGE))
    return asymmetry_path(prior, x, bridges, sw1, sw2, grid,
                          substream(seed, path_index, Stream.BRIDGE_FILL),
                          agent_ids=(agent1.agent_id, agent2.agent_id))
