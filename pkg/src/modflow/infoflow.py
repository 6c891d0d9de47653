"""
The modulated information system.

Raw observations ``xi_i(t) = t X + sigma_i beta_i(t)`` are switched on and
off by a :class:`~modflow.stochastic.SwitchPath`. Every switch event is
inserted into the time axis as an exact node, so last-active times and
frozen values are exact rather than interpolated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DegenerateScalingError, DomainError, ValidationError
from .stochastic import (
    BridgePath,
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
    "SourceSpec",
    "InfoSystemPath",
    "EffectiveState",
    "ComplementarySummary",
    "build_info_path",
    "simulate_info_path",
    "effective_state",
    "effective_from_mask",
    "complementary_summary",
    "mix_projection",
]


@dataclass(frozen=True)
class SourceSpec:
    sigmas: tuple

    def __post_init__(self):
        s = tuple(float(v) for v in self.sigmas)
        if not s:
            raise ConfigurationError("at least one source is required")
        if any(not (np.isfinite(v) and v > 0.0) for v in s):
            raise ConfigurationError(f"source volatilities must be finite and > 0, got {s}")
        object.__setattr__(self, "sigmas", s)

    def __len__(self) -> int:
        return len(self.sigmas)

    @property
    def precisions(self) -> Array:
        return 1.0 / np.asarray(self.sigmas) ** 2


@dataclass(frozen=True)
class EffectiveState:
    t: float
    active: frozenset
    xi_hat: float
    sigma_hat: float


@dataclass(frozen=True)
class ComplementarySummary:
    """Frozen likelihood of the inactive sources as ``(i, y_i, tau_i, sigma_i)`` records."""

    records: tuple = ()

    def log_evaluate(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for _, y, tau, sigma in self.records:
            out = out + (x * y - tau * x * x / 2.0) / (sigma * sigma * (1.0 - tau))
        return out

    def evaluate(self, x) -> Array:
        return np.exp(self.log_evaluate(x))

    @property
    def sources(self) -> tuple:
        return tuple(r[0] for r in self.records)


@dataclass(frozen=True, eq=False)
class InfoSystemPath:
    """One realization of the information system on an augmented time axis.

    ``times`` holds the grid nodes plus every switch-event time. Arrays with
    a trailing source axis have shape ``(len(times), n_sources)``. The
    ``*_left`` arrays are left limits, which differ from the plain arrays
    only at event nodes.
    """

    grid: TimeGrid
    x_true: float
    sigmas: Array
    switch: SwitchPath
    times: Array
    on_grid: Array
    event_nodes: Array
    xi: Array
    active: Array
    active_left: Array
    tau: Array
    frozen: Array
    tau_left: Array
    frozen_left: Array
    modulated: Array = field(repr=False)

    @property
    def n_sources(self) -> int:
        return self.sigmas.size

    def node_index(self, t: float) -> int:
        k = int(np.searchsorted(self.times, t))
        if k >= self.times.size or self.times[k] != t:
            raise DomainError(f"t={t} is not a node of this path")
        return k

    def effective_arrays(self, left: bool = False):
        """``(xi_hat, sigma_hat)`` at every node (or their left limits)."""
        act = self.active_left if left else self.active
        prec = np.where(act, 1.0 / self.sigmas ** 2, 0.0)
        total = prec.sum(axis=1)
        some = total > 0.0
        safe = np.where(some, total, 1.0)
        xi_hat = np.where(some, (prec * self.xi).sum(axis=1) / safe, 0.0)
        sigma_hat = np.where(some, 1.0 / np.sqrt(safe), 0.0)
        return xi_hat, sigma_hat


def _last_refresh(refresh: Array) -> Array:
    """Index of the most recent True at or before each position (0 if none)."""
    idx = np.where(refresh, np.arange(refresh.shape[0])[:, None], 0)
    return np.maximum.accumulate(idx, axis=0)


def build_info_path(
    x: float,
    bridges: Sequence[BridgePath],
    switch: SwitchPath,
    grid: TimeGrid,
    fill_rng: Optional[np.random.Generator] = None,
) -> InfoSystemPath:
    """Assemble raw, modulated and last-active-time paths.

    Bridges must cover every grid node. Event times missing from the
    bridges' axis are filled by exact bridge conditioning, which needs
    ``fill_rng``.
    """
    n = len(bridges)
    if n == 0 or switch.n_sources != n:
        raise ConfigurationError(f"{n} bridges for a switch path over {switch.n_sources} sources")
    if np.any(switch.event_times >= 1.0) or np.any(switch.event_times <= 0.0):
        raise ConfigurationError("switch events must lie in (0, 1)")

    times = bridges[0].times
    missing = switch.event_times[~np.isin(switch.event_times, times)]
    if missing.size:
        if fill_rng is None:
            raise ConfigurationError("event times are off the bridge axis and no fill generator was given")
        bridges = refine_bridges(bridges, missing, fill_rng)
        times = bridges[0].times
    for b in bridges[1:]:
        if b.times.shape != times.shape or np.any(b.times != times):
            raise ConfigurationError("bridges must share one time axis")
    on_grid = np.isin(times, grid.nodes)
    if on_grid.sum() != len(grid):
        raise ConfigurationError("bridge axis does not contain every grid node")

    sigmas = np.array([b.sigma for b in bridges])
    beta = np.stack([b.values for b in bridges], axis=1)
    xi = times[:, None] * x + sigmas * beta

    active = switch.masks_at(times)
    active_left = switch.masks_before(times)
    active_left[0] = active[0]
    prev = np.vstack([active[:1], active[:-1]])

    last = _last_refresh(active | prev)
    cols = np.arange(n)
    tau = times[last]
    frozen = xi[last, cols]

    last_prev = np.vstack([last[:1], last[:-1]])
    left_idx = np.where(prev, np.arange(times.size)[:, None], last_prev)
    tau_left = times[left_idx]
    frozen_left = xi[left_idx, cols]

    event_nodes = np.searchsorted(times, switch.event_times)
    modulated = np.where(active, xi, 0.0)

    arrays = dict(xi=xi, active=active, active_left=active_left, tau=tau, frozen=frozen,
                  tau_left=tau_left, frozen_left=frozen_left, modulated=modulated,
                  times=np.array(times), on_grid=on_grid, event_nodes=event_nodes, sigmas=sigmas)
    for a in arrays.values():
        a.setflags(write=False)
    return InfoSystemPath(grid=grid, x_true=float(x), switch=switch, **arrays)


def simulate_info_path(
    prior: SignalLaw,
    sources: SourceSpec,
    field_spec: PointFieldSpec,
    grid: TimeGrid,
    seed: int,
    path_index: int,
    switch_role: int = Stream.SWITCH,
) -> InfoSystemPath:
    """Draw X, the switch path and the bridges from the path's substreams."""
    if field_spec.n_sources != len(sources):
        raise ConfigurationError("point field and source spec disagree on the number of sources")
    x = float(prior.sample(substream(seed, path_index, Stream.SIGNAL)))
    switch = sample_switch_path(field_spec, grid, substream(seed, path_index, switch_role))
    bridges = sample_source_bridges(grid, sources.sigmas, substream(seed, path_index, Stream.BRIDGE))
    return build_info_path(x, bridges, switch, grid, substream(seed, path_index, Stream.BRIDGE_FILL))


def effective_from_mask(t: float, mask, xi_values, sigmas) -> EffectiveState:
    """Precision-weighted aggregate of the active coordinates of ``xi_values``."""
    mask = np.asarray(mask, dtype=bool)
    sigmas = np.asarray(sigmas, dtype=float)
    active = frozenset(int(i) for i in np.flatnonzero(mask))
    if not active:
        return EffectiveState(float(t), active, 0.0, 0.0)
    prec = 1.0 / sigmas[mask] ** 2
    total = prec.sum()
    xi_hat = float(np.dot(prec, np.asarray(xi_values, dtype=float)[mask]) / total)
    return EffectiveState(float(t), active, xi_hat, float(1.0 / np.sqrt(total)))


def effective_state(path: InfoSystemPath, t: float, left: bool = False) -> EffectiveState:
    k = path.node_index(t)
    mask = path.active_left[k] if left else path.active[k]
    return effective_from_mask(path.times[k], mask, path.xi[k], path.sigmas)


def complementary_summary(path: InfoSystemPath, t: float, left: bool = False) -> ComplementarySummary:
    """Records of the sources inactive at ``t``; never-active ones carry (0, 0)."""
    k = path.node_index(t)
    if path.times[k] >= 1.0:
        raise DomainError("the complementary summary is defined for t < 1")
    mask = path.active_left[k] if left else path.active[k]
    tau = path.tau_left[k] if left else path.tau[k]
    frozen = path.frozen_left[k] if left else path.frozen[k]
    records = tuple(
        (int(i), float(frozen[i]), float(tau[i]), float(path.sigmas[i]))
        for i in np.flatnonzero(~mask)
    )
    return ComplementarySummary(records)


def mix_projection(raw, P, t: float, sigmas, tol: float = 1e-10):
    """Map projected observations to signal-scaled coordinates.

    Row ``i`` of ``P`` with entries ``p_ij`` yields
    ``psi_i = (sum_j p_ij xi_j) / (sum_j p_ij)``, which has the law of
    ``t X + alpha_i B_t`` for a standard bridge ``B`` with
    ``alpha_i = (sum_j p_ij^2 sigma_j^2)^(1/2) / (sum_j p_ij)``. All-zero rows
    give ``psi_i = 0`` and ``alpha_i = 0``.

    Returns
    -------
    psi, alpha : ndarray
    """
    P = np.asarray(P, dtype=float)
    raw = np.asarray(raw, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    n = raw.size
    if P.shape != (n, n) or sigmas.shape != (n,):
        raise ConfigurationError("projection, observation and sigma dimensions disagree")
    if not (0.0 <= t <= 1.0):
        raise DomainError("t must lie in [0, 1]")
    if np.max(np.abs(P - P.T)) > tol:
        raise ValidationError("projection matrix is not symmetric")
    if np.max(np.abs(P @ P - P)) > tol:
        raise ValidationError("projection matrix is not idempotent")

    psi = np.zeros(n)
    alpha = np.zeros(n)
    for i in range(n):
        row = P[i]
        if not np.any(row != 0.0):
            continue
        s = row.sum()
        if abs(s) <= tol:
            raise DegenerateScalingError(f"row {i} of the projection is nonzero but sums to zero")
        psi[i] = (row @ raw) / s
        alpha[i] = np.sqrt(np.sum(row ** 2 * sigmas ** 2)) / s
    return psi, alpha
