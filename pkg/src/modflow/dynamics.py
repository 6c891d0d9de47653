"""
Endogenous jump-diffusion of the conditional mean.

Segment martingale ``M`` and its normalized version ``W`` are accumulated
from grid increments; jumps are booked exactly at switch events.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import quad

from .errors import ConfigurationError
from .filter import natural_parameters, posterior_weight_matrix
from .infoflow import InfoSystemPath
from .stochastic import SignalLaw

Array = np.ndarray

__all__ = [
    "EventLedger",
    "DynamicsPath",
    "EulerResult",
    "build_dynamics",
    "euler_reconstruct",
    "feynman_kac_value",
    "feynman_kac_residual",
]


@dataclass(frozen=True, eq=False)
class EventLedger:
    """State changes of one path.

    ``nodes`` index the path's time axis. ``delta`` flags changes that
    activate at least one source. ``c_count`` and ``n_count`` are the
    running counts of all changes and of activations at every node.
    """

    times: Array
    nodes: Array
    delta: Array
    c_count: Array
    n_count: Array

    @property
    def n_changes(self) -> int:
        return int(self.times.size)

    @property
    def n_activations(self) -> int:
        return int(self.delta.sum())


@dataclass(frozen=True, eq=False)
class DynamicsPath:
    """Filter output and segment martingales on a path's time axis.

    ``x_left`` is the left limit of the conditional mean; it equals
    ``x_mean`` except at activation nodes. ``jump_x`` and ``jump_xi_hat``
    hold one entry per switch event.
    """

    times: Array
    x_mean: Array
    x_var: Array
    x_left: Array
    xi_hat: Array
    sigma_hat: Array
    xi_hat_left: Array
    m: Array
    w: Array
    dm: Array
    jump_x: Array
    jump_xi_hat: Array
    ledger: EventLedger = field(repr=False)


def _ledger(path: InfoSystemPath) -> EventLedger:
    nodes = np.asarray(path.event_nodes, dtype=np.int64)
    act = path.active[nodes] & ~path.active_left[nodes]
    delta = act.any(axis=1) if nodes.size else np.zeros(0, dtype=bool)
    c_inc = np.zeros(path.times.size, dtype=np.int64)
    n_inc = np.zeros(path.times.size, dtype=np.int64)
    np.add.at(c_inc, nodes, 1)
    np.add.at(n_inc, nodes, delta.astype(np.int64))
    return EventLedger(
        times=np.array(path.switch.event_times),
        nodes=nodes,
        delta=delta,
        c_count=np.cumsum(c_inc),
        n_count=np.cumsum(n_inc),
    )


def _moments(prior: SignalLaw, path: InfoSystemPath, left: bool):
    a, b = natural_parameters(path, left=left)
    live = path.times < 1.0
    mean = np.full(path.times.size, float(path.x_true))
    var = np.zeros(path.times.size)
    w = posterior_weight_matrix(prior, a[live], b[live])
    x = prior.atoms
    mean[live] = w @ x
    var[live] = np.maximum(w @ (x * x) - mean[live] ** 2, 0.0)
    return mean, var


def build_dynamics(prior: SignalLaw, path: InfoSystemPath) -> DynamicsPath:
    """Conditional mean, variance and the martingales ``M`` and ``W``.

    Over ``[t_k, t_{k+1})`` the activity state is that of node ``k``, and
    ``dM = dxi_hat - (X - xi_hat) / (1 - t) dt`` is discretized with the
    left-point rule, where ``dxi_hat`` aggregates the node-``k`` active set
    at both ends. No source active gives ``dM = 0``. ``M`` jumps by the
    change in ``xi_hat`` at activations only; ``W`` sums ``dM / sigma_hat``.
    """
    times = path.times
    ledger = _ledger(path)
    x_mean, x_var = _moments(prior, path, left=False)
    x_left, _ = _moments(prior, path, left=True)

    xi_hat, sigma_hat = path.effective_arrays(left=False)
    xi_hat_left, _ = path.effective_arrays(left=True)

    dt = np.diff(times)
    on = sigma_hat[:-1] > 0.0
    drift = (x_mean[:-1] - xi_hat[:-1]) / (1.0 - times[:-1])
    dm = np.where(on, (xi_hat_left[1:] - xi_hat[:-1]) - drift * dt, 0.0)
    dw = np.where(on, dm / np.where(on, sigma_hat[:-1], 1.0), 0.0)

    jump_m = np.zeros(times.size)
    act_nodes = ledger.nodes[ledger.delta]
    jump_m[act_nodes] = xi_hat[act_nodes] - xi_hat_left[act_nodes]

    m = np.concatenate([[0.0], np.cumsum(dm)]) + np.cumsum(jump_m)
    w = np.concatenate([[0.0], np.cumsum(dw)])

    nodes = ledger.nodes
    arrays = dict(
        times=times, x_mean=x_mean, x_var=x_var, x_left=x_left, xi_hat=xi_hat,
        sigma_hat=sigma_hat, xi_hat_left=xi_hat_left, m=m, w=w, dm=dm,
        jump_x=x_mean[nodes] - x_left[nodes], jump_xi_hat=xi_hat[nodes] - xi_hat_left[nodes],
    )
    for arr in arrays.values():
        arr.setflags(write=False)
    return DynamicsPath(ledger=ledger, **arrays)


@dataclass(frozen=True, eq=False)
class EulerResult:
    times: Array
    x_rec: Array
    gap: float
    t_max: float


def euler_reconstruct(
    prior: SignalLaw,
    path: InfoSystemPath,
    t_max: Optional[float] = None,
    dyn: Optional[DynamicsPath] = None,
) -> EulerResult:
    """Rebuild the conditional mean from ``dX = Gamma / (sigma_hat^2 (1 - t)) dM``.

    The same ``M`` increments as :func:`build_dynamics` drive the scheme;
    activation jumps are copied from the filter. ``gap`` is the largest
    absolute difference to the filter on ``[0, t_max]``, with default
    ``t_max = 1 - 10 dt``.
    """
    if dyn is None:
        dyn = build_dynamics(prior, path)
    if t_max is None:
        t_max = 1.0 - 10.0 * path.grid.dt
    times = dyn.times
    s2 = dyn.sigma_hat[:-1] ** 2
    on = s2 > 0.0
    coef = np.where(on, dyn.x_var[:-1] / np.where(on, s2, 1.0) / (1.0 - times[:-1]), 0.0)
    inc = coef * dyn.dm
    jumps = np.zeros(times.size)
    nodes = dyn.ledger.nodes[dyn.ledger.delta]
    jumps[nodes] = dyn.x_mean[nodes] - dyn.x_left[nodes]
    x_rec = dyn.x_mean[0] + np.concatenate([[0.0], np.cumsum(inc)]) + np.cumsum(jumps)
    mask = times <= t_max
    gap = float(np.max(np.abs(x_rec[mask] - dyn.x_mean[mask])))
    return EulerResult(times, x_rec, gap, float(t_max))


def _discount_factors(psi: Union[float, Callable], t: Array) -> Array:
    if callable(psi):
        return np.array([np.exp(-quad(psi, s, 1.0)[0]) for s in t])
    return np.exp(-float(psi) * (1.0 - t))


def feynman_kac_value(prior: SignalLaw, psi, phi, sigma: float, xi_grid, t_grid):
    """``v(xi, t) = exp(-int_t^1 psi) E[phi(X) | xi_hat_t = xi]`` for one always-active source.

    Returns ``(v, mean)`` with shape ``(len(xi_grid), len(t_grid))``, where
    ``mean`` is the conditional mean of X on the same grid.
    """
    if sigma <= 0.0:
        raise ConfigurationError("sigma must be > 0")
    xi = np.asarray(xi_grid, dtype=float)
    t = np.asarray(t_grid, dtype=float)
    if np.any(t <= 0.0) or np.any(t >= 1.0):
        raise ConfigurationError("t-grid must lie in (0, 1)")
    phi = np.asarray(phi(prior.atoms) if callable(phi) else phi, dtype=float)
    if phi.shape != prior.atoms.shape:
        raise ConfigurationError("phi must be tabulated on the prior's atoms")
    a = (xi[:, None] / (sigma * sigma * (1.0 - t[None, :]))).ravel()
    b = np.broadcast_to(t[None, :] / (sigma * sigma * (1.0 - t[None, :])), (xi.size, t.size)).ravel()
    w = posterior_weight_matrix(prior, a, b)
    shape = (xi.size, t.size)
    cond = (w @ phi).reshape(shape)
    mean = (w @ prior.atoms).reshape(shape)
    return _discount_factors(psi, t)[None, :] * cond, mean


def feynman_kac_residual(prior: SignalLaw, psi, phi, sigma: float, xi_grid, t_grid) -> float:
    """Largest interior residual of the pricing PDE under central differences.

    The residual is
    ``v_t + mu v_xi + sigma^2 / 2 v_xixi - psi v`` with
    ``mu = (E[X | xi_hat] - xi) / (1 - t)``, for a single always-active
    source and no activation intensity. Both grids must be uniform.
    """
    xi = np.asarray(xi_grid, dtype=float)
    t = np.asarray(t_grid, dtype=float)
    if xi.size < 3 or t.size < 3:
        raise ConfigurationError("each grid needs at least three points")
    v, mean = feynman_kac_value(prior, psi, phi, sigma, xi, t)
    dx = xi[1] - xi[0]
    dt = t[1] - t[0]
    v_t = (v[1:-1, 2:] - v[1:-1, :-2]) / (2.0 * dt)
    v_x = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2.0 * dx)
    v_xx = (v[2:, 1:-1] - 2.0 * v[1:-1, 1:-1] + v[:-2, 1:-1]) / (dx * dx)
    ti = t[None, 1:-1]
    mu = (mean[1:-1, 1:-1] - xi[1:-1, None]) / (1.0 - ti)
    rate = np.array([psi(s) for s in t[1:-1]])[None, :] if callable(psi) else float(psi)
    res = v_t + mu * v_x + 0.5 * sigma * sigma * v_xx - rate * v[1:-1, 1:-1]
    return float(np.max(np.abs(res)))
