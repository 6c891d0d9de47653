"""
Exact Bayesian filtering of the signal on its atoms.

All weights are handled in log-space. A posterior only ever changes the
weights attached to the prior's atoms, never the atoms themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp, ndtr

from .errors import ConfigurationError, DomainError, NumericalDegeneracyError
from .infoflow import (
    ComplementarySummary,
    EffectiveState,
    InfoSystemPath,
    SourceSpec,
    complementary_summary,
    effective_state,
)
from .stochastic import PointFieldSpec, SignalLaw

Array = np.ndarray

__all__ = [
    "kernel_h",
    "log_kernel_h",
    "PosteriorMeasure",
    "posterior",
    "posterior_full",
    "posterior_from_log_likelihood",
    "natural_parameters",
    "posterior_weight_matrix",
    "posterior_log_weight_matrix",
    "conditional_moment",
    "conditional_variance",
    "JumpContext",
    "JumpLaw",
    "jump_context",
    "jump_size_law",
    "MultiFactorSpec",
    "multi_factor_posterior",
]


def log_kernel_h(x, y, t, sigma):
    """``(x y - t x^2 / 2) / (sigma^2 (1 - t))``, the log of the Gaussian kernel."""
    t = np.asarray(t, dtype=float)
    if np.any(t >= 1.0):
        raise DomainError("the kernel h is defined for t < 1 only")
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0.0):
        raise DomainError("the kernel h needs sigma > 0")
    x = np.asarray(x, dtype=float)
    return (x * y - t * x * x / 2.0) / (sigma * sigma * (1.0 - t))


def kernel_h(x, y, t, sigma):
    return np.exp(log_kernel_h(x, y, t, sigma))


def _normalize(log_w: Array) -> Array:
    top = np.max(log_w, axis=-1, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise NumericalDegeneracyError(f"posterior log-weights are not finite (max log-weight {np.max(top)})")
    shifted = log_w - top
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


@dataclass(frozen=True, eq=False)
class PosteriorMeasure:
    """Weights of the conditional law of X on the prior's atoms."""

    atoms: Array
    log_weights: Array
    t: float = 0.0
    weights: Array = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "weights", np.exp(self.log_weights))

    def moment(self, k: int = 1) -> float:
        return float(np.dot(self.weights, self.atoms ** k))

    def mean(self) -> float:
        return self.moment(1)

    def variance(self) -> float:
        m = self.mean()
        return float(np.dot(self.weights, (self.atoms - m) ** 2))


def posterior_from_log_likelihood(prior: SignalLaw, log_lik, t: float = 0.0) -> PosteriorMeasure:
    log_w = _normalize(prior.log_weights + np.asarray(log_lik, dtype=float))
    return PosteriorMeasure(prior.atoms, log_w, float(t))


def posterior(prior: SignalLaw, eff: EffectiveState, comp: ComplementarySummary, t: float) -> PosteriorMeasure:
    """Posterior from the effective state and the complementary summary."""
    if t >= 1.0:
        raise DomainError("posterior(eff, comp) is defined for t < 1; at t = 1 X is revealed")
    if eff.t != t:
        raise ConfigurationError(f"effective state is at t={eff.t}, not t={t}")
    if eff.active & set(comp.sources):
        raise ConfigurationError("a source cannot be both active and in the complementary summary")
    x = prior.atoms
    log_lik = comp.log_evaluate(x)
    if eff.active:
        log_lik = log_lik + log_kernel_h(x, eff.xi_hat, t, eff.sigma_hat)
    return posterior_from_log_likelihood(prior, log_lik, t)


def posterior_full(prior: SignalLaw, path: InfoSystemPath, t: float) -> PosteriorMeasure:
    """Posterior from the product of per-source kernels at last-active times."""
    k = path.node_index(t)
    if path.times[k] >= 1.0:
        raise DomainError("posterior_full is defined for t < 1; at t = 1 X is revealed")
    x = prior.atoms
    log_lik = np.zeros_like(x)
    for i in range(path.n_sources):
        log_lik = log_lik + log_kernel_h(x, path.frozen[k, i], path.tau[k, i], path.sigmas[i])
    return posterior_from_log_likelihood(prior, log_lik, t)


def natural_parameters(path: InfoSystemPath, left: bool = False):
    """Per-node coefficients ``(a, b)`` with log-likelihood ``a x - b x^2 / 2``.

    Summed source by source over every source's last-active record, so two
    nodes with identical records give bit-identical coefficients. Nodes at
    t = 1 are set to NaN.
    """
    tau = path.tau_left if left else path.tau
    frozen = path.frozen_left if left else path.frozen
    live = path.times < 1.0
    a = np.full(path.times.size, np.nan)
    b = np.full(path.times.size, np.nan)
    a_live = np.zeros(int(live.sum()))
    b_live = np.zeros_like(a_live)
    for i in range(path.n_sources):
        s2 = path.sigmas[i] ** 2
        tau_i = tau[live, i]
        denom = s2 * (1.0 - tau_i)
        a_live = a_live + frozen[live, i] / denom
        b_live = b_live + tau_i / denom
    a[live] = a_live
    b[live] = b_live
    return a, b


def posterior_log_weight_matrix(prior: SignalLaw, a: Array, b: Array) -> Array:
    """Normalized posterior log-weights for each row of natural parameters."""
    x = prior.atoms
    return _normalize(prior.log_weights + np.outer(a, x) - np.outer(b, x * x) / 2.0)


def posterior_weight_matrix(prior: SignalLaw, a: Array, b: Array) -> Array:
    """Normalized posterior weights for each row of natural parameters."""
    return np.exp(posterior_log_weight_matrix(prior, a, b))


def conditional_moment(post: PosteriorMeasure, k: int) -> float:
    if k < 1:
        raise DomainError("moment order must be >= 1")
    return post.moment(k)


def conditional_variance(post: PosteriorMeasure) -> float:
    return conditional_moment(post, 2) - conditional_moment(post, 1) ** 2


# --------------------------------------------------------------------------- #
# Jump-size law
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class JumpContext:
    """Pre-jump information at an activation time ``t``.

    ``pre_comp`` must carry a record for every activated source (its value
    and time when last active, or (0, 0) if never active). ``z`` is the
    observed statistic, if known.
    """

    t: float
    activated: tuple
    pre_eff: EffectiveState
    pre_comp: ComplementarySummary
    z: Optional[float] = None

    def __post_init__(self):
        if not self.activated:
            raise ConfigurationError("a jump needs at least one activated source")
        if not (0.0 <= self.t < 1.0):
            raise DomainError("jump times must lie in [0, 1)")
        missing = set(self.activated) - set(self.pre_comp.sources)
        if missing:
            raise ConfigurationError(f"activated sources {sorted(missing)} were not inactive before the jump")

    def _split(self):
        act = set(self.activated)
        new = [r for r in self.pre_comp.records if r[0] in act]
        rest = ComplementarySummary(tuple(r for r in self.pre_comp.records if r[0] not in act))
        return new, rest

    def mean_coefficients(self):
        """``(c0, c1)`` with conditional mean ``U(x) = c0 + c1 x``, and variance ``V``."""
        t = self.t
        new, _ = self._split()
        c0 = c1 = var = 0.0
        for _, y, tau, sigma in new:
            s2 = sigma * sigma
            c0 += y / (s2 * (1.0 - tau))
            c1 += (t - tau) / (s2 * (1.0 - t) * (1.0 - tau))
            var += (t - tau) / (s2 * (1.0 - t) * (1.0 - tau))
        return c0, c1, var

    def U(self, x):
        c0, c1, _ = self.mean_coefficients()
        return c0 + c1 * np.asarray(x, dtype=float)

    @property
    def V(self) -> float:
        return self.mean_coefficients()[2]

    def log_others(self, x) -> Array:
        """Log-likelihood of the sources not activated at ``t``."""
        _, rest = self._split()
        out = rest.log_evaluate(x)
        if self.pre_eff.active:
            out = out + log_kernel_h(x, self.pre_eff.xi_hat, self.t, self.pre_eff.sigma_hat)
        return out

    def log_pre(self, x) -> Array:
        """Log-likelihood of all information held just before ``t``."""
        out = self.pre_comp.log_evaluate(x)
        if self.pre_eff.active:
            out = out + log_kernel_h(x, self.pre_eff.xi_hat, self.t, self.pre_eff.sigma_hat)
        return out

    def quadratic_coefficient(self) -> float:
        """Sum over activated sources of ``t / (sigma^2 (1 - t))``."""
        new, _ = self._split()
        return sum(self.t / (r[3] ** 2 * (1.0 - self.t)) for r in new)


def jump_context(path: InfoSystemPath, event: int) -> JumpContext:
    """Context of switch event number ``event`` of ``path``."""
    k = int(path.event_nodes[event])
    t = float(path.times[k])
    activated = tuple(int(i) for i in np.flatnonzero(path.active[k] & ~path.active_left[k]))
    pre_eff = effective_state(path, t, left=True)
    pre_comp = complementary_summary(path, t, left=True)
    z = float(sum(path.xi[k, i] / (path.sigmas[i] ** 2 * (1.0 - t)) for i in activated)) if activated else None
    return JumpContext(t, activated, pre_eff, pre_comp, z)


@dataclass(frozen=True, eq=False)
class JumpLaw:
    """Post-jump value ``g(Z)`` with ``Z | X = x ~ N(U(x), V)`` mixed over the pre-jump law."""

    t: float
    atoms: Array
    pre_weights: Array
    U: Array
    V: float
    z_grid: Array
    g_values: Array
    _log_base: Array = field(repr=False)
    _quad: float = field(repr=False)

    def g_exact(self, z) -> Array:
        """Posterior mean after observing ``Z = z`` (the exact ratio of sums)."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        x = self.atoms
        log_w = self._log_base + np.outer(z, x) - self._quad * x * x / 2.0
        w = np.exp(_normalize(log_w))
        return w @ x

    def g(self, z):
        """Tabulated ``g`` with linear interpolation."""
        return np.interp(z, self.z_grid, self.g_values)

    def z_cdf(self, z):
        z = np.asarray(z, dtype=float)
        if self.V == 0.0:
            return np.sum(self.pre_weights * (z[..., None] >= self.U), axis=-1)
        return ndtr((z[..., None] - self.U) / np.sqrt(self.V)) @ self.pre_weights

    def post_cdf(self, v):
        """CDF of the post-jump value; ``g`` is non-decreasing so this is ``F_Z(g^{-1}(v))``."""
        v = np.asarray(v, dtype=float)
        g = self.g_values
        if g[-1] - g[0] <= 0.0:
            return (v >= g[0]).astype(float)
        z = np.interp(v, g, self.z_grid, left=-np.inf, right=np.inf)
        return self.z_cdf(z)

    def sample(self, rng: np.random.Generator, size: int) -> Array:
        """Draws of ``g(Z)`` via ancestral sampling of (X, Z)."""
        cdf = np.cumsum(self.pre_weights)
        j = np.minimum(np.searchsorted(cdf, rng.random(size), side="right"), self.atoms.size - 1)
        z = self.U[j] + np.sqrt(self.V) * rng.standard_normal(size)
        return self.g(z)


def jump_size_law(
    prior: SignalLaw,
    ctx: JumpContext,
    t: Optional[float] = None,
    z_grid: Optional[Array] = None,
    n_points: int = 1025,
) -> JumpLaw:
    """Law of the post-jump conditional mean at an activation.

    The default z-grid spans the mean of Z's mixture law plus or minus eight
    of its standard deviations.
    """
    t = ctx.t if t is None else float(t)
    if t != ctx.t:
        raise ConfigurationError("t disagrees with the jump context")
    x = prior.atoms
    log_base = prior.log_weights + ctx.log_others(x)

    pre = posterior_from_log_likelihood(prior, ctx.log_pre(x), t)
    U = ctx.U(x)
    V = ctx.V
    if z_grid is None:
        m = float(pre.weights @ U)
        sd = float(np.sqrt(V + pre.weights @ (U - m) ** 2))
        z_grid = np.array([m]) if sd == 0.0 else np.linspace(m - 8.0 * sd, m + 8.0 * sd, n_points)
    z_grid = np.asarray(z_grid, dtype=float)

    law = JumpLaw(t, x, pre.weights, U, V, z_grid, np.empty(0), log_base, ctx.quadratic_coefficient())
    g_values = law.g_exact(z_grid)
    object.__setattr__(law, "g_values", g_values)
    return law


# --------------------------------------------------------------------------- #
# Several independent factors
# --------------------------------------------------------------------------- #

@dataclass(frozen=True, eq=False)
class MultiFactorSpec:
    """Independent factors, each with its own prior, sources and point field.

    ``payoff`` is either an array of shape ``(len(law_1), ..., len(law_m))``
    tabulated on the atom product grid, or a callable evaluated there.
    """

    laws: tuple
    sources: tuple
    fields: tuple
    payoff: Union[Array, Callable]

    def __post_init__(self):
        m = len(self.laws)
        if m == 0 or len(self.sources) != m or len(self.fields) != m:
            raise ConfigurationError("every factor needs a law, a source spec and a point field")
        for s, f in zip(self.sources, self.fields):
            if len(s) != f.n_sources:
                raise ConfigurationError("factor source spec and point field disagree")

    @property
    def shape(self) -> tuple:
        return tuple(len(law) for law in self.laws)

    def payoff_table(self) -> Array:
        if callable(self.payoff):
            grids = np.meshgrid(*[law.atoms for law in self.laws], indexing="ij")
            return np.asarray(self.payoff(*grids), dtype=float)
        table = np.asarray(self.payoff, dtype=float)
        if table.shape != self.shape:
            raise ConfigurationError(f"payoff table has shape {table.shape}, expected {self.shape}")
        return table


def multi_factor_posterior(spec: MultiFactorSpec, states: Sequence, t: float, max_cells: int = 10 ** 7):
    """Per-factor posteriors and ``E[g(X^1, ..., X^m) | H_t]``.

    ``states`` holds one ``(EffectiveState, ComplementarySummary)`` pair per
    factor. The joint law is the product of the factor posteriors, so the
    expectation is a tensor contraction of the payoff table.
    """
    if len(states) != len(spec.laws):
        raise ConfigurationError("one (eff, comp) pair per factor is required")
    cells = int(np.prod(spec.shape, dtype=np.int64))
    if cells > max_cells:
        raise ConfigurationError(f"payoff product grid has {cells} cells, above the cap of {max_cells}")
    posts = [posterior(law, eff, comp, t) for law, (eff, comp) in zip(spec.laws, states)]
    value = spec.payoff_table()
    for post in reversed(posts):
        value = np.tensordot(value, post.weights, axes=([-1], [0]))
    return posts, float(value)
