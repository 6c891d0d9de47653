"""
Discounting, the price process and a European call on the signal.

The call is priced state by state: given the activity state ``k`` at the
exercise time, the option is exercised when ``xi_hat_t`` exceeds a
critical value, and the price is a finite sum over the prior's atoms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp, ndtr

from .errors import ConfigurationError, DomainError, NumericalDegeneracyError
from .filter import PosteriorMeasure
from .infoflow import SourceSpec
from .stochastic import (
    PointFieldSpec,
    SignalLaw,
    Stream,
    sample_switch_path,
    state_probabilities,
    substream,
)

Array = np.ndarray

__all__ = [
    "DiscountCurve",
    "CallSpec",
    "CallPriceResult",
    "price_process_value",
    "critical_value",
    "call_price",
    "mc_call_price",
    "empirical_state_probabilities",
    "MC_BLOCK_SIZE",
]

MC_BLOCK_SIZE = 1 << 16


@dataclass(frozen=True, eq=False)
class DiscountCurve:
    """Deterministic discount factors ``P(0, t)`` on ``[0, 1]``.

    Either a flat continuously compounded ``rate`` or a table of
    ``(times, factors)`` interpolated log-linearly. Factors must start at
    1, stay in ``(0, 1]`` and never increase.
    """

    rate: Optional[float] = None
    times: Optional[Array] = None
    factors: Optional[Array] = None

    def __post_init__(self):
        if (self.rate is None) == (self.times is None):
            raise ConfigurationError("give either a flat rate or a table of discount factors")
        if self.rate is not None:
            r = float(self.rate)
            if not np.isfinite(r) or r < 0.0:
                raise ConfigurationError("flat rate must be finite and >= 0")
            object.__setattr__(self, "rate", r)
            return
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.factors, dtype=float)
        if t.shape != p.shape or t.size < 2 or t[0] != 0.0 or t[-1] != 1.0 or np.any(np.diff(t) <= 0.0):
            raise ConfigurationError("table times must increase from 0 to 1 and match the factors")
        if p[0] != 1.0 or np.any(p <= 0.0) or np.any(p > 1.0) or np.any(np.diff(p) > 0.0):
            raise ConfigurationError("discount factors must start at 1, lie in (0, 1] and not increase")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "factors", p)

    @classmethod
    def flat(cls, rate: float = 0.0) -> "DiscountCurve":
        return cls(rate=rate)

    def p0(self, t) -> Array:
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0) or np.any(t > 1.0):
            raise DomainError("discount curve is defined on [0, 1]")
        if self.rate is not None:
            return np.exp(-self.rate * t)
        return np.exp(np.interp(t, self.times, np.log(self.factors)))

    def forward(self, t) -> Array:
        """``P(t, 1) = P(0, 1) / P(0, t)``."""
        return self.p0(1.0) / self.p0(t)


@dataclass(frozen=True, eq=False)
class CallSpec:
    """European call on ``X`` paid at 1, exercised at ``exercise`` in ``(0, 1)``."""

    strike: float
    exercise: float
    prior: SignalLaw
    sources: SourceSpec
    field: PointFieldSpec

    def __post_init__(self):
        if not (np.isfinite(self.strike) and self.strike >= 0.0):
            raise ConfigurationError("strike must be finite and >= 0")
        if not (0.0 < self.exercise < 1.0):
            raise ConfigurationError("exercise time must lie in (0, 1)")
        if self.field.mode != "monotone" or self.field.initial_prob is not None:
            raise ConfigurationError("pricing needs a monotone point field with a fixed initial mask")
        if not any(self.field.initial_mask):
            raise ConfigurationError("pricing needs at least one source active at time 0")
        if self.field.n_sources != len(self.sources):
            raise ConfigurationError("point field and source spec disagree on the number of sources")


@dataclass(frozen=True, eq=False)
class CallPriceResult:
    """Total price and its decomposition over activity states at exercise."""

    total: float
    states: tuple
    probabilities: Array
    prices: Array
    critical: Array
    sigma_hat: Array


def price_process_value(post: PosteriorMeasure, curve: DiscountCurve, t: float) -> float:
    """Discounted conditional mean ``P(t, 1) E[X | F_t]``."""
    if t >= 1.0:
        raise DomainError("the price process is evaluated for t < 1")
    return float(curve.forward(t)) * post.mean()


def _sigma_hat(sources: SourceSpec, mask) -> float:
    prec = np.asarray(sources.precisions)[np.asarray(mask, dtype=bool)]
    return float(1.0 / np.sqrt(prec.sum())) if prec.size else 0.0


def _critical(prior: SignalLaw, forward: float, strike: float, t: float, sigma_hat: float) -> float:
    x = prior.atoms
    if strike <= forward * x[0]:
        return -np.inf
    if strike >= forward * x[-1]:
        return np.inf
    scale = sigma_hat * sigma_hat * (1.0 - t)
    base = prior.log_weights - t * x * x / (2.0 * scale)

    def excess(s):
        lw = base + x * s / scale
        lw = lw - logsumexp(lw)
        return forward * float(np.exp(lw) @ x) - strike

    bound = 10.0 * scale * (1.0 + float(np.max(np.abs(x))))
    for _ in range(200):
        lo, hi = excess(-bound), excess(bound)
        if lo < 0.0 < hi:
            return brentq(excess, -bound, bound, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
        bound *= 2.0
    raise NumericalDegeneracyError("could not bracket the critical value")


def critical_value(spec: CallSpec, mask, curve: Optional[DiscountCurve] = None) -> float:
    """Threshold on ``xi_hat`` above which the call is exercised in state ``mask``.

    Returns ``-inf`` when exercise is certain and ``+inf`` when it never pays.
    """
    curve = curve or DiscountCurve.flat(0.0)
    s = _sigma_hat(spec.sources, mask)
    if s == 0.0:
        raise ConfigurationError("the critical value needs at least one active source")
    return _critical(spec.prior, float(curve.forward(spec.exercise)), spec.strike, spec.exercise, s)


def _state_price(prior: SignalLaw, fwd: float, p0t: float, strike: float, t: float, s: float):
    x, w = prior.atoms, prior.weights
    if s == 0.0:
        return p0t * max(fwd * prior.mean() - strike, 0.0), np.nan
    crit = _critical(prior, fwd, strike, t, s)
    if crit == -np.inf:
        return p0t * float(w @ (fwd * x - strike)), crit
    if crit == np.inf:
        return 0.0, crit
    prob = ndtr((t * x - crit) / (s * np.sqrt(t * (1.0 - t))))
    return p0t * float(np.sum(w * (fwd * x - strike) * prob)), crit


def call_price(spec: CallSpec, curve: DiscountCurve, state_probs: Optional[dict] = None) -> CallPriceResult:
    """Semi-analytic price as a probability-weighted sum over activity states.

    ``state_probs`` overrides the exact state law (e.g. with empirical
    frequencies). Per state,
    ``C(k) = P(0,t) sum_j w_j (P(t,1) x_j - K) N((t x_j - c_k) / (s_k sqrt(t (1 - t))))``
    with ``c_k`` the critical value and ``s_k`` the effective noise level.
    """
    t = spec.exercise
    probs = state_probabilities(spec.field, t) if state_probs is None else dict(state_probs)
    fwd = float(curve.forward(t))
    p0t = float(curve.p0(t))
    states = tuple(sorted(probs))
    prices, crits, sig = [], [], []
    for k in states:
        s = _sigma_hat(spec.sources, k)
        c, crit = _state_price(spec.prior, fwd, p0t, spec.strike, t, s)
        prices.append(c)
        crits.append(crit)
        sig.append(s)
    p = np.array([probs[k] for k in states])
    prices = np.array(prices)
    total = 0.0
    for pk, ck in zip(p, prices):
        total += pk * ck
    return CallPriceResult(float(total), states, p, prices, np.array(crits), np.array(sig))


def empirical_state_probabilities(spec: CallSpec, n_paths: int, seed: int) -> dict:
    """Frequencies of the activity state at exercise over simulated switch paths."""
    counts: dict = {}
    for p in range(n_paths):
        sw = sample_switch_path(spec.field, None, substream(seed, p, Stream.SWITCH))
        k = tuple(int(b) for b in sw.masks_at(np.array([spec.exercise]))[0])
        counts[k] = counts.get(k, 0) + 1
    return {k: v / n_paths for k, v in counts.items()}


def _mc_block(spec: CallSpec, fwd: float, p0t: float, n: int, rng: np.random.Generator) -> Array:
    t = spec.exercise
    prior = spec.prior
    x_true = prior.sample(rng, n)
    sig = np.asarray(spec.sources.sigmas)
    init = np.asarray(spec.field.initial_mask, dtype=bool)
    rates = np.asarray(spec.field.rate_on)
    # activation time of an initially dark source is exponential
    arrival = rng.exponential(1.0, (n, sig.size)) / np.where(rates > 0.0, rates, 1.0)
    active = init | ((rates > 0.0) & (arrival < t))
    xi = t * x_true[:, None] + sig * np.sqrt(t * (1.0 - t)) * rng.standard_normal((n, sig.size))
    prec = np.where(active, 1.0 / sig ** 2, 0.0)
    a = (prec * xi).sum(axis=1) / (1.0 - t)
    b = prec.sum(axis=1) * t / (1.0 - t)
    x = prior.atoms
    lw = prior.log_weights + np.outer(a, x) - np.outer(b, x * x) / 2.0
    lw -= logsumexp(lw, axis=1, keepdims=True)
    mean = np.exp(lw) @ x
    return p0t * np.maximum(fwd * mean - spec.strike, 0.0)


def mc_call_price(spec: CallSpec, curve: DiscountCurve, n_paths: int, seed: int, block: int = MC_BLOCK_SIZE):
    """Monte Carlo price from simulated activity, observations and the exact filter.

    Paths are drawn in blocks of ``block``; block ``b`` uses its own
    substream, so the estimate depends only on ``(seed, n_paths, block)``.

    Returns
    -------
    estimate, stderr : float
    """
    if n_paths < 2:
        raise ConfigurationError("the Monte Carlo oracle needs at least two paths")
    fwd = float(curve.forward(spec.exercise))
    p0t = float(curve.p0(spec.exercise))
    shift = None
    s1 = s2 = 0.0
    done = 0
    b = 0
    while done < n_paths:
        n = min(block, n_paths - done)
        pay = _mc_block(spec, fwd, p0t, n, substream(seed, b, Stream.MC_BLOCK))
        if shift is None:
            shift = float(pay[0])
        d = pay - shift
        s1 += float(d.sum())
        s2 += float((d * d).sum())
        done += n
        b += 1
    mean_d = s1 / n_paths
    var = max(s2 - n_paths * mean_d * mean_d, 0.0) / (n_paths - 1)
    return shift + mean_d, float(np.sqrt(var / n_paths))
