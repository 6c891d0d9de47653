"""
Verification suites with independent oracles.

Each suite returns a :class:`SuiteResult`. The command-line ``verify``
command and the acceptance tests both run these functions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

from .asymmetry import AgentView, simulate_asymmetry_path
from .dynamics import build_dynamics, euler_reconstruct, feynman_kac_residual
from .filter import jump_context, jump_size_law, posterior, posterior_full
from .infoflow import (
    SourceSpec,
    build_info_path,
    complementary_summary,
    effective_state,
    simulate_info_path,
)
from .pricing import CallSpec, DiscountCurve, call_price, critical_value, mc_call_price
from .stochastic import (
    BridgePath,
    PointFieldSpec,
    SignalLaw,
    Stream,
    SwitchPath,
    TimeGrid,
    refine_bridges,
    sample_bridges,
    substream,
)

Array = np.ndarray


@dataclass
class SuiteResult:
    name: str
    passed: bool
    stats: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        body = ", ".join(f"{k}={_fmt(v)}" for k, v in self.stats.items())
        return f"[{tag}] {self.name}: {body} ({self.seconds:.1f}s)"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{v:.4g}"
    return str(v)


def _timed(fn):
    def run(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


# --------------------------------------------------------------------------- #
# random configurations
# --------------------------------------------------------------------------- #

def random_prior(rng: np.random.Generator) -> SignalLaw:
    kind = rng.integers(3)
    if kind == 0:
        a = np.sort(rng.uniform(-2.0, 2.0, 2))
        return SignalLaw.discrete(a, rng.uniform(0.1, 1.0, 2))
    if kind == 1:
        a = np.sort(rng.uniform(-2.0, 2.0, 5))
        return SignalLaw.discrete(a, rng.uniform(0.1, 1.0, 5))
    return SignalLaw.gaussian(rng.uniform(-1.0, 1.0), rng.uniform(0.2, 1.5), int(rng.integers(5, 34)))


def random_field(rng: np.random.Generator, n: int) -> PointFieldSpec:
    return PointFieldSpec.independent(
        tuple(rng.uniform(0.0, 6.0, n)), tuple(rng.uniform(0.0, 6.0, n)), tuple(rng.random(n) < 0.5)
    )


def _relative_gap(a: Array, b: Array, floor: float = 1e-300) -> float:
    keep = b > floor
    return float(np.max(np.abs(a[keep] - b[keep]) / b[keep]))


# --------------------------------------------------------------------------- #
# stochastic building blocks
# --------------------------------------------------------------------------- #

@_timed
def bridge_covariance(n_paths: int = 20000, seed: int = 0) -> SuiteResult:
    """Empirical bridge covariance against ``min(s, t) - s t``, including inserted nodes."""
    grid = TimeGrid(20)
    rngs = [substream(seed, p, Stream.CHECK) for p in range(n_paths)]
    vals = sample_bridges(grid, rngs, 1)[:, 0, :]
    times = np.asarray(grid.nodes)
    # insert one off-grid time per path by exact conditioning
    u = 0.4321
    fill = np.empty(n_paths)
    for p in range(n_paths):
        b = refine_bridges([BridgePath(times, vals[p])], [u], substream(seed, p, Stream.BRIDGE_FILL))[0]
        fill[p] = b.values[np.searchsorted(b.times, u)]
    probe_t = np.array([0.1, 0.25, 0.5, 0.75, 0.9])
    cols = [vals[:, np.searchsorted(times, s)] for s in probe_t] + [fill]
    pts = np.append(probe_t, u)
    worst = 0.0
    fails = 0
    for i in range(pts.size):
        for j in range(i, pts.size):
            prod = cols[i] * cols[j]
            target = min(pts[i], pts[j]) - pts[i] * pts[j]
            z = abs(prod.mean() - target) / (prod.std(ddof=1) / np.sqrt(n_paths))
            worst = max(worst, z)
            fails += z > 4.0
    return SuiteResult("bridge covariance", fails == 0, {"max_z": worst, "pairs": pts.size * (pts.size + 1) // 2})


# --------------------------------------------------------------------------- #
# filter identities
# --------------------------------------------------------------------------- #

def _random_case(rng: np.random.Generator, case: int, seed: int, t_lo: float, t_hi: float):
    n = int(rng.integers(1, 5))
    prior = random_prior(rng)
    sources = SourceSpec(tuple(rng.uniform(0.5, 2.0, n)))
    fs = random_field(rng, n)
    grid = TimeGrid(int(rng.integers(10, 41)))
    path = simulate_info_path(prior, sources, fs, grid, seed, case)
    cand = np.flatnonzero((path.times >= t_lo) & (path.times <= t_hi))
    k = int(cand[rng.integers(cand.size)])
    return prior, path, k


@_timed
def reduction_identity(n_cases: int = 1000, seed: int = 1, tol: float = 1e-12) -> SuiteResult:
    """Product of per-source kernels against the effective/complementary form."""
    rng = substream(seed, 0, Stream.CHECK)
    worst = 0.0
    for c in range(n_cases):
        prior, path, k = _random_case(rng, c, seed, 0.0, 0.9)
        t = float(path.times[k])
        full = posterior_full(prior, path, t).weights
        red = posterior(prior, effective_state(path, t), complementary_summary(path, t), t).weights
        worst = max(worst, _relative_gap(red, full))
    return SuiteResult("reduction identity", worst <= tol, {"cases": n_cases, "max_rel_err": worst, "tol": tol})


def bayes_oracle_weights(prior: SignalLaw, path, k: int) -> Array:
    """Posterior from the joint Gaussian law of every observed raw value up to node ``k``.

    A source contributes its values at every node where it is active or has
    just been switched off. Given X = x these are Gaussian with mean
    ``s x`` and covariance ``sigma^2 (min(s, s') - s s')``.
    """
    x = prior.atoms
    times = path.times
    coef_a = 0.0
    coef_b = 0.0
    for i in range(path.n_sources):
        act = path.active[: k + 1, i]
        prev = np.concatenate([[False], act[:-1]])
        seen = np.flatnonzero((act | prev) & (times[: k + 1] > 0.0))
        if seen.size == 0:
            continue
        s = times[seen]
        y = path.xi[seen, i]
        cov = path.sigmas[i] ** 2 * (np.minimum.outer(s, s) - np.outer(s, s))
        fac = cho_factor(cov, lower=True)
        coef_a += float(s @ cho_solve(fac, y))
        coef_b += float(s @ cho_solve(fac, s))
    lw = prior.log_weights + coef_a * x - coef_b * x * x / 2.0
    return np.exp(lw - logsumexp(lw))


@_timed
def bayes_oracle(n_cases: int = 1000, seed: int = 2, tol: float = 1e-10) -> SuiteResult:
    """Filter output against brute-force Gaussian-likelihood Bayes."""
    rng = substream(seed, 0, Stream.CHECK)
    worst = 0.0
    for c in range(n_cases):
        prior, path, k = _random_case(rng, c, seed, 0.01, 0.99)
        t = float(path.times[k])
        ours = posterior_full(prior, path, t).weights
        worst = max(worst, _relative_gap(ours, bayes_oracle_weights(prior, path, k)))
    return SuiteResult("Bayes oracle", worst <= tol, {"cases": n_cases, "max_rel_err": worst, "tol": tol})


# --------------------------------------------------------------------------- #
# path-level Monte Carlo
# --------------------------------------------------------------------------- #

@dataclass
class PathSample:
    """Grid-node summaries of many simulated paths."""

    times: Array
    x_mean: Array
    x_var: Array
    masks: Array
    dw: Array
    on: Array
    prior_mean: float


def default_mc_setup():
    prior = SignalLaw.discrete([0.0, 1.0], [0.5, 0.5])
    sources = SourceSpec((1.0, 0.7))
    fs = PointFieldSpec.independent((2.0, 1.0), (1.0, 3.0), (True, False))
    return prior, sources, fs, TimeGrid(50)


def simulate_sample(prior, sources, fs, grid, n_paths: int, seed: int) -> PathSample:
    L = len(grid)
    x_mean = np.empty((n_paths, L))
    x_var = np.empty((n_paths, L))
    masks = np.empty((n_paths, L), dtype=np.int64)
    dw = np.empty((n_paths, L - 1))
    on = np.empty((n_paths, L - 1), dtype=bool)
    bits = 1 << np.arange(len(sources))
    for p in range(n_paths):
        path = simulate_info_path(prior, sources, fs, grid, seed, p)
        dyn = build_dynamics(prior, path)
        g = path.on_grid
        x_mean[p] = dyn.x_mean[g]
        x_var[p] = dyn.x_var[g]
        masks[p] = path.active[g] @ bits
        w = dyn.w[g]
        dw[p] = np.diff(w)
        # grid step fully inside one activity state with a source on
        idx = np.flatnonzero(g)
        c = dyn.ledger.c_count
        on[p] = (c[idx[1:]] == c[idx[:-1]]) & (dyn.sigma_hat[idx[:-1]] > 0.0)
    return PathSample(np.asarray(grid.nodes), x_mean, x_var, masks, dw, on, prior.mean())


@_timed
def martingale(sample: PathSample, n_quantiles: int = 10, min_bin: int = 500, pass_frac: float = 0.95) -> SuiteResult:
    """Unconditional mean at every node and binned conditional increments."""
    n = sample.x_mean.shape[0]
    m = sample.x_mean.mean(axis=0)
    se = sample.x_mean.std(axis=0, ddof=1) / np.sqrt(n)
    se = np.where(se > 0.0, se, np.finfo(float).tiny)
    z_uncond = np.abs(m - sample.prior_mean) / se
    z_uncond[0] = 0.0 if abs(m[0] - sample.prior_mean) < 1e-12 else np.inf
    uncond_ok = bool(np.all(z_uncond <= 3.0))

    times = sample.times
    L = times.size
    pairs = [(int(round(a * (L - 1))), int(round(b * (L - 1)))) for a, b in
             [(0.1, 0.3), (0.2, 0.5), (0.4, 0.6), (0.5, 0.9), (0.7, 0.8)]]
    n_bins = n_ok = 0
    worst = 0.0
    for i, j in pairs:
        xt = sample.x_mean[:, i]
        inc = sample.x_mean[:, j] - xt
        edges = np.quantile(xt, np.linspace(0, 1, n_quantiles + 1)[1:-1])
        qbin = np.searchsorted(edges, xt, side="right")
        key = sample.masks[:, i] * (n_quantiles + 1) + qbin
        for kv in np.unique(key):
            sel = inc[key == kv]
            if sel.size < min_bin:
                continue
            s = sel.std(ddof=1) / np.sqrt(sel.size)
            z = abs(sel.mean()) / s if s > 0 else (0.0 if abs(sel.mean()) < 1e-12 else np.inf)
            n_bins += 1
            n_ok += z <= 3.0
            worst = max(worst, z)
    frac = n_ok / n_bins if n_bins else 0.0
    ok = uncond_ok and n_bins > 0 and frac >= pass_frac
    return SuiteResult("martingale", ok, {"paths": n, "max_z_uncond": float(z_uncond.max()),
                                          "bins": n_bins, "bin_pass_frac": frac, "max_z_bin": worst})


@_timed
def supermartingale(sample: PathSample) -> SuiteResult:
    """Mean conditional variance is non-increasing node to node (paired differences)."""
    d = np.diff(sample.x_var, axis=1)
    n = d.shape[0]
    m = d.mean(axis=0)
    s = d.std(axis=0, ddof=1) / np.sqrt(n)
    slack = np.where(s > 0, m / np.where(s > 0, s, 1.0), np.where(m > 0, np.inf, 0.0))
    worst = float(slack.max())
    return SuiteResult("supermartingale variance", worst <= 3.0, {"paths": n, "max_increase_z": worst})


@_timed
def brownian_increments(n_paths: int = 4000, n_steps: int = 1000, seed: int = 4,
                        windows=((0.1, 0.3), (0.3, 0.5), (0.5, 0.7), (0.7, 0.85))) -> SuiteResult:
    """``W`` increments over windows have second moment equal to the active time.

    Run on a fine grid, since the left-point drift adds a bias of order
    ``dt / (1 - t)`` per step.
    """
    prior, sources, fs, _ = default_mc_setup()
    grid = TimeGrid(n_steps)
    idx = [(int(round(a * n_steps)), int(round(b * n_steps))) for a, b in windows]
    sq = np.empty((n_paths, len(windows)))
    occ = np.empty_like(sq)
    for p in range(n_paths):
        path = simulate_info_path(prior, sources, fs, grid, seed, p)
        dyn = build_dynamics(prior, path)
        g = np.flatnonzero(path.on_grid)
        on_len = np.where(dyn.sigma_hat[:-1] > 0.0, np.diff(dyn.times), 0.0)
        busy = np.concatenate([[0.0], np.cumsum(on_len)])
        for j, (a, b) in enumerate(idx):
            sq[p, j] = (dyn.w[g[b]] - dyn.w[g[a]]) ** 2
            occ[p, j] = busy[g[b]] - busy[g[a]]
    d = sq - occ
    z = np.abs(d.mean(axis=0)) / (d.std(axis=0, ddof=1) / np.sqrt(n_paths))
    ratio = sq.mean(axis=0) / occ.mean(axis=0)
    return SuiteResult("Brownian increments", bool(np.all(z <= 3.0)),
                       {"paths": n_paths, "max_z": float(z.max()), "min_ratio": float(ratio.min()),
                        "max_ratio": float(ratio.max())})


# --------------------------------------------------------------------------- #
# jump law
# --------------------------------------------------------------------------- #

def default_jump_setup():
    prior = SignalLaw.discrete([-1.0, 0.5, 2.0], [0.3, 0.3, 0.4])
    sources = SourceSpec((1.0, 0.8))
    fs = PointFieldSpec.deterministic(2, [(0.2, 1, True), (0.35, 1, False), (0.6, 1, True)], (True, False))
    return prior, sources, fs, TimeGrid(100), 0.6


@_timed
def jump_law(n_samples: int = 100000, seed: int = 5, tol: float = 0.01) -> SuiteResult:
    """Post-jump conditional mean at a configured activation against its pushforward law.

    The oracle fixes the pre-jump history of one path, draws X from the
    pre-jump posterior, draws the activated source's value by bridge
    conditioning on its last record, and recomputes the posterior mean from
    the raw product of per-source Gaussian likelihoods.
    """
    prior, sources, fs, grid, t = default_jump_setup()
    path = simulate_info_path(prior, sources, fs, grid, seed, 0)
    event = int(np.flatnonzero(np.isclose(path.switch.event_times, t))[0])
    ctx = jump_context(path, event)
    law = jump_size_law(prior, ctx)
    k = int(path.event_nodes[event])

    x = prior.atoms
    sig = path.sigmas
    # pre-jump posterior by direct products over per-source records
    lw_pre = prior.log_weights.copy()
    for i in range(path.n_sources):
        tau, y = path.tau_left[k, i], path.frozen_left[k, i]
        lw_pre = lw_pre + (x * y - tau * x * x / 2.0) / (sig[i] ** 2 * (1.0 - tau))
    w_pre = np.exp(lw_pre - logsumexp(lw_pre))

    rng = substream(seed, 1, Stream.JUMP)
    idx = np.minimum(np.searchsorted(np.cumsum(w_pre), rng.random(n_samples), side="right"), x.size - 1)
    xs = x[idx]
    lw = np.tile(prior.log_weights, (n_samples, 1))
    for i in range(path.n_sources):
        s2 = sig[i] ** 2
        if i in ctx.activated:
            tau, y = path.tau_left[k, i], path.frozen_left[k, i]
            mean = (1.0 - t) / (1.0 - tau) * y + (t - tau) / (1.0 - tau) * xs
            sd = np.sqrt(s2 * (t - tau) * (1.0 - t) / (1.0 - tau))
            yt = mean + sd * rng.standard_normal(n_samples)
            lw = lw + (np.outer(yt, x) - t * x * x / 2.0) / (s2 * (1.0 - t))
        else:
            tau, y = path.tau[k, i], path.frozen[k, i]
            lw = lw + (x * y - tau * x * x / 2.0) / (s2 * (1.0 - tau))
    lw -= logsumexp(lw, axis=1, keepdims=True)
    post = np.sort(np.exp(lw) @ x)

    cdf = law.post_cdf(post)
    n = post.size
    ks = float(max(np.max(np.arange(1, n + 1) / n - cdf), np.max(cdf - np.arange(n) / n)))
    return SuiteResult("jump-size law", ks <= tol, {"samples": n_samples, "ks": ks, "tol": tol,
                                                    "activation_t": t})


# --------------------------------------------------------------------------- #
# expectation SDE
# --------------------------------------------------------------------------- #

@_timed
def euler_convergence(n_paths: int = 200, seed: int = 6, levels=(500, 1000, 2000, 4000),
                      t_max: float = 0.99) -> SuiteResult:
    """Path-averaged maximum gap of the SDE reconstruction on nested grids.

    Bridges are drawn on the finest grid and subsampled, so every level
    sees the same underlying path.
    """
    prior = SignalLaw.discrete([0.0, 1.0], [0.5, 0.5])
    sigma = 1.0
    fine = TimeGrid(max(levels))
    switch = SwitchPath.constant([True])
    gaps = np.zeros((n_paths, len(levels)))
    for p in range(n_paths):
        x = float(prior.sample(substream(seed, p, Stream.SIGNAL)))
        vals = sample_bridges(fine, [substream(seed, p, Stream.BRIDGE)], 1)[0, 0]
        for j, n in enumerate(levels):
            g = TimeGrid(n)
            sel = np.searchsorted(fine.nodes, g.nodes)
            b = BridgePath(g.nodes, vals[sel], sigma)
            path = build_info_path(x, [b], switch, g)
            gaps[p, j] = euler_reconstruct(prior, path, t_max=t_max).gap
    mean_gap = gaps.mean(axis=0)
    ok = bool(np.all(np.diff(mean_gap) < 0.0))
    stats = {f"gap_N{n}": float(v) for n, v in zip(levels, mean_gap)}
    stats["paths"] = n_paths
    return SuiteResult("Euler self-convergence", ok, stats)


@_timed
def fk_residual(n: int = 401, sigma: float = 2.0, psi: float = 0.03, tol: float = 1e-3,
                min_ratio: float = 3.0) -> SuiteResult:
    """Finite-difference residual of the pricing PDE with an exact-filter solution."""
    prior = SignalLaw.discrete([0.0, 1.0], [0.5, 0.5])
    phi = prior.atoms ** 2

    def run(m):
        return feynman_kac_residual(prior, psi, phi, sigma, np.linspace(-1.0, 2.0, m), np.linspace(0.05, 0.9, m))

    fine = run(n)
    coarse = run((n - 1) // 2 + 1)
    ratio = coarse / fine
    return SuiteResult("Feynman-Kac residual", fine <= tol and ratio >= min_ratio,
                       {"grid": n, "residual": fine, "coarse_residual": coarse, "ratio": ratio, "tol": tol})


# --------------------------------------------------------------------------- #
# pricing
# --------------------------------------------------------------------------- #

def random_call_spec(rng: np.random.Generator):
    n = int(rng.integers(1, 4))
    prior = random_prior(rng)
    sources = SourceSpec(tuple(rng.uniform(0.5, 2.0, n)))
    init = rng.random(n) < 0.5
    init[rng.integers(n)] = True
    fs = PointFieldSpec.monotone(tuple(rng.uniform(0.0, 4.0, n)), tuple(init))
    curve = DiscountCurve.flat(float(rng.uniform(0.0, 0.05)))
    t = float(rng.uniform(0.1, 0.9))
    fwd = float(curve.forward(t))
    lo, hi = fwd * prior.atoms[0], fwd * prior.atoms[-1]
    strike = float(max(rng.uniform(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo)), 0.0))
    return CallSpec(strike, t, prior, sources, fs), curve


@_timed
def call_price_suite(n_specs: int = 10, n_paths: int = 1000000, seed: int = 8) -> SuiteResult:
    """Semi-analytic call price against Monte Carlo plus two exact identities."""
    rng = substream(seed, 0, Stream.CHECK)
    worst = 0.0
    for s in range(n_specs):
        spec, curve = random_call_spec(rng)
        exact = call_price(spec, curve).total
        est, se = mc_call_price(spec, curve, n_paths, seed + 1 + s)
        worst = max(worst, abs(exact - est) / se if se > 0 else (0.0 if abs(exact - est) < 1e-12 else np.inf))

    binary = SignalLaw.discrete([0.0, 1.0], [0.5, 0.5])
    one = SourceSpec((1.0,))
    spec = CallSpec(0.4, 0.5, binary, one, PointFieldSpec.always_on(1))
    est, se = mc_call_price(spec, DiscountCurve.flat(0.0), n_paths, seed)
    z_ref = abs(call_price(spec, DiscountCurve.flat(0.0)).total - est) / se

    crit_err = 0.0
    for _ in range(20):
        t = float(rng.uniform(0.05, 0.95))
        s = float(rng.uniform(0.3, 3.0))
        w1 = float(rng.uniform(0.1, 0.9))
        curve = DiscountCurve.flat(float(rng.uniform(0.0, 0.05)))
        fwd = float(curve.forward(t))
        k = float(rng.uniform(0.05, 0.95)) * fwd
        sp = CallSpec(k, t, SignalLaw.discrete([0.0, 1.0], [1 - w1, w1]), SourceSpec((s,)), PointFieldSpec.always_on(1))
        closed = t / 2.0 + s * s * (1.0 - t) * np.log(k * (1 - w1) / ((fwd - k) * w1))
        crit_err = max(crit_err, abs(critical_value(sp, (1,), curve) - closed))

    k0_err = 0.0
    for _ in range(10):
        spec, curve = random_call_spec(rng)
        pos = SignalLaw.discrete(np.abs(spec.prior.atoms) + 0.01, spec.prior.weights)
        sp = CallSpec(0.0, spec.exercise, pos, spec.sources, spec.field)
        target = float(curve.p0(1.0)) * pos.mean()
        k0_err = max(k0_err, abs(call_price(sp, curve).total - target))

    ok = worst <= 3.0 and z_ref <= 3.0 and crit_err <= 1e-10 and k0_err <= 1e-12
    return SuiteResult("call price", ok, {"specs": n_specs, "paths": n_paths, "max_z_battery": worst,
                                          "z_reference": z_ref, "critical_err": crit_err, "k0_err": k0_err})


# --------------------------------------------------------------------------- #
# asymmetry
# --------------------------------------------------------------------------- #

def default_asymmetry_setup():
    prior = SignalLaw.discrete([0.0, 1.0], [0.5, 0.5])
    sources = SourceSpec((1.0, 0.8))
    a1 = AgentView(1, PointFieldSpec.independent((2.0, 1.5), (1.0, 2.0), (True, False)))
    a2 = AgentView(2, PointFieldSpec.deterministic(2, [(0.5, 1, True)], (False, False)))
    return prior, sources, a1, a2, TimeGrid(100), 0.5


@_timed
def asymmetry_suite(n_paths: int = 1000, seed: int = 9) -> SuiteResult:
    """Nonnegativity, zero for identical fields, exact swap symmetry, event annotation."""
    prior, sources, a1, a2, grid, t_on = default_asymmetry_setup()
    min_kl = np.inf
    same_max = 0.0
    swap_ok = True
    annotated = 0
    for p in range(n_paths):
        r = simulate_asymmetry_path(prior, sources, a1, a2, grid, seed, p)
        min_kl = min(min_kl, float(r.kl.min()))
        r_sw = simulate_asymmetry_path(prior, sources, AgentView(1, a2.field), AgentView(2, a1.field), grid, seed, p)
        swap_ok &= bool(np.array_equal(r.kl, r_sw.kl) and np.array_equal(r.a_half, r_sw.b_half)
                        and np.array_equal(r.b_half, r_sw.a_half) and np.array_equal(r.mask1, r_sw.mask2))
        r_id = simulate_asymmetry_path(prior, sources, a1, AgentView(2, a1.field), grid, seed, p)
        same_max = max(same_max, float(np.max(np.abs(r_id.kl))))
        annotated += any(ev[0] == t_on and ev[1] == a2.agent_id and ev[2] == "on" for ev in r.events)
    ok = min_kl >= 0.0 and same_max == 0.0 and swap_ok and annotated == n_paths
    return SuiteResult("asymmetry", ok, {"paths": n_paths, "min_kl": min_kl, "identical_max": same_max,
                                         "swap_exact": swap_ok, "annotated_frac": annotated / n_paths})
