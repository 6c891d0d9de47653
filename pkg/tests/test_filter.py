import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import norm

from modflow.errors import ConfigurationError, DomainError, NumericalDegeneracyError
from modflow.filter import (
    JumpContext,
    MultiFactorSpec,
    conditional_moment,
    conditional_variance,
    jump_context,
    jump_size_law,
    kernel_h,
    log_kernel_h,
    multi_factor_posterior,
    posterior,
    posterior_from_log_likelihood,
    posterior_full,
)
from modflow.infoflow import (
    ComplementarySummary,
    EffectiveState,
    SourceSpec,
    complementary_summary,
    effective_state,
    simulate_info_path,
)
from modflow.stochastic import PointFieldSpec, SignalLaw, Stream, TimeGrid, substream

BIN = SignalLaw.discrete([0.0, 1.0], [0.5, 0.5])
NONE = ComplementarySummary()


def _eff(t, xi, s, active=(0,)):
    return EffectiveState(t, frozenset(active), xi, s)


# --- kernel -----------------------------------------------------------------

def test_kernel_values():
    assert kernel_h(0.0, 3.0, 0.4, 2.0) == 1.0
    assert abs(kernel_h(1.0, 1.0, 0.0, 1.0) - np.e) < 1e-15
    assert abs(kernel_h(2.0, 1.0, 0.5, 1.0) - np.exp(2.0)) < 1e-14
    assert abs(kernel_h(2.0, 1.0, 0.5, 1.0) - 7.38906) < 1e-5


@pytest.mark.parametrize("t", [1.0, 1.5])
def test_kernel_domain(t):
    with pytest.raises(DomainError):
        kernel_h(1.0, 1.0, t, 1.0)


def test_kernel_log_space_does_not_overflow():
    assert np.isfinite(log_kernel_h(5.0, 5.0, 1 - 1e-12, 1.0))


# --- posterior --------------------------------------------------------------

def test_point_mass_prior_is_invariant():
    law = SignalLaw.point_mass(0.7)
    post = posterior(law, _eff(0.5, 12.0, 0.3), NONE, 0.5)
    assert post.weights.tolist() == [1.0]
    assert post.mean() == 0.7


def test_no_information_gives_prior():
    post = posterior(BIN, EffectiveState(0.4, frozenset(), 0.0, 0.0), ComplementarySummary(((0, 0.0, 0.0, 1.0),)),
                     0.4)
    assert np.array_equal(post.weights, BIN.weights)


def test_symmetric_atoms_zero_observation():
    law = SignalLaw.discrete([-1.0, 1.0], [0.5, 0.5])
    post = posterior(law, _eff(0.3, 0.0, 1.0), NONE, 0.3)
    assert np.allclose(post.weights, [0.5, 0.5], rtol=0, atol=1e-15)


def test_binary_posterior_against_explicit_gaussian_likelihood():
    t, s, xi = 0.5, 1.0, 0.4
    post = posterior(BIN, _eff(t, xi, s), NONE, t)
    # brute force: N(xi; t x, s^2 t (1 - t)) likelihood per atom
    lik = norm.pdf(xi, loc=t * BIN.atoms, scale=s * np.sqrt(t * (1 - t)))
    oracle = lik * BIN.weights / np.sum(lik * BIN.weights)
    assert np.allclose(post.weights, oracle, rtol=1e-13, atol=0)
    assert abs(post.weights[1] - np.exp(0.3) / (1 + np.exp(0.3))) < 1e-15
    assert abs(post.weights[1] - 0.57444) < 1e-5


def test_moments():
    post = posterior(BIN, _eff(0.5, 0.4, 1.0), NONE, 0.5)
    assert abs(conditional_moment(post, 1) - 0.57444) < 1e-5
    assert abs(conditional_variance(post) - 0.24446) < 1e-5
    assert abs(post.variance() - conditional_variance(post)) < 1e-15
    pm = posterior(SignalLaw.point_mass(3.0), _eff(0.5, 0.4, 1.0), NONE, 0.5)
    assert conditional_moment(pm, 2) == 9.0
    assert conditional_moment(posterior_from_log_likelihood(BIN, np.zeros(2)), 1) == 0.5
    with pytest.raises(DomainError):
        conditional_moment(post, 0)


def test_posterior_rejects_terminal_and_inconsistent_inputs():
    with pytest.raises(DomainError):
        posterior(BIN, _eff(1.0, 0.4, 1.0), NONE, 1.0)
    with pytest.raises(ConfigurationError):
        posterior(BIN, _eff(0.5, 0.4, 1.0), ComplementarySummary(((0, 0.1, 0.2, 1.0),)), 0.5)
    with pytest.raises(ConfigurationError):
        posterior(BIN, _eff(0.4, 0.4, 1.0), NONE, 0.5)


def test_degenerate_weights_raise():
    with pytest.raises(NumericalDegeneracyError):
        posterior_from_log_likelihood(BIN, np.array([np.nan, 0.0]))
    with pytest.raises(NumericalDegeneracyError):
        posterior_from_log_likelihood(BIN, np.array([-np.inf, -np.inf]))


@given(scale=st.floats(1e-3, 1e3), seed=st.integers(0, 10 ** 6))
def test_prior_scaling_invariance(scale, seed):
    rng = np.random.default_rng(seed)
    atoms = np.sort(rng.uniform(-2, 2, 4))
    w = rng.uniform(0.1, 1, 4)
    a = SignalLaw.discrete(atoms, w)
    b = SignalLaw.discrete(atoms, w * scale)
    e = _eff(0.6, float(rng.normal()), 0.8)
    pa, pb = posterior(a, e, NONE, 0.6), posterior(b, e, NONE, 0.6)
    assert np.allclose(pa.weights, pb.weights, rtol=1e-12, atol=0)


@given(seed=st.integers(0, 10 ** 6))
def test_posterior_normalized_and_positive(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    fs = PointFieldSpec.independent(tuple(rng.uniform(0, 5, n)), tuple(rng.uniform(0, 5, n)),
                                    tuple(rng.random(n) < 0.5))
    law = SignalLaw.gaussian(0.0, 1.0, 17)
    p = simulate_info_path(law, SourceSpec(tuple(rng.uniform(0.5, 2, n))), fs, TimeGrid(20), seed, 0)
    for k in range(0, p.times.size - 1, 3):
        post = posterior_full(law, p, p.times[k])
        assert abs(post.weights.sum() - 1) < 1e-12
        assert np.all(post.weights >= 0)


def test_posterior_full_all_active_equals_effective():
    law = SignalLaw.discrete([-1.0, 0.0, 2.0], [0.2, 0.5, 0.3])
    p = simulate_info_path(law, SourceSpec((1.0, 0.5, 2.0)), PointFieldSpec.always_on(3), TimeGrid(20), 4, 0)
    for k in (3, 9, 17):
        t = p.times[k]
        a = posterior_full(law, p, t).weights
        b = posterior(law, effective_state(p, t), NONE, t).weights
        assert np.allclose(a, b, rtol=1e-12, atol=0)


def test_posterior_full_mixed_equals_reduced():
    law = SignalLaw.discrete([-1.0, 0.0, 2.0], [0.2, 0.5, 0.3])
    fs = PointFieldSpec.deterministic(3, [(0.2, 1, True), (0.45, 1, False), (0.5, 2, True), (0.7, 0, False)],
                                      (True, False, False))
    p = simulate_info_path(law, SourceSpec((1.0, 0.5, 2.0)), fs, TimeGrid(20), 4, 0)
    for t in (0.3, 0.45, 0.55, 0.7, 0.85):
        a = posterior_full(law, p, t).weights
        b = posterior(law, effective_state(p, t), complementary_summary(p, t), t).weights
        assert np.allclose(a, b, rtol=1e-12, atol=0)


def test_never_active_gives_prior():
    fs = PointFieldSpec.independent((0.0,), (0.0,), (False,))
    p = simulate_info_path(BIN, SourceSpec((1.0,)), fs, TimeGrid(10), 0, 0)
    assert np.array_equal(posterior_full(BIN, p, 0.5).weights, BIN.weights)


def test_posterior_full_terminal_raises():
    p = simulate_info_path(BIN, SourceSpec((1.0,)), PointFieldSpec.always_on(1), TimeGrid(10), 0, 0)
    with pytest.raises(DomainError):
        posterior_full(BIN, p, 1.0)


def test_terminal_consistency():
    law = SignalLaw.discrete([-1.0, 0.0, 1.0], [0.3, 0.4, 0.3])
    for p in range(30):
        path = simulate_info_path(law, SourceSpec((1.0,)), PointFieldSpec.always_on(1), TimeGrid(10, 1e-6), 5, p)
        post = posterior_full(law, path, 1 - 1e-6)
        assert post.weights[np.searchsorted(law.atoms, path.x_true)] > 0.999


# --- jump-size law ----------------------------------------------------------

def _fresh_context(t=0.5, sigma=1.0, z=None):
    pre = EffectiveState(t, frozenset(), 0.0, 0.0)
    return JumpContext(t, (0,), pre, ComplementarySummary(((0, 0.0, 0.0, sigma),)), z)


def test_fresh_activation_parameters():
    t, s = 0.5, 1.3
    ctx = _fresh_context(t, s)
    x = np.array([-1.0, 0.5, 2.0])
    assert np.allclose(ctx.U(x), t * x / (s * s * (1 - t)), rtol=1e-15, atol=0)
    assert abs(ctx.V - t / (s * s * (1 - t))) < 1e-15


def test_point_mass_jump_is_zero():
    law = jump_size_law(SignalLaw.point_mass(0.3), _fresh_context())
    assert np.all(law.g_values == 0.3)
    assert np.all(law.post_cdf(np.array([0.29, 0.3, 0.31])) == [0.0, 1.0, 1.0])


def test_g_matches_posterior_after_observation():
    # after the jump the posterior depends on Z only; check g(Z) against the filter
    t = 0.5
    ctx = _fresh_context(t)
    law = jump_size_law(BIN, ctx)
    for xi in (-0.5, 0.2, 0.9):
        z = xi / (1 - t)
        direct = posterior(BIN, _eff(t, xi, 1.0), NONE, t).mean()
        assert abs(law.g_exact(z)[0] - direct) < 1e-14
        assert abs(law.g(z) - direct) < 1e-4


def test_g_nondecreasing():
    law = jump_size_law(SignalLaw.gaussian(0, 1, 33), _fresh_context(0.3, 0.7))
    assert np.all(np.diff(law.g_values) >= 0)


def test_z_grid_default_span():
    law = jump_size_law(BIN, _fresh_context())
    assert law.z_grid.size == 1025
    assert law.z_cdf(law.z_grid[0]) < 1e-10 and law.z_cdf(law.z_grid[-1]) > 1 - 1e-10


def test_jump_context_from_path_matches_filter():
    law = SignalLaw.discrete([-1.0, 0.5, 2.0], [0.3, 0.3, 0.4])
    fs = PointFieldSpec.deterministic(2, [(0.2, 1, True), (0.35, 1, False), (0.6, 1, True)], (True, False))
    p = simulate_info_path(law, SourceSpec((1.0, 0.8)), fs, TimeGrid(50), 2, 0)
    for e in (0, 2):
        ctx = jump_context(p, e)
        k = p.event_nodes[e]
        assert abs(jump_size_law(law, ctx).g_exact(ctx.z)[0] - posterior_full(law, p, p.times[k]).mean()) < 1e-13
    with pytest.raises(ConfigurationError):
        jump_context(p, 1)  # a deactivation


def test_fresh_activation_ks_against_simulation():
    # draw X from the prior, xi_t | X from the bridge law, apply Bayes
    t, n = 0.5, 100000
    law = jump_size_law(BIN, _fresh_context(t))
    rng = substream(0, 0, Stream.JUMP)
    x = BIN.sample(rng, n)
    xi = t * x + np.sqrt(t * (1 - t)) * rng.standard_normal(n)
    lw = np.log(BIN.weights) + (np.outer(xi, BIN.atoms) - t * BIN.atoms ** 2 / 2) / (1 - t)
    w = np.exp(lw - lw.max(axis=1, keepdims=True))
    vals = np.sort((w @ BIN.atoms) / w.sum(axis=1))
    cdf = law.post_cdf(vals)
    ks = max(np.max(np.arange(1, n + 1) / n - cdf), np.max(cdf - np.arange(n) / n))
    assert ks <= 0.01


def test_zero_variance_context_is_deterministic():
    # activation at the same instant the source was last seen
    t = 0.4
    pre = EffectiveState(t, frozenset(), 0.0, 0.0)
    ctx = JumpContext(t, (0,), pre, ComplementarySummary(((0, 0.3, t, 1.0),)))
    law = jump_size_law(BIN, ctx)
    assert law.V == 0.0
    assert law.z_grid.size == 1
    assert np.all(law.post_cdf(np.array([law.g_values[0]])) == 1.0)


def test_jump_context_validation():
    pre = EffectiveState(0.5, frozenset(), 0.0, 0.0)
    with pytest.raises(ConfigurationError):
        JumpContext(0.5, (), pre, NONE)
    with pytest.raises(ConfigurationError):
        JumpContext(0.5, (1,), pre, ComplementarySummary(((0, 0.0, 0.0, 1.0),)))


# --- several factors --------------------------------------------------------

def _factor_state(t, xi, s):
    return (_eff(t, xi, s), NONE)


def _mf(laws, payoff):
    src = tuple(SourceSpec((1.0,)) for _ in laws)
    fields = tuple(PointFieldSpec.always_on(1) for _ in laws)
    return MultiFactorSpec(tuple(laws), src, fields, payoff)


def test_single_factor_reduces():
    spec = _mf([BIN], lambda x: x)
    posts, val = multi_factor_posterior(spec, [_factor_state(0.5, 0.4, 1.0)], 0.5)
    assert abs(val - posterior(BIN, _eff(0.5, 0.4, 1.0), NONE, 0.5).mean()) < 1e-15


def test_sum_payoff_is_sum_of_means():
    other = SignalLaw.discrete([-1.0, 2.0, 3.0], [0.2, 0.3, 0.5])
    spec = _mf([BIN, other], lambda x, y: x + y)
    states = [_factor_state(0.5, 0.4, 1.0), _factor_state(0.5, 1.0, 0.7)]
    posts, val = multi_factor_posterior(spec, states, 0.5)
    assert abs(val - (posts[0].mean() + posts[1].mean())) < 1e-14


def test_product_payoff_is_product_of_means():
    spec = _mf([BIN, BIN], np.outer(BIN.atoms, BIN.atoms))
    states = [_factor_state(0.3, 0.1, 1.0), _factor_state(0.3, 0.5, 0.6)]
    posts, val = multi_factor_posterior(spec, states, 0.3)
    assert abs(val - posts[0].mean() * posts[1].mean()) < 1e-12


def test_product_grid_cap():
    big = SignalLaw.gaussian(0, 1, 129)
    spec = _mf([big, big, big, big], lambda *x: sum(x))
    with pytest.raises(ConfigurationError, match="cells"):
        multi_factor_posterior(spec, [_factor_state(0.5, 0.0, 1.0)] * 4, 0.5)


def test_payoff_table_shape_checked():
    spec = _mf([BIN, BIN], np.zeros((3, 2)))
    with pytest.raises(ConfigurationError):
        multi_factor_posterior(spec, [_factor_state(0.5, 0.0, 1.0)] * 2, 0.5)
