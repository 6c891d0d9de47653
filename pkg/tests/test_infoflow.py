import numpy as np
import pytest
from hypothesis import given, strategies as st

from modflow.errors import ConfigurationError, DegenerateScalingError, DomainError, ValidationError
from modflow.infoflow import (
    ComplementarySummary,
    SourceSpec,
    build_info_path,
    complementary_summary,
    effective_from_mask,
    effective_state,
    mix_projection,
    simulate_info_path,
)
from modflow.stochastic import (
    BridgePath,
    PointFieldSpec,
    SignalLaw,
    Stream,
    SwitchPath,
    TimeGrid,
    sample_source_bridges,
    substream,
)

PRIOR = SignalLaw.discrete([0.0, 1.0], [0.5, 0.5])


def _path(events, n=2, init=None, sigmas=(1.0, 2.0), n_steps=20, seed=0):
    fs = PointFieldSpec.deterministic(n, events, init)
    return simulate_info_path(PRIOR, SourceSpec(sigmas[:n]), fs, TimeGrid(n_steps), seed, 0)


def test_source_spec_validation():
    with pytest.raises(ConfigurationError):
        SourceSpec((1.0, 0.0))
    with pytest.raises(ConfigurationError):
        SourceSpec((float("inf"),))
    with pytest.raises(ConfigurationError):
        SourceSpec(())


def test_raw_path_starts_at_zero_and_reveals_x():
    p = _path([], init=(True, True))
    assert np.all(p.xi[0] == 0.0)
    assert np.allclose(p.xi[-1], p.x_true)


def test_tau_always_active():
    p = _path([], init=(True, False))
    assert np.array_equal(p.tau[:, 0], p.times)


def test_tau_never_active_is_zero():
    p = _path([], init=(True, False))
    assert np.all(p.tau[:, 1] == 0.0)
    assert np.all(p.frozen[:, 1] == 0.0)


def test_tau_freezes_after_deactivation():
    p = _path([(0.4, 1, False)], init=(True, True), n_steps=10)
    k = p.node_index(0.7)
    assert p.tau[k, 1] == 0.4
    j = p.node_index(0.4)
    assert p.frozen[k, 1] == p.xi[j, 1]


def test_off_grid_event_inserted_exactly():
    p = _path([(0.333, 1, True), (0.777, 1, False)], init=(True, False))
    assert 0.333 in p.times and 0.777 in p.times
    assert p.tau[p.node_index(0.9), 1] == 0.777


def test_modulated_is_zero_when_inactive():
    p = _path([(0.3, 1, True), (0.6, 1, False)], init=(True, False))
    assert np.all(p.modulated[~p.active] == 0.0)
    assert np.array_equal(p.modulated[p.active], p.xi[p.active])


@given(seed=st.integers(0, 10 ** 6))
def test_tau_invariants_random(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    fs = PointFieldSpec.independent(tuple(rng.uniform(0, 6, n)), tuple(rng.uniform(0, 6, n)),
                                    tuple(rng.random(n) < 0.5))
    p = simulate_info_path(PRIOR, SourceSpec(tuple(rng.uniform(0.5, 2, n))), fs, TimeGrid(30), seed, 0)
    assert np.all(np.diff(p.tau, axis=0) >= 0)
    assert np.all(p.tau <= p.times[:, None])
    assert np.all(p.tau[p.active] == np.broadcast_to(p.times[:, None], p.tau.shape)[p.active])
    # complementary records constant between events
    between = np.setdiff1d(np.arange(1, p.times.size), p.event_nodes)
    for k in between:
        if p.times[k] < 1.0:
            assert complementary_summary(p, p.times[k]) == complementary_summary(p, p.times[k - 1])


def test_build_requires_fill_rng_for_off_grid_events():
    g = TimeGrid(10)
    bridges = sample_source_bridges(g, (1.0,), substream(0, 0, Stream.BRIDGE))
    sw = SwitchPath(np.array([0.55]), np.array([[False], [True]]))
    with pytest.raises(ConfigurationError):
        build_info_path(0.5, bridges, sw, g)
    build_info_path(0.5, bridges, sw, g, substream(0, 0, Stream.BRIDGE_FILL))


def test_build_rejects_mismatched_sources():
    g = TimeGrid(10)
    bridges = sample_source_bridges(g, (1.0, 1.0), substream(0, 0, Stream.BRIDGE))
    with pytest.raises(ConfigurationError):
        build_info_path(0.5, bridges, SwitchPath.constant([True]), g)


# --- effective state --------------------------------------------------------

def test_effective_single_source():
    e = effective_from_mask(0.5, [True], [0.37], [2.0])
    assert e.sigma_hat == 2.0 and e.xi_hat == 0.37


def test_effective_two_equal_sources():
    e = effective_from_mask(0.5, [True, True], [0.2, 0.6], [1.0, 1.0])
    assert abs(e.sigma_hat - 1 / np.sqrt(2)) < 1e-15
    assert abs(e.sigma_hat - 0.70711) < 1e-5
    assert abs(e.xi_hat - 0.4) < 1e-15


def test_effective_empty():
    e = effective_from_mask(0.5, [False, False], [0.2, 0.6], [1.0, 1.0])
    assert (e.xi_hat, e.sigma_hat, e.active) == (0.0, 0.0, frozenset())


@given(sig=st.lists(st.floats(0.1, 10), min_size=2, max_size=5))
def test_adding_source_decreases_sigma_hat(sig):
    n = len(sig)
    vals = np.zeros(n)
    for k in range(1, n):
        a = effective_from_mask(0.5, [i < k for i in range(n)], vals, sig).sigma_hat
        b = effective_from_mask(0.5, [i <= k for i in range(n)], vals, sig).sigma_hat
        assert b < a


def test_effective_state_on_path_matches_arrays():
    p = _path([(0.3, 1, True)], init=(True, False))
    xi_hat, s_hat = p.effective_arrays()
    for k in (0, 5, 10, 15):
        e = effective_state(p, p.times[k])
        assert e.xi_hat == pytest.approx(xi_hat[k], rel=1e-15, abs=1e-300)
        assert e.sigma_hat == pytest.approx(s_hat[k], rel=1e-15)


def test_node_index_rejects_off_node():
    p = _path([], init=(True, True))
    with pytest.raises(DomainError):
        effective_state(p, 0.1234)


def test_residual_is_bridge_between_events():
    # (xi_hat - t X) / sigma_hat has bridge covariance when the state is fixed
    n, fs = 20000, PointFieldSpec.always_on(2)
    src = SourceSpec((1.0, 0.5))
    vals = []
    for p in range(n):
        path = simulate_info_path(PRIOR, src, fs, TimeGrid(10), 3, p)
        xh, sh = path.effective_arrays()
        vals.append((xh[[3, 6]] - path.times[[3, 6]] * path.x_true) / sh[[3, 6]])
    v = np.array(vals)
    for a, b, i, j in [(0.3, 0.3, 0, 0), (0.3, 0.6, 0, 1), (0.6, 0.6, 1, 1)]:
        prod = v[:, i] * v[:, j]
        assert abs(prod.mean() - (min(a, b) - a * b)) <= 3 * prod.std(ddof=1) / np.sqrt(n)


# --- complementary summary --------------------------------------------------

def test_complementary_all_active_is_one():
    p = _path([], init=(True, True))
    c = complementary_summary(p, p.times[5])
    assert c.records == ()
    assert np.all(c.evaluate(np.linspace(-3, 3, 7)) == 1.0)


def test_complementary_never_active_unit_factor():
    c = ComplementarySummary(((0, 0.0, 0.0, 1.3),))
    assert np.all(c.evaluate(np.linspace(-5, 5, 11)) == 1.0)


def test_complementary_direct_evaluation():
    c = ComplementarySummary(((0, 0.2, 0.5, 1.0),))
    assert abs(c.evaluate(1.0) - np.exp(-0.1)) < 1e-15
    assert abs(c.evaluate(1.0) - 0.90484) < 1e-5


def test_complementary_rejects_terminal():
    p = _path([], init=(True, False))
    with pytest.raises(DomainError):
        complementary_summary(p, 1.0)


# --- projection mixing ------------------------------------------------------

def test_mix_identity():
    raw = np.array([0.3, -0.7])
    psi, alpha = mix_projection(raw, np.eye(2), 0.4, [1.5, 0.5])
    assert np.array_equal(psi, raw) and np.array_equal(alpha, [1.5, 0.5])


def test_mix_diagonal_matches_modulation():
    p = _path([(0.3, 1, True), (0.6, 1, False)], init=(True, False))
    for k in range(p.times.size):
        P = np.diag(p.active[k].astype(float))
        psi, _ = mix_projection(p.xi[k], P, p.times[k], p.sigmas)
        assert np.array_equal(psi, p.modulated[k])


def test_mix_averaging_coefficient():
    P = np.full((2, 2), 0.5)
    _, alpha = mix_projection([0.0, 0.0], P, 0.5, [1.0, 1.0])
    assert np.allclose(alpha, 1 / np.sqrt(2), rtol=0, atol=1e-15)


def test_mix_averaging_sample_variance():
    n, t, x = 20000, 0.5, 0.8
    rng = substream(0, 0, Stream.CHECK)
    beta = rng.standard_normal((n, 2)) * np.sqrt(t * (1 - t))
    raw = t * x + beta
    P = np.full((2, 2), 0.5)
    psi = np.array([mix_projection(r, P, t, [1.0, 1.0])[0][0] for r in raw])
    resid = psi - t * x
    target = (1 / np.sqrt(2)) ** 2 * t * (1 - t)
    sq = resid ** 2
    assert abs(sq.mean() - target) <= 3 * sq.std(ddof=1) / np.sqrt(sq.size)


def test_mix_validation_errors():
    with pytest.raises(ValidationError):
        mix_projection([0, 0], [[1, 1], [0, 1]], 0.5, [1, 1])
    with pytest.raises(ValidationError):
        mix_projection([0, 0], [[2, 0], [0, 1]], 0.5, [1, 1])
    with pytest.raises(DegenerateScalingError):
        mix_projection([0, 0], [[0.5, -0.5], [-0.5, 0.5]], 0.5, [1, 1])
