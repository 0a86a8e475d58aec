import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netsindy.dynamics import (ConsensusParams, DivergenceError, SisParams, Trajectory,
                               consensus_rhs, integrate_rk4, sample_curing_rates,
                               sample_initial_sis, simulate, sis_rhs, sis_stable_dt)
from netsindy.graph import Graph, SbmSpec, generate_path, generate_sbm, laplacian


def two_node(a12=0.3, a21=0.3):
    return Graph(np.array([[0.0, a12], [a21, 0.0]]), directed=True)


def test_sis_rhs_fixed_points():
    g = generate_sbm(SbmSpec([4, 4], 0.6, 0.2, edge_weight=0.3, seed=2))
    delta = np.linspace(0.05, 0.2, 8)
    p = SisParams(delta, g)
    np.testing.assert_array_equal(sis_rhs(p, np.zeros(8)), np.zeros(8))
    np.testing.assert_allclose(sis_rhs(p, np.ones(8)), -delta)


def test_sis_rhs_hand_evaluation():
    p = SisParams(np.array([0.1, 0.2]), two_node())
    out = sis_rhs(p, np.array([0.5, 0.4]))
    np.testing.assert_allclose(out, [-0.05 + 0.3 * 0.5 * 0.4, -0.08 + 0.3 * 0.6 * 0.5])
    np.testing.assert_allclose(out, [0.01, 0.01], atol=1e-15)


def test_sis_rhs_link_orientation():
    # a_ij is the link from j to i: only node 0 is exposed through a[0, 1]
    p = SisParams(np.array([1.0, 1.0]), two_node(a12=0.5, a21=0.0))
    out = sis_rhs(p, np.array([0.0, 1.0]))
    np.testing.assert_allclose(out, [0.5, -1.0])


def test_sis_rhs_dimension_check():
    p = SisParams(np.array([0.1, 0.2]), two_node())
    with pytest.raises(ValueError):
        sis_rhs(p, np.zeros(3))


def test_sis_params_validation():
    with pytest.raises(ValueError):
        SisParams(np.array([0.1, 0.0]), two_node())
    with pytest.raises(ValueError):
        SisParams(np.array([0.1]), two_node())


def test_consensus_rhs_examples():
    p = ConsensusParams(generate_path(2))
    np.testing.assert_array_equal(consensus_rhs(p, np.array([1.0, 0.0])), [-1.0, 1.0])
    p4 = ConsensusParams(generate_path(4))
    np.testing.assert_allclose(consensus_rhs(p4, np.full(4, 3.7)), 0.0, atol=1e-15)
    lam, vecs = np.linalg.eigh(laplacian(generate_path(4)))
    u2 = vecs[:, 1]
    np.testing.assert_allclose(consensus_rhs(p4, u2), -lam[1] * u2, atol=1e-12)


def test_consensus_rejects_directed():
    with pytest.raises(ValueError):
        ConsensusParams(two_node(0.3, 0.0))


@given(st.lists(st.floats(-100, 100), min_size=5, max_size=5))
@settings(max_examples=50, deadline=None)
def test_consensus_conserves_sum(x):
    g = generate_sbm(SbmSpec([5], 0.6, 0.0, directed=False, seed=4))
    x = np.array(x)
    total = consensus_rhs(ConsensusParams(g), x).sum()
    assert abs(total) <= 1e-10 * max(np.linalg.norm(x), 1.0)


def test_rk4_zero_rhs_is_constant():
    traj = integrate_rk4(lambda x: np.zeros_like(x), np.array([1.0, -2.0]), 0.1, 10)
    np.testing.assert_array_equal(traj.states, np.tile([[1.0], [-2.0]], 11))


def test_rk4_exponential_decay():
    traj = integrate_rk4(lambda x: -x, np.array([1.0]), 0.01, 100)
    assert abs(traj.states[0, -1] - math.exp(-1.0)) <= 1e-9
    assert abs(traj.times[-1] - 1.0) < 1e-12


def test_rk4_fourth_order():
    def err(dt):
        steps = int(round(1.0 / dt))
        return abs(integrate_rk4(lambda x: -x, np.array([1.0]), dt, steps).states[0, -1]
                   - math.exp(-1.0))
    ratio = err(0.1) / err(0.05)
    assert 14.0 <= ratio <= 18.0


def test_rk4_divergence_keeps_finite_prefix():
    with pytest.raises(DivergenceError) as info:
        integrate_rk4(lambda x: x ** 2, np.array([1.0]), 0.5, 50)
    err = info.value
    assert err.step >= 1
    assert np.all(np.isfinite(err.partial.states[:, :err.step]))


def test_consensus_long_horizon_reaches_average():
    g = generate_path(5)
    x0 = np.array([1.0, 0.0, 3.0, -2.0, 0.5])
    traj = simulate(ConsensusParams(g), x0, 200.0, 401, substeps=10)
    np.testing.assert_allclose(traj.states[:, -1], x0.mean(), atol=1e-6)


def test_samplers_range_and_determinism():
    for sampler in (sample_initial_sis, sample_curing_rates):
        v = sampler(1000, 3)
        assert np.all(v > 0) and np.all(v <= 0.2)
        np.testing.assert_array_equal(v, sampler(1000, 3))
    assert not np.array_equal(sample_initial_sis(10, 3), sample_curing_rates(10, 3))


def test_sampler_mean():
    assert 0.095 <= sample_initial_sis(10_000, 0).mean() <= 0.105
    assert 0.095 <= sample_curing_rates(10_000, 0).mean() <= 0.105


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_sis_invariant_region(seed):
    g = generate_sbm(SbmSpec([6, 6], 0.5, 0.1, edge_weight=0.4, seed=seed))
    p = SisParams(sample_curing_rates(12, seed), g)
    x0 = np.random.default_rng(seed).random(12)
    steps = 200
    dt = sis_stable_dt(p)
    traj = integrate_rk4(lambda x: sis_rhs(p, x), x0, dt, steps)
    assert traj.states.min() >= -1e-9 and traj.states.max() <= 1 + 1e-9


def test_simulate_spacing_and_substeps():
    g = generate_path(3)
    p = SisParams(np.full(3, 0.1), g)
    x0 = np.array([0.1, 0.0, 0.2])
    coarse = simulate(p, x0, 1.0, 21, substeps=4)
    assert coarse.num_snapshots == 21
    assert coarse.dt == pytest.approx(0.05)
    fine = integrate_rk4(lambda x: sis_rhs(p, x), x0, 0.0125, 80)
    np.testing.assert_array_equal(coarse.states, fine.states[:, ::4])


def test_simulate_warns_above_step_bound():
    p = SisParams(np.full(2, 0.1), two_node(5.0, 5.0))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        simulate(p, np.array([0.1, 0.1]), 10.0, 11)
    assert any("advisory" in str(w.message) for w in caught)


def test_trajectory_csv_round_trip():
    rng = np.random.default_rng(0)
    traj = Trajectory(rng.random((3, 5)), 0.1, 0.0)
    text = traj.to_csv()
    assert text.splitlines()[0] == "t,node_0,node_1,node_2"
    back = Trajectory.from_csv(text)
    np.testing.assert_array_equal(back.states, traj.states)
    assert back.dt == pytest.approx(traj.dt, rel=1e-12)


def test_trajectory_window_times():
    traj = Trajectory(np.zeros((2, 10)), 0.5)
    w = traj.window(4, 10)
    assert w.num_snapshots == 6
    assert w.times[0] == pytest.approx(2.0)
