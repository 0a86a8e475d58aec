import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netsindy.sindy import (LibrarySpec, RankDeficiencyError, SindyModel, build_library,
                            central_difference, model_rhs, soft_threshold, solve, solve_sr3,
                            solve_stlsq)

ORDER1 = LibrarySpec(include_constant=False, poly_orders=(1,))


def diag_system(k=400, seed=0):
    c = np.random.default_rng(seed).uniform(-1, 1, (2, k))
    d = np.diag([-1.0, -2.0])
    return c, d @ c, d


def test_constant_row_has_zero_derivative():
    deriv = central_difference(np.full((1, 10), 3.0), 0.1)
    np.testing.assert_array_equal(deriv.cdot, 0.0)
    assert list(deriv.valid_range) == list(range(1, 9))


def test_central_difference_exact_on_linear():
    t = 0.1 * np.arange(20)
    deriv = central_difference(t[None, :], 0.1)
    np.testing.assert_allclose(deriv.cdot, 1.0, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(deriv.c_aligned, t[None, 1:-1])


def test_central_difference_second_order():
    def max_err(dt):
        t = dt * np.arange(int(round(2.0 / dt)) + 1)
        deriv = central_difference(np.exp(-t)[None, :], dt)
        return np.max(np.abs(deriv.cdot[0] + np.exp(-t[1:-1])))
    e1, e2 = max_err(1e-2), max_err(5e-3)
    assert e1 <= 2e-5
    assert 3.5 <= e1 / e2 <= 4.5


def test_central_difference_needs_three_snapshots():
    with pytest.raises(ValueError):
        central_difference(np.zeros((2, 2)), 0.1)


def test_library_constant_and_linear():
    theta = build_library(np.array([2.0]), LibrarySpec(True, (1,)))
    np.testing.assert_array_equal(theta, [1.0, 2.0])


def test_library_second_order_ordering():
    a, b = 3.0, -5.0
    theta = build_library(np.array([a, b]), LibrarySpec(False, (2,)))
    np.testing.assert_array_equal(theta, [a * a, a * b, b * a, b * b])


def test_library_size_with_trig():
    spec = LibrarySpec(True, (1, 2), (("sin", 1.0),))
    assert spec.size(2) == 1 + 2 + 4 + 2 == 9
    theta = build_library(np.array([[0.3], [0.7]]), spec)
    assert theta.shape == (9, 1)
    np.testing.assert_allclose(theta[-2:, 0], np.sin([0.3, 0.7]))
    assert len(spec.names(2)) == 9


@given(st.integers(1, 4), st.sets(st.integers(1, 3), min_size=1), st.booleans())
@settings(max_examples=40, deadline=None)
def test_library_shape_matches_spec(m, orders, const):
    spec = LibrarySpec(const, tuple(orders))
    c = np.random.default_rng(m).standard_normal((m, 7))
    assert build_library(c, spec).shape == (spec.size(m), 7)
    assert len(spec.names(m)) == spec.size(m)


def test_library_spec_dict_round_trip():
    spec = LibrarySpec(False, (1, 3), (("cos", 2.0),))
    assert LibrarySpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


@pytest.mark.parametrize("solver", ["stlsq", "sr3"])
def test_zero_derivative_gives_zero_model(solver):
    c = np.random.default_rng(1).standard_normal((2, 50))
    theta = build_library(c, ORDER1)
    fn = solve_stlsq if solver == "stlsq" else solve_sr3
    model = fn(theta, np.zeros((2, 50)), spec=ORDER1)
    np.testing.assert_array_equal(model.xi, 0.0)


def test_stlsq_recovers_diagonal_system():
    c, cdot, d = diag_system()
    model = solve_stlsq(build_library(c, ORDER1), cdot, threshold=0.1, spec=ORDER1)
    np.testing.assert_allclose(model.xi, d, atol=1e-8)
    assert model.xi[0, 1] == 0.0 and model.xi[1, 0] == 0.0


def test_sr3_agrees_with_stlsq_on_diagonal_system():
    c, cdot, d = diag_system()
    theta = build_library(c, ORDER1)
    ref = solve_stlsq(theta, cdot, spec=ORDER1)
    model = solve_sr3(theta, cdot, unbias=True, spec=ORDER1)
    assert np.array_equal(model.xi != 0, ref.xi != 0)
    np.testing.assert_allclose(model.xi, ref.xi, atol=1e-4)


def test_sr3_without_debiasing_shrinks_but_keeps_support():
    c, cdot, d = diag_system()
    theta = build_library(c, ORDER1)
    model = solve_sr3(theta, cdot, spec=ORDER1)
    assert np.array_equal(model.xi != 0, d != 0)
    assert np.all(np.abs(np.diag(model.xi)) < np.abs(np.diag(d)))


def test_sr3_gamma_zero_is_least_squares():
    rng = np.random.default_rng(2)
    theta = rng.standard_normal((4, 80))
    cdot = rng.standard_normal((3, 80))
    model = solve_sr3(theta, cdot, gamma=0.0, normalize=False)
    lsq = np.linalg.lstsq(theta.T, cdot.T, rcond=None)[0].T
    np.testing.assert_allclose(model.xi, lsq, atol=1e-6)


def test_sr3_support_shrinks_along_gamma_grid():
    rng = np.random.default_rng(3)
    theta = rng.standard_normal((8, 200))
    truth = np.zeros((2, 8))
    truth[0, [0, 3]] = [1.0, -0.5]
    truth[1, [2, 5, 7]] = [0.8, 0.2, -1.2]
    cdot = truth @ theta + 0.05 * rng.standard_normal((2, 200))
    counts = [solve_sr3(theta, cdot, gamma=g).nnz for g in np.geomspace(1e-3, 10.0, 10)]
    assert all(b <= a for a, b in zip(counts, counts[1:]))
    assert counts[-1] < counts[0]


def test_soft_threshold_grid():
    z = np.linspace(-3, 3, 601)
    for t in (0.0, 0.25, 1.0, 2.5):
        expected = np.array([np.sign(v) * max(abs(v) - t, 0.0) for v in z])
        np.testing.assert_array_equal(soft_threshold(z, t), expected)


def exact_recovery_case(seed=3, k=500):
    c = np.random.default_rng(seed).uniform(-1, 1, (3, k))
    spec = LibrarySpec(True, (1, 2))
    xi = np.zeros((3, 13))
    xi[0, [1, 2]] = [-1.0, 0.5]
    xi[1, [0, 4, 8]] = [0.3, -0.8, 0.6]
    # c1*c3 and c3*c1 are the same function; the coefficient is split evenly
    xi[2, [6, 10]] = [0.4, 0.4]
    theta = build_library(c, spec)
    return theta, xi @ theta, xi, spec


@pytest.mark.parametrize("solver", ["stlsq", "sr3"])
def test_exact_recovery(solver):
    theta, cdot, xi, spec = exact_recovery_case()
    if solver == "stlsq":
        model = solve_stlsq(theta, cdot, spec=spec)
    else:
        model = solve_sr3(theta, cdot, unbias=True, spec=spec)
    assert np.array_equal(model.xi != 0, xi != 0)
    np.testing.assert_allclose(model.xi, xi, atol=1e-6)


@pytest.mark.parametrize("solver", ["stlsq", "sr3"])
def test_solvers_are_deterministic(solver):
    theta, cdot, _, spec = exact_recovery_case(seed=9)
    cdot = cdot + 0.01 * np.random.default_rng(0).standard_normal(cdot.shape)
    fn = solve_stlsq if solver == "stlsq" else solve_sr3
    assert np.array_equal(fn(theta, cdot, spec=spec).xi, fn(theta, cdot, spec=spec).xi)


@given(st.integers(0, 10_000), st.floats(0.01, 2.0))
@settings(max_examples=40, deadline=None)
def test_stlsq_residual_bracketed(seed, threshold):
    rng = np.random.default_rng(seed)
    theta = rng.standard_normal((5, 60))
    cdot = rng.standard_normal((2, 60))
    model = solve_stlsq(theta, cdot, threshold=threshold)
    lsq = np.linalg.lstsq(theta.T, cdot.T, rcond=None)[0].T
    for p in range(2):
        r = np.linalg.norm(cdot[p] - model.xi[p] @ theta)
        assert r >= np.linalg.norm(cdot[p] - lsq[p] @ theta) - 1e-9
        assert r <= np.linalg.norm(cdot[p]) + 1e-9


def test_stlsq_rank_deficiency_without_ridge():
    theta = np.vstack([np.ones(30), np.linspace(0, 1, 30), np.linspace(0, 2, 30) + 1.0])
    with pytest.raises(RankDeficiencyError):
        solve_stlsq(theta, np.ones((1, 30)), threshold=0.0)
    solve_stlsq(theta, np.ones((1, 30)), threshold=0.0, alpha=1e-6)


def test_wide_library_warns():
    rng = np.random.default_rng(0)
    with pytest.warns(RuntimeWarning):
        solve_sr3(rng.standard_normal((6, 5)), rng.standard_normal((1, 5)))


def test_model_rhs_examples():
    zero = SindyModel(np.zeros((1, 1)), ORDER1, "stlsq")
    assert model_rhs(zero, np.array([4.0])).tolist() == [0.0]
    decay = SindyModel(np.array([[-1.0]]), ORDER1, "stlsq")
    assert model_rhs(decay, np.array([3.0])).tolist() == [-3.0]


def test_model_rhs_columnwise_consistency():
    theta, cdot, _, spec = exact_recovery_case(k=60)
    c = np.random.default_rng(3).uniform(-1, 1, (3, 60))
    model = solve_stlsq(build_library(c, spec), cdot, spec=spec)
    batch = model.xi @ build_library(c, spec)
    cols = np.column_stack([model_rhs(model, c[:, j]) for j in range(60)])
    np.testing.assert_allclose(cols, batch, atol=1e-12)


def test_model_json_round_trip():
    theta, cdot, _, spec = exact_recovery_case()
    model = solve_sr3(theta, cdot, spec=spec)
    data = json.loads(model.to_json())
    assert set(data) >= {"library", "solver", "hyperparameters", "xi", "diagnostics"}
    assert len(data["xi"][0]) == 13
    back = SindyModel.from_json(model.to_json())
    np.testing.assert_array_equal(back.xi, model.xi)
    assert back.spec == spec


def test_solve_on_exponential_decay():
    dt = 1e-3
    t = dt * np.arange(3000)
    c = np.vstack([np.exp(-t), 0.5 * np.exp(-2 * t)])
    model = solve(c, dt, ORDER1, solver="stlsq", threshold=0.05, normalize=False)
    np.testing.assert_allclose(model.xi, np.diag([-1.0, -2.0]), atol=1e-5)
    assert model.xi[0, 1] == 0.0 and model.xi[1, 0] == 0.0
