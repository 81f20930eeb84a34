import math

import numba
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from localcontent.chained import _deficit_obj, equal_spacing_angles
from localcontent.optimize import (
    OptConfig,
    OptOutcome,
    derive_seed,
    fibonacci_sphere_grid,
    multistart,
    nelder_mead,
)
from localcontent.qutrit import _objective, qutrit_amplitudes


def bowl(x):
    return (x[0] - 1.0) ** 2 + x[1] ** 2


@numba.njit
def two_wells(x, p):
    # shallow well at x = -1, deeper one at x = 2
    return min((x[0] + 1.0) ** 2 + 0.5, (x[0] - 2.0) ** 2)


def test_config_validation():
    with pytest.raises(ValueError):
        OptConfig(max_evals=99)
    with pytest.raises(ValueError):
        OptConfig(simplex_tolerance=0.0)
    with pytest.raises(ValueError):
        OptConfig(restarts=0)


def test_quadratic_bowl():
    out = nelder_mead(bowl, [0.0, 0.0], OptConfig())
    assert out.converged
    assert out.best_value <= 1e-10
    np.testing.assert_allclose(out.best_point, [1.0, 0.0], atol=1e-5)


def test_kinked_one_dimensional():
    out = nelder_mead(lambda x: abs(x[0]), [1.0], OptConfig())
    assert out.best_value <= 1e-6


def test_eval_budget_flags_nonconvergence():
    cfg = OptConfig(max_evals=100, simplex_tolerance=1e-15)
    out = nelder_mead(lambda x: float(np.sum(np.cos(3 * x) + x * x)), np.ones(6), cfg)
    assert not out.converged
    assert out.evals_used <= cfg.max_evals + 6


def test_compiled_and_python_paths_agree():
    p = np.zeros(0)
    py = nelder_mead(lambda x, _p: two_wells.py_func(x, _p), [-1.2], OptConfig(), p)
    jit = nelder_mead(two_wells, [-1.2], OptConfig(), p)
    assert py == jit


def test_compiled_objective_needs_params():
    with pytest.raises(TypeError):
        nelder_mead(two_wells, [0.0], OptConfig())


def test_more_restarts_never_worse():
    sampler = lambda seed: np.random.default_rng(seed).uniform(-3, 3, 1)  # noqa: E731
    p = np.zeros(0)
    one = multistart(two_wells, sampler, OptConfig(restarts=1, seed=3), p)
    five = multistart(two_wells, sampler, OptConfig(restarts=5, seed=3), p)
    assert five.best_value <= one.best_value


def test_multistart_deterministic():
    sampler = lambda seed: np.random.default_rng(seed).uniform(-3, 3, 1)  # noqa: E731
    cfg = OptConfig(restarts=4, seed=11)
    a = multistart(two_wells, sampler, cfg, np.zeros(0))
    b = multistart(two_wells, sampler, cfg, np.zeros(0))
    assert a == b
    assert a.evals_used <= cfg.max_evals * cfg.restarts


def test_multistart_chained_equal_spacing():
    N = 4
    p = np.array([0.0, 1.0, float(N), 0.0])
    cfg = OptConfig(restarts=1, simplex_tolerance=1e-13)
    out = multistart(_deficit_obj, lambda _s: equal_spacing_angles(N), cfg, p)
    assert 2 * N - 2 * out.best_value == pytest.approx(8 * math.cos(math.pi / 8), abs=1e-9)


def test_multistart_qutrit_identity_start():
    out = multistart(_objective, lambda _s: np.zeros(16), OptConfig(restarts=1), qutrit_amplitudes(0.0))
    assert out.best_value == pytest.approx(0.0, abs=1e-15)


def test_derive_seed_is_xor():
    assert derive_seed(0, 5) == 5
    assert derive_seed(12, 5) == 12 ^ 5
    assert derive_seed(2**64 - 1, 1) == 2**64 - 2


def test_fibonacci_shape_and_probes():
    g = fibonacci_sphere_grid(1)
    assert g.shape == (7, 3)
    np.testing.assert_array_equal(g[1:], [[0, 0, 1], [0, 0, -1], [1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]])
    with pytest.raises(ValueError):
        fibonacci_sphere_grid(0)


@given(st.integers(1, 3000))
@settings(max_examples=30, deadline=None)
def test_fibonacci_unit_norm(n):
    g = fibonacci_sphere_grid(n)
    assert g.shape == (n + 6, 3)
    assert np.max(np.abs(np.linalg.norm(g, axis=1) - 1.0)) <= 1e-14
    np.testing.assert_array_equal(g, fibonacci_sphere_grid(n))


def test_fibonacci_nearest_neighbour_gap():
    # exhaustive pairwise check
    pts = fibonacci_sphere_grid(10_000)[:10_000]
    worst = 0.0
    for i in range(0, len(pts), 1000):
        dots = pts[i:i + 1000] @ pts.T
        dots[np.arange(dots.shape[0]), np.arange(i, i + dots.shape[0])] = -2.0
        worst = max(worst, float(np.arccos(np.clip(dots.max(axis=1), -1, 1)).max()))
    assert worst <= 0.05


def test_outcome_equality_compares_arrays():
    a = OptOutcome(1.0, np.array([1.0, 2.0]), 3, True)
    assert a == OptOutcome(1.0, np.array([1.0, 2.0]), 3, True)
    assert a != OptOutcome(1.0, np.array([1.0, 2.5]), 3, True)
