import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from localcontent.chained import (
    ChainedConfig,
    ChainedResult,
    bkp_upper_bound,
    chained_deficit,
    chained_value,
    equal_spacing_angles,
    optimize_chained,
    symmetric_angles,
)
from localcontent.optimize import OptConfig

QUICK = OptConfig(max_evals=200_000, simplex_tolerance=1e-13, restarts=4, initial_step=0.1)


def near_pole_fraction(alphas, tol=0.2):
    d0 = np.abs(np.angle(np.exp(1j * alphas)))
    dpi = np.abs(np.angle(np.exp(1j * (alphas - np.pi))))
    return float(np.mean(np.minimum(d0, dpi) <= tol))


def test_equal_spacing_examples():
    np.testing.assert_allclose(equal_spacing_angles(2), [0, math.pi / 2])
    np.testing.assert_allclose(equal_spacing_angles(4), [0, math.pi / 4, math.pi / 2, 3 * math.pi / 4])
    with pytest.raises(ValueError):
        equal_spacing_angles(1)


@pytest.mark.parametrize("N", range(2, 101))
def test_equal_spacing_reflects_about_shifted_axis(N):
    # (k-1) pi / N obeys alpha_{N-k+1} + alpha_k = const, i.e. the reflection
    # up to a global rotation by pi/(2N); the rotated set obeys it exactly
    al = equal_spacing_angles(N)
    np.testing.assert_allclose(al[::-1] + al, (N - 1) * math.pi / N, atol=1e-12)
    shifted = al + math.pi / (2 * N)
    ChainedConfig(N, math.pi / 4, shifted, symmetry=True)
    with pytest.raises(ValueError):
        ChainedConfig(N, math.pi / 4, al, symmetry=True)


@pytest.mark.parametrize("N", [2, 3, 7, 10])
def test_symmetric_angles(N):
    free = np.linspace(0.1, 0.5, N // 2)
    al = symmetric_angles(free, N)
    np.testing.assert_allclose(al[::-1], np.pi - al, atol=1e-15)
    if N % 2:
        assert al[N // 2] == np.pi / 2


def test_config_validation():
    with pytest.raises(ValueError):
        ChainedConfig(1, 0.2, [0.0])
    with pytest.raises(ValueError):
        ChainedConfig(3, 0.2, [0.0, 1.0])


@pytest.mark.parametrize("N", [2, 4, 10, 30, 40])
def test_value_at_equal_spacing_maximally_entangled(N):
    cfg = ChainedConfig(N, math.pi / 4, equal_spacing_angles(N))
    assert chained_value(cfg) == pytest.approx(2 * N * math.cos(math.pi / (2 * N)), abs=1e-12)


def test_product_state_value():
    N = 6
    al = np.random.default_rng(0).uniform(0, 2 * np.pi, N)
    c = np.cos(al)
    direct = np.sum(np.abs(c[:-1] + c[1:])) + abs(c[-1] - c[0])
    assert chained_value(ChainedConfig(N, 0.0, al)) == pytest.approx(direct, abs=1e-13)
    assert chained_value(ChainedConfig(N, 0.0, np.zeros(N))) == pytest.approx(2 * (N - 1))


@given(st.integers(2, 40), st.floats(0, math.pi / 4), st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_deficit_matches_direct_value(N, t, seed):
    al = np.random.default_rng(seed).uniform(-2 * np.pi, 2 * np.pi, N)
    cfg = ChainedConfig(N, t, al)
    v = chained_value(cfg)
    assert v <= 2 * N + 1e-12
    assert chained_deficit(cfg) == pytest.approx(N - v / 2, abs=1e-12)


def test_bkp_examples():
    # CHSH on the singlet
    assert bkp_upper_bound(2 * math.sqrt(2), 2.0, 4.0) == pytest.approx(0.585786437626905, abs=1e-14)
    assert bkp_upper_bound(4.0, 2.0, 4.0) == 0.0
    assert bkp_upper_bound(2.0, 2.0, 4.0) == 1.0
    assert bkp_upper_bound(1.0, 2.0, 4.0) == 1.0
    with pytest.raises(ValueError):
        bkp_upper_bound(1.0, 2.0, 2.0)
    with pytest.raises(ValueError):
        bkp_upper_bound(4.1, 2.0, 4.0)


def test_optimize_chained_n2_is_tsirelson():
    r = optimize_chained(2, math.pi / 4, config=QUICK)
    assert r.value == pytest.approx(2 * math.sqrt(2), abs=1e-9)


def test_optimize_chained_n30_endpoint():
    r = optimize_chained(30, math.pi / 4)
    assert r.value == pytest.approx(59.9177720852744, abs=1e-6)
    assert r.upper_bound == pytest.approx(0.0411139573627838, abs=1e-6)
    assert math.isnan(r.delta)
    assert r.converged and isinstance(r, ChainedResult)
    # equally spaced up to the global-rotation gauge
    steps = np.diff(np.sort(np.angle(np.exp(1j * (r.alphas - r.alphas[0])))))
    assert np.max(np.abs(steps - math.pi / 30)) <= 1e-3


def test_product_state_bound_is_one():
    r = optimize_chained(10, 0.0, config=QUICK)
    assert r.upper_bound == pytest.approx(1.0, abs=1e-6)
    assert r.value == pytest.approx(18.0, abs=1e-6)


def test_upper_bound_dominates_lower_bound_and_tracks_cos():
    for t in (0.1, 0.4, 0.7):
        r = optimize_chained(40, t)
        assert r.upper_bound >= 1 - math.sin(2 * t) - 1e-6
        assert r.delta == pytest.approx(r.upper_bound / math.cos(2 * t) - 1)


def test_monotone_in_N():
    for t in (0.2, 0.5):
        ub4 = optimize_chained(4, t).upper_bound
        ub10 = optimize_chained(10, t).upper_bound
        ub40 = optimize_chained(40, t).upper_bound
        assert ub40 <= ub10 + 1e-9 and ub10 <= ub4 + 1e-9


@pytest.mark.parametrize("t", [0.15, 0.5, math.pi / 4])
def test_symmetry_ansatz_loses_nothing(t):
    on = optimize_chained(8, t, symmetry=True)
    off = optimize_chained(8, t, symmetry=False)
    assert on.value == pytest.approx(off.value, abs=1e-6)


def test_settings_concentrate_for_weak_entanglement():
    weak = optimize_chained(30, math.pi / 20)
    maxent = optimize_chained(30, math.pi / 4)
    assert near_pole_fraction(weak.alphas) >= near_pole_fraction(maxent.alphas)
    assert near_pole_fraction(weak.alphas) >= 0.8


def test_deterministic_and_serializable():
    a = optimize_chained(6, 0.3, config=QUICK)
    b = optimize_chained(6, 0.3, config=QUICK)
    assert a.value == b.value and np.array_equal(a.alphas, b.alphas)
    d = optimize_chained(6, math.pi / 4, config=QUICK).to_dict()
    assert d["delta"] is None and len(d["alphas"]) == 6
    assert all(0 <= x < 2 * math.pi for x in d["alphas"])
