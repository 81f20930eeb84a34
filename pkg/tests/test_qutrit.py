import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from localcontent.qutrit import (
    GammaParam,
    QutritBasis,
    QutritBound,
    QutritOutcomePair,
    argmax_overlap,
    local_weight_objective,
    qutrit_amplitudes,
    qutrit_lower_bound,
    qutrit_prob,
)

from .oracles import dft3, random_unitary

PAIRS = [(i, j) for i in range(3) for j in range(3)]
params8 = st.lists(st.floats(-10, 10), min_size=8, max_size=8).map(np.array)
gammas = st.floats(0, 20)


def kron_prob(gamma, ua, ub, i, j):
    amp = qutrit_amplitudes(gamma)
    psi = sum(amp[k] * np.kron(np.eye(3)[k], np.eye(3)[k]) for k in range(3))
    return abs(np.kron(ua[i], ub[j]) @ psi) ** 2


def balanced_witness(gamma):
    """Bases whose chosen-outcome probability is (gamma - 2)^2 / (9 (2 + gamma^2))."""
    return dft3() @ np.diag([-1, -1, 1]), dft3()


def test_gamma_param():
    assert GammaParam(2).norm == pytest.approx(1 / math.sqrt(6))
    for bad in (-0.1, float("inf"), float("nan")):
        with pytest.raises(ValueError):
            GammaParam(bad)


def test_amplitudes():
    np.testing.assert_allclose(qutrit_amplitudes(0), [1 / math.sqrt(2), 1 / math.sqrt(2), 0])
    np.testing.assert_allclose(qutrit_amplitudes(1), np.ones(3) / math.sqrt(3))
    np.testing.assert_allclose(qutrit_amplitudes(2) ** 2, [1 / 6, 1 / 6, 2 / 3])


@given(gammas)
def test_amplitudes_normalized(g):
    assert abs(np.sum(qutrit_amplitudes(g) ** 2) - 1) <= 1e-14


@given(params8)
@settings(max_examples=200)
def test_basis_unitary(p):
    u = QutritBasis(p).unitary
    assert np.max(np.abs(u @ u.conj().T - np.eye(3))) <= 1e-12


def test_basis_shape_checked():
    with pytest.raises(ValueError):
        QutritBasis(np.zeros(7))
    np.testing.assert_array_equal(QutritBasis.identity().unitary, np.eye(3))


def test_outcome_pair_checked():
    with pytest.raises(ValueError):
        QutritOutcomePair(3, 0)


def test_prob_examples():
    I = QutritBasis.identity()
    assert qutrit_prob(2, I, I, (2, 2)) == pytest.approx(2 / 3, abs=1e-15)
    for g in (0.0, 0.7, 4.0):
        assert qutrit_prob(g, I, I, QutritOutcomePair(0, 1)) == 0.0
    rng = np.random.default_rng(3)
    ua, ub = random_unitary(rng), random_unitary(rng)
    total = sum(qutrit_prob(0.0, ua, ub, ij) for ij in PAIRS)
    assert total == pytest.approx(1.0, abs=1e-12)


@given(gammas, params8, params8)
@settings(max_examples=200)
def test_prob_matches_kron_and_normalizes(g, pa, pb):
    ua, ub = QutritBasis(pa).unitary, QutritBasis(pb).unitary
    probs = [qutrit_prob(g, ua, ub, ij) for ij in PAIRS]
    assert abs(sum(probs) - 1) <= 1e-12
    for (i, j), p in zip(PAIRS, probs):
        assert p == pytest.approx(kron_prob(g, ua, ub, i, j), abs=1e-13)


@given(gammas, params8, params8, st.integers(0, 2), st.floats(0, 2 * math.pi), st.booleans())
@settings(max_examples=200)
def test_row_phase_gauge(g, pa, pb, row, phase, alice):
    ua, ub = QutritBasis(pa).unitary, QutritBasis(pb).unitary
    before = [qutrit_prob(g, ua, ub, ij) for ij in PAIRS]
    m = (ua if alice else ub).copy()
    m[row] *= np.exp(1j * phase)
    ua2, ub2 = (m, ub) if alice else (ua, m)
    after = [qutrit_prob(g, ua2, ub2, ij) for ij in PAIRS]
    assert np.max(np.abs(np.subtract(before, after))) <= 1e-14


def test_argmax_examples():
    assert argmax_overlap(QutritBasis.identity()) == 2
    assert argmax_overlap(np.eye(3)[[2, 1, 0]]) == 0
    assert argmax_overlap(dft3()) == 0


@given(params8)
def test_argmax_pure(p):
    b = QutritBasis(p)
    i = argmax_overlap(b)
    assert i == argmax_overlap(b)
    col = np.abs(b.unitary[:, 2]) ** 2
    assert col[i] >= col.max() - 1e-12
    assert all(col[k] < col.max() - 1e-12 for k in range(i))


def test_objective_examples():
    I = QutritBasis.identity()
    assert local_weight_objective(2, I, I) == pytest.approx(2 / 3, abs=1e-15)
    assert local_weight_objective(0, I, I) == 0.0
    F = dft3()
    assert local_weight_objective(1e3, F, F) == pytest.approx(1 / 9, abs=1e-3)


@given(st.floats(0, 10))
def test_balanced_witness_value(g):
    ua, ub = balanced_witness(g)
    want = (g - 2) ** 2 / (9 * (2 + g * g))
    assert local_weight_objective(g, ua, ub) == pytest.approx(want, abs=1e-14)


def test_objective_continuous_away_from_ties():
    # smooth path in parameter space; argmax stays at index 2 throughout
    p0 = np.array([0.1, 0.2, 0.1, 0.3, 0.2, 0.1, 0.0, 0.4] * 2)
    p1 = p0 + 0.3
    ts = np.linspace(0, 1, 2001)
    vals = []
    for t in ts:
        p = (1 - t) * p0 + t * p1
        ua, ub = QutritBasis(p[:8]), QutritBasis(p[8:])
        assert argmax_overlap(ua) == 2 and argmax_overlap(ub) == 2
        vals.append(local_weight_objective(1.5, ua, ub))
    jumps = np.abs(np.diff(vals))
    slope = np.max(np.abs(np.gradient(vals, ts)))
    assert np.max(jumps) <= 2 * slope * (ts[1] - ts[0])


@pytest.mark.parametrize("g", [0.0, 1.0])
def test_lower_bound_vanishes_for_maximally_entangled(g):
    b = qutrit_lower_bound(g)
    assert isinstance(b, QutritBound)
    assert b.value <= 1e-4 and b.starts_used == 50


def test_lower_bound_positive_beyond_threshold():
    b = qutrit_lower_bound(3.0)
    assert b.value > 1e-3
    ua, ub = balanced_witness(3.0)
    assert b.value <= local_weight_objective(3.0, ua, ub) + 1e-9
    assert b.value == pytest.approx(1 / 99, abs=1e-5)


def test_lower_bound_below_envelope():
    b = qutrit_lower_bound(5.0)
    assert 0 < b.value <= 25 / 27 + 1e-9
    d = b.to_dict()
    assert len(d["basis_params_alice"]) == 8 and d["lower_bound"] == b.value
