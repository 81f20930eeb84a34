"""Lower bound on the local content of (|00> + |11> + g|22>) / sqrt(2 + g^2).

The local model is deterministic: each party outputs the basis element with
the largest overlap with |2>.  Because that model is 0/1-valued, the
remainder (P_Q - w P_L) / (1 - w) is a probability at every setting exactly
when w <= P_Q(i(A), j(B)).  The certified weight is therefore the minimum of
that probability over all pairs of measurement bases, searched numerically.

A measurement basis is parametrized by 8 reals: three complex Givens
rotations (angle, phase) in the (0,1), (0,2), (1,2) planes followed by two
relative column phases.  Row phases are omitted because no probability
depends on them.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .optimize import OptConfig, multistart

__all__ = [
    "DEFAULT_QUTRIT_CONFIG",
    "GammaParam",
    "QutritBasis",
    "QutritBound",
    "QutritOutcomePair",
    "argmax_overlap",
    "local_weight_objective",
    "qutrit_amplitudes",
    "qutrit_lower_bound",
    "qutrit_prob",
]

DEFAULT_QUTRIT_CONFIG = OptConfig(
    max_evals=60_000, simplex_tolerance=1e-8, restarts=50, seed=0, initial_step=0.3
)
# overlaps within this of the maximum count as tied; ties go to the lowest index
TIE_TOLERANCE = 1e-12
# (theta_2, theta_3) making column 2 of the basis matrix uniform in modulus
_BALANCED = (math.asin(1.0 / math.sqrt(3.0)), math.pi / 4)


@dataclass(frozen=True)
class GammaParam:
    gamma: float

    def __post_init__(self):
        g = float(self.gamma)
        if not (math.isfinite(g) and g >= 0.0):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma!r}")
        object.__setattr__(self, "gamma", g)

    @property
    def norm(self) -> float:
        return 1.0 / math.sqrt(2.0 + self.gamma ** 2)


def _as_gamma(gamma) -> GammaParam:
    return gamma if isinstance(gamma, GammaParam) else GammaParam(gamma)


@numba.njit(cache=True)
def _basis_matrix(x, off):
    t1, p1, t2, p2, t3, p3, x1, x2 = (
        x[off], x[off + 1], x[off + 2], x[off + 3],
        x[off + 4], x[off + 5], x[off + 6], x[off + 7],
    )
    c1, s1, e1 = math.cos(t1), math.sin(t1), cmath.exp(1j * p1)
    c2, s2, e2 = math.cos(t2), math.sin(t2), cmath.exp(1j * p2)
    c3, s3, e3 = math.cos(t3), math.sin(t3), cmath.exp(1j * p3)
    u = np.zeros((3, 3), dtype=np.complex128)
    # G12 . diag(1, e^{i x1}, e^{i x2})
    u[0, 0] = c1
    u[0, 1] = -s1 / e1 * cmath.exp(1j * x1)
    u[1, 0] = e1 * s1
    u[1, 1] = c1 * cmath.exp(1j * x1)
    u[2, 2] = cmath.exp(1j * x2)
    # G13 on rows 0, 2
    for k in range(3):
        r0, r2 = u[0, k], u[2, k]
        u[0, k] = c2 * r0 - s2 / e2 * r2
        u[2, k] = e2 * s2 * r0 + c2 * r2
    # G23 on rows 1, 2
    for k in range(3):
        r1, r2 = u[1, k], u[2, k]
        u[1, k] = c3 * r1 - s3 / e3 * r2
        u[2, k] = e3 * s3 * r1 + c3 * r2
    return u


@numba.njit(cache=True)
def _argmax_col2(u):
    best = 0.0
    for i in range(3):
        p = abs(u[i, 2]) ** 2
        if p > best:
            best = p
    for i in range(3):
        if abs(u[i, 2]) ** 2 >= best - TIE_TOLERANCE:
            return i
    return 0


@numba.njit(cache=True)
def _pair_prob(amp, ua, ub, i, j):
    z = amp[0] * ua[i, 0] * ub[j, 0] + amp[1] * ua[i, 1] * ub[j, 1] + amp[2] * ua[i, 2] * ub[j, 2]
    return z.real * z.real + z.imag * z.imag


@numba.njit(cache=True)
def _objective(x, amp):
    ua = _basis_matrix(x, 0)
    ub = _basis_matrix(x, 8)
    return _pair_prob(amp, ua, ub, _argmax_col2(ua), _argmax_col2(ub))


@dataclass(frozen=True)
class QutritBasis:
    """Measurement basis of C^3; row i of ``unitary`` is the bra <i|U."""

    params: np.ndarray = field(default_factory=lambda: np.zeros(8))

    def __post_init__(self):
        p = np.asarray(self.params, dtype=np.float64)
        if p.shape != (8,):
            raise ValueError(f"a qutrit basis takes 8 parameters, got shape {p.shape}")
        object.__setattr__(self, "params", p)

    @property
    def unitary(self) -> np.ndarray:
        return _basis_matrix(self.params, 0)

    @classmethod
    def identity(cls) -> "QutritBasis":
        return cls(np.zeros(8))


@dataclass(frozen=True)
class QutritOutcomePair:
    i: int
    j: int

    def __post_init__(self):
        if self.i not in (0, 1, 2) or self.j not in (0, 1, 2):
            raise ValueError(f"outcomes must be in {{0, 1, 2}}, got ({self.i}, {self.j})")


@dataclass(frozen=True)
class QutritBound:
    gamma: float
    value: float
    converged: bool
    starts_used: int
    evals_used: int
    best_params: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "lower_bound": self.value,
            "converged": self.converged,
            "starts_used": self.starts_used,
            "evals_used": self.evals_used,
            "basis_params_alice": [float(v) for v in self.best_params[:8]],
            "basis_params_bob": [float(v) for v in self.best_params[8:]],
        }


def _matrix(U) -> np.ndarray:
    m = U.unitary if isinstance(U, QutritBasis) else np.asarray(U, dtype=np.complex128)
    if m.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
    return m


def qutrit_amplitudes(gamma) -> np.ndarray:
    """Schmidt coefficients (1, 1, g) / sqrt(2 + g^2)."""
    g = _as_gamma(gamma)
    return np.array([1.0, 1.0, g.gamma]) * g.norm


def qutrit_prob(gamma, UA, UB, outcome) -> float:
    """|sum_k amp_k <i|U_A|k> <j|U_B|k>|^2 for outcome pair (i, j)."""
    if not isinstance(outcome, QutritOutcomePair):
        outcome = QutritOutcomePair(*outcome)
    return float(_pair_prob(qutrit_amplitudes(gamma), _matrix(UA), _matrix(UB), outcome.i, outcome.j))


def argmax_overlap(U) -> int:
    """Index i maximizing |<i|U|2>|^2; near-ties (1e-12) resolve to the lowest index."""
    return int(_argmax_col2(_matrix(U)))


def local_weight_objective(gamma, UA, UB) -> float:
    """Quantum probability of the outcome pair the local model would output."""
    ua, ub = _matrix(UA), _matrix(UB)
    return float(_pair_prob(qutrit_amplitudes(gamma), ua, ub, _argmax_col2(ua), _argmax_col2(ub)))


def _start_sampler(base_seed: int):
    def sample(seed: int) -> np.ndarray:
        k = seed ^ base_seed
        if k == 0:
            return np.zeros(16)
        rng = np.random.default_rng(seed)
        x = rng.uniform(0.0, 2 * np.pi, 16)
        if k % 2:
            # near a three-way tie of |<i|U|2>|^2 on both sides
            for off in (0, 8):
                x[off + 2] = _BALANCED[0] + rng.normal(0.0, 0.05)
                x[off + 4] = _BALANCED[1] + rng.normal(0.0, 0.05)
        return x

    return sample


def qutrit_lower_bound(gamma, config: OptConfig | None = None) -> QutritBound:
    """Minimum over basis pairs of ``local_weight_objective``, floored at 0.

    Start 0 is the Schmidt basis on both sides, so the result never exceeds
    g^2 / (2 + g^2).  Odd-numbered starts sit near the three-way overlap tie
    where the model's choice of outcome switches; the rest are uniform.
    """
    g = _as_gamma(gamma)
    cfg = config or DEFAULT_QUTRIT_CONFIG
    out = multistart(_objective, _start_sampler(cfg.seed), cfg, qutrit_amplitudes(g))
    return QutritBound(
        gamma=g.gamma,
        value=max(0.0, out.best_value),
        converged=out.converged,
        starts_used=cfg.restarts,
        evals_used=out.evals_used,
        best_params=out.best_point,
    )
