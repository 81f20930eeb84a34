"""Chained Bell inequality with N settings per side on cos(t)|00> + sin(t)|11>.

Alice measures a_k = cos(alpha_k) z + sin(alpha_k) x.  Bob's optimal settings
are aligned with the combined vectors a_k + a_{k+1} (and a_N - a_1), which
leaves a sum of N square roots to maximize over the alphas.

The optimizer works on the deficit N - I/2, which equals the local-content
upper bound (2N - I) / (2N - 2(N-1)).  Each term of the deficit is computed
as (4 - T^2) / (2 + T) with 4 - T^2 expanded analytically, so the bound keeps
full relative precision when I is within roundoff of 2N - 2 cos 2t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .optimize import OptConfig, OptOutcome, derive_seed, multistart
from .qubit import ThetaParam, _as_theta

__all__ = [
    "ChainedConfig",
    "ChainedResult",
    "DEFAULT_CHAINED_CONFIG",
    "bkp_upper_bound",
    "chained_deficit",
    "chained_value",
    "equal_spacing_angles",
    "optimize_chained",
    "symmetric_angles",
]

DEFAULT_CHAINED_CONFIG = OptConfig(
    max_evals=200_000, simplex_tolerance=1e-13, restarts=20, seed=0, initial_step=0.1
)
PERTURBATION = 0.3


def symmetric_angles(free, N: int) -> np.ndarray:
    """Full angle list from the free ones under alpha_{N-k+1} = pi - alpha_k.

    ``free`` holds the first N // 2 angles; for odd N the middle angle is
    fixed at pi/2.
    """
    free = np.asarray(free, dtype=np.float64)
    m = N // 2
    if free.shape != (m,):
        raise ValueError(f"expected {m} free angles for N={N}, got shape {free.shape}")
    out = np.empty(N)
    out[:m] = free
    out[N - m:] = np.pi - free[::-1]
    if N % 2:
        out[m] = np.pi / 2
    return out


@dataclass(frozen=True)
class ChainedConfig:
    N: int
    theta: ThetaParam
    alphas: np.ndarray = field(repr=False)
    symmetry: bool = False

    def __post_init__(self):
        if self.N < 2:
            raise ValueError(f"the chained inequality needs N >= 2, got {self.N}")
        object.__setattr__(self, "theta", _as_theta(self.theta))
        al = np.asarray(self.alphas, dtype=np.float64)
        if al.shape != (self.N,):
            raise ValueError(f"alphas must have length N={self.N}, got shape {al.shape}")
        if self.symmetry:
            k = np.arange(self.N)
            # compare modulo 2 pi
            gap = np.angle(np.exp(1j * (al[self.N - 1 - k] - (np.pi - al))))
            if np.max(np.abs(gap)) > 1e-12:
                raise ValueError("alphas violate the reflection symmetry")
        object.__setattr__(self, "alphas", al)


@dataclass(frozen=True)
class ChainedResult:
    N: int
    theta: float
    value: float
    alphas: np.ndarray = field(repr=False)
    upper_bound: float
    delta: float
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "theta": self.theta,
            "value": self.value,
            "alphas": [float(a) for a in self.alphas],
            "upper_bound": self.upper_bound,
            "delta": None if math.isnan(self.delta) else self.delta,
            "converged": self.converged,
        }


def equal_spacing_angles(N: int) -> np.ndarray:
    """alpha_k = (k - 1) pi / N for k = 1..N; optimal for the maximally entangled state."""
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    return np.arange(N) * (np.pi / N)


def chained_value(config: ChainedConfig) -> float:
    """Quantum value of the chained expression with Bob's settings optimized out."""
    s = config.theta.s
    al = config.alphas
    c, sn = np.cos(al), np.sin(al)
    links = np.sqrt((c[:-1] + c[1:]) ** 2 + s * s * (sn[:-1] + sn[1:]) ** 2)
    closing = math.sqrt((c[-1] - c[0]) ** 2 + s * s * (sn[-1] - sn[0]) ** 2)
    return float(links.sum() + closing)


@numba.njit(cache=True)
def _deficit(al, c, s):
    n = al.size
    c2 = c * c
    total = 0.0
    for k in range(n - 1):
        a, b = al[k], al[k + 1]
        cs = math.cos(a) + math.cos(b)
        ss = math.sin(a) + math.sin(b)
        t = math.sqrt(cs * cs + s * s * ss * ss)
        h = math.sin(0.5 * (a - b))
        total += (4.0 * h * h + c2 * ss * ss) / (2.0 + t)
    a, b = al[n - 1], al[0]
    cs = math.cos(a) - math.cos(b)
    ss = math.sin(a) - math.sin(b)
    t = math.sqrt(cs * cs + s * s * ss * ss)
    h = math.cos(0.5 * (a - b))
    total += (4.0 * h * h + c2 * ss * ss) / (2.0 + t)
    return 0.5 * total


@numba.njit(cache=True)
def _deficit_obj(x, p):
    # p = (c, s, N, symmetric)
    n = int(p[2])
    if p[3] > 0.5:
        m = n // 2
        al = np.empty(n)
        for k in range(m):
            al[k] = x[k]
            al[n - 1 - k] = np.pi - x[k]
        if n % 2:
            al[m] = 0.5 * np.pi
        return _deficit(al, p[0], p[1])
    return _deficit(x, p[0], p[1])


def chained_deficit(config: ChainedConfig) -> float:
    """N - I/2 for the configured angles, free of cancellation."""
    th = config.theta
    return float(_deficit(config.alphas, th.c, th.s))


def bkp_upper_bound(I_value: float, I_L: float, I_NS: float) -> float:
    """Upper bound (I_NS - I) / (I_NS - I_L) on the local content, clamped to [0, 1]."""
    if not I_NS > I_L:
        raise ValueError(f"need I_NS > I_L, got I_NS={I_NS}, I_L={I_L}")
    if I_value > I_NS + 1e-12 * max(1.0, abs(I_NS)):
        raise ValueError(f"I = {I_value} exceeds the no-signaling maximum {I_NS}")
    return float(min(1.0, max(0.0, (I_NS - I_value) / (I_NS - I_L))))


def _seed_angles(N: int, symmetry: bool) -> np.ndarray:
    if symmetry:
        # equal spacing rotated by pi/(2N) is a fixed point of the reflection
        return ((np.arange(N // 2) + 0.5) * (np.pi / N)).copy()
    return equal_spacing_angles(N)


def optimize_chained(
    N: int,
    theta,
    symmetry: bool = True,
    config: OptConfig | None = None,
) -> ChainedResult:
    """Maximize the chained value over Alice's angles by multistart Nelder-Mead.

    Start 0 is the equal-spacing configuration; the others add Gaussian noise
    of 0.3 rad to it.  Angles are optimized unconstrained and reported mod 2 pi.
    """
    th = _as_theta(theta)
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    cfg = config or DEFAULT_CHAINED_CONFIG
    base = _seed_angles(N, symmetry)

    def sampler(seed):
        if seed == derive_seed(cfg.seed, 0):
            return base.copy()
        return base + np.random.default_rng(seed).normal(0.0, PERTURBATION, base.size)

    params = np.array([th.c, th.s, float(N), 1.0 if symmetry else 0.0])
    out: OptOutcome = multistart(_deficit_obj, sampler, cfg, params)
    alphas = symmetric_angles(out.best_point, N) if symmetry else out.best_point
    alphas = np.mod(alphas, 2 * np.pi)
    deficit = float(out.best_value)
    ub = min(1.0, max(0.0, deficit))
    delta = ub / th.c - 1.0 if th.c > 0 else math.nan
    return ChainedResult(
        N=N,
        theta=th.theta,
        value=2.0 * N - 2.0 * deficit,
        alphas=alphas,
        upper_bound=ub,
        delta=delta,
        converged=out.converged,
    )
