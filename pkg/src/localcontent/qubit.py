"""Local/nonlocal decompositions for the two-qubit states cos(t)|00> + sin(t)|11>.

Settings are Bloch vectors ``a`` (Alice) and ``b`` (Bob), outcomes are +1/-1.
Every probability function broadcasts over arrays of settings with shape
``(..., 3)`` and over outcome arrays.

Two product-form local models are provided:

* ``ModelId.EPR2_SIGN``: deterministic outcomes sign(a_z), sign(b_z);
* ``ModelId.IMPROVED_F``: marginals (1 + r f(z))/2 with the clipped-linear
  response ``f``, valid up to weight 1 - sin 2t.

The nonlocal remainder of the improved model is evaluated in a form that is
exactly zero-biased inside the equatorial band |z| <= c/(1+s), which keeps
the 1/s factors from amplifying roundoff for weakly entangled states.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from .optimize import OptConfig, fibonacci_sphere_grid, multistart, nelder_mead

__all__ = [
    "BlochVector",
    "DecompositionReport",
    "ModelId",
    "ThetaParam",
    "VALIDITY_THRESHOLD",
    "chsh_max_of_pnl",
    "chsh_value_pnl",
    "f_eval",
    "local_prob_improved",
    "local_prob_sign",
    "max_weight_for_local_model",
    "nominal_weight",
    "nonlocal_bias",
    "nonlocal_correlator",
    "nonlocal_prob",
    "quantum_prob",
    "verify_decomposition",
]

# candidate P_NL counts as a probability if it is at least this
VALIDITY_THRESHOLD = -1e-9
MIN_GRID_SIZE = 100
DEFAULT_GRID_SIZE = 400
REFINE_STARTS = 10

_OUTCOME_PAIRS = ((1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0))


@dataclass(frozen=True)
class ThetaParam:
    theta: float
    c: float = field(init=False)
    s: float = field(init=False)

    def __post_init__(self):
        t = float(self.theta)
        if not 0.0 <= t <= math.pi / 4:
            raise ValueError(f"theta must lie in [0, pi/4], got {t!r}")
        # pin the maximally entangled endpoint so that c is exactly 0 there
        c = 0.0 if t == math.pi / 4 else math.cos(2 * t)
        object.__setattr__(self, "theta", t)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "s", math.sin(2 * t))

    @property
    def degenerate(self) -> bool:
        """True when the local weight 1 - s vanishes in floating point."""
        return self.s >= 1.0


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    def __post_init__(self):
        n2 = self.x * self.x + self.y * self.y + self.z * self.z
        if abs(n2 - 1.0) > 1e-12:
            raise ValueError(f"Bloch vector must be unit norm, |v|^2 = {n2!r}")

    @classmethod
    def from_angles(cls, polar: float, azimuth: float) -> "BlochVector":
        st = math.sin(polar)
        return cls(st * math.cos(azimuth), st * math.sin(azimuth), math.cos(polar))

    def __array__(self, dtype=None, copy=None):
        return np.array([self.x, self.y, self.z], dtype=dtype or np.float64)


class ModelId(str, enum.Enum):
    EPR2_SIGN = "EPR2_SIGN"
    IMPROVED_F = "IMPROVED_F"


@dataclass(frozen=True)
class DecompositionReport:
    """Outcome of checking one weight of one local model at one theta.

    ``certified_weight`` is the tested weight when the candidate nonlocal part
    stayed above ``VALIDITY_THRESHOLD`` everywhere examined, and 0 otherwise
    (the trivial decomposition is always valid).
    """

    theta: ThetaParam
    model_id: ModelId
    certified_weight: float
    max_identity_residual: float
    min_pnl_value: float
    max_nosignaling_residual: float
    settings_examined: int

    @property
    def valid(self) -> bool:
        return self.min_pnl_value >= VALIDITY_THRESHOLD

    def to_dict(self) -> dict:
        d = asdict(self)
        d["theta"] = self.theta.theta
        d["model_id"] = self.model_id.value
        return d


def _as_theta(theta) -> ThetaParam:
    return theta if isinstance(theta, ThetaParam) else ThetaParam(theta)


def _as_model(model_id) -> ModelId:
    return model_id if isinstance(model_id, ModelId) else ModelId(model_id)


def _components(v):
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != 3:
        raise ValueError(f"settings must have a trailing axis of length 3, got {v.shape}")
    return v[..., 0], v[..., 1], v[..., 2]


def _outcome(r):
    r = np.asarray(r, dtype=np.float64)
    if not np.all((r == 1.0) | (r == -1.0)):
        raise ValueError("outcomes must be +1 or -1")
    return r


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


# -- scalar kernels: one source for the ufuncs and the compiled objectives --


@numba.njit(cache=True)
def _pq1(c, s, ax, ay, az, bx, by, bz, ra, rb):
    e = az * bz + s * (ax * bx - ay * by)
    return 0.25 * (1.0 + ra * c * az + rb * c * bz + ra * rb * e)


@numba.njit(cache=True)
def _sign1(x):
    # sign(0) := +1
    return 1.0 if x >= 0.0 else -1.0


@numba.njit(cache=True)
def _f1(x, c, s):
    if s >= 1.0 or x == 0.0:
        return 0.0
    y = (1.0 + s) / c * abs(x)
    if y > 1.0:
        y = 1.0
    return math.copysign(y, x)


@numba.njit(cache=True)
def _clip_band1(x, c, s):
    # (1 - s) f(x) = c * m(x) with m the clip of x to the band |x| <= c/(1+s)
    if s >= 1.0:
        return 0.0
    tau = c / (1.0 + s)
    if abs(x) <= tau:
        return x
    return math.copysign(tau, x)


@numba.njit(cache=True)
def _bias1(x, c, s):
    return c * (x - _clip_band1(x, c, s)) / s


@numba.njit(cache=True)
def _corr_nl1(c, s, ax, ay, az, bx, by, bz):
    ma = _clip_band1(az, c, s)
    mb = _clip_band1(bz, c, s)
    return ax * bx - ay * by + (az * bz - ma * mb) / s - ma * mb


@numba.njit(cache=True)
def _pnl1(c, s, ax, ay, az, bx, by, bz, ra, rb):
    g = _corr_nl1(c, s, ax, ay, az, bx, by, bz)
    return 0.25 * (1.0 + ra * _bias1(az, c, s) + rb * _bias1(bz, c, s) + ra * rb * g)


@numba.njit(cache=True)
def _pl_sign1(az, bz, ra, rb):
    return 0.25 * (1.0 + ra * _sign1(az)) * (1.0 + rb * _sign1(bz))


@numba.njit(cache=True)
def _pl_improved1(c, s, az, bz, ra, rb):
    return 0.25 * (1.0 + ra * _f1(az, c, s)) * (1.0 + rb * _f1(bz, c, s))


_F8 = "float64"
_pq_u = numba.vectorize([f"{_F8}({', '.join([_F8] * 10)})"], cache=True)(
    lambda c, s, ax, ay, az, bx, by, bz, ra, rb: _pq1(c, s, ax, ay, az, bx, by, bz, ra, rb)
)
_pnl_u = numba.vectorize([f"{_F8}({', '.join([_F8] * 10)})"], cache=True)(
    lambda c, s, ax, ay, az, bx, by, bz, ra, rb: _pnl1(c, s, ax, ay, az, bx, by, bz, ra, rb)
)
_corr_nl_u = numba.vectorize([f"{_F8}({', '.join([_F8] * 8)})"], cache=True)(
    lambda c, s, ax, ay, az, bx, by, bz: _corr_nl1(c, s, ax, ay, az, bx, by, bz)
)
_f_u = numba.vectorize([f"{_F8}({_F8}, {_F8}, {_F8})"], cache=True)(lambda x, c, s: _f1(x, c, s))
_bias_u = numba.vectorize([f"{_F8}({_F8}, {_F8}, {_F8})"], cache=True)(
    lambda x, c, s: _bias1(x, c, s)
)
_pl_sign_u = numba.vectorize([f"{_F8}({_F8}, {_F8}, {_F8}, {_F8})"], cache=True)(
    lambda az, bz, ra, rb: _pl_sign1(az, bz, ra, rb)
)
_pl_improved_u = numba.vectorize([f"{_F8}({', '.join([_F8] * 6)})"], cache=True)(
    lambda c, s, az, bz, ra, rb: _pl_improved1(c, s, az, bz, ra, rb)
)


# -- public probability rules --


def quantum_prob(theta, a, b, rA, rB):
    """Born-rule probability of outcomes (rA, rB) for settings a, b."""
    th = _as_theta(theta)
    ax, ay, az = _components(a)
    bx, by, bz = _components(b)
    return _scalar(_pq_u(th.c, th.s, ax, ay, az, bx, by, bz, _outcome(rA), _outcome(rB)))


def local_prob_sign(a, b, rA, rB):
    """Deterministic local model: outcomes sign(a_z), sign(b_z), with sign(0) = +1."""
    _, _, az = _components(a)
    _, _, bz = _components(b)
    return _scalar(_pl_sign_u(az, bz, _outcome(rA), _outcome(rB)))


def f_eval(x, theta):
    """Clipped-linear response sign(x) min(1, c|x|/(1-s)); identically 0 when s = 1."""
    th = _as_theta(theta)
    x = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(x) > 1.0):
        raise ValueError("f is defined on [-1, 1]")
    return _scalar(_f_u(x, th.c, th.s))


def local_prob_improved(theta, a, b, rA, rB):
    th = _as_theta(theta)
    _, _, az = _components(a)
    _, _, bz = _components(b)
    return _scalar(_pl_improved_u(th.c, th.s, az, bz, _outcome(rA), _outcome(rB)))


def _require_entangled(th: ThetaParam):
    if th.s <= 0.0:
        raise ValueError("the nonlocal part is undefined for the product state (theta = 0)")


def nonlocal_bias(x, theta):
    """Marginal bias F(x) = [c x - (1 - s) f(x)] / s of the nonlocal part."""
    th = _as_theta(theta)
    _require_entangled(th)
    return _scalar(_bias_u(np.asarray(x, dtype=np.float64), th.c, th.s))


def nonlocal_correlator(theta, a, b):
    """Correlator G(a, b) of the nonlocal part of the improved decomposition."""
    th = _as_theta(theta)
    _require_entangled(th)
    ax, ay, az = _components(a)
    bx, by, bz = _components(b)
    return _scalar(_corr_nl_u(th.c, th.s, ax, ay, az, bx, by, bz))


def nonlocal_prob(theta, a, b, rA, rB):
    """Nonlocal part P_NL of the improved decomposition at weight 1 - s.

    Satisfies (1 - s) P_L + s P_NL = P_Q; undefined at theta = 0.
    """
    th = _as_theta(theta)
    _require_entangled(th)
    ax, ay, az = _components(a)
    bx, by, bz = _components(b)
    return _scalar(_pnl_u(th.c, th.s, ax, ay, az, bx, by, bz, _outcome(rA), _outcome(rB)))


def nominal_weight(theta, model_id) -> float:
    """Weight at which each shipped model is known to leave a valid remainder."""
    th = _as_theta(theta)
    w = 1.0 - th.s
    return w if _as_model(model_id) is ModelId.IMPROVED_F else 0.25 * w


# -- certification --


@numba.njit(cache=True)
def _local1(model, c, s, az, bz, ra, rb):
    if model == 0:
        return _pl_sign1(az, bz, ra, rb)
    return _pl_improved1(c, s, az, bz, ra, rb)


@numba.njit(cache=True)
def _candidate1(model, closed, c, s, w, ax, ay, az, bx, by, bz, ra, rb):
    if closed:
        return _pnl1(c, s, ax, ay, az, bx, by, bz, ra, rb)
    pq = _pq1(c, s, ax, ay, az, bx, by, bz, ra, rb)
    return (pq - w * _local1(model, c, s, az, bz, ra, rb)) / (1.0 - w)


@numba.njit(cache=True)
def _candidate_min_obj(x, p):
    # x = (polar_a, azimuth_a, polar_b, azimuth_b); p = (model, closed, c, s, w)
    sa = math.sin(x[0])
    sb = math.sin(x[2])
    ax, ay, az = sa * math.cos(x[1]), sa * math.sin(x[1]), math.cos(x[0])
    bx, by, bz = sb * math.cos(x[3]), sb * math.sin(x[3]), math.cos(x[2])
    best = np.inf
    for ra in (1.0, -1.0):
        for rb in (1.0, -1.0):
            v = _candidate1(int(p[0]), p[1] > 0.5, p[2], p[3], p[4],
                            ax, ay, az, bx, by, bz, ra, rb)
            if v < best:
                best = v
    return best


@numba.njit(cache=True)
def _scan_block(model, closed, c, s, w, A, B):
    """Tables over the product A x B: candidate P_NL, P_Q, P_L for 4 outcomes."""
    na, nb = A.shape[0], B.shape[0]
    pnl = np.empty((4, na, nb))
    pq = np.empty((4, na, nb))
    pl = np.empty((4, na, nb))
    for i in range(na):
        ax, ay, az = A[i, 0], A[i, 1], A[i, 2]
        for j in range(nb):
            bx, by, bz = B[j, 0], B[j, 1], B[j, 2]
            for k in range(4):
                ra = 1.0 if k < 2 else -1.0
                rb = 1.0 if k % 2 == 0 else -1.0
                q = _pq1(c, s, ax, ay, az, bx, by, bz, ra, rb)
                loc = _local1(model, c, s, az, bz, ra, rb)
                pq[k, i, j] = q
                pl[k, i, j] = loc
                if closed:
                    pnl[k, i, j] = _pnl1(c, s, ax, ay, az, bx, by, bz, ra, rb)
                else:
                    pnl[k, i, j] = (q - w * loc) / (1.0 - w)
    return pnl, pq, pl


def _to_angles(v):
    return np.arccos(np.clip(v[2], -1.0, 1.0)), math.atan2(v[1], v[0])


def verify_decomposition(
    theta,
    model_id,
    grid_size: int = DEFAULT_GRID_SIZE,
    refine: bool = True,
    weight: float | None = None,
    block: int = 128,
) -> DecompositionReport:
    """Check p_L P_L + (1 - p_L) P_NL = P_Q with P_NL a valid distribution.

    Alice's and Bob's settings each range over a Fibonacci covering of
    ``grid_size`` points plus the six axis probes (so the pairs a = +-x,
    b = -+x that cap product models are always examined); all pairs of the
    product grid are scanned.  With ``refine`` the candidate P_NL is then
    minimized by Nelder-Mead from the 10 worst pairs.

    ``weight`` defaults to the model's nominal weight.  For the improved model
    at its nominal weight the closed-form P_NL is used, so the identity
    residual is a genuine check; otherwise the candidate is
    (P_Q - p_L P_L) / (1 - p_L).
    """
    th = _as_theta(theta)
    model = _as_model(model_id)
    if grid_size < MIN_GRID_SIZE:
        raise ValueError(
            f"grid_size {grid_size} < {MIN_GRID_SIZE}: too coarse to certify nonnegativity"
        )
    w = nominal_weight(th, model) if weight is None else float(weight)
    if not 0.0 <= w < 1.0:
        raise ValueError(f"weight must lie in [0, 1), got {w!r}")
    closed = model is ModelId.IMPROVED_F and th.s > 0.0 and w == 1.0 - th.s
    mcode = 0 if model is ModelId.EPR2_SIGN else 1

    grid = fibonacci_sphere_grid(grid_size)
    n = grid.shape[0]
    min_val = np.inf
    max_res = 0.0
    alice_ns = 0.0
    bob_lo = np.full((2, n), np.inf)
    bob_hi = np.full((2, n), -np.inf)
    worst_vals = np.empty(0)
    worst_idx = np.empty((0, 2), dtype=np.int64)

    for start in range(0, n, block):
        A = grid[start:start + block]
        pnl, pq, pl = _scan_block(mcode, closed, th.c, th.s, w, A, grid)
        min_val = min(min_val, float(pnl.min()))
        max_res = max(max_res, float(np.abs(w * pl + (1.0 - w) * pnl - pq).max()))
        # Alice's marginal (rA = +1, -1) must not depend on Bob's setting
        marg_a = np.stack([pnl[0] + pnl[1], pnl[2] + pnl[3]])
        alice_ns = max(alice_ns, float(np.ptp(marg_a, axis=2).max()))
        marg_b = np.stack([pnl[0] + pnl[2], pnl[1] + pnl[3]])
        bob_lo = np.minimum(bob_lo, marg_b.min(axis=1))
        bob_hi = np.maximum(bob_hi, marg_b.max(axis=1))
        # keep the REFINE_STARTS worst pairs seen so far
        per_pair = pnl.min(axis=0).ravel()
        k = min(REFINE_STARTS, per_pair.size)
        idx = np.argpartition(per_pair, k - 1)[:k]
        ij = np.column_stack([idx // grid.shape[0] + start, idx % grid.shape[0]])
        worst_vals = np.concatenate([worst_vals, per_pair[idx]])
        worst_idx = np.vstack([worst_idx, ij])
        keep = np.lexsort((worst_idx[:, 1], worst_idx[:, 0], worst_vals))[:REFINE_STARTS]
        worst_vals, worst_idx = worst_vals[keep], worst_idx[keep]

    ns_res = max(alice_ns, float((bob_hi - bob_lo).max()))
    examined = n * n

    if refine:
        params = np.array([mcode, 1.0 if closed else 0.0, th.c, th.s, w])
        cfg = OptConfig(max_evals=4000, simplex_tolerance=1e-12, initial_step=0.05)
        for i, j in worst_idx:
            x0 = np.array([*_to_angles(grid[i]), *_to_angles(grid[j])])
            out = nelder_mead(_candidate_min_obj, x0, cfg, params)
            examined += out.evals_used
            min_val = min(min_val, out.best_value)

    certified = w if min_val >= VALIDITY_THRESHOLD else 0.0
    return DecompositionReport(
        theta=th,
        model_id=model,
        certified_weight=certified,
        max_identity_residual=max_res,
        min_pnl_value=float(min_val),
        max_nosignaling_residual=ns_res,
        settings_examined=int(examined),
    )


def max_weight_for_local_model(
    theta,
    model_id,
    tolerance: float = 1e-6,
    grid_size: int = DEFAULT_GRID_SIZE,
) -> float:
    """Largest weight of the fixed local model leaving a valid nonlocal part.

    Bisection on [0, 1) with grid-only checks, followed by a refined check
    of the result; if refinement finds a violation the search continues below
    it with refinement on.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    th = _as_theta(theta)
    model = _as_model(model_id)

    def ok(w, refine):
        return verify_decomposition(th, model, grid_size, refine=refine, weight=w).valid

    lo, hi = 0.0, 1.0
    refine = False
    while True:
        while hi - lo > tolerance:
            mid = 0.5 * (lo + hi)
            if ok(mid, refine):
                lo = mid
            else:
                hi = mid
        if refine or lo == 0.0 or ok(lo, True):
            return lo
        refine = True
        hi, lo = lo, 0.0


# -- CHSH value of the nonlocal part --


@numba.njit(cache=True)
def _unit(polar, azimuth):
    st = math.sin(polar)
    return st * math.cos(azimuth), st * math.sin(azimuth), math.cos(polar)


@numba.njit(cache=True)
def _chsh1(c, s, a1, a2, b1, b2):
    return (
        _corr_nl1(c, s, a1[0], a1[1], a1[2], b1[0], b1[1], b1[2])
        + _corr_nl1(c, s, a1[0], a1[1], a1[2], b2[0], b2[1], b2[2])
        + _corr_nl1(c, s, a2[0], a2[1], a2[2], b1[0], b1[1], b1[2])
        - _corr_nl1(c, s, a2[0], a2[1], a2[2], b2[0], b2[1], b2[2])
    )


@numba.njit(cache=True)
def _neg_chsh_sphere(x, p):
    return -_chsh1(p[0], p[1], _unit(x[0], x[1]), _unit(x[2], x[3]),
                   _unit(x[4], x[5]), _unit(x[6], x[7]))


@numba.njit(cache=True)
def _neg_chsh_plane(x, p):
    # settings in the (x, z) plane
    return -_chsh1(p[0], p[1], _unit(x[0], 0.0), _unit(x[1], 0.0),
                   _unit(x[2], 0.0), _unit(x[3], 0.0))


def chsh_value_pnl(theta, a1, a2, b1, b2) -> float:
    """CHSH combination E(a1,b1) + E(a1,b2) + E(a2,b1) - E(a2,b2) of P_NL."""
    g = lambda a, b: nonlocal_correlator(theta, a, b)  # noqa: E731
    return float(g(a1, b1) + g(a1, b2) + g(a2, b1) - g(a2, b2))


def chsh_max_of_pnl(theta, config: OptConfig | None = None) -> float:
    """Largest CHSH value of the improved-model P_NL found by multistart search.

    Searches planar settings (4 angles) and general settings (8 angles), each
    with ``config.restarts`` starts, and returns the larger maximum.
    """
    th = _as_theta(theta)
    _require_entangled(th)
    cfg = config or OptConfig(restarts=20, simplex_tolerance=1e-12, initial_step=0.3)
    params = np.array([th.c, th.s])
    best = -np.inf
    for obj, dim in ((_neg_chsh_plane, 4), (_neg_chsh_sphere, 8)):
        sampler = lambda seed, d=dim: np.random.default_rng(seed).uniform(0, 2 * np.pi, d)  # noqa: E731
        out = multistart(obj, sampler, cfg, params)
        best = max(best, -out.best_value)
    return float(best)
