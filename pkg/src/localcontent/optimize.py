"""Derivative-free minimization and deterministic sampling utilities.

The Nelder-Mead core is written once in a numba-compatible subset of numpy.
When the objective is itself a numba-compiled function the core runs
compiled; any other Python callable runs through the same source
uncompiled, so both paths follow identical iterations.

Objectives take ``(x, params)`` where ``params`` is a float64 array of
problem constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np
from numba.core.dispatcher import Dispatcher

__all__ = [
    "OptConfig",
    "OptOutcome",
    "derive_seed",
    "fibonacci_sphere_grid",
    "multistart",
    "nelder_mead",
]

MANDATORY_PROBES = np.array(
    [
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
    ]
)


@dataclass(frozen=True)
class OptConfig:
    max_evals: int = 20_000
    simplex_tolerance: float = 1e-10
    restarts: int = 20
    seed: int = 0
    # edge length of the initial simplex, in parameter units
    initial_step: float = 0.2

    def __post_init__(self):
        if self.max_evals < 100:
            raise ValueError(f"max_evals must be >= 100, got {self.max_evals}")
        if not self.simplex_tolerance > 0:
            raise ValueError("simplex_tolerance must be positive")
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")


@dataclass(frozen=True)
class OptOutcome:
    best_value: float
    best_point: np.ndarray = field(repr=False)
    evals_used: int
    converged: bool

    def __eq__(self, other):
        if not isinstance(other, OptOutcome):
            return NotImplemented
        return (
            self.best_value == other.best_value
            and np.array_equal(self.best_point, other.best_point)
            and self.evals_used == other.evals_used
            and self.converged == other.converged
        )


def derive_seed(base_seed: int, k: int) -> int:
    """Seed of the k-th independent run: ``base_seed XOR k``."""
    return (int(base_seed) ^ int(k)) & 0xFFFF_FFFF_FFFF_FFFF


def _nm_core(f, x0, step, max_evals, tol, params):
    n = x0.size
    if n >= 2:
        # dimension-adaptive coefficients (Gao & Han); n == 2 gives the classic ones
        rho, chi, psi, sigma = 1.0, 1.0 + 2.0 / n, 0.75 - 0.5 / n, 1.0 - 1.0 / n
    else:
        rho, chi, psi, sigma = 1.0, 2.0, 0.5, 0.5

    evals = 0
    best_x = x0.copy()
    best_f = f(best_x, params)
    evals += 1
    if best_f != best_f:
        best_f = np.inf
    converged = False

    # Rebuild the simplex around the incumbent after each collapse; stop once
    # a fresh simplex brings no improvement beyond tol.
    while evals < max_evals:
        sim = np.empty((n + 1, n))
        fs = np.empty(n + 1)
        sim[0] = best_x
        fs[0] = best_f
        for i in range(n):
            sim[i + 1] = best_x
            sim[i + 1, i] += step
            v = f(sim[i + 1], params)
            if v != v:
                v = np.inf
            fs[i + 1] = v
        evals += n
        start_f = best_f
        round_converged = False

        while evals < max_evals:
            order = np.argsort(fs, kind="mergesort")
            sim = sim[order]
            fs = fs[order]
            if (
                np.max(np.abs(sim[1:] - sim[0])) <= tol
                and np.max(np.abs(fs[1:] - fs[0])) <= tol
            ):
                round_converged = True
                break

            centroid = np.sum(sim[:-1], axis=0) / n
            xr = centroid + rho * (centroid - sim[-1])
            fr = f(xr, params)
            evals += 1
            if fr != fr:
                fr = np.inf

            if fr < fs[0]:
                xe = centroid + chi * (xr - centroid)
                fe = f(xe, params)
                evals += 1
                if fe != fe:
                    fe = np.inf
                if fe < fr:
                    sim[-1] = xe
                    fs[-1] = fe
                else:
                    sim[-1] = xr
                    fs[-1] = fr
            elif fr < fs[-2]:
                sim[-1] = xr
                fs[-1] = fr
            else:
                if fr < fs[-1]:
                    xc = centroid + psi * (xr - centroid)
                else:
                    xc = centroid + psi * (sim[-1] - centroid)
                fc = f(xc, params)
                evals += 1
                if fc != fc:
                    fc = np.inf
                if fc < min(fr, fs[-1]):
                    sim[-1] = xc
                    fs[-1] = fc
                else:
                    for i in range(1, n + 1):
                        sim[i] = sim[0] + sigma * (sim[i] - sim[0])
                        v = f(sim[i], params)
                        if v != v:
                            v = np.inf
                        fs[i] = v
                    evals += n

        k = np.argmin(fs)
        if fs[k] < best_f:
            best_f = fs[k]
            best_x = sim[k].copy()
        if round_converged and start_f - best_f <= tol:
            converged = True
            break

    return best_x, best_f, evals, converged


_nm_core_compiled = numba.njit(cache=True)(_nm_core)


def nelder_mead(
    objective: Callable,
    start,
    config: OptConfig,
    params: np.ndarray | None = None,
) -> OptOutcome:
    """Minimize ``objective(x, params)`` from ``start``.

    Convergence requires both the simplex diameter (sup-norm) and the spread of
    vertex values to fall below ``config.simplex_tolerance``, and a rebuilt
    simplex around the incumbent to give no further gain.  Exhausting
    ``config.max_evals`` first returns the best point with ``converged=False``.
    If ``params`` is None the objective is called as ``objective(x)``.
    """
    x0 = np.array(start, dtype=np.float64).ravel()
    if params is None:
        if isinstance(objective, Dispatcher):
            raise TypeError("compiled objectives must be given a params array")
        fn = objective
        objective = lambda x, _p: fn(x)  # noqa: E731
        params = np.zeros(0)
    params = np.asarray(params, dtype=np.float64)

    core = _nm_core_compiled if isinstance(objective, Dispatcher) else _nm_core
    x, fx, evals, ok = core(
        objective, x0, float(config.initial_step), int(config.max_evals),
        float(config.simplex_tolerance), params,
    )
    return OptOutcome(float(fx), np.asarray(x), int(evals), bool(ok))


def multistart(
    objective: Callable,
    sampler: Callable[[int], np.ndarray],
    config: OptConfig,
    params: np.ndarray | None = None,
) -> OptOutcome:
    """Run Nelder-Mead from ``config.restarts`` starts and keep the best.

    Start k is ``sampler(derive_seed(config.seed, k))``.  Runs are independent
    and reduced by (value, start index), so the result does not depend on
    evaluation order.  ``converged`` refers to the winning run.
    """
    best = None
    total = 0
    for k in range(config.restarts):
        out = nelder_mead(objective, sampler(derive_seed(config.seed, k)), config, params)
        total += out.evals_used
        if best is None or out.best_value < best.best_value:
            best = out
    return OptOutcome(best.best_value, best.best_point, total, best.converged)


def fibonacci_sphere_grid(n: int) -> np.ndarray:
    """Near-uniform unit vectors on the sphere, shape ``(n + 6, 3)``.

    The first ``n`` rows are a Fibonacci lattice; the last six are the
    mandatory probes +z, -z, +x, -x, +y, -y.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = i * (np.pi * (3.0 - np.sqrt(5.0)))
    pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return np.vstack([pts, MANDATORY_PROBES])
