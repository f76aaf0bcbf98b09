"""Smooth unconstrained minimization (BFGS) and gradient checking.

The minimizer keeps an explicit dense inverse-Hessian approximation,
which is fine at the problem sizes used here (hundreds to a few
thousand variables).  Matrix-valued variables are handled by the caller
flattening them row-major before optimization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import OptimizationError

_CURVATURE_EPS = 1e-10


@dataclass
class ObjectiveFn:
    """A smooth objective: value and gradient callables plus dimension."""

    value: Callable
    gradient: Callable
    dimension: int


@dataclass
class OptimizerConfig:
    initial_point: np.ndarray = None
    max_iterations: int = 500
    gradient_tolerance: float = 1e-6
    c1: float = 1e-4
    c2: float = 0.9

    def __post_init__(self):
        if not (0.0 < self.c1 < self.c2 < 1.0):
            raise ValueError(
                f"Wolfe constants must satisfy 0 < c1 < c2 < 1, got c1={self.c1} c2={self.c2}"
            )
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass
class OptimizeResult:
    point: np.ndarray
    value: float
    gradient_norm: float
    converged: bool
    iterations: int
    message: str = ""


def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimizer of the Hermite cubic through (a, fa, ga), (b, fb, gb).

    Returns None when the interpolation is degenerate.  Exact for
    quadratic objectives, which is what makes the surrounding line
    search terminate finitely on quadratics.
    """
    if a == b:
        return None
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0.0:
        return None
    d2 = np.sqrt(disc) * np.sign(b - a)
    denom = gb - ga + 2.0 * d2
    if denom == 0.0:
        return None
    t = b - (b - a) * (gb + d2 - d1) / denom
    if not np.isfinite(t):
        return None
    return t


def _secant_min(a, ga, b, gb):
    if gb == ga:
        return None
    t = a - ga * (b - a) / (gb - ga)
    return t if np.isfinite(t) else None


def _zoom(phi, lo, f_lo, g_lo, hi, f_hi, g_hi, f0, dphi0, c1, c2, eps_f,
          max_iter=40):
    """Refine a bracketing interval until strong Wolfe holds.

    ``hi`` may carry a non-finite value (an overshoot into a region
    where the objective blew up); interpolation then falls back to
    bisection toward ``lo``.  ``eps_f`` absorbs floating-point noise in
    objective values: near convergence the true decrease can be below
    one ulp of f, and the derivative condition must decide instead.
    """
    for _ in range(max_iter):
        cand = None
        if np.isfinite(f_hi) and np.isfinite(g_hi):
            cand = _cubic_min(lo, f_lo, g_lo, hi, f_hi, g_hi)
        span = abs(hi - lo)
        inner_lo = min(lo, hi) + 0.05 * span
        inner_hi = max(lo, hi) - 0.05 * span
        if cand is None or not (inner_lo <= cand <= inner_hi):
            cand = 0.5 * (lo + hi)
        f_c, g_c = phi(cand)
        if (not np.isfinite(f_c) or f_c > f0 + c1 * cand * dphi0 + eps_f
                or f_c > f_lo + eps_f):
            hi, f_hi, g_hi = cand, f_c, g_c
        else:
            if abs(g_c) <= -c2 * dphi0:
                return cand, f_c
            if g_c * (hi - lo) >= 0.0:
                hi, f_hi, g_hi = lo, f_lo, g_lo
            lo, f_lo, g_lo = cand, f_c, g_c
        if abs(hi - lo) <= 1e-14 * max(1.0, abs(lo)):
            break
    if f_lo < f0 and lo > 0.0:
        return lo, f_lo
    return None


def _line_search(phi, f0, dphi0, c1, c2, max_iter=25):
    """Strong-Wolfe step length (Nocedal & Wright bracket/zoom scheme).

    ``phi`` maps a step length to (value, directional derivative).
    Returns (alpha, value) or None when no acceptable step was found.
    """
    eps_f = 1e-12 * (1.0 + abs(f0))
    alpha_prev, f_prev, g_prev = 0.0, f0, dphi0
    alpha = 1.0
    for i in range(max_iter):
        f_a, g_a = phi(alpha)
        if not np.isfinite(f_a):
            return _zoom(phi, alpha_prev, f_prev, g_prev, alpha, f_a, g_a,
                         f0, dphi0, c1, c2, eps_f)
        if f_a > f0 + c1 * alpha * dphi0 + eps_f or (i > 0 and f_a > f_prev + eps_f):
            return _zoom(phi, alpha_prev, f_prev, g_prev, alpha, f_a, g_a,
                         f0, dphi0, c1, c2, eps_f)
        if abs(g_a) <= -c2 * dphi0:
            # One interpolation polish: exact for quadratics, otherwise a
            # cheap attempt at a better point that still satisfies Wolfe.
            refined = _secant_min(0.0, dphi0, alpha, g_a)
            if refined is not None and 0.0 < refined < 1e6 and abs(refined - alpha) > 1e-14:
                f_r, g_r = phi(refined)
                if (np.isfinite(f_r) and f_r <= f_a + eps_f
                        and f_r <= f0 + c1 * refined * dphi0 + eps_f
                        and abs(g_r) <= -c2 * dphi0):
                    return refined, f_r
            return alpha, f_a
        if g_a >= 0.0:
            return _zoom(phi, alpha, f_a, g_a, alpha_prev, f_prev, g_prev,
                         f0, dphi0, c1, c2, eps_f)
        alpha_prev, f_prev, g_prev = alpha, f_a, g_a
        alpha = min(2.0 * alpha, 1e6)
    return None


def minimize(objective, config):
    """BFGS with a strong-Wolfe line search.

    The inverse Hessian starts at the identity and is reset to the
    identity whenever the curvature pair is unusable (y.s <= 1e-10).
    Accepted steps are strictly decreasing in objective value.
    """
    if config.initial_point is None:
        raise ValueError("OptimizerConfig.initial_point is required")
    x = np.asarray(config.initial_point, dtype=float).ravel().copy()
    n = x.size
    if n != objective.dimension:
        raise ValueError(
            f"initial point has dimension {n}, objective expects {objective.dimension}"
        )

    f = float(objective.value(x))
    g = np.asarray(objective.gradient(x), dtype=float).ravel()
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise OptimizationError("objective is not finite at the initial point")

    eye = np.eye(n)
    H = eye.copy()
    first_curvature = True
    fresh_reset = False

    for iterations in range(1, config.max_iterations + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= config.gradient_tolerance:
            return OptimizeResult(x, f, gnorm, True, iterations - 1, "converged")
        p = -H @ g
        dphi0 = float(g @ p)
        if dphi0 >= 0.0 or not np.all(np.isfinite(p)):
            H = eye.copy()
            first_curvature = True
            p = -g
            dphi0 = -float(g @ g)

        cache = {}

        def phi(alpha, _p=p, _x=x, _cache=cache):
            xa = _x + alpha * _p
            fa = float(objective.value(xa))
            if not np.isfinite(fa):
                _cache[alpha] = (fa, None)
                return fa, np.nan
            ga = np.asarray(objective.gradient(xa), dtype=float).ravel()
            _cache[alpha] = (fa, ga)
            return fa, float(ga @ _p)

        hit = _line_search(phi, f, dphi0, config.c1, config.c2)
        if hit is None:
            if not fresh_reset:
                # retry once along steepest descent before giving up
                H = eye.copy()
                first_curvature = True
                fresh_reset = True
                continue
            return OptimizeResult(x, f, gnorm, False, iterations,
                                  "line search failed to find a decreasing step")
        fresh_reset = False
        alpha, f_new = hit
        g_new = cache[alpha][1]
        if g_new is None or not np.all(np.isfinite(g_new)):
            return OptimizeResult(x, f, gnorm, False, iterations,
                                  "gradient not finite at accepted step")

        s = alpha * p
        if f_new >= f and float(np.max(np.abs(s))) <= 1e-15 * (1.0 + float(np.max(np.abs(x)))):
            # progress below floating-point resolution
            return OptimizeResult(x, f, gnorm, gnorm <= config.gradient_tolerance,
                                  iterations, "step size underflow")
        y = g_new - g
        sy = float(y @ s)
        if sy <= _CURVATURE_EPS:
            H = eye.copy()
            first_curvature = True
        else:
            if first_curvature:
                H = (sy / float(y @ y)) * eye
                first_curvature = False
            Hy = H @ y
            rho = 1.0 / sy
            H -= rho * (np.outer(s, Hy) + np.outer(Hy, s))
            H += rho * (1.0 + rho * float(y @ Hy)) * np.outer(s, s)
        x = x + s
        f, g = f_new, g_new

    gnorm = float(np.linalg.norm(g))
    converged = gnorm <= config.gradient_tolerance
    message = "converged" if converged else "maximum iterations reached"
    return OptimizeResult(x, f, gnorm, converged, config.max_iterations, message)


def check_gradient(objective, point, step=1e-6):
    """Maximum relative error between analytic and central-difference gradients.

    The relative error per coordinate is |a - n| / (|a| + |n| + 1e-12).
    Costs two objective evaluations per dimension.
    """
    point = np.asarray(point, dtype=float).ravel()
    analytic = np.asarray(objective.gradient(point), dtype=float).ravel()
    numeric = np.empty_like(analytic)
    for i in range(point.size):
        delta = np.zeros_like(point)
        delta[i] = step
        numeric[i] = (objective.value(point + delta)
                      - objective.value(point - delta)) / (2.0 * step)
    denom = np.abs(analytic) + np.abs(numeric) + 1e-12
    return float(np.max(np.abs(analytic - numeric) / denom))
