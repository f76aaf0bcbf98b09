"""Convex quadratic programming via operator-splitting (ADMM).

Problems are posed as

    minimize    0.5 x'Qx + q'x
    subject to  A_ineq x <= b_ineq
                A_eq   x  = b_eq
                lower <= x <= upper

and converted internally to the unified two-sided form l <= Ax <= u:
inequality rows get bounds (-inf, b], equality rows [b, b], and the box
becomes identity rows.  The splitting iteration follows the usual
structure (x-update by a regularized linear solve, projection z-update,
over-relaxed dual update) with Ruiz diagonal preconditioning, and a
final active-set polish step recovers high-accuracy KKT residuals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

_RHO_EQ_SCALE = 1e3
_MIN_SCALING = 1e-4


@dataclass
class QpProblem:
    Q: np.ndarray
    q: np.ndarray
    A_ineq: np.ndarray = None
    b_ineq: np.ndarray = None
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None
    lower: np.ndarray = None
    upper: np.ndarray = None


@dataclass
class QpConfig:
    tol: float = 1e-6
    max_iter: int = 20000
    rho: float = 0.1
    sigma: float = 1e-6
    over_relaxation: float = 1.6
    scaling_iters: int = 10
    check_every: int = 25
    infeasibility_tol: float = 1e-7


@dataclass
class QpSolution:
    x: np.ndarray
    objective: float
    primal_residual: float
    dual_residual: float
    complementarity: float
    status: str
    iterations: int
    duals: np.ndarray = None


def _as_matrix(A, n, name):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    if A.ndim != 2 or A.shape[1] != n:
        raise ValueError(f"{name} must have {n} columns, got shape {A.shape}")
    return A


def _stack_constraints(problem, n):
    """Build the unified l <= Ax <= u description."""
    blocks, lows, highs = [], [], []
    if problem.A_ineq is not None:
        A = _as_matrix(problem.A_ineq, n, "A_ineq")
        b = np.atleast_1d(np.asarray(problem.b_ineq, dtype=float))
        if b.shape != (A.shape[0],):
            raise ValueError("b_ineq length must match A_ineq rows")
        blocks.append(A)
        lows.append(np.full(A.shape[0], -np.inf))
        highs.append(b)
    if problem.A_eq is not None:
        A = _as_matrix(problem.A_eq, n, "A_eq")
        b = np.atleast_1d(np.asarray(problem.b_eq, dtype=float))
        if b.shape != (A.shape[0],):
            raise ValueError("b_eq length must match A_eq rows")
        blocks.append(A)
        lows.append(b)
        highs.append(b)
    lower = np.full(n, -np.inf) if problem.lower is None else \
        np.broadcast_to(np.asarray(problem.lower, dtype=float), (n,)).copy()
    upper = np.full(n, np.inf) if problem.upper is None else \
        np.broadcast_to(np.asarray(problem.upper, dtype=float), (n,)).copy()
    blocks.append(np.eye(n))
    lows.append(lower)
    highs.append(upper)
    A = np.vstack(blocks)
    l = np.concatenate(lows)
    u = np.concatenate(highs)
    if np.any(l > u):
        raise ValueError("constraint has lower bound above upper bound")
    return A, l, u


def _validate_Q(Q, n):
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (n, n):
        raise ValueError(f"Q must be {n}x{n}, got {Q.shape}")
    scale = 1.0 + np.max(np.abs(Q))
    if np.max(np.abs(Q - Q.T)) > 1e-8 * scale:
        raise ValueError("Q must be symmetric")
    Q = 0.5 * (Q + Q.T)
    w = np.linalg.eigvalsh(Q)
    if w.min() < -1e-8 * max(1.0, abs(w.max())):
        raise ValueError(f"Q must be positive semidefinite (min eigenvalue {w.min():.3e})")
    return Q


def _ruiz_scale(Q, q, A, iters):
    """Symmetric diagonal equilibration of the KKT data.

    Returns scaled (Q, q, A) along with the diagonal scalings D (n), E
    (m) and the cost scaling c.  Solutions map back as x = D x_bar and
    y = E y_bar / c.
    """
    n = Q.shape[0]
    m = A.shape[0]
    D = np.ones(n)
    E = np.ones(m)
    c = 1.0
    Qs, qs, As = Q.copy(), q.copy(), A.copy()
    for _ in range(iters):
        col = np.maximum(np.abs(Qs).max(axis=0), np.abs(As).max(axis=0))
        col = np.where(col < _MIN_SCALING, 1.0, col)
        d = 1.0 / np.sqrt(col)
        row = np.abs(As).max(axis=1)
        row = np.where(row < _MIN_SCALING, 1.0, row)
        e = 1.0 / np.sqrt(row)
        Qs = d[:, None] * Qs * d[None, :]
        qs = d * qs
        As = e[:, None] * As * d[None, :]
        D *= d
        E *= e
        # cost scaling keeps the quadratic and linear parts comparable
        qnorm = np.abs(qs).max() if qs.size else 0.0
        pnorm = np.abs(Qs).max(axis=0)
        pmean = pnorm[pnorm > 0].mean() if np.any(pnorm > 0) else 0.0
        gamma = max(pmean, qnorm)
        if gamma > _MIN_SCALING:
            Qs /= gamma
            qs /= gamma
            c /= gamma
    return Qs, qs, As, D, E, c


def _kkt_residuals(Q, q, A, l, u, x, y):
    """Unscaled primal, dual, and complementarity residuals."""
    Ax = A @ x
    primal = float(np.max(np.maximum(np.maximum(l - Ax, Ax - u), 0.0)))
    dual = float(np.max(np.abs(Q @ x + q + A.T @ y))) if y.size else \
        float(np.max(np.abs(Q @ x + q)))
    comp = 0.0
    for i in range(len(y)):
        if y[i] > 0.0:
            gap = np.inf if np.isinf(u[i]) else abs(u[i] - Ax[i])
            comp = max(comp, min(y[i], y[i] * gap))
        elif y[i] < 0.0:
            gap = np.inf if np.isinf(l[i]) else abs(Ax[i] - l[i])
            comp = max(comp, min(-y[i], -y[i] * gap))
    return primal, dual, float(comp)


def _polish_with(Q, q, A, l, u, low_active, up_active):
    """Equality-constrained re-solve for a guessed active set."""
    rows = np.where(low_active | up_active)[0]
    n = Q.shape[0]
    A_act = A[rows]
    b_act = np.where(low_active[rows], l[rows], u[rows])
    k = len(rows)
    kkt = np.zeros((n + k, n + k))
    kkt[:n, :n] = Q
    kkt[:n, n:] = A_act.T
    kkt[n:, :n] = A_act
    rhs = np.concatenate([-q, b_act])
    try:
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    except np.linalg.LinAlgError:
        return None
    x_new = sol[:n]
    y_new = np.zeros(len(l))
    y_new[rows] = sol[n:]
    return x_new, y_new, _kkt_residuals(Q, q, A, l, u, x_new, y_new)


def _polish(Q, q, A, l, u, x, y, tol):
    """Re-solve with the ADMM-identified active set as equalities.

    The active set is guessed first from dual signs, then (as a
    fallback) from proximity of Ax to the bounds.  Returns the polished
    point when it improves the worst KKT residual, otherwise None.
    """
    res_old = _kkt_residuals(Q, q, A, l, u, x, y)
    eq_rows = np.isfinite(l) & np.isfinite(u) & (l == u)
    guesses = [((y < 0.0) | eq_rows, (y > 0.0) & ~eq_rows)]
    Ax = A @ x
    near = 10.0 * max(tol, max(res_old))
    with np.errstate(invalid="ignore"):
        low_prox = np.isfinite(l) & (Ax - l <= near * (1.0 + np.abs(l)))
        up_prox = np.isfinite(u) & (u - Ax <= near * (1.0 + np.abs(u)))
    guesses.append((low_prox | eq_rows, up_prox & ~eq_rows & ~low_prox))
    best = None
    for low_active, up_active in guesses:
        out = _polish_with(Q, q, A, l, u, low_active, up_active)
        if out is None:
            continue
        if best is None or max(out[2]) < max(best[2]):
            best = out
    if best is not None and max(best[2]) <= max(max(res_old), tol):
        return best
    return None


def _infeasibility_certificate(A, l, u, dy, tol):
    """True when dy certifies that l <= Ax <= u has no solution."""
    norm = np.max(np.abs(dy))
    if norm <= 1e-14:
        return False
    dy = dy / norm
    if np.max(np.abs(A.T @ dy)) > tol:
        return False
    pos = np.maximum(dy, 0.0)
    neg = np.minimum(dy, 0.0)
    # entries pushing on an infinite bound cannot certify anything
    if np.any(pos[np.isinf(u)] > tol) or np.any(neg[np.isinf(l)] < -tol):
        return False
    support = float(np.sum(u[pos > tol] * pos[pos > tol])
                    + np.sum(l[neg < -tol] * neg[neg < -tol]))
    return support < -tol


def solve_qp(problem, config=None):
    """Solve a convex QP; status is 'optimal', 'max_iter', or 'infeasible'."""
    config = config or QpConfig()
    q = np.atleast_1d(np.asarray(problem.q, dtype=float))
    n = q.size
    Q = _validate_Q(problem.Q, n)
    A, l, u = _stack_constraints(problem, n)
    m = A.shape[0]

    Qs, qs, As, D, E, c = _ruiz_scale(Q, q, A, config.scaling_iters)
    ls = E * l
    us = E * u

    eq_rows = np.isclose(ls, us)
    rho = np.where(eq_rows, _RHO_EQ_SCALE * config.rho, config.rho)
    sigma = config.sigma
    alpha = config.over_relaxation

    def factor(rho_vec):
        K = Qs + sigma * np.eye(n) + As.T @ (rho_vec[:, None] * As)
        return scipy.linalg.cho_factor(K)

    chol = factor(rho)
    x = np.zeros(n)
    z = np.clip(np.zeros(m), ls, us)
    y = np.zeros(m)
    y_prev_check = y.copy()

    best = None
    status = "max_iter"
    iterations = config.max_iter

    for k in range(1, config.max_iter + 1):
        rhs = sigma * x - qs + As.T @ (rho * z - y)
        x_tilde = scipy.linalg.cho_solve(chol, rhs)
        z_tilde = As @ x_tilde
        x = alpha * x_tilde + (1.0 - alpha) * x
        z_relaxed = alpha * z_tilde + (1.0 - alpha) * z
        z_new = np.clip(z_relaxed + y / rho, ls, us)
        y = y + rho * (z_relaxed - z_new)
        z = z_new

        if k % config.check_every == 0 or k == config.max_iter:
            x_u = D * x
            y_u = (E * y) / c
            z_u = z / E
            r_prim = float(np.max(np.abs(A @ x_u - z_u)))
            r_dual = float(np.max(np.abs(Q @ x_u + q + A.T @ y_u)))
            eps_p = config.tol * max(1.0, np.max(np.abs(A @ x_u)), np.max(np.abs(z_u)))
            eps_d = config.tol * max(1.0, np.max(np.abs(Q @ x_u)),
                                     np.max(np.abs(A.T @ y_u)), np.max(np.abs(q)))
            if r_prim <= eps_p and r_dual <= eps_d:
                best = (x_u, y_u)
                iterations = k
                status = "optimal"
                break
            dy = (E * (y - y_prev_check)) / c
            if _infeasibility_certificate(A, l, u, dy, config.infeasibility_tol):
                prim, dual, comp = _kkt_residuals(Q, q, A, l, u, x_u, y_u)
                return QpSolution(x=x_u, objective=float(0.5 * x_u @ Q @ x_u + q @ x_u),
                                  primal_residual=prim, dual_residual=dual,
                                  complementarity=comp, status="infeasible",
                                  iterations=k, duals=y_u)
            y_prev_check = y.copy()
            # adaptive step size: rebalance primal vs dual progress
            scale_p = max(np.max(np.abs(A @ x_u)), np.max(np.abs(z_u)), 1.0)
            scale_d = max(np.max(np.abs(Q @ x_u)), np.max(np.abs(A.T @ y_u)),
                          np.max(np.abs(q)), 1.0)
            ratio = np.sqrt((r_prim / scale_p) / max(r_dual / scale_d, 1e-16))
            if ratio > 5.0 or ratio < 0.2:
                rho = np.clip(rho * ratio, 1e-6, 1e6)
                chol = factor(rho)

    if best is None:
        x_u = D * x
        y_u = (E * y) / c
        best = (x_u, y_u)

    x_u, y_u = best
    polished = _polish(Q, q, A, l, u, x_u, y_u, config.tol)
    if polished is not None:
        x_u, y_u, (prim, dual, comp) = polished
    else:
        prim, dual, comp = _kkt_residuals(Q, q, A, l, u, x_u, y_u)

    return QpSolution(
        x=x_u,
        objective=float(0.5 * x_u @ Q @ x_u + q @ x_u),
        primal_residual=prim,
        dual_residual=dual,
        complementarity=comp,
        status=status,
        iterations=iterations,
        duals=y_u,
    )
