"""Kernel-space domain transfer and the SVM trainers feeding it.

Seen-class classifiers are trained as kernel SVMs (dual coordinate
pair updates, LIBSVM-style first-order working-set selection).  A
classifier is a vector of length N+1: one weight per training anchor
plus a bias, scoring an image by beta . [k(x, x_1..N), 1].

The transfer map Psi turns a text-side kernel vector g(t*) into such a
classifier, beta(t*) = Psi' g(t*).  Training minimizes

    0.5 ||Psi||_F^2
    + lam1 * [ sum_same max(0, l - m_ij)^2
             + r * sum_diff max(0, m_ij - u)^2 ]
    + lam2 * sum_i ||beta_i - Psi' g(t_i)||^2

with m = G Psi K the text-class-by-image score matrix, r the
cross-to-same pair count ratio balancing the hinge terms, and the
lam2 term anchoring transferred classifiers to the trained seen ones
(its unconstrained minimum is Psi = G^-1 B').
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OptimizationError
from .numopt import ObjectiveFn, OptimizerConfig, minimize

_SMO_TOL = 1e-9


def _smo_solve(K, y, C, tol=_SMO_TOL, max_iter=None):
    """Binary SVM dual in beta = alpha * y form.

    minimize 0.5 beta'K beta - y'beta   s.t.  sum(beta) = 0,
    beta_i in [0, C] when y_i = +1, [-C, 0] when y_i = -1.

    Returns (beta, bias).
    """
    n = len(y)
    if max_iter is None:
        max_iter = max(200 * n * n, 20000)
    lo = np.where(y > 0, 0.0, -C)
    up = np.where(y > 0, C, 0.0)
    beta = np.zeros(n)
    Kbeta = np.zeros(n)
    for _ in range(max_iter):
        grad_up = y - Kbeta  # ascent direction of the dual objective
        can_up = beta < up - 1e-12
        can_dn = beta > lo + 1e-12
        if not can_up.any() or not can_dn.any():
            break
        i = int(np.argmax(np.where(can_up, grad_up, -np.inf)))
        j = int(np.argmin(np.where(can_dn, grad_up, np.inf)))
        m_up = grad_up[i]
        m_dn = grad_up[j]
        if m_up - m_dn <= tol:
            break
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        d = (m_up - m_dn) / max(quad, 1e-12)
        d = min(d, up[i] - beta[i], beta[j] - lo[j])
        beta[i] += d
        beta[j] -= d
        Kbeta += d * (K[:, i] - K[:, j])
    grad_up = y - Kbeta
    free = (beta > lo + 1e-8 * C) & (beta < up - 1e-8 * C)
    if free.any():
        bias = float(np.mean(grad_up[free]))
    else:
        can_up = beta < up - 1e-12
        can_dn = beta > lo + 1e-12
        hi = np.max(np.where(can_up, grad_up, -np.inf)) if can_up.any() else 0.0
        lo_v = np.min(np.where(can_dn, grad_up, np.inf)) if can_dn.any() else 0.0
        bias = float(0.5 * (hi + lo_v))
    return beta, bias


@dataclass
class SeenKernelClassifiers:
    """One kernel classifier per seen class, columns of B: [beta; bias]."""

    B: np.ndarray
    class_ids: list

    @property
    def n_anchors(self):
        return self.B.shape[0] - 1

    def classifier(self, class_id):
        return self.B[:, self.class_ids.index(class_id)]


def train_seen_kernel_classifiers(gram, labels, C=10.0):
    """One-vs-rest kernel SVMs on a precomputed training gram."""
    K = np.asarray(gram, float)
    labels = np.asarray(labels, dtype=int)
    n = len(labels)
    if K.shape != (n, n):
        raise ValueError(f"gram must be {n}x{n} to match the labels")
    if C <= 0:
        raise ValueError("SVM cost C must be positive")
    class_ids = sorted(set(int(v) for v in labels))
    if len(class_ids) < 2:
        raise ValueError("need at least two classes to train classifiers")
    B = np.zeros((n + 1, len(class_ids)))
    for col, cid in enumerate(class_ids):
        y = np.where(labels == cid, 1.0, -1.0)
        beta, bias = _smo_solve(K, y, C)
        B[:n, col] = beta
        B[n, col] = bias
    return SeenKernelClassifiers(B=B, class_ids=class_ids)


def train_seen_linear_classifiers(X, labels, C=10.0):
    """One-vs-rest linear SVMs; row j is the augmented hyperplane [w_j, b_j]."""
    X = np.atleast_2d(np.asarray(X, float))
    K = X @ X.T
    seen = train_seen_kernel_classifiers(K, labels, C=C)
    n = len(X)
    rows = []
    for cid in seen.class_ids:
        bk = seen.classifier(cid)
        w = X.T @ bk[:n]
        rows.append(np.concatenate([w, [bk[n]]]))
    return np.stack(rows)


def kernel_columns(gram_values):
    """Stack a bias row of ones under an N x N training gram.

    Column j is the representation [k(x_j, x_1..N), 1] that kernel
    classifiers score against.
    """
    K = np.atleast_2d(np.asarray(gram_values, float))
    return np.vstack([K, np.ones((1, K.shape[1]))])


@dataclass
class KernelDtConfig:
    lam1: float = 1.0
    lam2: float = 1.0
    l: float = 2.0
    u: float = -2.0
    max_iterations: int = 500
    gradient_tolerance: float = 1e-5

    def __post_init__(self):
        if not self.l > self.u:
            raise ValueError(f"need l > u, got l={self.l}, u={self.u}")
        if self.lam1 < 0 or self.lam2 < 0:
            raise ValueError("loss weights must be nonnegative")


@dataclass
class KernelTransfer:
    """Trained Psi plus the thresholds and anchor count it assumes."""

    psi: np.ndarray
    l: float
    u: float
    converged: bool = True
    iterations: int = 0
    loss: float = 0.0
    loss_at_zero: float = 0.0

    @property
    def n_anchors(self):
        return self.psi.shape[1] - 1


def kernel_dt_objective(G, K_cols, labels, B, config):
    """Value/gradient closures for the Psi training loss.

    Exposed separately so the analytic gradient can be checked against
    finite differences.
    """
    G = np.atleast_2d(np.asarray(G, float))
    K_cols = np.atleast_2d(np.asarray(K_cols, float))
    labels = np.asarray(labels, dtype=int)
    n_classes = G.shape[0]
    n_images = K_cols.shape[1]
    if G.shape != (n_classes, n_classes):
        raise ValueError("text gram must be square")
    if labels.shape != (n_images,):
        raise ValueError("one label per kernel column is required")
    if set(np.unique(labels)) != set(range(1, n_classes + 1)):
        raise ValueError(f"labels must cover 1..{n_classes}")

    same = np.zeros((n_classes, n_images), dtype=bool)
    for i in range(n_classes):
        same[i] = labels == (i + 1)
    diff = ~same
    n_same = int(same.sum())
    n_diff = int(diff.sum())
    r = n_diff / n_same if n_same else 1.0

    lam1, lam2 = config.lam1, config.lam2
    l_th, u_th = config.l, config.u
    Bt = None
    if lam2 > 0:
        if B is None:
            raise ValueError("lam2 > 0 requires trained seen classifiers B")
        Bt = np.asarray(B, float).T  # (n_classes, n_anchors+1)
        if Bt.shape != (n_classes, K_cols.shape[0]):
            raise ValueError("B must be (n_anchors+1) x n_classes")

    shape = (n_classes, K_cols.shape[0])

    def value(psi_flat):
        psi = psi_flat.reshape(shape)
        m = G @ psi @ K_cols
        h_same = np.maximum(0.0, l_th - m) * same
        h_diff = np.maximum(0.0, m - u_th) * diff
        f = 0.5 * float(np.sum(psi * psi)) \
            + lam1 * (float(np.sum(h_same ** 2)) + r * float(np.sum(h_diff ** 2)))
        if lam2 > 0:
            resid = Bt - G @ psi
            f += lam2 * float(np.sum(resid * resid))
        return f

    def gradient(psi_flat):
        psi = psi_flat.reshape(shape)
        m = G @ psi @ K_cols
        v = (-2.0 * lam1) * (np.maximum(0.0, l_th - m) * same) \
            + (2.0 * lam1 * r) * (np.maximum(0.0, m - u_th) * diff)
        grad = psi + G @ v @ K_cols.T
        if lam2 > 0:
            resid = Bt - G @ psi
            grad += (2.0 * lam2) * (G @ (-resid))
        return grad.ravel()

    return ObjectiveFn(value=value, gradient=gradient,
                       dimension=shape[0] * shape[1]), shape


def train_kernel_dt(G, K_cols, labels, B=None, config=None):
    """Learn Psi from the text gram, image kernel columns, and labels."""
    config = config or KernelDtConfig()
    objective, shape = kernel_dt_objective(G, K_cols, labels, B, config)
    loss_at_zero = objective.value(np.zeros(objective.dimension))
    result = minimize(objective, OptimizerConfig(
        initial_point=np.zeros(objective.dimension),
        max_iterations=config.max_iterations,
        gradient_tolerance=config.gradient_tolerance))
    if not np.isfinite(result.value):
        raise OptimizationError("kernel transfer training diverged")
    return KernelTransfer(psi=result.point.reshape(shape), l=config.l,
                          u=config.u, converged=result.converged,
                          iterations=result.iterations, loss=result.value,
                          loss_at_zero=loss_at_zero)


def kernel_transfer_classifier(transfer, g_star):
    """Classifier vector Psi' g for a text-side kernel vector g."""
    g_star = np.asarray(g_star, float).ravel()
    if g_star.shape[0] != transfer.psi.shape[0]:
        raise ValueError(
            f"text kernel vector has {g_star.shape[0]} entries, transfer "
            f"expects {transfer.psi.shape[0]}"
        )
    return transfer.psi.T @ g_star
