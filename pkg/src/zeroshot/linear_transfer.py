"""Linear domain transfer: a bilinear map W scoring text against images.

W is trained so that t_i' W x_j is large (>= l) when image j belongs to
class i and small (<= u) otherwise, using squared hinges.  Rather than
optimizing W directly, the loss is minimized over a smaller matrix L
with W recovered in closed form:

    score matrix  T W X' = K_T^{1/2} L K_X^{1/2}
    W* = T' K_T^{-1/2} L* K_X^{-1/2} X

where K_T = T T' and K_X = X X' are the gram matrices of the
(augmented) text and image rows.  This keeps the variable count at
n_classes * n_images independent of the feature dimensions, and the
ridge term ||L||_F^2 plays the role of the regularizer on W.

The constrained variant adds lam2 * sum_j ||c_j - W't_j||^2, pulling
each seen class's transferred classifier toward the one trained from
its images; lam2 = 0 recovers the plain trainer exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import is_augmented
from .errors import OptimizationError
from .kernels import inverse_sqrt, psd_sqrt
from .numopt import ObjectiveFn, OptimizerConfig, minimize


@dataclass
class DtConfig:
    lam: float = 1.0
    l: float = 2.0
    u: float = -2.0
    lam2: float = 0.0
    max_pairs: int = 1_000_000
    cross_per_same: int = 10
    seed: int = 0
    max_iterations: int = 500
    gradient_tolerance: float = 1e-5

    def __post_init__(self):
        if not self.l > self.u:
            raise ValueError(f"need l > u, got l={self.l}, u={self.u}")
        if self.lam < 0 or self.lam2 < 0:
            raise ValueError("hinge and constraint weights must be nonnegative")


@dataclass
class LinearTransfer:
    """Trained transfer map plus the thresholds it was trained with."""

    W: np.ndarray
    l: float
    u: float
    converged: bool = True
    iterations: int = 0
    loss: float = 0.0
    loss_at_zero: float = 0.0


def _class_image_masks(labels, n_classes, n_images, max_pairs, cross_per_same, seed):
    """Same-class / cross-class pair masks, subsampled when huge.

    When n_classes * n_images exceeds max_pairs, all same-class pairs
    are kept and cross-class pairs are subsampled to cross_per_same
    times the same count, deterministically.
    """
    same = np.zeros((n_classes, n_images), dtype=bool)
    for i in range(n_classes):
        same[i] = labels == (i + 1)
    diff = ~same
    if n_classes * n_images > max_pairs:
        rng = np.random.default_rng(seed)
        keep = np.zeros_like(diff)
        budget = cross_per_same * int(same.sum())
        idx = np.argwhere(diff)
        chosen = rng.choice(len(idx), size=min(budget, len(idx)), replace=False)
        keep[idx[chosen, 0], idx[chosen, 1]] = True
        diff = keep
    return same, diff


def train_dt(T, X, labels, config=None, seen_classifiers=None):
    """Learn the transfer map from seen-class text and images.

    T: (n_classes, d_t+1) augmented text vectors, row i for class i+1.
    X: (n_images, d_v+1) augmented image vectors with integer labels.
    seen_classifiers: optional (n_classes, d_v+1) matrix of trained
    hyperplanes, used only when config.lam2 > 0.
    """
    config = config or DtConfig()
    T = np.atleast_2d(np.asarray(T, float))
    X = np.atleast_2d(np.asarray(X, float))
    labels = np.asarray(labels, dtype=int)
    n_classes, n_images = len(T), len(X)
    if labels.shape != (n_images,):
        raise ValueError("one label per image row is required")
    if set(np.unique(labels)) != set(range(1, n_classes + 1)):
        raise ValueError(
            f"labels must cover 1..{n_classes} to match the text rows"
        )
    if not is_augmented(T) or not is_augmented(X):
        raise ValueError("text and image rows must be augmented (trailing 1)")
    if config.lam2 > 0 and seen_classifiers is None:
        raise ValueError("constrained training needs seen_classifiers")

    K_T = T @ T.T
    K_X = X @ X.T
    S_T = psd_sqrt(K_T)
    S_X = psd_sqrt(K_X)
    R_T = inverse_sqrt(K_T)
    R_X = inverse_sqrt(K_X)

    same, diff = _class_image_masks(labels, n_classes, n_images,
                                    config.max_pairs, config.cross_per_same,
                                    config.seed)
    lam, lam2 = config.lam, config.lam2
    l_th, u_th = config.l, config.u
    if lam2 > 0:
        C_sc = np.atleast_2d(np.asarray(seen_classifiers, float))
        if C_sc.shape[0] != n_classes:
            raise ValueError("one seen classifier per class is required")
        B = R_X @ X  # (n_images, d_v+1)

    shape = (n_classes, n_images)

    def value(Lflat):
        L = Lflat.reshape(shape)
        scores = S_T @ L @ S_X
        e_same = np.maximum(0.0, l_th - scores) * same
        e_diff = np.maximum(0.0, scores - u_th) * diff
        f = float(np.sum(L * L)) + lam * float(np.sum(e_same ** 2)) \
            + lam * float(np.sum(e_diff ** 2))
        if lam2 > 0:
            r = C_sc - S_T @ L @ B
            f += lam2 * float(np.sum(r * r))
        return f

    def gradient(Lflat):
        L = Lflat.reshape(shape)
        scores = S_T @ L @ S_X
        g_scores = (-2.0 * lam) * (np.maximum(0.0, l_th - scores) * same) \
            + (2.0 * lam) * (np.maximum(0.0, scores - u_th) * diff)
        grad = 2.0 * L + S_T @ g_scores @ S_X
        if lam2 > 0:
            r = C_sc - S_T @ L @ B
            grad += (2.0 * lam2) * (S_T @ (-r) @ B.T)
        return grad.ravel()

    objective = ObjectiveFn(value=value, gradient=gradient,
                            dimension=n_classes * n_images)
    loss_at_zero = value(np.zeros(objective.dimension))
    result = minimize(objective, OptimizerConfig(
        initial_point=np.zeros(objective.dimension),
        max_iterations=config.max_iterations,
        gradient_tolerance=config.gradient_tolerance))
    if not np.isfinite(result.value):
        raise OptimizationError("transfer training diverged")
    L_opt = result.point.reshape(shape)
    W = T.T @ R_T @ L_opt @ R_X @ X
    return LinearTransfer(W=W, l=l_th, u=u_th, converged=result.converged,
                          iterations=result.iterations, loss=result.value,
                          loss_at_zero=loss_at_zero)


def train_constrained_dt(T, X, labels, seen_classifiers, config=None):
    """Transfer training with the classifier-matching penalty active."""
    config = config or DtConfig(lam2=1.0)
    if config.lam2 <= 0:
        raise ValueError("constrained training expects lam2 > 0")
    return train_dt(T, X, labels, config=config, seen_classifiers=seen_classifiers)


def transfer_classifier(transfer, t_star):
    """The hyperplane W't_* induced by the transfer map for a text vector."""
    t_star = np.asarray(t_star, float).ravel()
    if t_star.shape[0] != transfer.W.shape[0]:
        raise ValueError(
            f"text vector has dimension {t_star.shape[0]}, transfer expects "
            f"{transfer.W.shape[0]}"
        )
    return transfer.W.T @ t_star
