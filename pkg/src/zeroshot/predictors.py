"""Classifier objects and the constrained QPs that predict them.

Linear classifiers are augmented hyperplanes c (the last entry is the
bias); kernel classifiers are anchor weight vectors beta = [weights,
bias] scored against [k(x, anchors), 1].

The main predictor combines three signals for an unseen class: the
regression prediction c~, the domain-transfer direction W't*, and the
requirement that seen-class images score negatively:

    minimize   c'c - alpha t*'W c - 2 gamma c'c~ + C sum_i zeta_i
    subject to c'x_i <= zeta_i,  zeta_i >= 0   (seen images)
               t*'W c >= l                     (transfer floor)

A simpler variant drops the transfer term and floor.  On the kernel
side, a one-class-SVM-shaped QP refines the transferred classifier:

    minimize   beta'K beta - zeta beta_dt'K beta + beta'a
    subject to sum(beta) = -1,  beta_dt'K beta >= l,  -C <= beta_i <= 0

with a the gram diagonal.  Plain one-class duals (positive and
negative orientation) are provided as building blocks; their optima
are exact mirror images.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PredictorError
from .qp import QpConfig, QpProblem, solve_qp

_FLOOR_MARGIN = 1e-9


@dataclass
class LinearClassifier:
    """An augmented hyperplane; score(x) = c . [x, 1]."""

    c: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()

    def score(self, rep):
        return float(np.dot(self.c, np.asarray(rep, float)))

    def score_many(self, reps):
        return np.atleast_2d(np.asarray(reps, float)) @ self.c


@dataclass
class KernelClassifier:
    """Anchor weights plus bias; score(k_col) = beta . [k(x, anchors), 1]."""

    beta: np.ndarray

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float).ravel()

    @property
    def n_anchors(self):
        return self.beta.size - 1

    def score(self, rep):
        rep = np.asarray(rep, float)
        if rep.shape[0] != self.beta.size:
            raise ValueError(
                f"kernel representation has {rep.shape[0]} entries, classifier "
                f"has {self.n_anchors} anchors plus bias"
            )
        return float(np.dot(self.beta, rep))

    def score_many(self, reps):
        reps = np.atleast_2d(np.asarray(reps, float))
        if reps.shape[1] != self.beta.size:
            raise ValueError(
                f"kernel representations have {reps.shape[1]} entries, "
                f"classifier has {self.n_anchors} anchors plus bias"
            )
        return reps @ self.beta


def score(classifier, rep):
    """Score one representation row under any classifier type."""
    return classifier.score(rep)


def predict_labels(classifiers, reps):
    """Multiclass decision: argmax score, ties to the lowest class id.

    classifiers maps class id -> classifier; reps holds one
    representation per row (augmented features for linear classifiers,
    kernel columns for kernel ones).
    """
    if not classifiers:
        raise ValueError("no classifiers given")
    ids = sorted(classifiers)
    scores = np.stack([classifiers[cid].score_many(reps) for cid in ids], axis=1)
    best = np.argmax(scores, axis=1)  # argmax returns the first (lowest) index on ties
    return np.array([ids[k] for k in best])


@dataclass
class PredictorConfig:
    """Weights for the combined linear predictor QP.

    floor=None disables the transfer-floor constraint (predictors that
    have no transfer signal always run without it).
    """

    alpha: float = 100.0
    gamma: float = 1.0
    C: float = 1.0
    floor: float = None
    qp: QpConfig = field(default_factory=QpConfig)


def _hinge_qp(d1, n_images, quad_diag, q_c, slack_weight, X_aug,
              extra_row=None, extra_rhs=None, qp_config=None):
    """Assemble min 0.5 v'Pv + q'v with v = [c, zeta] and hinge rows."""
    n_var = d1 + n_images
    P = np.zeros((n_var, n_var))
    P[:d1, :d1] = np.diag(quad_diag)
    q = np.concatenate([q_c, np.full(n_images, slack_weight)])
    rows = [np.hstack([X_aug, -np.eye(n_images)])]
    rhs = [np.zeros(n_images)]
    if extra_row is not None:
        rows.append(np.concatenate([extra_row, np.zeros(n_images)])[None, :])
        rhs.append(np.array([extra_rhs]))
    A_ineq = np.vstack(rows)
    b_ineq = np.concatenate(rhs)
    lower = np.concatenate([np.full(d1, -np.inf), np.zeros(n_images)])
    return solve_qp(QpProblem(Q=P, q=q, A_ineq=A_ineq, b_ineq=b_ineq, lower=lower),
                    qp_config or QpConfig())


def predict_linear_E(t_star, prediction, transfer, X_seen, config=None):
    """Combined predictor: regression + transfer + seen-image constraints.

    t_star: augmented text vector of the unseen class.
    prediction: regression output whose mean is c~.
    transfer: trained map providing W and the default floor l.
    X_seen: augmented seen-class images that must score <= 0 (slack-
    penalized with weight C).
    """
    config = config or PredictorConfig()
    X_seen = np.atleast_2d(np.asarray(X_seen, float))
    w = transfer.W.T @ np.asarray(t_star, float).ravel()
    c_tilde = prediction.mean
    d1 = c_tilde.size
    if w.size != d1 or X_seen.shape[1] != d1:
        raise ValueError("classifier, transfer, and image dimensions disagree")
    floor = transfer.l if config.floor is None else config.floor
    extra_row, extra_rhs = None, None
    if floor is not None and np.isfinite(floor):
        extra_row = -w
        extra_rhs = -(floor + _FLOOR_MARGIN)
    q_c = -config.alpha * w - 2.0 * config.gamma * c_tilde
    sol = _hinge_qp(d1, len(X_seen), np.full(d1, 2.0), q_c, config.C, X_seen,
                    extra_row, extra_rhs, config.qp)
    if sol.status == "infeasible":
        raise PredictorError(
            f"combined predictor is infeasible at floor l={floor}; "
            "lower the floor or disable it"
        )
    return LinearClassifier(c=sol.x[:d1])


def predict_linear_B(prediction, X_seen, config=None):
    """Regression-only predictor with seen-image slack constraints.

    minimize c'c + alpha c'c~ + C sum zeta, subject to c'x_i <= zeta_i.
    alpha < 0 rewards alignment with the regression mean; the default
    follows that convention.
    """
    config = config or PredictorConfig(alpha=-2.0)
    X_seen = np.atleast_2d(np.asarray(X_seen, float))
    c_tilde = prediction.mean
    d1 = c_tilde.size
    if X_seen.shape[1] != d1:
        raise ValueError("classifier and image dimensions disagree")
    sol = _hinge_qp(d1, len(X_seen), np.full(d1, 2.0),
                    config.alpha * c_tilde, config.C, X_seen,
                    qp_config=config.qp)
    if sol.status == "infeasible":
        raise PredictorError("regression predictor QP is infeasible")
    return LinearClassifier(c=sol.x[:d1])


def one_class_svm(gram, C, sign=1, qp_config=None):
    """One-class SVM dual over a training gram, in either orientation.

    sign=+1: minimize beta'K beta - beta'a, sum(beta) = 1, 0 <= beta <= C.
    sign=-1: minimize beta'K beta + beta'a, sum(beta) = -1, -C <= beta <= 0.
    a is the gram diagonal.  The two optima are exact negations.
    """
    K = np.atleast_2d(np.asarray(gram, float))
    n = K.shape[0]
    if K.shape != (n, n):
        raise ValueError("gram must be square")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if C < 1.0 / n:
        raise ValueError(
            f"C={C} is too small: sum(|beta|) = 1 needs C >= 1/n = {1.0 / n:.4g}"
        )
    a = np.diag(K).copy()
    ones = np.ones((1, n))
    if sign == 1:
        problem = QpProblem(Q=2.0 * K, q=-a, A_eq=ones, b_eq=np.array([1.0]),
                            lower=np.zeros(n), upper=np.full(n, C))
    else:
        problem = QpProblem(Q=2.0 * K, q=a, A_eq=ones, b_eq=np.array([-1.0]),
                            lower=np.full(n, -C), upper=np.zeros(n))
    sol = solve_qp(problem, qp_config or QpConfig())
    if sol.status == "infeasible":
        raise PredictorError("one-class SVM dual is infeasible")
    return sol.x


@dataclass
class KernelPredictorConfig:
    """Weights for the kernel-space refinement QP."""

    zeta: float = 1.0
    C: float = 1.0
    floor: float = 1.0
    qp: QpConfig = field(default_factory=QpConfig)


def predict_kernel_svm_dt(beta_dt, gram, config=None):
    """Refine a transferred kernel classifier with a one-class-style QP.

    beta_dt: the transferred classifier (anchor weights + bias).
    gram: the N x N training gram over the same anchors.
    The bias entry is carried over unchanged; only
    the anchor weights are re-optimized.
    """
    config = config or KernelPredictorConfig()
    beta_dt = beta_dt.beta if isinstance(beta_dt, KernelClassifier) else \
        np.asarray(beta_dt, float).ravel()
    K = np.atleast_2d(np.asarray(gram, float))
    n = K.shape[0]
    if beta_dt.size != n + 1:
        raise ValueError(
            f"transferred classifier has {beta_dt.size} entries, expected "
            f"{n + 1} for {n} anchors plus bias"
        )
    b_hat = beta_dt[:n]
    a = np.diag(K).copy()
    Kb = K @ b_hat
    rows = [-Kb[None, :]]
    rhs = [np.array([-(config.floor + _FLOOR_MARGIN)])]
    problem = QpProblem(
        Q=2.0 * K,
        q=a - config.zeta * Kb,
        A_ineq=np.vstack(rows),
        b_ineq=np.concatenate(rhs),
        A_eq=np.ones((1, n)),
        b_eq=np.array([-1.0]),
        lower=np.full(n, -config.C),
        upper=np.zeros(n),
    )
    sol = solve_qp(problem, config.qp)
    if sol.status == "infeasible":
        raise PredictorError(
            f"kernel refinement is infeasible at floor l={config.floor}; "
            "lower the floor or raise C"
        )
    return KernelClassifier(beta=np.concatenate([sol.x, [beta_dt[n]]]))
