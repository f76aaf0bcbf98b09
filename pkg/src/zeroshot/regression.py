"""Regressing classifier hyperplanes from text features.

Two regressors map a text-feature vector t to a classifier vector c
using the seen classes as training pairs (t_j, c_j):

* Gaussian-process regression: the posterior mean k_t' (K_T + lam I)^-1 C.
* Twin Gaussian-process regression: the output c is chosen so that its
  kernel geometry among the training outputs matches the input's kernel
  geometry among the training inputs, by minimizing

      K_C(c, c) - 2 k_c(c)'u - eta * log(K_C(c, c) - k_c(c)'M k_c(c))

  with u = (K_T + lam_t I)^-1 k_t(t*), eta the input-side posterior
  variance, and M = (K_C + lam_c I)^-1.  Gaussian kernels
  exp(-rho ||a - b||^2) are used on both sides, so K(x, x) = 1.

The prediction is wrapped as a unit-covariance Gaussian over c, whose
log-density (up to constants) is -(c - mean)'(c - mean).
"""

from __future__ import annotations

from dataclasses import dataclass, field
import warnings

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from .errors import RegressionError
from .kernels import median_bandwidth
from .numopt import ObjectiveFn, OptimizerConfig, minimize

_ETA_FLOOR = 1e-12
_ETA_DEGENERATE = -1e-6


@dataclass
class RegressorPrediction:
    """A predicted classifier as an isotropic Gaussian: N(mean, I)."""

    mean: np.ndarray
    covariance: np.ndarray


def log_preg(prediction, c):
    """Log-density of c under the prediction, up to additive constants."""
    d = np.asarray(c, float) - prediction.mean
    return float(-(d @ d))


def _gaussian_gram(A, B, rho):
    D = cdist(np.atleast_2d(A), np.atleast_2d(B))
    return np.exp(-rho * D * D)


def _check_pairs(T, C):
    T = np.atleast_2d(np.asarray(T, float))
    C = np.atleast_2d(np.asarray(C, float))
    if len(T) != len(C):
        raise ValueError(f"{len(T)} text rows vs {len(C)} classifier rows")
    if len(T) < 2:
        raise RegressionError("need at least 2 training classes to regress")
    return T, C


@dataclass
class GprModel:
    T: np.ndarray
    C: np.ndarray
    rho: float
    lam: float
    alpha: np.ndarray = field(repr=False, default=None)

    def predict(self, t_star):
        k = _gaussian_gram(self.T, np.atleast_2d(t_star), self.rho)[:, 0]
        return RegressorPrediction(mean=k @ self.alpha,
                                   covariance=np.eye(self.C.shape[1]))


def fit_gpr(T, C, rho=None, lam=1e-3):
    """Gaussian-process regression from text rows T to classifier rows C."""
    T, C = _check_pairs(T, C)
    if rho is None:
        rho = median_bandwidth(T, squared=True)
    K = _gaussian_gram(T, T, rho)
    try:
        cf = scipy.linalg.cho_factor(K + lam * np.eye(len(T)))
        alpha = scipy.linalg.cho_solve(cf, C)
    except np.linalg.LinAlgError as exc:
        raise RegressionError(f"text gram is singular (lam={lam}): {exc}") from exc
    return GprModel(T=T, C=C, rho=rho, lam=lam, alpha=alpha)


def gpr_predict(T, C, t_star, rho=None, lam=1e-3):
    return fit_gpr(T, C, rho=rho, lam=lam).predict(t_star)


@dataclass
class TgpModel:
    T: np.ndarray
    C: np.ndarray
    rho_t: float
    rho_c: float
    lam_t: float
    lam_c: float
    _kt_factor: tuple = field(repr=False, default=None)
    _M: np.ndarray = field(repr=False, default=None)


def fit_tgp(T, C, rho_t=None, rho_c=None, lam_t=1e-3, lam_c=1e-3):
    """Precompute the training-side factors of the twin regressor.

    Bandwidths default to the median heuristic on each side.
    """
    T, C = _check_pairs(T, C)
    if rho_t is None:
        rho_t = median_bandwidth(T, squared=True)
    if rho_c is None:
        rho_c = median_bandwidth(C, squared=True)
    n = len(T)
    K_T = _gaussian_gram(T, T, rho_t)
    K_C = _gaussian_gram(C, C, rho_c)
    try:
        kt_factor = scipy.linalg.cho_factor(K_T + lam_t * np.eye(n))
        M = scipy.linalg.cho_solve(scipy.linalg.cho_factor(K_C + lam_c * np.eye(n)),
                                   np.eye(n))
    except np.linalg.LinAlgError as exc:
        raise RegressionError(f"singular kernel matrix in twin regression: {exc}") from exc
    return TgpModel(T=T, C=C, rho_t=rho_t, rho_c=rho_c, lam_t=lam_t, lam_c=lam_c,
                    _kt_factor=kt_factor, _M=M)


def tgp_predict(model, t_star, optimizer_config=None):
    """Predict the classifier for one text input by twin-kernel matching.

    Starts from the smoothed combination C'u and minimizes the twin
    objective with BFGS.  The returned objective value never exceeds
    the value at the starting point.
    """
    t_star = np.asarray(t_star, float).ravel()
    k_t = _gaussian_gram(model.T, t_star[None, :], model.rho_t)[:, 0]
    u = scipy.linalg.cho_solve(model._kt_factor, k_t)
    eta = 1.0 - float(k_t @ u)
    if eta < _ETA_DEGENERATE:
        raise RegressionError(
            f"input-side posterior variance is negative ({eta:.3e}); "
            "the text kernel matrix is badly conditioned"
        )
    if eta < _ETA_FLOOR:
        if eta < 0:
            warnings.warn(f"clamping slightly negative posterior variance {eta:.3e}")
        eta = _ETA_FLOOR

    C = model.C
    M = model._M
    rho_c = model.rho_c

    def value(c):
        kc = _gaussian_gram(C, c[None, :], rho_c)[:, 0]
        s = 1.0 - float(kc @ M @ kc)
        if s <= 0.0:
            return np.inf
        return 1.0 - 2.0 * float(kc @ u) - eta * np.log(s)

    def gradient(c):
        diff = c[None, :] - C
        kc = np.exp(-rho_c * np.sum(diff * diff, axis=1))
        Mkc = M @ kc
        s = 1.0 - float(kc @ Mkc)
        J = -2.0 * rho_c * diff * kc[:, None]  # rows d k(c, c_j) / dc
        return -2.0 * (J.T @ u) + (2.0 * eta / s) * (J.T @ Mkc)

    c0 = C.T @ u
    config = optimizer_config or OptimizerConfig(initial_point=c0)
    if config.initial_point is None:
        config.initial_point = c0
    objective = ObjectiveFn(value=value, gradient=gradient, dimension=c0.size)
    result = minimize(objective, config)
    return RegressorPrediction(mean=result.point, covariance=np.eye(c0.size))
