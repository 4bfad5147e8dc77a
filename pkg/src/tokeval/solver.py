"""L1-regularized logistic regression by proximal gradient descent.

Minimizes::

    J(w, b) = C * sum_i log(1 + exp(-y_i (x_i . w + b))) + ||w||_1

with y_i in {-1, +1} and an unpenalized intercept ``b``. Smaller C means
stronger regularization (the liblinear/scikit-learn convention).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

DEFAULT_C = 0.4
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 10_000


class SolverError(ValueError):
    pass


@dataclass
class LogRegFit:
    coef: np.ndarray
    intercept: float
    C: float
    n_iter: int
    objective: float
    converged: bool
    history: list[float] = field(default_factory=list, repr=False)

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X @ self.coef).ravel() + self.intercept


def as_signed(y) -> np.ndarray:
    """Map labels in {0,1} or {False,True} or {-1,+1} to {-1.0, +1.0}."""
    y = np.asarray(y)
    if y.dtype == bool:
        return np.where(y, 1.0, -1.0)
    vals = set(np.unique(y).tolist())
    if not vals <= {0, 1} and not vals <= {-1, 1}:
        raise SolverError(f"labels must be binary 0/1 or -1/+1, got {sorted(vals)[:5]}")
    return np.where(y > 0, 1.0, -1.0)


def smooth_loss(X, y_pm: np.ndarray, w: np.ndarray, b: float, C: float) -> float:
    margins = y_pm * (np.asarray(X @ w).ravel() + b)
    return C * float(np.sum(np.logaddexp(0.0, -margins)))


def smooth_loss_grad(X, y_pm: np.ndarray, w: np.ndarray, b: float, C: float):
    """Value and gradient of the smooth part, as ``(loss, grad_w, grad_b)``."""
    margins = y_pm * (np.asarray(X @ w).ravel() + b)
    loss = C * float(np.sum(np.logaddexp(0.0, -margins)))
    r = -C * y_pm * expit(-margins)
    grad_w = np.asarray(X.T @ r).ravel()
    return loss, grad_w, float(r.sum())


def objective(X, y_pm, w, b, C) -> float:
    return smooth_loss(X, y_pm, w, b, C) + float(np.abs(w).sum())


def soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _initial_step(X, n: int, C: float) -> float:
    # 1/L with L = C/4 * ||[X 1]||_F^2, an upper bound on the Lipschitz constant
    if sp.issparse(X):
        fro = float(X.multiply(X).sum())
    else:
        fro = float(np.sum(np.asarray(X, dtype=np.float64) ** 2))
    lip = 0.25 * C * (fro + n)
    return 1.0 / lip if lip > 0 else 1.0


def train_logreg(X, y, C: float = DEFAULT_C, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER, record_history: bool = False) -> LogRegFit:
    """Fit one binary classifier.

    Stops once the relative objective decrease falls below ``tol`` or after
    ``max_iter`` accepted steps. Every accepted step satisfies the
    sufficient-decrease condition, so the objective never increases.
    """
    if not (C > 0) or not math.isfinite(C):
        raise SolverError(f"C must be a positive real, got {C!r}")
    X = X.tocsr().astype(np.float64) if sp.issparse(X) else np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n == 0:
        raise SolverError("cannot fit on an empty design matrix")
    y_pm = as_signed(y)
    if y_pm.shape[0] != n:
        raise SolverError(f"{n} rows but {y_pm.shape[0]} labels")
    n_pos = int(np.sum(y_pm > 0))
    if n_pos == 0 or n_pos == n:
        raise SolverError("labels contain a single class")

    w = np.zeros(d)
    b = 0.0
    loss, gw, gb = smooth_loss_grad(X, y_pm, w, b, C)
    obj = loss
    history = [obj] if record_history else []
    step = _initial_step(X, n, C)
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        while True:
            w_new = soft_threshold(w - step * gw, step)
            b_new = b - step * gb
            dw = w_new - w
            db = b_new - b
            loss_new = smooth_loss(X, y_pm, w_new, b_new, C)
            bound = loss + gw @ dw + gb * db + (dw @ dw + db * db) / (2.0 * step)
            if loss_new <= bound + 1e-12 * max(1.0, abs(loss)):
                break
            step *= 0.5
            if step < 1e-20:
                raise SolverError("line search failed to find a decreasing step")
        obj_new = loss_new + float(np.abs(w_new).sum())
        if not math.isfinite(obj_new):
            raise SolverError("objective became non-finite")
        if obj_new > obj:
            # rounding-level increase; keep the previous iterate
            converged = True
            break
        decrease = obj - obj_new
        w, b = w_new, b_new
        loss, gw, gb = smooth_loss_grad(X, y_pm, w, b, C)
        obj = obj_new
        if record_history:
            history.append(obj)
        if decrease <= tol * max(abs(obj), 1e-300):
            converged = True
            break
        step *= 2.0

    return LogRegFit(coef=w, intercept=b, C=C, n_iter=it, objective=obj,
                     converged=converged, history=history)
