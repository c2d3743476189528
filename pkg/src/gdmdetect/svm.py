"""Soft-margin linear SVM and its iterative self-labelling variant.

``svm_train`` solves the standard primal

    min_{w, b}  0.5 * ||w||^2 + sum_i C_i * max(0, 1 - y_i (w . x_i + b))

through its dual with an SMO solver (second-order working-set selection,
unregularised bias).  ``isvm_run`` grows a labelled set by freezing
high-confidence predictions on unlabelled samples until the predicted labels
stop changing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

TAU = 1e-12


@dataclass
class LinearSvmModel:
    weights: np.ndarray
    bias: float
    c_reg: float = 1.0

    @property
    def dimension(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class IsvmConfig:
    th_pos: float = 0.8
    d_reg: float = 1.0
    max_iters: int = 20

    def __post_init__(self):
        if self.th_pos <= 0:
            raise ValueError("th_pos must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    @property
    def th_neg(self) -> float:
        return -self.th_pos


@dataclass
class IsvmResult:
    model: LinearSvmModel
    pseudo_labels: np.ndarray
    iterations: int
    promoted: np.ndarray  # bool mask over the unlabelled set
    labeled_sizes: list


def svm_objective(model: LinearSvmModel, X, y, c=None) -> float:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    c = model.c_reg if c is None else c
    hinge = np.maximum(0.0, 1.0 - y * (X @ model.weights + model.bias))
    return float(0.5 * model.weights @ model.weights + np.sum(c * hinge))


def svm_train(X, y, c_reg: float = 1.0, sample_c=None, tol: float = 1e-4, max_iter: int = 200_000) -> LinearSvmModel:
    """Fit a linear soft-margin SVM.

    ``sample_c`` optionally gives a per-sample penalty in place of ``c_reg``.
    Stops when the maximal KKT violation drops below ``tol``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.where(np.asarray(y) > 0, 1.0, -1.0)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be (n, d) with one label per row")
    if not ((y > 0).any() and (y < 0).any()):
        raise ValueError("svm_train needs samples from both classes")
    n = len(y)
    C = np.full(n, float(c_reg)) if sample_c is None else np.asarray(sample_c, dtype=np.float64)
    if C.shape != (n,) or (C <= 0).any():
        raise ValueError("per-sample penalties must be positive, one per sample")

    Xy = X * y[:, None]
    qd = np.einsum("ij,ij->i", X, X)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # Q alpha - 1
    w = np.zeros(X.shape[1])

    for it in range(max_iter):
        upper = alpha >= C
        lower = alpha <= 0
        pos = y > 0
        # I_up: can move alpha_t to raise y_t alpha_t
        in_up = np.where(pos, ~upper, ~lower)
        in_low = np.where(pos, ~lower, ~upper)
        minus_yg = -y * grad
        cand = np.where(in_up, minus_yg, -np.inf)
        i = int(np.argmax(cand))
        g_max = cand[i]
        low_vals = np.where(in_low, minus_yg, np.inf)
        g_min = low_vals.min()
        if g_max - g_min < tol:
            break
        k_i = X @ X[i]
        b = g_max - minus_yg  # > 0 for violating candidates
        a = qd[i] + qd - 2.0 * k_i
        a = np.where(a > 0, a, TAU)
        obj = np.where(in_low & (b > 0), -(b * b) / a, np.inf)
        j = int(np.argmin(obj))

        ai_old, aj_old = alpha[i], alpha[j]
        Ci, Cj = C[i], C[j]
        qij = y[i] * y[j] * k_i[j]
        if y[i] != y[j]:
            quad = max(qd[i] + qd[j] + 2 * qij, TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > Ci - Cj:
                if ai > Ci:
                    ai, aj = Ci, Ci - diff
            elif aj > Cj:
                aj, ai = Cj, Cj + diff
        else:
            quad = max(qd[i] + qd[j] - 2 * qij, TAU)
            delta = (grad[i] - grad[j]) / quad
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > Ci:
                if ai > Ci:
                    ai, aj = Ci, total - Ci
            elif aj < 0:
                aj, ai = 0.0, total
            if total > Cj:
                if aj > Cj:
                    aj, ai = Cj, total - Cj
            elif ai < 0:
                ai, aj = 0.0, total
        dai, daj = ai - ai_old, aj - aj_old
        alpha[i], alpha[j] = ai, aj
        dw = dai * Xy[i] + daj * Xy[j]
        w += dw
        grad += y * (X @ dw)
    else:
        log.warning("SMO stopped at max_iter=%d before reaching tol=%g", max_iter, tol)

    bias = -_rho(alpha, grad, y, C)
    return LinearSvmModel(w, float(bias), float(c_reg))


def _rho(alpha, grad, y, C) -> float:
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(yg[free].mean())
    pos = y > 0
    at_upper = alpha >= C
    at_lower = alpha <= 0
    # bounds on rho from the KKT conditions of bounded variables
    ub_mask = (at_upper & ~pos) | (at_lower & pos)
    lb_mask = (at_upper & pos) | (at_lower & ~pos)
    ub = yg[ub_mask].min() if ub_mask.any() else np.inf
    lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
    if np.isinf(ub) or np.isinf(lb):
        return float(ub if np.isfinite(ub) else lb)
    return float((ub + lb) / 2)


def svm_score(model: LinearSvmModel, desc) -> float | np.ndarray:
    """Signed margin w . x + b for one descriptor or a stack of them."""
    desc = np.asarray(desc, dtype=np.float64)
    if desc.shape[-1] != model.dimension:
        raise ValueError(f"descriptor has dimension {desc.shape[-1]}, model expects {model.dimension}")
    out = desc @ model.weights + model.bias
    return float(out) if out.ndim == 0 else out


def predict_labels(margins) -> np.ndarray:
    """sign of the margin, with zero mapped to the negative class."""
    return np.where(np.asarray(margins) > 0, 1, -1)


def isvm_run(labeled_X, labeled_y, hard_X, config: IsvmConfig = IsvmConfig(), c_reg: float = 1.0) -> IsvmResult:
    labeled_X = np.asarray(labeled_X, dtype=np.float64)
    labeled_y = np.where(np.asarray(labeled_y) > 0, 1, -1)
    hard_X = np.asarray(hard_X, dtype=np.float64).reshape(-1, labeled_X.shape[1])
    n_u = len(hard_X)

    if n_u == 0:
        model = svm_train(labeled_X, labeled_y, c_reg)
        return IsvmResult(model, np.zeros(0, int), 0, np.zeros(0, bool), [len(labeled_y)])

    promoted = np.zeros(n_u, bool)
    promoted_y = np.zeros(n_u, int)
    previous = None
    sizes = []
    for it in range(1, config.max_iters + 1):
        X = np.vstack([labeled_X, hard_X[promoted]])
        y = np.concatenate([labeled_y, promoted_y[promoted]])
        c = np.concatenate([np.full(len(labeled_y), c_reg), np.full(int(promoted.sum()), config.d_reg)])
        sizes.append(len(y))
        model = svm_train(X, y, c_reg, sample_c=c)
        margins = svm_score(model, hard_X)
        labels = predict_labels(margins)

        new_pos = ~promoted & (margins > config.th_pos)
        new_neg = ~promoted & (margins < config.th_neg)
        promoted_y[new_pos] = 1
        promoted_y[new_neg] = -1
        promoted |= new_pos | new_neg

        if previous is not None and np.array_equal(labels, previous):
            break
        previous = labels
    return IsvmResult(model, labels, it, promoted, sizes)
