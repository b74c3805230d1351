"""Penalized multi-response least squares.

All solvers minimize

    (1/n) ||Y - X B||_F^2 + pen(B)

over a p x L coefficient matrix B, where Y holds one-hot class
indicators. Entrywise l1/l2 penalties and row-group penalties are
solved by cyclic coordinate descent on the Gram matrix with active-set
cycling; rank penalties are solved exactly by enumerating truncations
of the fitted-value SVD. Cross-validation with stratified folds picks
penalty strength.
"""

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numba
import numpy as np
import scipy.linalg

from . import linalg
from .errors import ClassMissingInFoldError, DimensionMismatchError, SingularDesignError

DEFAULT_TOL = 1e-7
DEFAULT_MAX_SWEEPS = 100_000

# Grid floor for penalties whose l2 part never zeroes coefficients.
_ALPHA_FLOOR = 1e-3


# ---------------------------------------------------------------------------
# data container


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix with one-hot class indicator targets.

    features : ndarray, shape (n, p)
    targets : ndarray, shape (n, L), rows are exactly one-hot
    """

    features: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        y = np.asarray(self.targets, dtype=float)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "targets", y)
        if x.ndim != 2 or y.ndim != 2:
            raise DimensionMismatchError("features and targets must be 2d")
        if x.shape[0] != y.shape[0]:
            raise DimensionMismatchError(
                f"{x.shape[0]} feature rows vs {y.shape[0]} target rows"
            )
        if x.shape[0] < 1:
            raise DimensionMismatchError("dataset is empty")
        if np.any((y != 0.0) & (y != 1.0)) or np.any(y.sum(axis=1) != 1.0):
            raise ValueError("targets must be one-hot rows")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return self.targets.shape[1]

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.targets, axis=1)

    @property
    def counts(self) -> np.ndarray:
        return self.targets.sum(axis=0).astype(int)

    @classmethod
    def from_labels(cls, features, labels, n_classes: int | None = None) -> "LabeledDataset":
        labels = np.asarray(labels, dtype=int).ravel()
        if labels.size and labels.min() < 0:
            raise ValueError("labels must be non-negative")
        k = n_classes if n_classes is not None else int(labels.max()) + 1
        targets = np.zeros((labels.size, k))
        targets[np.arange(labels.size), labels] = 1.0
        return cls(np.asarray(features, dtype=float), targets)

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.features[idx], self.targets[idx])


# ---------------------------------------------------------------------------
# penalty configurations


@dataclass(frozen=True)
class NoPenalty:
    pass


def _check_lam(lam: float) -> None:
    if not lam >= 0.0:
        raise ValueError(f"penalty strength must be non-negative, got {lam!r}")


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha!r}")


@dataclass(frozen=True)
class Lasso:
    lam: float

    def __post_init__(self):
        _check_lam(self.lam)


@dataclass(frozen=True)
class ElasticNet:
    """lam * (alpha * l1 + (1 - alpha)/2 * squared l2), entrywise."""

    lam: float
    alpha: float = 0.5

    def __post_init__(self):
        _check_lam(self.lam)
        _check_alpha(self.alpha)

    @classmethod
    def from_l1_l2(cls, lam_l1: float, lam_l2: float):
        total = lam_l1 + lam_l2
        if total == 0.0:
            return NoPenalty()
        return cls(lam=total, alpha=lam_l1 / total)


@dataclass(frozen=True)
class Ridge:
    """(lam/2) * squared Frobenius norm."""

    lam: float

    def __post_init__(self):
        _check_lam(self.lam)


@dataclass(frozen=True)
class GroupLassoRidge:
    """lam * (alpha * sum of row l2 norms + (1 - alpha)/2 * squared Frobenius)."""

    lam: float
    alpha: float = 1.0

    def __post_init__(self):
        _check_lam(self.lam)
        _check_alpha(self.alpha)


@dataclass(frozen=True)
class ReducedRank:
    """lam * rank(B)."""

    lam: float

    def __post_init__(self):
        _check_lam(self.lam)


@dataclass(frozen=True)
class ReducedRankRidge:
    """lam * (alpha * rank(B) + (1 - alpha)/2 * squared Frobenius)."""

    lam: float
    alpha: float = 0.5

    def __post_init__(self):
        _check_lam(self.lam)
        _check_alpha(self.alpha)


@dataclass(frozen=True)
class FixedRank:
    """Hard rank constraint with optional ridge; used by rank-direct CV."""

    rank: int
    ridge: float = 0.0

    def __post_init__(self):
        if self.rank < 0:
            raise ValueError(f"rank must be non-negative, got {self.rank!r}")
        _check_lam(self.ridge)


Penalty = Union[
    NoPenalty, Lasso, ElasticNet, Ridge, GroupLassoRidge,
    ReducedRank, ReducedRankRidge, FixedRank,
]


def penalty_value(penalty: Penalty, coefs: np.ndarray) -> float:
    """pen(B) for the given configuration; rank terms use numerical rank."""
    b = np.atleast_2d(np.asarray(coefs, dtype=float).T).T  # (p,) -> (p, 1)
    if isinstance(penalty, NoPenalty):
        return 0.0
    if isinstance(penalty, Lasso):
        return penalty.lam * float(np.sum(np.abs(b)))
    if isinstance(penalty, ElasticNet):
        l1 = float(np.sum(np.abs(b)))
        l2 = float(np.sum(b * b))
        return penalty.lam * (penalty.alpha * l1 + 0.5 * (1.0 - penalty.alpha) * l2)
    if isinstance(penalty, Ridge):
        return 0.5 * penalty.lam * float(np.sum(b * b))
    if isinstance(penalty, GroupLassoRidge):
        rows = float(np.sum(np.sqrt(np.sum(b * b, axis=1))))
        l2 = float(np.sum(b * b))
        return penalty.lam * (penalty.alpha * rows + 0.5 * (1.0 - penalty.alpha) * l2)
    if isinstance(penalty, ReducedRank):
        return penalty.lam * linalg.numerical_rank(b)
    if isinstance(penalty, ReducedRankRidge):
        rank = linalg.numerical_rank(b)
        l2 = float(np.sum(b * b))
        return penalty.lam * (penalty.alpha * rank + 0.5 * (1.0 - penalty.alpha) * l2)
    if isinstance(penalty, FixedRank):
        return 0.5 * penalty.ridge * float(np.sum(b * b))
    raise TypeError(f"unknown penalty {penalty!r}")


def penalized_objective(X: np.ndarray, Y: np.ndarray, coefs: np.ndarray,
                        penalty: Penalty) -> float:
    resid = Y - X @ coefs
    return float(np.sum(resid * resid)) / X.shape[0] + penalty_value(penalty, coefs)


@dataclass
class RegressionFit:
    """Solver output; objective is recomputable from the other fields."""

    coefs: np.ndarray
    penalty: Penalty
    objective: float
    n_sweeps: int
    converged: bool
    selected_rank: int | None = None


# ---------------------------------------------------------------------------
# coordinate descent


def soft_threshold(z: np.ndarray, t: float) -> np.ndarray:
    """sign(z) * max(|z| - t, 0), elementwise."""
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _gram_parts(X, Y):
    n = X.shape[0]
    gram = (X.T @ X) / n
    cross = (X.T @ Y) / n
    ynorm = float(np.sum(Y * Y)) / n
    return gram, cross, ynorm


def _entrywise_kkt(gram, cross, coefs, lam_l1, lam_l2) -> float:
    grad = 2.0 * (cross - gram @ coefs)
    zero = coefs == 0.0
    res_zero = np.maximum(np.abs(grad[zero]) - lam_l1, 0.0) if np.any(zero) else 0.0
    live = ~zero
    res_live = (
        np.abs(grad[live] - lam_l1 * np.sign(coefs[live]) - lam_l2 * coefs[live])
        if np.any(live) else 0.0
    )
    return max(float(np.max(res_zero, initial=0.0)), float(np.max(res_live, initial=0.0)))


def _group_kkt(gram, cross, coefs, lam_group, lam_l2) -> float:
    grad = 2.0 * (cross - gram @ coefs)
    row_norms = np.sqrt(np.sum(coefs * coefs, axis=1))
    worst = 0.0
    for j in range(coefs.shape[0]):
        if row_norms[j] == 0.0:
            res = max(0.0, float(np.linalg.norm(grad[j])) - lam_group)
        else:
            stat = grad[j] - lam_group * coefs[j] / row_norms[j] - lam_l2 * coefs[j]
            res = float(np.linalg.norm(stat))
        worst = max(worst, res)
    return worst


@numba.njit(cache=True)
def _cd_objective(cross, coefs, fitted_gram, ynorm, lam_l1, lam_l2, lam_group, grouped):
    p, n_resp = coefs.shape
    lin = 0.0
    quad = 0.0
    sumsq = 0.0
    for j in range(p):
        for c in range(n_resp):
            b = coefs[j, c]
            lin += cross[j, c] * b
            quad += b * fitted_gram[j, c]
            sumsq += b * b
    if grouped:
        pen = 0.0
        for j in range(p):
            s = 0.0
            for c in range(n_resp):
                s += coefs[j, c] * coefs[j, c]
            pen += np.sqrt(s)
        pen *= lam_group
    else:
        pen = 0.0
        for j in range(p):
            for c in range(n_resp):
                pen += abs(coefs[j, c])
        pen *= lam_l1
    return ynorm - 2.0 * lin + quad + pen + 0.5 * lam_l2 * sumsq


@numba.njit(cache=True)
def _cd_sweep(gram, cross, coefs, fitted_gram, diag, denom, rows,
              lam_l1, lam_group, grouped):
    p, n_resp = coefs.shape
    new = np.empty(n_resp)
    delta = np.empty(n_resp)
    largest = 0.0
    for idx in range(rows.shape[0]):
        j = rows[idx]
        if denom[j] <= 0.0:
            continue  # all-zero column carries no signal
        if grouped:
            s = 0.0
            for c in range(n_resp):
                zc = 2.0 * (cross[j, c] - fitted_gram[j, c] + diag[j] * coefs[j, c])
                new[c] = zc
                s += zc * zc
            znorm = np.sqrt(s)
            if znorm <= lam_group:
                for c in range(n_resp):
                    new[c] = 0.0
            else:
                shrink = (znorm - lam_group) / (znorm * denom[j])
                for c in range(n_resp):
                    new[c] *= shrink
        else:
            for c in range(n_resp):
                zc = 2.0 * (cross[j, c] - fitted_gram[j, c] + diag[j] * coefs[j, c])
                mag = abs(zc) - lam_l1
                if mag > 0.0:
                    new[c] = (mag if zc > 0.0 else -mag) / denom[j]
                else:
                    new[c] = 0.0
        step = 0.0
        for c in range(n_resp):
            d = new[c] - coefs[j, c]
            delta[c] = d
            if abs(d) > step:
                step = abs(d)
        if step > 0.0:
            for i in range(p):
                g = gram[j, i]
                for c in range(n_resp):
                    fitted_gram[i, c] += g * delta[c]
            for c in range(n_resp):
                coefs[j, c] = new[c]
            if step > largest:
                largest = step
    return largest


@numba.njit(cache=True)
def _cd_scale(coefs):
    scale = 1.0
    for j in range(coefs.shape[0]):
        for c in range(coefs.shape[1]):
            if abs(coefs[j, c]) > scale:
                scale = abs(coefs[j, c])
    return scale


@numba.njit(cache=True)
def _cd_loop(gram, cross, coefs, fitted_gram, diag, denom,
             lam_l1, lam_l2, lam_group, grouped, ynorm, tol, max_sweeps):
    p = coefs.shape[0]
    all_rows = np.arange(p)
    n_sweeps = 0
    converged = False
    prev_obj = _cd_objective(cross, coefs, fitted_gram, ynorm,
                             lam_l1, lam_l2, lam_group, grouped)
    while n_sweeps < max_sweeps:
        step = _cd_sweep(gram, cross, coefs, fitted_gram, diag, denom,
                         all_rows, lam_l1, lam_group, grouped)
        n_sweeps += 1
        obj = _cd_objective(cross, coefs, fitted_gram, ynorm,
                            lam_l1, lam_l2, lam_group, grouped)
        assert obj <= prev_obj + 1e-8 * (1.0 + abs(prev_obj)), "objective increased"
        prev_obj = obj
        if step <= tol * _cd_scale(coefs):  # a quiet full sweep settles every coordinate
            converged = True
            break
        n_active = 0
        for j in range(p):
            for c in range(coefs.shape[1]):
                if coefs[j, c] != 0.0:
                    n_active += 1
                    break
        active = np.empty(n_active, dtype=np.int64)
        k = 0
        for j in range(p):
            for c in range(coefs.shape[1]):
                if coefs[j, c] != 0.0:
                    active[k] = j
                    k += 1
                    break
        while n_sweeps < max_sweeps and n_active > 0:
            step = _cd_sweep(gram, cross, coefs, fitted_gram, diag, denom,
                             active, lam_l1, lam_group, grouped)
            n_sweeps += 1
            if step <= tol * _cd_scale(coefs):
                break
    return n_sweeps, converged


def _cd_solve(X, Y, *, lam_l1, lam_l2, lam_group, warm_start, tol, max_sweeps):
    """Cyclic coordinate descent on the Gram matrix.

    lam_group > 0 switches row-group updates on (then lam_l1 must be 0).
    Runs full sweeps in fixed coordinate order with active-set cycling
    in between; converged once a full sweep's largest coordinate update
    is at most tol relative to the coefficient scale. The inner loops
    are compiled; this wrapper only validates and stages the arrays.
    """
    n, p = X.shape
    n_resp = Y.shape[1]
    gram, cross, ynorm = _gram_parts(X, Y)
    coefs = np.zeros((p, n_resp)) if warm_start is None else np.array(warm_start, dtype=float)
    if coefs.shape != (p, n_resp):
        raise DimensionMismatchError("warm start shape does not match the problem")
    coefs = np.ascontiguousarray(coefs)
    fitted_gram = np.ascontiguousarray(gram @ coefs)
    diag = np.ascontiguousarray(np.diag(gram))
    denom = 2.0 * diag + lam_l2
    grouped = lam_group > 0.0
    n_sweeps, converged = _cd_loop(
        np.ascontiguousarray(gram), np.ascontiguousarray(cross),
        coefs, fitted_gram, diag, denom,
        float(lam_l1), float(lam_l2), float(lam_group), grouped,
        float(ynorm), float(tol), int(max_sweeps),
    )
    return coefs, int(n_sweeps), bool(converged)


def fit_elastic_net_column(X, y, lam_l1: float, lam_l2: float, b0=None,
                           tol: float = DEFAULT_TOL,
                           max_sweeps: int = DEFAULT_MAX_SWEEPS) -> RegressionFit:
    """Single-response elastic net:
    (1/n)||y - X b||^2 + lam_l1 ||b||_1 + (lam_l2/2) ||b||^2.
    """
    y = np.asarray(y, dtype=float).reshape(-1, 1)
    warm = None if b0 is None else np.asarray(b0, dtype=float).reshape(-1, 1)
    coefs, n_sweeps, converged = _cd_solve(
        X, y, lam_l1=lam_l1, lam_l2=lam_l2, lam_group=0.0,
        warm_start=warm, tol=tol, max_sweeps=max_sweeps,
    )
    b = coefs[:, 0]
    penalty = ElasticNet.from_l1_l2(lam_l1, lam_l2)
    return RegressionFit(
        coefs=b, penalty=penalty,
        objective=penalized_objective(X, y, coefs, penalty),
        n_sweeps=n_sweeps, converged=converged,
    )


def fit_group_lasso_ridge(X, Y, lam: float, alpha: float = 1.0, B0=None,
                          tol: float = DEFAULT_TOL,
                          max_sweeps: int = DEFAULT_MAX_SWEEPS) -> RegressionFit:
    """Row-group lasso with optional ridge; block coordinate descent over rows."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    coefs, n_sweeps, converged = _cd_solve(
        X, Y, lam_l1=0.0, lam_l2=lam * (1.0 - alpha), lam_group=lam * alpha,
        warm_start=B0, tol=tol, max_sweeps=max_sweeps,
    )
    penalty = GroupLassoRidge(lam=lam, alpha=alpha)
    return RegressionFit(
        coefs=coefs, penalty=penalty,
        objective=penalized_objective(X, Y, coefs, penalty),
        n_sweeps=n_sweeps, converged=converged,
    )


def kkt_residual(X, Y, coefs, penalty: Penalty) -> float:
    """Stationarity residual of the penalized objective at coefs.

    Independent of any solver state: the gradient is recomputed from X
    and Y directly. Supported for the separable penalties (lasso,
    elastic net, ridge, group lasso ridge, none).
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    coefs = np.asarray(coefs, dtype=float)
    if coefs.ndim == 1:
        coefs = coefs[:, None]
    gram, cross, _ = _gram_parts(X, Y)
    if isinstance(penalty, NoPenalty):
        return _entrywise_kkt(gram, cross, coefs, 0.0, 0.0)
    if isinstance(penalty, Lasso):
        return _entrywise_kkt(gram, cross, coefs, penalty.lam, 0.0)
    if isinstance(penalty, ElasticNet):
        return _entrywise_kkt(
            gram, cross, coefs, penalty.lam * penalty.alpha,
            penalty.lam * (1.0 - penalty.alpha),
        )
    if isinstance(penalty, Ridge):
        return _entrywise_kkt(gram, cross, coefs, 0.0, penalty.lam)
    if isinstance(penalty, GroupLassoRidge):
        return _group_kkt(
            gram, cross, coefs, penalty.lam * penalty.alpha,
            penalty.lam * (1.0 - penalty.alpha),
        )
    raise TypeError(f"no stationarity residual for {type(penalty).__name__}")


# ---------------------------------------------------------------------------
# exact rank-penalized solver


def _ridge_coefs(X, Y, lam_ridge: float) -> np.ndarray:
    n = X.shape[0]
    gram = X.T @ X + 0.5 * n * lam_ridge * np.eye(X.shape[1])
    if lam_ridge > 0.0:
        return linalg.pd_solve(gram, X.T @ Y, SingularDesignError, "ridge Gram matrix")
    return linalg.pd_solve(gram, X.T @ Y, SingularDesignError, "Gram matrix")


def fit_reduced_rank(X, Y, lam_rank: float, lam_ridge: float = 0.0,
                     fixed_rank: int | None = None) -> RegressionFit:
    """Exact solver for the rank-penalized (optionally ridged) objective.

    Computes the full (ridge-)least-squares fit, takes the SVD of its
    fitted values on the ridge-augmented design, and enumerates every
    rank truncation; each candidate's objective is recomputed from the
    data, and the best rank wins (ties go to the smaller rank). With
    fixed_rank given, only that truncation is returned and no rank
    penalty enters the objective.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n, p = X.shape
    full = _ridge_coefs(X, Y, lam_ridge)
    if lam_ridge > 0.0:
        # Augmented rows make the fitted-value SVD see the ridge term too.
        extra = np.sqrt(0.5 * n * lam_ridge) * np.eye(p)
        fitted = np.vstack([X @ full, extra @ full])
    else:
        fitted = X @ full
    _, _, vt = np.linalg.svd(fitted, full_matrices=False)

    def truncate(r: int) -> np.ndarray:
        if r == 0:
            return np.zeros_like(full)
        rows = vt[:r]
        return full @ rows.T @ rows

    max_rank = min(p, Y.shape[1])
    if fixed_rank is not None:
        if not 0 <= fixed_rank <= max_rank:
            raise ValueError(f"fixed_rank must lie in [0, {max_rank}]")
        coefs = truncate(fixed_rank)
        penalty = FixedRank(rank=fixed_rank, ridge=lam_ridge)
        return RegressionFit(
            coefs=coefs, penalty=penalty,
            objective=penalized_objective(X, Y, coefs, penalty),
            n_sweeps=0, converged=True,
            selected_rank=linalg.numerical_rank(coefs),
        )

    best = None
    for r in range(max_rank + 1):
        coefs = truncate(r)
        resid = Y - X @ coefs
        obj = (
            float(np.sum(resid * resid)) / n
            + lam_rank * r
            + 0.5 * lam_ridge * float(np.sum(coefs * coefs))
        )
        if best is None or obj < best[0]:
            best = (obj, r, coefs)
    _, _, coefs = best
    penalty = _rank_penalty(lam_rank, lam_ridge)
    return RegressionFit(
        coefs=coefs, penalty=penalty,
        objective=penalized_objective(X, Y, coefs, penalty),
        n_sweeps=0, converged=True,
        selected_rank=linalg.numerical_rank(coefs),
    )


def _rank_penalty(lam_rank: float, lam_ridge: float) -> Penalty:
    total = lam_rank + lam_ridge
    if lam_ridge == 0.0:
        return ReducedRank(lam=lam_rank)
    return ReducedRankRidge(lam=total, alpha=lam_rank / total)


# ---------------------------------------------------------------------------
# dispatcher


def fit_penalized(X, Y, penalty: Penalty, warm_start=None,
                  tol: float = DEFAULT_TOL,
                  max_sweeps: int = DEFAULT_MAX_SWEEPS) -> RegressionFit:
    """Fit the penalized regression for any penalty configuration."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise DimensionMismatchError("X must be (n, p) and Y (n, L) with equal n")

    if isinstance(penalty, NoPenalty):
        coefs, *_ = np.linalg.lstsq(X, Y, rcond=None)
        return RegressionFit(
            coefs=coefs, penalty=penalty,
            objective=penalized_objective(X, Y, coefs, penalty),
            n_sweeps=0, converged=True,
        )
    if isinstance(penalty, Ridge):
        if penalty.lam == 0.0:
            return fit_penalized(X, Y, NoPenalty(), tol=tol, max_sweeps=max_sweeps)
        coefs = _ridge_coefs(X, Y, penalty.lam)
        return RegressionFit(
            coefs=coefs, penalty=penalty,
            objective=penalized_objective(X, Y, coefs, penalty),
            n_sweeps=0, converged=True,
        )
    if isinstance(penalty, (Lasso, ElasticNet)):
        if isinstance(penalty, Lasso):
            lam_l1, lam_l2 = penalty.lam, 0.0
        else:
            lam_l1 = penalty.lam * penalty.alpha
            lam_l2 = penalty.lam * (1.0 - penalty.alpha)
        coefs, n_sweeps, converged = _cd_solve(
            X, Y, lam_l1=lam_l1, lam_l2=lam_l2, lam_group=0.0,
            warm_start=warm_start, tol=tol, max_sweeps=max_sweeps,
        )
        return RegressionFit(
            coefs=coefs, penalty=penalty,
            objective=penalized_objective(X, Y, coefs, penalty),
            n_sweeps=n_sweeps, converged=converged,
        )
    if isinstance(penalty, GroupLassoRidge):
        fit = fit_group_lasso_ridge(
            X, Y, penalty.lam, penalty.alpha, B0=warm_start,
            tol=tol, max_sweeps=max_sweeps,
        )
        return fit
    if isinstance(penalty, ReducedRank):
        return fit_reduced_rank(X, Y, lam_rank=penalty.lam, lam_ridge=0.0)
    if isinstance(penalty, ReducedRankRidge):
        return fit_reduced_rank(
            X, Y, lam_rank=penalty.lam * penalty.alpha,
            lam_ridge=penalty.lam * (1.0 - penalty.alpha),
        )
    if isinstance(penalty, FixedRank):
        return fit_reduced_rank(
            X, Y, lam_rank=0.0, lam_ridge=penalty.ridge, fixed_rank=penalty.rank,
        )
    raise TypeError(f"unknown penalty {penalty!r}")


# ---------------------------------------------------------------------------
# penalty strength grids


def lasso_lambda_max(X, Y) -> float:
    """Smallest entrywise l1 strength that zeroes every coefficient."""
    n = X.shape[0]
    return float(np.max(np.abs(2.0 * X.T @ Y / n)))


def group_lambda_max(X, Y) -> float:
    """Smallest row-group strength that zeroes every row."""
    n = X.shape[0]
    grad = 2.0 * X.T @ Y / n
    return float(np.max(np.sqrt(np.sum(grad * grad, axis=1))))


def rank_lambda_max(X, Y, lam_ridge: float = 0.0) -> float:
    """Smallest rank-penalty strength that selects rank zero.

    The gain of allowing rank r over rank zero is the mean of the top r
    squared singular values of the fitted values, which is largest at
    r = 1, so the bound is the top squared singular value over n.
    """
    n, p = X.shape
    full = _ridge_coefs(X, Y, lam_ridge)
    if lam_ridge > 0.0:
        extra = np.sqrt(0.5 * n * lam_ridge) * np.eye(p)
        fitted = np.vstack([X @ full, extra @ full])
    else:
        fitted = X @ full
    top = float(np.linalg.svd(fitted, compute_uv=False)[0])
    return top * top / n


def lambda_grid(X, Y, kind: str, alpha: float = 1.0, n_points: int = 10,
                min_ratio: float = 1e-3) -> np.ndarray:
    """Log-spaced descending penalty grid anchored at the zeroing strength.

    Penalties whose l2 part never zeroes coefficients (ridge, alpha near
    zero) borrow the corresponding l1 anchor with alpha floored.
    """
    if kind == "lasso":
        top = lasso_lambda_max(X, Y)
    elif kind == "enet":
        top = lasso_lambda_max(X, Y) / max(alpha, _ALPHA_FLOOR)
    elif kind == "grplasso":
        top = group_lambda_max(X, Y) / max(alpha, _ALPHA_FLOOR)
    elif kind == "ridge":
        top = lasso_lambda_max(X, Y)
    elif kind == "rr":
        top = rank_lambda_max(X, Y)
    elif kind == "rr-ridge":
        top = rank_lambda_max(X, Y) / max(alpha, _ALPHA_FLOOR)
    else:
        raise ValueError(f"unknown penalty kind {kind!r}")
    if top <= 0.0:
        top = 1.0  # degenerate targets; any grid zeroes the fit
    return np.geomspace(top, top * min_ratio, n_points)


# ---------------------------------------------------------------------------
# cross-validation


def stratified_folds(labels: np.ndarray, n_folds: int, seed: int,
                     n_classes: int | None = None) -> list[np.ndarray]:
    """Split indices into n_folds validation sets, stratified by class."""
    if n_folds < 2:
        raise ValueError("n_folds must be at least 2")
    labels = np.asarray(labels, dtype=int).ravel()
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if labels.size else 0
    for cls in range(n_classes):
        idx = np.flatnonzero(labels == cls)
        if idx.size < n_folds:
            raise ClassMissingInFoldError(
                f"class {cls} has {idx.size} samples, fewer than {n_folds} folds"
            )
        idx = rng.permutation(idx)
        for k in range(n_folds):
            folds[k].extend(idx[k::n_folds].tolist())
    return [np.array(sorted(f), dtype=int) for f in folds]


@dataclass
class CvResult:
    best_penalty: Penalty
    best_value: float
    grid: np.ndarray
    mean_loss: np.ndarray
    se_loss: np.ndarray
    loss_matrix: np.ndarray  # (len(grid), n_folds)


def cross_validate(data: LabeledDataset, family: Callable[[float], Penalty],
                   grid: Sequence[float], n_folds: int = 10, seed: int = 0,
                   loss: str = "mse", tol: float = DEFAULT_TOL,
                   max_sweeps: int = DEFAULT_MAX_SWEEPS) -> CvResult:
    """Pick penalty strength by stratified K-fold cross-validation.

    The grid is walked in the order given, warm-starting coordinate
    descent fits within each fold; ties take the earliest grid entry, so
    pass strengths largest first to prefer heavier regularization.
    loss "mse" scores validation squared error of the regression;
    "misclassification" builds the full classifier per fold.
    """
    grid = np.asarray(list(grid), dtype=float)
    if grid.size == 0:
        raise ValueError("empty grid")
    if loss not in ("mse", "misclassification"):
        raise ValueError(f"unknown loss {loss!r}")
    folds = stratified_folds(data.labels, n_folds, seed, n_classes=data.n_classes)
    losses = np.zeros((grid.size, len(folds)))
    use_warm = loss == "mse"
    for k, val_idx in enumerate(folds):
        mask = np.ones(data.n_samples, dtype=bool)
        mask[val_idx] = False
        train = data.subset(mask)
        val = data.subset(val_idx)
        warm = None
        for i, value in enumerate(grid):
            penalty = family(float(value))
            if loss == "mse":
                center = train.features.mean(axis=0)
                ybar = train.targets.mean(axis=0)  # intercept of the centered fit
                fit = fit_penalized(
                    train.features - center, train.targets, penalty,
                    warm_start=warm, tol=tol, max_sweeps=max_sweeps,
                )
                if use_warm and fit.coefs.ndim == 2:
                    warm = fit.coefs
                resid = val.targets - ybar - (val.features - center) @ fit.coefs
                losses[i, k] = float(np.sum(resid * resid)) / val.n_samples
            else:
                from .classifier import fit_ldrr  # deferred: avoids an import cycle

                model = fit_ldrr(train, penalty, tol=tol, max_sweeps=max_sweeps)
                pred = model.predict(val.features)
                losses[i, k] = float(np.mean(pred != val.labels))
    mean_loss = losses.mean(axis=1)
    se_loss = losses.std(axis=1, ddof=1) / np.sqrt(len(folds))
    best = int(np.argmin(mean_loss))  # first minimum; grid order breaks ties
    return CvResult(
        best_penalty=family(float(grid[best])), best_value=float(grid[best]),
        grid=grid, mean_loss=mean_loss, se_loss=se_loss, loss_matrix=losses,
    )
