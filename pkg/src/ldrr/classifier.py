"""Discriminant classifiers estimated through penalized regression.

The plain variant regresses one-hot indicators on centered features,
converts the coefficients to discriminant coefficients through the
estimated L x L link matrix, and classifies with the resulting linear
scores. The subspace variant instead extracts at most L - 1 directions
from the between/within scatter of the fitted values and classifies by
distance in that projection.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg, regression
from .errors import DimensionMismatchError, EmptyClassError, KTooLargeError
from .regression import (
    LabeledDataset,
    Penalty,
    RegressionFit,
    CvResult,
    cross_validate,
    fit_penalized,
    lambda_grid,
)

# A fitted link below this singular-value ratio is flagged as near singular.
LINK_WARN_RATIO = 1e-8


@dataclass(frozen=True)
class ClassStats:
    """Per-class sample statistics in raw feature coordinates."""

    means: np.ndarray   # p x L, column l is the class-l sample mean
    priors: np.ndarray  # L, sample class frequencies
    counts: np.ndarray  # L, integer class counts


def class_stats(data: LabeledDataset) -> ClassStats:
    counts = data.counts
    if np.any(counts == 0):
        empty = np.flatnonzero(counts == 0).tolist()
        raise EmptyClassError(f"classes {empty} have no samples")
    means = (data.features.T @ data.targets) / counts
    return ClassStats(means=means, priors=counts / data.n_samples, counts=counts)


def residual_link(targets: np.ndarray, fitted: np.ndarray) -> np.ndarray:
    """Estimated link matrix (Y'Y - F'F) / n, symmetrized.

    F holds the in-sample fitted values of the indicator regression.
    """
    n = targets.shape[0]
    return linalg.symmetrize((targets.T @ targets - fitted.T @ fitted) / n)


def discriminant_from_link(coefs: np.ndarray, link: np.ndarray,
                           rel_cutoff: float = linalg.DEFAULT_REL_CUTOFF) -> np.ndarray:
    """Discriminant coefficients: regression coefficients times link pseudo-inverse."""
    return coefs @ linalg.pinv_cutoff(link, rel_cutoff)


def _prepare(features: np.ndarray, center: np.ndarray, scale) -> tuple[np.ndarray, bool]:
    x = np.asarray(features, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    if pts.ndim != 2 or pts.shape[1] != center.size:
        raise DimensionMismatchError(
            f"expected {center.size} features, got {pts.shape[-1] if pts.ndim else 0}"
        )
    pts = pts - center
    if scale is not None:
        pts = pts / scale
    return pts, single


@dataclass
class LdrrModel:
    """Fitted linear-score classifier."""

    coefs: np.ndarray          # p x L penalized regression coefficients
    link: np.ndarray           # L x L estimated link matrix
    discriminant: np.ndarray   # p x L discriminant coefficients
    stats: ClassStats
    penalty: Penalty
    center: np.ndarray         # training feature mean
    scale: np.ndarray | None   # training feature sd when standardized
    link_singular_values: np.ndarray
    fit: RegressionFit

    @property
    def n_features(self) -> int:
        return self.coefs.shape[0]

    @property
    def n_classes(self) -> int:
        return self.coefs.shape[1]

    @property
    def link_ratio(self) -> float:
        s = self.link_singular_values
        return float(s[-1] / s[0]) if s.size and s[0] > 0.0 else 0.0

    @property
    def link_warning(self) -> bool:
        return self.link_ratio < LINK_WARN_RATIO

    def _centered_means(self) -> np.ndarray:
        m = self.stats.means - self.center[:, None]
        if self.scale is not None:
            m = m / self.scale[:, None]
        return m

    def scores(self, features: np.ndarray) -> np.ndarray:
        """Per-class discriminant scores, lower is better."""
        pts, single = _prepare(features, self.center, self.scale)
        means_c = self._centered_means()
        const = (
            np.einsum("pl,pl->l", means_c, self.discriminant)
            - 2.0 * np.log(self.stats.priors)
        )
        out = const[None, :] - 2.0 * pts @ self.discriminant
        return out[0] if single else out

    def predict(self, features: np.ndarray) -> np.ndarray:
        s = self.scores(features)
        if s.ndim == 1:
            return int(np.argmin(s))
        return np.argmin(s, axis=1)


def _center_scale(data: LabeledDataset, standardize: bool):
    center = data.features.mean(axis=0)
    if not standardize:
        return center, None
    scale = data.features.std(axis=0)
    scale[scale == 0.0] = 1.0  # constant features pass through unscaled
    return center, scale


def fit_ldrr(data: LabeledDataset, penalty: Penalty, standardize: bool = False,
             tol: float = regression.DEFAULT_TOL,
             max_sweeps: int = regression.DEFAULT_MAX_SWEEPS) -> LdrrModel:
    """Fit the linear-score classifier.

    Features are centered by the training mean (and optionally scaled by
    the training sd); class means and priors are kept in raw coordinates
    and transformed at prediction time.
    """
    stats = class_stats(data)
    center, scale = _center_scale(data, standardize)
    design, _ = _prepare(data.features, center, scale)
    fit = fit_penalized(design, data.targets, penalty, tol=tol, max_sweeps=max_sweeps)
    link = residual_link(data.targets, design @ fit.coefs)
    singular = np.linalg.svd(link, compute_uv=False)
    return LdrrModel(
        coefs=fit.coefs,
        link=link,
        discriminant=discriminant_from_link(fit.coefs, link),
        stats=stats,
        penalty=penalty,
        center=center,
        scale=scale,
        link_singular_values=singular,
        fit=fit,
    )


# ---------------------------------------------------------------------------
# subspace (direction-based) variant


def class_scatter(features: np.ndarray, targets: np.ndarray,
                  coefs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Between- and within-class scatter of the fitted values.

    Works from per-class means of the n x L fitted matrix, so nothing of
    size n x n is ever formed. The two matrices add up to the total
    second moment of the fitted values.
    """
    counts = targets.sum(axis=0)
    if np.any(counts == 0):
        raise EmptyClassError("scatter needs at least one sample per class")
    n = features.shape[0]
    fitted = features @ coefs
    class_means = (targets.T @ fitted) / counts[:, None]  # L x L
    between = (class_means.T * counts) @ class_means / n
    within = (fitted.T @ fitted) / n - between
    return linalg.symmetrize(between), linalg.symmetrize(within)


def fisher_directions(between: np.ndarray, within: np.ndarray,
                      k: int | None = None,
                      rel_cutoff: float = linalg.DEFAULT_REL_CUTOFF
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Leading discriminant directions of the scatter pencil.

    Directions maximize a' between a subject to a' within a = 1 and
    within-orthogonality to earlier ones, computed by eigendecomposing
    the whitened between matrix. Returns (directions L x k, eigenvalues
    descending). Each direction has its first nonzero entry positive.
    """
    white = linalg.psd_half_pinv(within, rel_cutoff)
    core = linalg.symmetrize(white @ between @ white)
    vals, vecs = np.linalg.eigh(core)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    top = max(float(vals[0]), 0.0) if vals.size else 0.0
    rank = int(np.sum(vals > rel_cutoff * top)) if top > 0.0 else 0
    if k is None:
        k = min(between.shape[0] - 1, rank)
    if k > rank:
        raise KTooLargeError(f"requested {k} directions, scatter supports {rank}")
    dirs = white @ vecs[:, :k]
    for i in range(k):
        d = dirs[:, i]
        quad = float(d @ within @ d)
        if quad > 0.0:
            d = d / np.sqrt(quad)
        lead = np.flatnonzero(np.abs(d) > 1e-12 * max(1.0, float(np.max(np.abs(d)))))
        if lead.size and d[lead[0]] < 0.0:
            d = -d
        dirs[:, i] = d
    return dirs, np.maximum(vals[:k], 0.0)


@dataclass
class LdrrFModel:
    """Fitted subspace classifier: nearest class mean in k directions."""

    coefs: np.ndarray       # p x L penalized regression coefficients
    between: np.ndarray     # L x L between-class scatter of fitted values
    within: np.ndarray      # L x L within-class scatter of fitted values
    directions: np.ndarray  # L x k, within-orthonormal columns
    eigenvalues: np.ndarray
    k: int
    stats: ClassStats
    penalty: Penalty
    center: np.ndarray
    scale: np.ndarray | None
    fit: RegressionFit

    @property
    def n_features(self) -> int:
        return self.coefs.shape[0]

    @property
    def n_classes(self) -> int:
        return self.coefs.shape[1]

    def _basis(self) -> np.ndarray:
        return self.coefs @ self.directions  # p x k

    def project(self, features: np.ndarray) -> np.ndarray:
        """Coordinates of (centered) inputs in the discriminant subspace."""
        pts, single = _prepare(features, self.center, self.scale)
        proj = pts @ self._basis()
        return proj[0] if single else proj

    def scores(self, features: np.ndarray) -> np.ndarray:
        pts, single = _prepare(features, self.center, self.scale)
        basis = self._basis()
        proj = pts @ basis
        means_c = self.stats.means - self.center[:, None]
        if self.scale is not None:
            means_c = means_c / self.scale[:, None]
        proj_means = means_c.T @ basis  # L x k
        sq = (
            np.sum(proj * proj, axis=1)[:, None]
            - 2.0 * proj @ proj_means.T
            + np.sum(proj_means * proj_means, axis=1)[None, :]
        )
        out = sq - 2.0 * np.log(self.stats.priors)[None, :]
        return out[0] if single else out

    def predict(self, features: np.ndarray) -> np.ndarray:
        s = self.scores(features)
        if s.ndim == 1:
            return int(np.argmin(s))
        return np.argmin(s, axis=1)


def fit_ldrr_f(data: LabeledDataset, penalty: Penalty, k: int | None = None,
               standardize: bool = False, tol: float = regression.DEFAULT_TOL,
               max_sweeps: int = regression.DEFAULT_MAX_SWEEPS) -> LdrrFModel:
    """Fit the subspace classifier; k defaults to min(L - 1, scatter rank)."""
    stats = class_stats(data)
    center, scale = _center_scale(data, standardize)
    design, _ = _prepare(data.features, center, scale)
    fit = fit_penalized(design, data.targets, penalty, tol=tol, max_sweeps=max_sweeps)
    between, within = class_scatter(design, data.targets, fit.coefs)
    directions, eigenvalues = fisher_directions(between, within, k)
    return LdrrFModel(
        coefs=fit.coefs,
        between=between,
        within=within,
        directions=directions,
        eigenvalues=eigenvalues,
        k=directions.shape[1],
        stats=stats,
        penalty=penalty,
        center=center,
        scale=scale,
        fit=fit,
    )


# ---------------------------------------------------------------------------
# penalty selection


def penalty_family(kind: str, alpha: float = 0.5):
    """Constructor mapping a strength value to a penalty configuration."""
    builders = {
        "lasso": lambda lam: regression.Lasso(lam),
        "enet": lambda lam: regression.ElasticNet(lam, alpha),
        "grplasso": lambda lam: regression.GroupLassoRidge(lam, alpha),
        "ridge": lambda lam: regression.Ridge(lam),
        "rr": lambda lam: regression.ReducedRank(lam),
        "rr-ridge": lambda lam: regression.ReducedRankRidge(lam, alpha),
    }
    if kind not in builders:
        raise ValueError(f"unknown penalty kind {kind!r}")
    return builders[kind]


def select_penalty_cv(data: LabeledDataset, kind: str, alpha: float = 0.5,
                      grid=None, n_grid: int = 10, n_folds: int = 10,
                      seed: int = 0, loss: str = "mse",
                      tol: float = regression.DEFAULT_TOL,
                      max_sweeps: int = regression.DEFAULT_MAX_SWEEPS) -> CvResult:
    """Cross-validate penalty strength for the given family.

    The default grid is anchored at the smallest strength that zeroes
    the fit, computed on centered features.
    """
    family = penalty_family(kind, alpha)
    if grid is None:
        centered = data.features - data.features.mean(axis=0)
        grid = lambda_grid(centered, data.targets, kind, alpha, n_points=n_grid)
    return cross_validate(data, family, grid, n_folds=n_folds, seed=seed,
                          loss=loss, tol=tol, max_sweeps=max_sweeps)


def select_rank_cv(data: LabeledDataset, ridge: float = 0.0, n_folds: int = 10,
                   seed: int = 0, loss: str = "mse") -> CvResult:
    """Cross-validate the rank directly; ties prefer the smaller rank."""
    max_rank = min(data.n_features, data.n_classes)
    ranks = np.arange(0, max_rank + 1, dtype=float)
    family = lambda r: regression.FixedRank(rank=int(round(r)), ridge=ridge)
    return cross_validate(data, family, ranks, n_folds=n_folds, seed=seed, loss=loss)
