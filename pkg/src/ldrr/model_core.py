"""Gaussian mixture population model and its exact classification rule.

The model is a mixture of L Gaussian classes sharing one within-class
covariance. Class means sit in the columns of a p x L matrix. All the
population-level objects of the method live here: the marginal feature
covariance, the multi-response regression coefficients of class
indicators on features, the L x L link matrix that converts those
regression coefficients into discriminant coefficients, and the exact
(Bayes) rule together with its Monte Carlo error.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import linalg
from .errors import (
    CholeskyFailureError,
    DimensionMismatchError,
    NotCenteredError,
    SingularSigmaError,
    SingularSigmaWError,
)

# A model counts as centered when the prior-weighted mean is below this.
CENTER_TOL = 1e-10

# Rows per block when sampling large Monte Carlo batches.
_MC_CHUNK = 16384


@dataclass(frozen=True)
class MixtureModel:
    """Gaussian mixture with shared within-class covariance.

    Parameters
    ----------
    means : ndarray, shape (p, L)
        Column l holds the mean of class l.
    cov_within : ndarray, shape (p, p)
        Within-class covariance, symmetric positive definite.
    priors : ndarray, shape (L,)
        Class probabilities, strictly positive, summing to one.
    """

    means: np.ndarray
    cov_within: np.ndarray
    priors: np.ndarray

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        cov = np.asarray(self.cov_within, dtype=float)
        priors = np.asarray(self.priors, dtype=float).ravel()
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "cov_within", cov)
        object.__setattr__(self, "priors", priors)

        p, n_classes = means.shape
        if cov.shape != (p, p):
            raise DimensionMismatchError(
                f"cov_within has shape {cov.shape}, expected ({p}, {p})"
            )
        if priors.shape != (n_classes,):
            raise DimensionMismatchError(
                f"priors has length {priors.size}, expected {n_classes}"
            )
        if not linalg.is_symmetric(cov):
            raise ValueError("cov_within must be symmetric")
        # Fails early with a typed error; samplers rely on this factor existing.
        linalg.cholesky_lower(cov, CholeskyFailureError, "cov_within")
        if np.any(priors <= 0.0):
            raise ValueError("priors must be strictly positive")
        if abs(float(priors.sum()) - 1.0) > 1e-12:
            raise ValueError(f"priors sum to {priors.sum()!r}, not 1")

    @property
    def n_features(self) -> int:
        return self.means.shape[0]

    @property
    def n_classes(self) -> int:
        return self.means.shape[1]

    def prior_weighted_mean(self) -> np.ndarray:
        return self.means @ self.priors

    def is_centered(self, tol: float = CENTER_TOL) -> bool:
        return float(np.max(np.abs(self.prior_weighted_mean()))) <= tol

    def centered(self) -> "MixtureModel":
        """Shift all class means so the prior-weighted mean is zero."""
        shift = self.prior_weighted_mean()
        return MixtureModel(self.means - shift[:, None], self.cov_within, self.priors)


def marginal_covariance(model: MixtureModel, strict: bool = True) -> np.ndarray:
    """Covariance of a feature vector drawn from the mixture.

    Equals cov_within plus the prior-weighted second moment of the class
    means; that decomposition assumes the model is centered, so strict
    mode rejects models that are not.
    """
    if strict and not model.is_centered():
        dev = float(np.max(np.abs(model.prior_weighted_mean())))
        raise NotCenteredError(
            f"prior-weighted mean deviates from zero by {dev:.3e}; "
            "call .centered() first"
        )
    weighted = model.means * model.priors
    return linalg.symmetrize(model.cov_within + weighted @ model.means.T)


def regression_coefs(model: MixtureModel) -> np.ndarray:
    """Population coefficients of the regression of class indicators on features.

    Returns the p x L solution of Sigma B = M diag(priors) where Sigma is
    the marginal feature covariance.
    """
    sigma = marginal_covariance(model)
    rhs = model.means * model.priors
    return linalg.pd_solve(sigma, rhs, SingularSigmaError, "marginal covariance")


def link_matrix(model: MixtureModel, form: str = "sigma") -> np.ndarray:
    """L x L matrix linking regression coefficients to discriminant ones.

    The three algebraically equal forms, with B the regression
    coefficients, D = diag(priors) and Sigma the marginal covariance:

    - "sigma":  D - B' Sigma B
    - "left":   D - D M' B
    - "right":  D - B' M D
    """
    coefs = regression_coefs(model)
    d = np.diag(model.priors)
    if form == "sigma":
        sigma = marginal_covariance(model)
        return d - coefs.T @ sigma @ coefs
    if form == "left":
        return d - model.priors[:, None] * (model.means.T @ coefs)
    if form == "right":
        return d - (coefs.T @ model.means) * model.priors[None, :]
    raise ValueError(f"unknown link form {form!r}")


def discriminant_coefs(model: MixtureModel) -> np.ndarray:
    """Discriminant coefficients: cov_within solved against the class means."""
    return linalg.pd_solve(
        model.cov_within, model.means, SingularSigmaWError, "cov_within"
    )


def class_separation(model: MixtureModel) -> float:
    """Largest squared Mahalanobis norm of a class mean under cov_within."""
    lower = linalg.cholesky_lower(model.cov_within, SingularSigmaWError, "cov_within")
    z = scipy.linalg.solve_triangular(lower, model.means, lower=True)
    return float(np.max(np.sum(z * z, axis=0)))


@dataclass(frozen=True)
class PopulationQuantities:
    """All derived population objects of a centered model in one place."""

    sigma: np.ndarray
    coefs: np.ndarray
    link: np.ndarray
    discriminant: np.ndarray
    separation: float


def population_quantities(model: MixtureModel) -> PopulationQuantities:
    return PopulationQuantities(
        sigma=marginal_covariance(model),
        coefs=regression_coefs(model),
        link=link_matrix(model, form="sigma"),
        discriminant=discriminant_coefs(model),
        separation=class_separation(model),
    )


def _as_points(model: MixtureModel, x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    if pts.ndim != 2 or pts.shape[1] != model.n_features:
        raise DimensionMismatchError(
            f"points have {pts.shape[-1] if pts.ndim else 0} features, "
            f"model expects {model.n_features}"
        )
    return pts, single


def bayes_scores(model: MixtureModel, x: np.ndarray) -> np.ndarray:
    """Per-class scores of the exact rule; lower is better.

    Score of class l at x is m_l' d_l - 2 x' d_l - 2 log prior_l with d
    the discriminant coefficients. The common x-quadratic term of the
    full Mahalanobis form is class-constant and omitted.
    """
    pts, single = _as_points(model, x)
    disc = discriminant_coefs(model)
    const = np.einsum("pl,pl->l", model.means, disc) - 2.0 * np.log(model.priors)
    scores = const[None, :] - 2.0 * pts @ disc
    return scores[0] if single else scores


def bayes_classify(model: MixtureModel, x: np.ndarray) -> np.ndarray:
    """Exact-rule labels; ties resolve to the smallest class index."""
    scores = bayes_scores(model, x)
    if scores.ndim == 1:
        return int(np.argmin(scores))
    return np.argmin(scores, axis=1)


def subspace_rule_scores(model: MixtureModel, x: np.ndarray, basis: str) -> np.ndarray:
    """Scores of the exact rule written as a quadratic form on a coefficient span.

    With V the chosen p x L coefficient matrix ("discriminant" or
    "regression"), scores are (x - m_l)' V (V' cov_within V)^+ V' (x - m_l)
    minus 2 log prior_l. Both choices of basis reproduce the exact rule.
    """
    if basis == "discriminant":
        v = discriminant_coefs(model)
    elif basis == "regression":
        v = regression_coefs(model)
    else:
        raise ValueError(f"unknown basis {basis!r}")
    pts, single = _as_points(model, x)
    core = linalg.pinv_cutoff(linalg.symmetrize(v.T @ model.cov_within @ v))
    metric = v @ core @ v.T
    quad = np.sum((pts @ metric) * pts, axis=1)[:, None]
    cross = pts @ metric @ model.means
    const = np.einsum("pl,pl->l", model.means, metric @ model.means)
    scores = quad - 2.0 * cross + const[None, :] - 2.0 * np.log(model.priors)[None, :]
    return scores[0] if single else scores


def sample(model: MixtureModel, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw n points: labels from the priors, then features given labels.

    Labels are drawn before features so the stream layout is fixed.
    Returns (features n x p, labels n).
    """
    lower = linalg.cholesky_lower(model.cov_within, CholeskyFailureError, "cov_within")
    labels = rng.choice(model.n_classes, size=n, p=model.priors)
    noise = rng.standard_normal((n, model.n_features))
    features = noise @ lower.T + model.means[:, labels].T
    return features, labels


def bayes_error_mc(model: MixtureModel, n_samples: int, seed: int) -> float:
    """Monte Carlo estimate of the exact rule's misclassification rate.

    Deterministic for a given seed: samples are drawn in fixed-size
    blocks from a single seeded stream, so the result does not depend on
    how the work is scheduled.
    """
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    rng = np.random.default_rng(seed)
    wrong = 0
    remaining = n_samples
    while remaining > 0:
        m = min(_MC_CHUNK, remaining)
        features, labels = sample(model, m, rng)
        wrong += int(np.sum(bayes_classify(model, features) != labels))
        remaining -= m
    return wrong / n_samples
