"""Synthetic benchmark scenarios and the experiment runner.

Two scenario families: sparse class means with five active features per
class over a scaled AR(1) within-covariance, and low-rank class means
confined to a random r-dimensional subspace. Experiments draw a fresh
model per repetition, fit every method on a training sample, and score
on a shared test sample next to the Monte Carlo exact-rule error.
"""

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Callable

import numpy as np

from . import model_core
from .classifier import (
    LINK_WARN_RATIO,
    fit_ldrr,
    fit_ldrr_f,
    penalty_family,
    select_penalty_cv,
    select_rank_cv,
)
from .errors import EmptyClassError, LdrrError
from .model_core import MixtureModel, bayes_classify, bayes_error_mc, class_separation
from .regression import LabeledDataset

# Active features per class in the sparse scenario, and their mean sd.
_SPARSE_BLOCK = 5
_SPARSE_MEAN_SD = 2.0


def derive_seed(base_seed: int, *parts) -> int:
    """Stable 64-bit seed derived from a base seed and a tag tuple.

    Hash-based, so derived streams are independent of the order in which
    work is scheduled.
    """
    text = repr((int(base_seed),) + tuple(parts)).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


def gen_class_probs(n_classes: int, imbalance: float, rng: np.random.Generator) -> np.ndarray:
    """Class probabilities nu_l^imbalance / sum, nu uniform on (0, 1).

    imbalance 0 gives exactly uniform probabilities; larger values skew.
    """
    if n_classes < 2:
        raise ValueError("need at least two classes")
    nu = rng.uniform(size=n_classes)
    weights = nu ** imbalance
    return weights / weights.sum()


def gen_ar1_scaled_cov(p: int, rho: float, diag_low: float, diag_high: float,
                       rng: np.random.Generator) -> np.ndarray:
    """AR(1)-correlated covariance with uniform random diagonal scales.

    Entry (i, j) is sqrt(d_i d_j) rho^|i-j| with d uniform on
    [diag_low, diag_high]. diag_low may be 0; draws are almost surely
    positive, and positive definiteness is still checked downstream.
    """
    if not -1.0 < rho < 1.0:
        raise ValueError("rho must lie in (-1, 1)")
    if not 0.0 <= diag_low <= diag_high or diag_high <= 0.0:
        raise ValueError("need 0 <= diag_low <= diag_high with diag_high > 0")
    d = rng.uniform(diag_low, diag_high, size=p)
    idx = np.arange(p)
    corr = rho ** np.abs(idx[:, None] - idx[None, :])
    root = np.sqrt(d)
    return (root[:, None] * root[None, :]) * corr


def _ar1_corr(p: int, rho: float) -> np.ndarray:
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


@dataclass(frozen=True)
class SparseScenarioConfig:
    """Sparse-means scenario: class l is active on features
    5(l-1)..5l-1 (zero-based), each active mean N(0, 2^2)."""

    n: int = 300
    p: int = 500
    n_classes: int = 5
    rho: float = 0.6
    sigma: float = 1.0
    imbalance: float = 0.0
    n_test: int = 500
    seed: int = 0

    def __post_init__(self):
        if _SPARSE_BLOCK * self.n_classes > self.p:
            raise ValueError(
                f"need p >= {_SPARSE_BLOCK * self.n_classes} so active blocks fit"
            )
        if self.n < 1 or self.n_test < 1:
            raise ValueError("n and n_test must be positive")


@dataclass(frozen=True)
class LowRankScenarioConfig:
    """Low-rank scenario: means eta * A @ loadings with A a random
    p x rank orthonormal basis and loadings N(0, 32/rank).

    Variant 1 uses an AR(1) within-covariance with parameter rho.
    Variant 2 adds eta^2 A C A' on the mean subspace (C an AR(1) block
    with parameter rho) to a weakly correlated noise covariance.
    eta defaults to 1 for variant 1 and 2 for variant 2.
    """

    variant: int = 1
    n: int = 1000
    p: int = 100
    n_classes: int = 10
    rank: int = 3
    rho: float = 0.6
    eta: float | None = None
    n_test: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.variant not in (1, 2):
            raise ValueError("variant must be 1 or 2")
        if not 1 <= self.rank <= min(self.p, self.n_classes):
            raise ValueError("rank must lie in [1, min(p, n_classes)]")
        if self.n < 1 or self.n_test < 1:
            raise ValueError("n and n_test must be positive")

    @property
    def eta_value(self) -> float:
        if self.eta is not None:
            return self.eta
        return 1.0 if self.variant == 1 else 2.0


ScenarioConfig = SparseScenarioConfig | LowRankScenarioConfig


@dataclass(frozen=True)
class ScenarioData:
    """One scenario draw.

    Train and test features are centered by the training mean; shift
    holds that mean, so model-space points are features + shift.
    """

    model: MixtureModel
    train: LabeledDataset
    test: LabeledDataset
    shift: np.ndarray


def sample_dataset(model: MixtureModel, n: int, seed: int,
                   require_all_classes: bool = False) -> LabeledDataset:
    """Draw a labeled sample from the model.

    With require_all_classes, redraws with derived seeds until every
    class appears, up to 100 attempts.
    """
    for attempt in range(100):
        rng = np.random.default_rng(derive_seed(seed, "sample", attempt))
        features, labels = model_core.sample(model, n, rng)
        data = LabeledDataset.from_labels(features, labels, model.n_classes)
        if not require_all_classes or not np.any(data.counts == 0):
            return data
    raise EmptyClassError(
        f"some class missing from all 100 draws of size {n}"
    )


def _center_scenario(model: MixtureModel, cfg, base_seed: int) -> ScenarioData:
    train = sample_dataset(model, cfg.n, derive_seed(base_seed, "train"),
                           require_all_classes=True)
    test = sample_dataset(model, cfg.n_test, derive_seed(base_seed, "test"))
    shift = train.features.mean(axis=0)
    return ScenarioData(
        model=model,
        train=LabeledDataset(train.features - shift, train.targets),
        test=LabeledDataset(test.features - shift, test.targets),
        shift=shift,
    )


def gen_sparse_scenario(cfg: SparseScenarioConfig) -> ScenarioData:
    rng = np.random.default_rng(derive_seed(cfg.seed, "sparse-model"))
    means = np.zeros((cfg.p, cfg.n_classes))
    for cls in range(cfg.n_classes):
        block = slice(_SPARSE_BLOCK * cls, _SPARSE_BLOCK * (cls + 1))
        means[block, cls] = rng.normal(0.0, _SPARSE_MEAN_SD, size=_SPARSE_BLOCK)
    cov = cfg.sigma ** 2 * gen_ar1_scaled_cov(cfg.p, cfg.rho, 1.0, 3.0, rng)
    priors = gen_class_probs(cfg.n_classes, cfg.imbalance, rng)
    model = MixtureModel(means, cov, priors)
    return _center_scenario(model, cfg, cfg.seed)


def gen_lowrank_scenario(cfg: LowRankScenarioConfig) -> ScenarioData:
    rng = np.random.default_rng(derive_seed(cfg.seed, "lowrank-model"))
    gauss = rng.standard_normal((cfg.p, cfg.rank))
    basis, r_factor = np.linalg.qr(gauss)
    signs = np.sign(np.diag(r_factor))
    signs[signs == 0.0] = 1.0
    basis = basis * signs  # fix the QR sign ambiguity
    loadings = rng.standard_normal((cfg.rank, cfg.n_classes)) * np.sqrt(32.0 / cfg.rank)
    eta = cfg.eta_value
    means = eta * basis @ loadings
    if cfg.variant == 1:
        cov = _ar1_corr(cfg.p, cfg.rho)
    else:
        subspace_cov = _ar1_corr(cfg.rank, cfg.rho)
        noise_cov = gen_ar1_scaled_cov(cfg.p, 0.2, 0.0, 1.0, rng)
        cov = eta ** 2 * basis @ subspace_cov @ basis.T + noise_cov
    priors = np.full(cfg.n_classes, 1.0 / cfg.n_classes)
    priors = priors / priors.sum()
    model = MixtureModel(means, cov, priors)
    return _center_scenario(model, cfg, cfg.seed)


def generate_scenario(cfg: ScenarioConfig) -> ScenarioData:
    if isinstance(cfg, SparseScenarioConfig):
        return gen_sparse_scenario(cfg)
    if isinstance(cfg, LowRankScenarioConfig):
        return gen_lowrank_scenario(cfg)
    raise TypeError(f"unknown scenario config {type(cfg).__name__}")


def evaluate(predict: Callable[[np.ndarray], np.ndarray],
             data: LabeledDataset) -> float:
    """Misclassification rate of a predictor on a labeled dataset."""
    pred = np.asarray(predict(data.features))
    return float(np.mean(pred != data.labels))


# ---------------------------------------------------------------------------
# methods


@dataclass
class FittedMethod:
    predict: Callable[[np.ndarray], np.ndarray]
    link_ratio: float | None = None


@dataclass
class Method:
    """A named way to turn one scenario draw into a predictor."""

    name: str
    build: Callable[[ScenarioData, int], FittedMethod]


def oracle_method(name: str = "oracle") -> Method:
    """Exact rule using the true model; undoes the empirical centering."""

    def build(scen: ScenarioData, seed: int) -> FittedMethod:
        def predict(features: np.ndarray) -> np.ndarray:
            return bayes_classify(scen.model, features + scen.shift)

        return FittedMethod(predict=predict)

    return Method(name=name, build=build)


def ldrr_method(kind: str = "lasso", alpha: float = 0.5, lam="cv",
                fisher: bool = False, k: int | None = None,
                rank_cv: bool = False, ridge: float = 0.0,
                n_folds: int = 5, n_grid: int = 10, loss: str = "mse",
                standardize: bool = False, name: str | None = None) -> Method:
    """Penalized classifier method; lam is a number or "cv".

    rank_cv selects the rank directly by cross-validation instead of a
    strength grid (rank-penalty families only).
    """
    if name is None:
        name = kind + ("-rankcv" if rank_cv else "-cv" if lam == "cv" else "")
        if fisher:
            name += "-f"

    def build(scen: ScenarioData, seed: int) -> FittedMethod:
        data = scen.train
        if rank_cv:
            penalty = select_rank_cv(data, ridge=ridge, n_folds=n_folds,
                                     seed=seed, loss=loss).best_penalty
        elif lam == "cv":
            penalty = select_penalty_cv(
                data, kind, alpha, n_grid=n_grid, n_folds=n_folds,
                seed=seed, loss=loss,
            ).best_penalty
        else:
            penalty = penalty_family(kind, alpha)(float(lam))
        if fisher:
            model = fit_ldrr_f(data, penalty, k=k, standardize=standardize)
            return FittedMethod(predict=model.predict)
        model = fit_ldrr(data, penalty, standardize=standardize)
        return FittedMethod(predict=model.predict, link_ratio=model.link_ratio)

    return Method(name=name, build=build)


# ---------------------------------------------------------------------------
# experiment runner


@dataclass
class MethodSummary:
    name: str
    mean_error: float
    se_error: float
    excess_risk: float
    n_ok: int
    n_failed: int
    link_warnings: int


@dataclass
class ExperimentReport:
    """Per-repetition errors with the exact-rule baseline alongside."""

    scenario: dict
    method_names: list[str]
    errors: np.ndarray        # (n_methods, n_reps), NaN marks a failed fit
    link_ratios: np.ndarray   # same shape, NaN where not applicable
    bayes_errors: np.ndarray  # (n_reps,)
    separations: np.ndarray   # (n_reps,) class separation per drawn model
    rep_seeds: list[int]
    failures: list[tuple[str, int, str]]
    base_seed: int

    @property
    def bayes_mean(self) -> float:
        return float(np.mean(self.bayes_errors))

    @property
    def bayes_se(self) -> float:
        n = self.bayes_errors.size
        return float(np.std(self.bayes_errors, ddof=1) / np.sqrt(n)) if n > 1 else 0.0

    def summaries(self) -> list[MethodSummary]:
        out = []
        for i, name in enumerate(self.method_names):
            row = self.errors[i]
            ok = ~np.isnan(row)
            n_ok = int(ok.sum())
            mean = float(np.mean(row[ok])) if n_ok else float("nan")
            se = (
                float(np.std(row[ok], ddof=1) / np.sqrt(n_ok)) if n_ok > 1 else 0.0
            )
            ratios = self.link_ratios[i]
            with_link = ~np.isnan(ratios)
            warnings = int(np.sum(ratios[with_link] < LINK_WARN_RATIO))
            out.append(MethodSummary(
                name=name, mean_error=mean, se_error=se,
                excess_risk=mean - self.bayes_mean, n_ok=n_ok,
                n_failed=int(row.size - n_ok), link_warnings=warnings,
            ))
        return out


def run_experiment(cfg: ScenarioConfig, methods: list[Method], n_reps: int,
                   base_seed: int, bayes_mc: int = 2000,
                   threads: int = 1) -> ExperimentReport:
    """Repeatedly draw the scenario and score every method on it.

    Each repetition gets a derived seed, so results do not depend on
    scheduling; a failing fit marks its entry NaN without aborting the
    run. Misclassification rates are measured on the shared test sample,
    the exact rule's rate by fresh Monte Carlo draws from the model.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be positive")
    rep_seeds = [derive_seed(base_seed, "rep", r) for r in range(n_reps)]

    def one_rep(r: int):
        rep_seed = rep_seeds[r]
        scen = generate_scenario(replace(cfg, seed=rep_seed))
        bayes = bayes_error_mc(scen.model, bayes_mc, derive_seed(rep_seed, "bayes"))
        sep = class_separation(scen.model)
        errs = np.full(len(methods), np.nan)
        ratios = np.full(len(methods), np.nan)
        fails: list[tuple[str, int, str]] = []
        for i, method in enumerate(methods):
            try:
                fitted = method.build(scen, derive_seed(rep_seed, "method", i))
                errs[i] = evaluate(fitted.predict, scen.test)
                if fitted.link_ratio is not None:
                    ratios[i] = fitted.link_ratio
            except LdrrError as exc:
                fails.append((method.name, r, f"{type(exc).__name__}: {exc}"))
        return bayes, sep, errs, ratios, fails

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_rep, range(n_reps)))
    else:
        results = [one_rep(r) for r in range(n_reps)]

    bayes_errors = np.array([res[0] for res in results])
    separations = np.array([res[1] for res in results])
    errors = np.stack([res[2] for res in results], axis=1)
    link_ratios = np.stack([res[3] for res in results], axis=1)
    failures = [f for res in results for f in res[4]]
    scenario = asdict(cfg)
    scenario["scenario"] = (
        "sparse" if isinstance(cfg, SparseScenarioConfig) else f"lowrank{cfg.variant}"
    )
    return ExperimentReport(
        scenario=scenario,
        method_names=[m.name for m in methods],
        errors=errors,
        link_ratios=link_ratios,
        bayes_errors=bayes_errors,
        separations=separations,
        rep_seeds=rep_seeds,
        failures=failures,
        base_seed=base_seed,
    )
