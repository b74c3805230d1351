"""Classifier pipeline tests.

Scatter matrices are checked against a dense indicator-projector
construction, discriminant directions against scipy's generalized
symmetric eigensolver, and the full subspace rule against the exact
population rule it must reproduce when no directions are dropped.
"""

import dataclasses

import numpy as np
import pytest
import scipy.linalg

from ldrr import (
    ClassStats,
    LabeledDataset,
    Lasso,
    LdrrFModel,
    MixtureModel,
    NoPenalty,
    Ridge,
    bayes_classify,
    bayes_scores,
    class_scatter,
    class_stats,
    discriminant_from_link,
    fisher_directions,
    fit_ldrr,
    fit_ldrr_f,
    link_matrix,
    penalty_family,
    population_quantities,
    regression_coefs,
    residual_link,
    sample,
    select_penalty_cv,
    select_rank_cv,
)
from ldrr.errors import EmptyClassError, KTooLargeError
from ldrr.regression import lasso_lambda_max


def one_hot(labels, n_classes):
    labels = np.asarray(labels, dtype=int)
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def labeled_gaussian(rng, n=120, p=8, n_classes=3, spread=2.0):
    labels = np.concatenate(
        [np.arange(n_classes), rng.integers(0, n_classes, n - n_classes)]
    )
    X = rng.standard_normal((n, p))
    for l in range(n_classes):
        X[labels == l, l % p] += spread
    return LabeledDataset(X, one_hot(labels, n_classes))


class TestClassStats:
    def test_hand_example(self):
        X = np.array([[1.0, 0.0], [3.0, 0.0], [0.0, 5.0]])
        data = LabeledDataset(X, one_hot([0, 0, 1], 2))
        stats = class_stats(data)
        np.testing.assert_allclose(stats.means, [[2.0, 0.0], [0.0, 5.0]], atol=1e-15)
        np.testing.assert_allclose(stats.priors, [2 / 3, 1 / 3], atol=1e-15)
        np.testing.assert_array_equal(stats.counts, [2, 1])

    def test_empty_class_rejected(self):
        data = LabeledDataset.from_labels(np.zeros((3, 2)), [0, 0, 1], n_classes=3)
        with pytest.raises(EmptyClassError):
            class_stats(data)


class TestResidualLink:
    def test_hand_example(self):
        targets = np.eye(2)
        fitted = np.array([[0.1, -0.1], [-0.1, 0.1]])
        link = residual_link(targets, fitted)
        np.testing.assert_allclose(link, [[0.49, 0.01], [0.01, 0.49]], atol=1e-15)

    def test_symmetric_by_construction(self):
        rng = np.random.default_rng(0)
        targets = one_hot(rng.integers(0, 3, 40), 3)
        fitted = rng.standard_normal((40, 3))
        link = residual_link(targets, fitted)
        np.testing.assert_array_equal(link, link.T)

    def test_matches_residual_moment_at_least_squares(self):
        """At the unpenalized fit, (Y'Y - F'F)/n equals (Y-F)'(Y-F)/n."""
        rng = np.random.default_rng(1)
        data = labeled_gaussian(rng, n=80, p=6)
        X = data.features - data.features.mean(axis=0)
        coefs = np.linalg.lstsq(X, data.targets, rcond=None)[0]
        fitted = X @ coefs
        resid = data.targets - fitted
        a = residual_link(data.targets, fitted)
        b = resid.T @ resid / X.shape[0]
        assert np.max(np.abs(a - b)) <= 1e-12


class TestDiscriminantFromLink:
    def test_identity_link_is_passthrough(self):
        coefs = np.arange(6.0).reshape(3, 2)
        np.testing.assert_array_equal(discriminant_from_link(coefs, np.eye(2)), coefs)

    def test_singular_link_uses_pseudo_inverse(self):
        coefs = np.ones((2, 2))
        link = np.diag([2.0, 0.0])
        out = discriminant_from_link(coefs, link)
        np.testing.assert_allclose(out, [[0.5, 0.0], [0.5, 0.0]], atol=1e-12)


class TestFitLdrr:
    def test_model_invariants(self):
        rng = np.random.default_rng(2)
        data = labeled_gaussian(rng)
        model = fit_ldrr(data, Lasso(0.05))
        np.testing.assert_array_equal(model.link, model.link.T)
        again = model.coefs @ np.linalg.pinv(model.link)
        assert np.max(np.abs(model.discriminant - again)) <= 1e-10
        np.testing.assert_allclose(model.center, data.features.mean(axis=0), atol=1e-15)

    def test_predict_is_argmin_of_scores(self):
        rng = np.random.default_rng(3)
        data = labeled_gaussian(rng)
        model = fit_ldrr(data, Ridge(0.1))
        pts = rng.standard_normal((25, data.n_features))
        np.testing.assert_array_equal(
            model.predict(pts), np.argmin(model.scores(pts), axis=1)
        )
        single = model.predict(pts[0])
        assert single == model.predict(pts)[0]

    def test_translation_invariance(self):
        """Shifting all features moves the center, not the predictions."""
        rng = np.random.default_rng(4)
        data = labeled_gaussian(rng)
        shift = rng.uniform(-5, 5, data.n_features)
        shifted = LabeledDataset(data.features + shift, data.targets)
        a = fit_ldrr(data, Lasso(0.1))
        b = fit_ldrr(shifted, Lasso(0.1))
        pts = rng.standard_normal((30, data.n_features))
        np.testing.assert_allclose(a.scores(pts), b.scores(pts + shift), atol=1e-8)

    def test_full_shrinkage_falls_back_to_priors(self):
        """Past the zeroing strength the rule can only use class frequency."""
        rng = np.random.default_rng(5)
        data = labeled_gaussian(rng, n=90)
        centered = data.features - data.features.mean(axis=0)
        model = fit_ldrr(data, Lasso(lasso_lambda_max(centered, data.targets)))
        np.testing.assert_array_equal(model.coefs, 0.0)
        np.testing.assert_array_equal(model.discriminant, 0.0)
        # the link collapses to the diagonal of class frequencies
        np.testing.assert_allclose(model.link, np.diag(model.stats.priors), atol=1e-15)
        pts = rng.standard_normal((20, data.n_features))
        expected = int(np.argmax(model.stats.counts))
        np.testing.assert_array_equal(model.predict(pts), expected)

    def test_population_recovery(self):
        """With plenty of data the unpenalized fit tracks the truth."""
        rng = np.random.default_rng(6)
        means = np.array([[1.5, -1.5, 0.0], [0.0, 1.0, -1.0], [0.5, 0.5, -1.0],
                          [0.0, 0.0, 0.0]])
        priors = np.array([0.3, 0.4, 0.3])
        means = means - np.outer(means @ priors, np.ones(3))
        model = MixtureModel(means=means, cov_within=np.eye(4), priors=priors)
        x, labels = sample(model, 4000, rng)
        data = LabeledDataset(x, one_hot(labels, 3))
        est = fit_ldrr(data, NoPenalty())
        assert np.max(np.abs(est.coefs - regression_coefs(model))) < 0.15
        assert np.max(np.abs(est.link - link_matrix(model))) < 0.1
        test_x, _ = sample(model, 500, rng)
        agree = np.mean(est.predict(test_x) == bayes_classify(model, test_x))
        assert agree > 0.9

    def test_empty_class_raises(self):
        data = LabeledDataset.from_labels(np.zeros((4, 2)), [0, 0, 1, 1], n_classes=3)
        with pytest.raises(EmptyClassError):
            fit_ldrr(data, Lasso(0.1))

    def test_link_ratio_reported(self):
        rng = np.random.default_rng(7)
        data = labeled_gaussian(rng)
        model = fit_ldrr(data, Lasso(0.05))
        s = np.linalg.svd(model.link, compute_uv=False)
        assert model.link_ratio == pytest.approx(s[-1] / s[0])
        assert not model.link_warning  # well-conditioned case

    def test_standardize_matches_manual_scaling(self):
        rng = np.random.default_rng(8)
        data = labeled_gaussian(rng)
        center = data.features.mean(axis=0)
        sd = data.features.std(axis=0)
        manual = LabeledDataset((data.features - center) / sd, data.targets)
        a = fit_ldrr(data, Lasso(0.1), standardize=True)
        b = fit_ldrr(manual, Lasso(0.1))
        pts = rng.standard_normal((20, data.n_features))
        np.testing.assert_allclose(a.scores(pts), b.scores((pts - center) / sd),
                                   atol=1e-8)


class TestClassScatter:
    def test_matches_dense_projector(self):
        """Between/within from class means equal the projector split."""
        rng = np.random.default_rng(9)
        data = labeled_gaussian(rng, n=60, p=5)
        X = data.features - data.features.mean(axis=0)
        Y = data.targets
        coefs = np.linalg.lstsq(X, Y, rcond=None)[0]
        between, within = class_scatter(X, Y, coefs)
        Z = X @ coefs
        proj = Y @ np.linalg.inv(Y.T @ Y) @ Y.T  # replicates class means
        between_dense = Z.T @ proj @ Z / X.shape[0]
        within_dense = Z.T @ (np.eye(X.shape[0]) - proj) @ Z / X.shape[0]
        assert np.max(np.abs(between - between_dense)) <= 1e-10
        assert np.max(np.abs(within - within_dense)) <= 1e-10

    def test_adds_up_to_total_moment(self):
        rng = np.random.default_rng(10)
        data = labeled_gaussian(rng, n=70, p=6)
        X = data.features - data.features.mean(axis=0)
        coefs = rng.standard_normal((6, 3))
        between, within = class_scatter(X, data.targets, coefs)
        Z = X @ coefs
        total = Z.T @ Z / X.shape[0]
        assert np.max(np.abs(between + within - total)) <= 1e-10

    def test_both_psd(self):
        rng = np.random.default_rng(11)
        data = labeled_gaussian(rng)
        X = data.features - data.features.mean(axis=0)
        coefs = rng.standard_normal((data.n_features, 3))
        between, within = class_scatter(X, data.targets, coefs)
        assert np.min(np.linalg.eigvalsh(between)) >= -1e-10
        assert np.min(np.linalg.eigvalsh(within)) >= -1e-10

    def test_empty_class_rejected(self):
        X = np.zeros((3, 2))
        Y = one_hot([0, 0, 1], 3)
        with pytest.raises(EmptyClassError):
            class_scatter(X, Y, np.zeros((2, 3)))


class TestFisherDirections:
    def test_diagonal_pencil(self):
        """within = 4I, between = diag(4, 1): directions e1/2, e2/2."""
        between = np.diag([4.0, 1.0])
        within = 4.0 * np.eye(2)
        dirs, vals = fisher_directions(between, within, k=2)
        np.testing.assert_allclose(dirs, [[0.5, 0.0], [0.0, 0.5]], atol=1e-12)
        np.testing.assert_allclose(vals, [1.0, 0.25], atol=1e-12)

    def test_matches_scipy_generalized_eigensolver(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            L = int(rng.integers(3, 7))
            a = rng.standard_normal((L, L))
            within = a @ a.T + 0.5 * np.eye(L)
            b = rng.standard_normal((L, L - 1))
            between = b @ b.T  # rank L-1
            k = L - 1
            dirs, vals = fisher_directions(between, within, k=k)
            ref_vals, ref_vecs = scipy.linalg.eigh(between, within)
            ref_vals, ref_vecs = ref_vals[::-1][:k], ref_vecs[:, ::-1][:, :k]
            np.testing.assert_allclose(vals, ref_vals, atol=1e-9)
            for i in range(k):
                v = ref_vecs[:, i]
                lead = np.flatnonzero(np.abs(v) > 1e-12 * np.max(np.abs(v)))
                if v[lead[0]] < 0:
                    v = -v
                np.testing.assert_allclose(dirs[:, i], v, atol=1e-8)

    def test_within_orthonormality(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            a = rng.standard_normal((5, 5))
            within = a @ a.T + 0.3 * np.eye(5)
            b = rng.standard_normal((5, 3))
            between = b @ b.T
            dirs, _ = fisher_directions(between, within, k=3)
            gram = dirs.T @ within @ dirs
            np.testing.assert_allclose(gram, np.eye(3), atol=1e-6)

    def test_sign_convention(self):
        rng = np.random.default_rng(14)
        a = rng.standard_normal((4, 4))
        within = a @ a.T + 0.3 * np.eye(4)
        b = rng.standard_normal((4, 3))
        dirs, _ = fisher_directions(b @ b.T, within, k=3)
        for i in range(3):
            d = dirs[:, i]
            lead = np.flatnonzero(np.abs(d) > 1e-12 * np.max(np.abs(d)))[0]
            assert d[lead] > 0

    def test_too_many_directions(self):
        v = np.array([1.0, 2.0])
        between = np.outer(v, v)  # rank one
        with pytest.raises(KTooLargeError):
            fisher_directions(between, np.eye(2), k=2)

    def test_default_k_caps_at_classes_minus_one(self):
        rng = np.random.default_rng(15)
        a = rng.standard_normal((4, 4))
        within = a @ a.T + 0.3 * np.eye(4)
        b = rng.standard_normal((4, 4))
        dirs, _ = fisher_directions(b @ b.T, within)  # full-rank between
        assert dirs.shape == (4, 3)


class TestFitLdrrF:
    def test_default_k(self):
        rng = np.random.default_rng(16)
        data = labeled_gaussian(rng, n_classes=4)
        model = fit_ldrr_f(data, Lasso(0.02))
        assert model.k == 3
        assert model.directions.shape == (4, 3)

    def test_direction_orthonormality(self):
        rng = np.random.default_rng(17)
        data = labeled_gaussian(rng, n_classes=4)
        model = fit_ldrr_f(data, Lasso(0.02))
        gram = model.directions.T @ model.within @ model.directions
        np.testing.assert_allclose(gram, np.eye(model.k), atol=1e-6)

    def test_project_shape_and_consistency(self):
        rng = np.random.default_rng(18)
        data = labeled_gaussian(rng, n_classes=4)
        model = fit_ldrr_f(data, Lasso(0.02), k=2)
        pts = rng.standard_normal((15, data.n_features))
        proj = model.project(pts)
        assert proj.shape == (15, 2)
        expected = (pts - model.center) @ model.coefs @ model.directions
        np.testing.assert_allclose(proj, expected, atol=1e-12)
        assert model.project(pts[0]).shape == (2,)

    def test_scores_invariant_to_basis_rotation(self):
        """Any orthonormal recombination of directions scores identically."""
        rng = np.random.default_rng(19)
        data = labeled_gaussian(rng, n_classes=4)
        model = fit_ldrr_f(data, Lasso(0.02), k=3)
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        rotated = dataclasses.replace(model, directions=model.directions @ q)
        pts = rng.standard_normal((20, data.n_features))
        np.testing.assert_allclose(model.scores(pts), rotated.scores(pts), atol=1e-10)

    def test_predict_is_argmin(self):
        rng = np.random.default_rng(20)
        data = labeled_gaussian(rng, n_classes=4)
        model = fit_ldrr_f(data, Lasso(0.02))
        pts = rng.standard_normal((25, data.n_features))
        np.testing.assert_array_equal(
            model.predict(pts), np.argmin(model.scores(pts), axis=1)
        )

    def test_population_plugin_full_rank_reproduces_exact_rule(self):
        """Keeping every direction loses nothing: the subspace rule built
        from population quantities classifies exactly like the mixture."""
        rng = np.random.default_rng(21)
        for _ in range(10):
            p = int(rng.integers(3, 9))
            n_classes = int(rng.integers(2, 6))
            priors = rng.dirichlet(np.full(n_classes, 5.0))
            priors = (priors + 0.05) / (1.0 + 0.05 * n_classes)
            q, _ = np.linalg.qr(rng.standard_normal((p, p)))
            cov = (q * rng.uniform(0.5, 2.0, p)) @ q.T
            means = rng.standard_normal((p, n_classes)) * 1.5
            means = means - np.outer(means @ priors, np.ones(n_classes))
            model = MixtureModel(means=means, cov_within=(cov + cov.T) / 2,
                                 priors=priors)
            coefs = population_quantities(model).coefs
            zbar = model.means.T @ coefs  # class means of the fitted values
            between = (zbar.T * model.priors) @ zbar
            within = coefs.T @ model.cov_within @ coefs
            dirs, vals = fisher_directions(between, within)
            plug = LdrrFModel(
                coefs=coefs, between=between, within=within, directions=dirs,
                eigenvalues=vals, k=dirs.shape[1],
                stats=ClassStats(means=model.means, priors=model.priors,
                                 counts=np.ones(n_classes, dtype=int)),
                penalty=NoPenalty(), center=np.zeros(p), scale=None, fit=None,
            )
            pts, _ = sample(model, 200, rng)
            exact = bayes_scores(model, pts)
            part = np.partition(exact, 1, axis=1)
            keep = part[:, 1] - part[:, 0] > 1e-9
            np.testing.assert_array_equal(
                plug.predict(pts)[keep], bayes_classify(model, pts)[keep]
            )

    def test_requested_k_too_large(self):
        rng = np.random.default_rng(22)
        data = labeled_gaussian(rng, n_classes=3)
        with pytest.raises(KTooLargeError):
            fit_ldrr_f(data, Lasso(0.02), k=3)  # scatter rank is at most 2


class TestPenaltySelection:
    def test_family_constructors(self):
        assert penalty_family("lasso")(0.5) == Lasso(0.5)
        assert penalty_family("ridge")(0.5) == Ridge(0.5)
        enet = penalty_family("enet", alpha=0.3)(0.5)
        assert enet.lam == 0.5 and enet.alpha == 0.3
        with pytest.raises(ValueError):
            penalty_family("none")

    def test_select_penalty_cv_smoke(self):
        rng = np.random.default_rng(23)
        data = labeled_gaussian(rng, n=90)
        res = select_penalty_cv(data, "lasso", n_grid=5, n_folds=3, seed=0)
        assert res.grid.shape == (5,)
        assert res.best_value in res.grid
        model = fit_ldrr(data, res.best_penalty)
        assert model.coefs.shape == (data.n_features, data.n_classes)

    def test_select_rank_cv_prefers_small_rank_on_noise(self):
        zeros = 0
        for seed in range(10):
            rng = np.random.default_rng(2000 + seed)
            X = rng.standard_normal((60, 6))
            labels = np.concatenate([np.arange(3), rng.integers(0, 3, 57)])
            data = LabeledDataset(X, one_hot(labels, 3))
            res = select_rank_cv(data, n_folds=3, seed=seed)
            if res.best_value == 0.0:
                zeros += 1
        assert zeros > 5

    def test_select_rank_cv_finds_signal(self):
        rng = np.random.default_rng(24)
        data = labeled_gaussian(rng, n=120, spread=4.0)
        res = select_rank_cv(data, n_folds=4, seed=0)
        assert res.best_value >= 1.0
        assert res.grid[0] == 0.0 and res.grid[-1] == min(data.n_features, 3)
