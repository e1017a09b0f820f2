import numpy as np
import pytest
from scipy.stats import multivariate_normal

from tcp_adapt.data import one_hot
from tcp_adapt.discriminant import (
    GaussianParams,
    da_risk,
    da_worst_case_contrast,
    fit_da,
    fit_tcp_da,
    log_joint_scores,
    predict_da,
    regularize_cov,
    tcp_da_grad_q,
    tcp_da_objective,
)
from tcp_adapt.solver import SolverOptions

from oracles import (
    central_difference_grad,
    da_risk_loops,
    gaussian_logpdf,
    weighted_moments_loops,
)


def _random_params(rng, K, D, variant="qda", lam=0.1):
    X = rng.normal(size=(6 * K + 10, D))
    Q = rng.dirichlet(np.ones(K), size=X.shape[0])
    return fit_da(X, Q, variant, lam)


def test_crisp_two_class_example():
    X = np.array([[0.0], [0.0], [2.0], [2.0]])
    Q = one_hot([1, 1, 2, 2], 2)
    params = fit_da(X, Q, "qda", lam=0.5)
    assert np.allclose(params.priors, [0.5, 0.5], atol=1e-15)
    assert np.allclose(params.means, [[0.0], [2.0]], atol=1e-15)
    # zero within-class scatter, so each covariance is just the lam floor
    assert np.allclose(params.covariances, 0.5, atol=1e-15)


def test_uniform_weights_give_global_mean():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(20, 3))
    Q = np.full((20, 2), 0.5)
    params = fit_da(X, Q, "qda")
    for k in range(2):
        assert np.allclose(params.means[k], X.mean(axis=0), atol=1e-12)


def test_fit_matches_weighted_moment_oracle():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(20, 2))
    Q = rng.dirichlet(np.ones(2), size=20)
    params = fit_da(X, Q, "qda", lam=0.0)
    priors, means, covs = weighted_moments_loops(X, Q)
    assert np.abs(params.priors - priors).max() < 1e-10
    assert np.abs(params.means - means).max() < 1e-10
    assert np.abs(params.covariances - covs).max() < 1e-10


def test_lda_pools_regularized_covariances():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(30, 2))
    Q = rng.dirichlet(np.ones(3), size=30)
    params = fit_da(X, Q, "lda", lam=0.2)
    priors, means, covs = weighted_moments_loops(X, Q)
    pooled = np.einsum("k,kde->de", priors, covs + 0.2 * np.eye(2))
    assert np.abs(params.covariances[0] - pooled).max() < 1e-10
    for k in range(3):
        assert np.array_equal(params.covariances[k], params.covariances[0])


def test_degenerate_class_policy():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(10, 2))
    Q = np.zeros((10, 2))
    Q[:, 0] = 1.0  # class 2 has zero mass
    params = fit_da(X, Q, "qda", lam=0.3)
    assert params.priors.sum() == pytest.approx(1.0, abs=1e-12)
    assert params.priors[1] < 1e-9
    assert np.allclose(params.means[1], X.mean(axis=0), atol=1e-12)
    assert np.allclose(params.covariances[1], 0.3 * np.eye(2), atol=1e-15)


def test_regularize_cov_clamps_then_adds_identity():
    out = regularize_cov(np.diag([2.0, -1.0]), 0.1)
    assert np.allclose(out, np.diag([2.1, 0.1]), atol=1e-12)


def test_regularize_cov_identity_fixed_point():
    eye = np.eye(3)
    assert np.array_equal(regularize_cov(eye, 0.0), eye)


def test_regularize_cov_min_eigenvalue_bound():
    rng = np.random.default_rng(4)
    for _ in range(20):
        A = rng.normal(size=(4, 4))
        S = A + A.T
        lam = rng.random()
        out = regularize_cov(S, lam)
        eigvals = np.linalg.eigvalsh(out)
        assert eigvals.min() >= lam - 1e-10
        clamped = np.linalg.eigvalsh(S)
        expected_min = np.maximum(clamped, 0.0).min() + lam
        assert eigvals.min() <= expected_min + 1e-8


def test_regularize_cov_rejects_asymmetry_and_negative_lam():
    with pytest.raises(ValueError):
        regularize_cov(np.array([[1.0, 2.0], [0.0, 1.0]]), 0.1)
    with pytest.raises(ValueError):
        regularize_cov(np.eye(2), -0.5)


def test_risk_standard_normal_at_mode():
    params = GaussianParams("qda", [1.0], [[0.0]], [[[1.0]]])
    value = da_risk(params, np.array([[0.0]]), np.array([[1.0]]))
    assert value == pytest.approx(0.5 * np.log(2 * np.pi), abs=1e-12)


def test_risk_standard_normal_one_sigma_out():
    params = GaussianParams("qda", [1.0], [[0.0]], [[[1.0]]])
    value = da_risk(params, np.array([[1.0]]), np.array([[1.0]]))
    assert value == pytest.approx(0.5 * np.log(2 * np.pi) + 0.5, abs=1e-12)


def test_risk_matches_loop_oracle():
    rng = np.random.default_rng(5)
    for _ in range(10):
        params = _random_params(rng, 2, 2)
        Z = rng.normal(size=(8, 2))
        Q = rng.dirichlet(np.ones(2), size=8)
        expected = da_risk_loops(params.priors, params.means,
                                 params.covariances, Z, Q)
        assert da_risk(params, Z, Q) == pytest.approx(expected, abs=1e-10)


def test_risk_rejects_singular_covariance():
    params = GaussianParams("qda", [1.0], [[0.0, 0.0]],
                            [np.diag([1.0, 0.0])])
    with pytest.raises(ValueError, match="positive definite"):
        da_risk(params, np.zeros((1, 2)), np.ones((1, 1)))


def test_objective_zero_for_identical_parameters():
    rng = np.random.default_rng(6)
    params = _random_params(rng, 2, 2)
    Z = rng.normal(size=(5, 2))
    Q = rng.dirichlet(np.ones(2), size=5)
    assert tcp_da_objective(params, params, Z, Q) == 0.0


def test_objective_nonpositive_at_inner_minimizer():
    rng = np.random.default_rng(7)
    for _ in range(10):
        Z = rng.normal(size=(15, 2))
        Q = rng.dirichlet(np.ones(2), size=15)
        lam = 0.05
        fitted = fit_da(Z, Q, "qda", lam)
        source = _random_params(rng, 2, 2, lam=lam)
        assert tcp_da_objective(fitted, source, Z, Q) <= 1e-9


def test_objective_matches_risk_difference_oracle():
    rng = np.random.default_rng(8)
    a = _random_params(rng, 2, 2)
    b = _random_params(rng, 2, 2)
    Z = rng.normal(size=(6, 2))
    Q = rng.dirichlet(np.ones(2), size=6)
    expected = da_risk_loops(a.priors, a.means, a.covariances, Z, Q) - \
        da_risk_loops(b.priors, b.means, b.covariances, Z, Q)
    assert tcp_da_objective(a, b, Z, Q) == pytest.approx(expected, abs=1e-10)


def test_grad_zero_for_identical_parameters():
    rng = np.random.default_rng(9)
    params = _random_params(rng, 2, 3)
    Z = rng.normal(size=(4, 3))
    assert np.abs(tcp_da_grad_q(params, params, Z)).max() == 0.0


def test_grad_matches_finite_differences():
    rng = np.random.default_rng(10)
    for _ in range(5):
        theta = _random_params(rng, 2, 2)
        source = _random_params(rng, 2, 2)
        Z = rng.normal(size=(6, 2))
        Q = rng.dirichlet(np.ones(2), size=6)
        grad = tcp_da_grad_q(theta, source, Z)
        fd = central_difference_grad(
            lambda q: tcp_da_objective(theta, source, Z, q), Q
        )
        rel = np.abs(grad - fd).max() / max(np.abs(grad).max(), 1e-12)
        assert rel < 1e-5


def test_grad_matches_direct_formula_oracle():
    rng = np.random.default_rng(11)
    theta = _random_params(rng, 2, 2)
    source = _random_params(rng, 2, 2)
    Z = rng.normal(size=(5, 2))
    grad = tcp_da_grad_q(theta, source, Z)
    m = Z.shape[0]
    for j in range(m):
        for k in range(2):
            num = np.log(theta.priors[k]) + gaussian_logpdf(
                Z[j], theta.means[k], theta.covariances[k])
            den = np.log(source.priors[k]) + gaussian_logpdf(
                Z[j], source.means[k], source.covariances[k])
            assert grad[j, k] == pytest.approx(-(num - den) / m, abs=1e-10)


def test_predict_equidistant_point_ties():
    params = GaussianParams(
        "qda", [0.5, 0.5], [[-1.0], [1.0]], [np.eye(1), np.eye(1)])
    scores = predict_da(params, np.array([[0.0]]))
    assert scores[0, 0] == pytest.approx(scores[0, 1], abs=1e-14)


def test_predict_prior_domination():
    params = GaussianParams(
        "qda", [1.0, 0.0], [[0.0], [0.0]], [np.eye(1), np.eye(1)])
    Z = np.array([[-50.0], [0.0], [50.0]])
    assert np.all(predict_da(params, Z).argmax(axis=1) == 0)


def test_predict_matches_naive_density_oracle():
    rng = np.random.default_rng(12)
    params = _random_params(rng, 3, 2)
    Z = rng.normal(size=(20, 2))
    got = predict_da(params, Z).argmax(axis=1)
    for j in range(20):
        dens = [
            params.priors[k] * multivariate_normal.pdf(
                Z[j], params.means[k], params.covariances[k])
            for k in range(3)
        ]
        assert got[j] == int(np.argmax(dens))


def test_adaptation_objective_nonpositive_and_strict_improvement():
    rng = np.random.default_rng(13)
    for variant in ("lda", "qda"):
        for _ in range(5):
            D, mk = 2, 10
            shift = rng.normal(0, 1, D)
            X = np.vstack([rng.normal(shift, 1, (mk, D)),
                           rng.normal(shift + 2.0, 1, (mk, D))])
            y = np.repeat([1, 2], mk)
            Z = np.vstack([rng.normal(np.zeros(D), 1, (mk, D)),
                           rng.normal(np.full(D, 2.0), 1, (mk, D))])
            u = np.repeat([1, 2], mk)
            source = fit_da(X, one_hot(y, 2), variant, 0.0)
            result = fit_tcp_da(source, Z, opts=SolverOptions(
                alpha0=float(2 * mk), schedule="inverse_sqrt_t", max_iter=2000))
            assert result.objective <= 1e-9
            U = one_hot(u, 2)
            assert da_risk(result.params, Z, U) < da_risk(source, Z, U)
            assert da_worst_case_contrast(result.params, source, Z) <= 1e-9


def test_total_mean_identity():
    rng = np.random.default_rng(14)
    X = rng.normal(size=(25, 3))
    Q = rng.dirichlet(np.ones(4), size=25)
    params = fit_da(X, Q, "qda")
    total_mean = params.priors @ params.means
    assert np.linalg.norm(total_mean - X.mean(axis=0)) < 1e-8


def test_variant_and_lambda_mismatch_rejected():
    rng = np.random.default_rng(15)
    source = _random_params(rng, 2, 2, variant="lda", lam=0.1)
    Z = rng.normal(size=(6, 2))
    with pytest.raises(ValueError, match="variant|source model"):
        fit_tcp_da(source, Z, variant="qda", lam=0.1)
    with pytest.raises(ValueError, match="lambda"):
        fit_tcp_da(source, Z, lam=0.5)
    qda = _random_params(rng, 2, 2, variant="qda")
    with pytest.raises(ValueError, match="variant"):
        tcp_da_objective(source, qda, Z, np.full((6, 2), 0.5))


def test_json_roundtrip_lda_and_qda():
    rng = np.random.default_rng(16)
    for variant in ("lda", "qda"):
        params = _random_params(rng, 2, 3, variant=variant, lam=0.25)
        doc = params.to_json()
        assert doc["kind"] == variant
        if variant == "lda":
            assert len(doc["covs"]) == 1  # one shared matrix
        again = GaussianParams.from_json(doc)
        assert np.array_equal(params.priors, again.priors)
        assert np.array_equal(params.means, again.means)
        assert np.array_equal(params.covariances, again.covariances)
        assert again.lam == 0.25


def test_gaussian_params_validation():
    with pytest.raises(ValueError, match="variant"):
        GaussianParams("foo", [1.0], [[0.0]], [[[1.0]]])
    with pytest.raises(ValueError, match="sum to 1"):
        GaussianParams("qda", [0.4, 0.4], np.zeros((2, 1)), np.ones((2, 1, 1)))
    with pytest.raises(ValueError, match="symmetric"):
        GaussianParams("qda", [1.0], [[0.0, 0.0]],
                       [np.array([[1.0, 0.5], [0.0, 1.0]])])
    with pytest.raises(ValueError, match="identical"):
        GaussianParams("lda", [0.5, 0.5], np.zeros((2, 1)),
                       [[[1.0]], [[2.0]]])
