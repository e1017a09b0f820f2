import numpy as np
import pytest

from tcp_adapt.data import Dataset
from tcp_adapt.experiments import (
    ExperimentConfig,
    crossval_lambda,
    pca_2d,
    run_da_experiment,
    run_ssb_experiment,
)
from tcp_adapt.metrics import mmd_rbf
from tcp_adapt.solver import SolverOptions


def _gaussian_dataset(rng, n_per_class=30, D=2, shift=0.0, name="toy"):
    X = np.vstack([
        rng.normal(shift, 1.0, (n_per_class, D)),
        rng.normal(shift + 2.5, 1.0, (n_per_class, D)),
    ])
    y = np.repeat([1, 2], n_per_class)
    return Dataset(X, y, name=name)


def _fast_config(**kw):
    defaults = dict(model="lda", lambda_grid=(0.0, 1e-2, 1e0), cv_folds=3,
                    n_source=20, rng_seed=0, repeats=1, max_iter=1200,
                    schedule="inverse_sqrt_t")
    defaults.update(kw)
    return ExperimentConfig(**defaults)


def test_crossval_singleton_grid_short_circuits():
    assert crossval_lambda(np.zeros((4, 1)), np.array([1, 1, 2, 2]),
                           "lda", grid=(0.0,), folds=2) == 0.0


def test_crossval_prefers_small_lambda_on_clean_data():
    rng = np.random.default_rng(0)
    ds = _gaussian_dataset(rng, n_per_class=40)
    grid = (0.0, 1e-6, 1e-4, 1e-2, 1e0, 1e2)
    for model in ("ls", "lda", "qda"):
        lam = crossval_lambda(ds.features, ds.labels, model, grid, 5, 0)
        assert lam <= np.median(grid)


def test_crossval_picks_positive_lambda_for_collinear_features():
    rng = np.random.default_rng(1)
    base = rng.normal(size=(40, 1))
    # duplicated columns plus noise in the last: near-singular design
    X = np.hstack([base, base, base + rng.normal(scale=1e-8, size=(40, 1))])
    y = rng.integers(1, 3, size=40)
    lam = crossval_lambda(X, y, "qda", (0.0, 1e-3, 1e-1, 1e1), 4, 0)
    assert lam > 0.0


def test_crossval_ties_break_toward_smaller_lambda():
    rng = np.random.default_rng(2)
    ds = _gaussian_dataset(rng)
    # duplicate grid values: the first (smaller-or-equal) entry must win
    lam = crossval_lambda(ds.features, ds.labels, "lda", (1e-3, 1e-3), 3, 0)
    assert lam == 1e-3


def test_crossval_unsplittable_class_errors():
    X = np.zeros((5, 1)) + np.arange(5)[:, None]
    y = np.array([1, 1, 1, 1, 2])  # class 2 cannot appear in every train fold
    with pytest.raises(ValueError, match="stratified"):
        crossval_lambda(X, y, "lda", (0.0, 1e-2), folds=4, rng_seed=0)


def test_ssb_rows_are_deterministic():
    rng = np.random.default_rng(3)
    ds = _gaussian_dataset(rng, n_per_class=30)
    config = _fast_config(repeats=2, rng_seed=11)
    rows_a = run_ssb_experiment(config, ds)
    rows_b = run_ssb_experiment(config, ds)
    assert rows_a == rows_b
    assert rows_a[0]["repeat"] == 0 and rows_a[1]["repeat"] == 1


def test_ssb_risk_ordering_for_da_models():
    rng = np.random.default_rng(4)
    ds = _gaussian_dataset(rng, n_per_class=40)
    for model in ("lda", "qda"):
        rows = run_ssb_experiment(_fast_config(model=model, rng_seed=5), ds)
        row = rows[0]
        assert row["tcp_risk"] <= row["source_risk"] + 1e-9
        assert row["oracle_risk"] <= row["tcp_risk"] + 1e-6
        assert row["objective"] <= 1e-9


def test_ssb_threads_match_sequential(monkeypatch):
    rng = np.random.default_rng(5)
    ds = _gaussian_dataset(rng)
    config = _fast_config(repeats=3, rng_seed=2)
    sequential = run_ssb_experiment(config, ds)
    monkeypatch.setenv("TCP_ADAPT_THREADS", "3")
    threaded = run_ssb_experiment(config, ds)
    assert sequential == threaded


def test_da_experiment_same_domain_risks_coincide():
    rng = np.random.default_rng(6)
    ds = _gaussian_dataset(rng, n_per_class=40, name="src")
    config = _fast_config(fixed_lambda=0.0)
    row = run_da_experiment(config, ds, ds)
    assert abs(row["objective"]) <= 1e-6
    assert abs(row["tcp_risk"] - row["source_risk"]) <= 1e-6
    assert abs(row["oracle_risk"] - row["source_risk"]) <= 1e-6
    assert row["mmd"] < 1e-12


def test_da_experiment_risk_bracket_and_mmd_ordering():
    rng = np.random.default_rng(7)
    src = _gaussian_dataset(rng, shift=1.5, name="shifted")
    tgt = _gaussian_dataset(rng, shift=0.0, name="plain")
    config = _fast_config(fixed_lambda=0.0)
    row = run_da_experiment(config, src, tgt)
    assert row["tcp_risk"] <= row["source_risk"] + 1e-9
    assert row["oracle_risk"] - 1e-9 <= row["tcp_risk"]
    no_shift = mmd_rbf(tgt.features, tgt.features, 1.0)
    assert row["mmd"] > no_shift
    assert row["q_star"].shape == (tgt.n, 2)


def test_da_experiment_schema_mismatch_rejected():
    rng = np.random.default_rng(8)
    a = _gaussian_dataset(rng, D=2)
    b = _gaussian_dataset(rng, D=3)
    with pytest.raises(ValueError, match="schema"):
        run_da_experiment(_fast_config(), a, b)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(model="svm")
    with pytest.raises(ValueError):
        ExperimentConfig(lambda_grid=())
    with pytest.raises(ValueError):
        ExperimentConfig(cv_folds=1)
    with pytest.raises(ValueError):
        ExperimentConfig(repeats=0)


def test_solver_opts_alpha_scales_with_target_size():
    config = ExperimentConfig()
    assert config.solver_opts(150).alpha0 == 150.0
    assert config.solver_opts(150).epsilon == 1e-9
    explicit = ExperimentConfig(alpha0=3.5)
    assert explicit.solver_opts(150).alpha0 == 3.5
    override = ExperimentConfig(solver=SolverOptions(alpha0=9.0, max_iter=10))
    assert override.solver_opts(150).max_iter == 10


def test_pca_2d_shapes_and_centering():
    rng = np.random.default_rng(9)
    Z = rng.normal(size=(30, 5))
    coords = pca_2d(Z)
    assert coords.shape == (30, 2)
    assert np.allclose(coords.mean(axis=0), 0.0, atol=1e-12)
    # single-feature data still yields two columns
    assert pca_2d(rng.normal(size=(10, 1))).shape == (10, 2)
