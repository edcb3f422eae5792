import numpy as np
import pytest

from driftml.data import Batch, Feature, Schema, UNSEEN
from driftml.pipeline import (
    DecisionTreeConfig,
    KnnConfig,
    LogisticSgdConfig,
    NaiveBayesConfig,
    PipelineConfig,
    PipelineError,
    TopKMutualInfoConfig,
    VarianceThresholdConfig,
    config_from_text,
    config_to_text,
    default_config_portfolio,
    fit,
    predict,
    predict_proba,
)

BIN_SCHEMA = Schema((Feature("x"),), "y", ("0", "1"))


def batch_of(schema, X, y):
    return Batch(schema, np.asarray(X, dtype=float), np.asarray(y, dtype=np.int64))


def separable_1d():
    return batch_of(BIN_SCHEMA, [[0.0], [1.0], [10.0], [11.0]], [0, 0, 1, 1])


ALL_FAMILIES = [
    PipelineConfig(classifier=DecisionTreeConfig(max_depth=4)),
    PipelineConfig(one_hot=True, classifier=NaiveBayesConfig()),
    PipelineConfig(standardize=True, classifier=LogisticSgdConfig(epochs=30)),
    PipelineConfig(standardize=True, classifier=KnnConfig(k=3)),
]


def test_stump_reproduces_separable_labels():
    cfg = PipelineConfig(classifier=DecisionTreeConfig(max_depth=1, min_leaf=1))
    model = fit(cfg, separable_1d(), seed=0)
    assert predict(model, separable_1d()).tolist() == [0, 0, 1, 1]


def test_naive_bayes_matches_hand_computed_posterior():
    # contingency: class 0 has 3 rows (one with x=1), class 1 has 4 rows
    # (three with x=1); alpha=1 smoothing:
    #   P(x=1|0) = (1+1)/(3+2) = 0.4        P(x=1|1) = (3+1)/(4+2) = 2/3
    #   priors 3/7 and 4/7
    # posterior(x=1) ~ (3/7*0.4, 4/7*2/3) -> (0.310345.., 0.689655..)
    # posterior(x=0) ~ (3/7*0.6, 4/7*1/3) -> (0.574468.., 0.425531..)
    X = [[0.0], [0.0], [1.0], [1.0], [1.0], [1.0], [0.0]]
    y = [0, 0, 0, 1, 1, 1, 1]
    cfg = PipelineConfig(classifier=NaiveBayesConfig(laplace_alpha=1.0))
    model = fit(cfg, batch_of(BIN_SCHEMA, X, y), seed=0)
    probe = batch_of(BIN_SCHEMA, [[1.0], [0.0]], [0, 0])
    proba = predict_proba(model, probe)
    p1_num = (3 / 7) * 0.4, (4 / 7) * (2 / 3)
    expect_x1 = p1_num[0] / sum(p1_num)
    p0_num = (3 / 7) * 0.6, (4 / 7) * (1 / 3)
    expect_x0 = p0_num[0] / sum(p0_num)
    assert proba[0, 0] == pytest.approx(expect_x1, abs=1e-12)
    assert proba[1, 0] == pytest.approx(expect_x0, abs=1e-12)


@pytest.mark.parametrize("cfg", ALL_FAMILIES)
def test_refit_is_byte_identical(cfg):
    rng = np.random.default_rng(2)
    schema = Schema((Feature("a"), Feature("b")), "y", ("0", "1", "2"))
    train = batch_of(schema, rng.normal(size=(60, 2)), rng.integers(0, 3, 60))
    probe = batch_of(schema, rng.normal(size=(20, 2)), rng.integers(0, 3, 20))
    a = predict_proba(fit(cfg, train, seed=9), probe)
    b = predict_proba(fit(cfg, train, seed=9), probe)
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("cfg", ALL_FAMILIES)
def test_single_class_training_gives_one_hot(cfg):
    schema = Schema((Feature("a"),), "y", ("0", "1", "2"))
    train = batch_of(schema, [[0.5], [1.5], [2.5]], [1, 1, 1])
    proba = predict_proba(fit(cfg, train, seed=0), train)
    assert np.array_equal(proba, np.tile([0.0, 1.0, 0.0], (3, 1)))


def test_unseen_level_predicts_valid_distribution():
    schema = Schema((Feature("c", ("red", "green")),), "y", ("0", "1"))
    train = batch_of(schema, [[0.0], [1.0], [0.0], [1.0]], [0, 1, 0, 1])
    cfg = PipelineConfig(one_hot=True, classifier=NaiveBayesConfig())
    model = fit(cfg, train, seed=0)
    probe = batch_of(schema, [[UNSEEN], [0.0]], [0, 0])
    proba = predict_proba(model, probe)
    assert proba.shape == (2, 2)
    assert np.all(proba >= 0)
    assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-9)


def test_knn_k1_recovers_training_labels():
    rng = np.random.default_rng(4)
    schema = Schema((Feature("a"), Feature("b")), "y", ("0", "1"))
    train = batch_of(schema, rng.normal(size=(30, 2)), rng.integers(0, 2, 30))
    cfg = PipelineConfig(classifier=KnnConfig(k=1))
    model = fit(cfg, train, seed=0)
    assert np.array_equal(predict(model, train), train.y)


def test_predict_tie_breaks_to_lowest_class():
    # symmetric counts make the naive Bayes posterior exactly 0.5 / 0.5
    X = [[0.0], [1.0], [0.0], [1.0]]
    y = [0, 0, 1, 1]
    cfg = PipelineConfig(classifier=NaiveBayesConfig(laplace_alpha=1.0))
    model = fit(cfg, batch_of(BIN_SCHEMA, X, y), seed=0)
    probe = batch_of(BIN_SCHEMA, [[0.0], [1.0]], [0, 0])
    proba = predict_proba(model, probe)
    assert np.allclose(proba, 0.5)
    assert predict(model, probe).tolist() == [0, 0]


def test_probability_rows_fuzz():
    rng = np.random.default_rng(10)
    schema = Schema(
        (Feature("n1"), Feature("n2"), Feature("c", ("u", "v", "w"))),
        "y",
        ("0", "1", "2"),
    )
    configs = [
        PipelineConfig(classifier=DecisionTreeConfig(max_depth=6)),
        PipelineConfig(one_hot=True, classifier=NaiveBayesConfig(laplace_alpha=0.5)),
        PipelineConfig(standardize=True, one_hot=True,
                       classifier=LogisticSgdConfig(epochs=10)),
        PipelineConfig(standardize=True, classifier=KnnConfig(k=5)),
        PipelineConfig(one_hot=True, selector=TopKMutualInfoConfig(k=3),
                       classifier=DecisionTreeConfig(max_depth=4)),
        PipelineConfig(selector=VarianceThresholdConfig(tau=1e-4),
                       imputation="mode", classifier=NaiveBayesConfig()),
    ]
    for trial in range(12):
        n = int(rng.integers(20, 80))
        X = np.column_stack([
            rng.normal(size=n),
            rng.normal(size=n),
            rng.integers(0, 3, n).astype(float),
        ])
        X[rng.random((n, 3)) < 0.1] = np.nan  # sprinkle missing cells
        y = rng.integers(0, 3, n)
        if np.unique(y).size < 2:
            continue
        train = batch_of(schema, X, y)
        probe_X = X.copy()
        probe_X[rng.random(n) < 0.05, 2] = UNSEEN  # unseen levels too
        probe = batch_of(schema, probe_X, y)
        for cfg in configs:
            proba = predict_proba(fit(cfg, train, seed=trial), probe)
            assert proba.shape == (n, 3)
            assert np.all(proba >= 0)
            assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-9)


def test_tree_invariant_under_standardization():
    rng = np.random.default_rng(6)
    schema = Schema((Feature("a"), Feature("b")), "y", ("0", "1"))
    train = batch_of(schema, rng.normal(size=(80, 2)) * 3 + 1, rng.integers(0, 2, 80))
    probe = batch_of(schema, rng.normal(size=(40, 2)) * 3 + 1, rng.integers(0, 2, 40))
    plain = fit(PipelineConfig(classifier=DecisionTreeConfig(max_depth=6)), train, 0)
    scaled = fit(
        PipelineConfig(standardize=True, classifier=DecisionTreeConfig(max_depth=6)),
        train, 0,
    )
    assert np.array_equal(predict(plain, probe), predict(scaled, probe))


def test_logistic_loss_non_increasing_on_separable_data():
    rng = np.random.default_rng(8)
    n = 60
    X = np.vstack([rng.normal(-2.0, 0.3, (n // 2, 2)), rng.normal(2.0, 0.3, (n // 2, 2))])
    y = np.array([0] * (n // 2) + [1] * (n // 2))
    schema = Schema((Feature("a"), Feature("b")), "y", ("0", "1"))
    cfg = PipelineConfig(
        standardize=True,
        classifier=LogisticSgdConfig(learning_rate=0.05, l2=0.0, epochs=25),
    )
    model = fit(cfg, batch_of(schema, X, y), seed=1)
    losses = model._classifier.loss_history_
    assert len(losses) == 25
    for earlier, later in zip(losses, losses[1:]):
        assert later <= earlier + 1e-6


def test_portfolio_fixed_and_covering():
    first = default_config_portfolio()
    second = default_config_portfolio()
    assert first == second
    assert 8 <= len(first) <= 16
    kinds = {cfg.classifier.kind for cfg in first}
    assert kinds == {"decision_tree", "naive_bayes", "logistic_sgd", "knn"}
    for cfg in first:
        cfg.validate()


def test_config_text_round_trip():
    for cfg in default_config_portfolio():
        text = config_to_text(cfg)
        assert config_from_text(text) == cfg
    with pytest.raises(PipelineError):
        config_from_text("preprocessor=none imputation=mean one_hot=true")
    with pytest.raises(PipelineError):
        config_from_text(
            "preprocessor=none imputation=mean one_hot=true selector=none "
            "classifier=perceptron(lr=1)"
        )


def test_fit_rejects_bad_input():
    schema = Schema((Feature("x"),), "y", ("0", "1"))
    empty = Batch(schema, np.empty((0, 1)), np.empty(0, dtype=int))
    with pytest.raises(PipelineError):
        fit(PipelineConfig(), empty, 0)
    unlabeled = Batch(schema, np.zeros((2, 1)), np.array([0, -1]))
    with pytest.raises(PipelineError):
        fit(PipelineConfig(), unlabeled, 0)


def test_predict_rejects_schema_mismatch():
    model = fit(PipelineConfig(), separable_1d(), 0)
    other = Schema((Feature("x"), Feature("z")), "y", ("0", "1"))
    probe = Batch(other, np.zeros((1, 2)), np.array([0]))
    with pytest.raises(PipelineError):
        predict_proba(model, probe)


def test_config_invariants_enforced():
    with pytest.raises(PipelineError):
        PipelineConfig(classifier=DecisionTreeConfig(max_depth=0)).validate()
    with pytest.raises(PipelineError):
        PipelineConfig(classifier=KnnConfig(k=4)).validate()
    with pytest.raises(PipelineError):
        PipelineConfig(classifier=NaiveBayesConfig(laplace_alpha=0.0)).validate()
    with pytest.raises(PipelineError):
        PipelineConfig(imputation="median").validate()


def test_selector_k_clipped_to_width():
    rng = np.random.default_rng(3)
    schema = Schema((Feature("a"), Feature("b")), "y", ("0", "1"))
    train = batch_of(schema, rng.normal(size=(40, 2)), rng.integers(0, 2, 40))
    cfg = PipelineConfig(selector=TopKMutualInfoConfig(k=64),
                         classifier=DecisionTreeConfig(max_depth=3))
    model = fit(cfg, train, seed=0)  # must not raise
    assert predict_proba(model, train).shape == (40, 2)


def test_one_hot_caps_levels():
    levels = tuple(f"v{i}" for i in range(100))
    schema = Schema((Feature("c", levels),), "y", ("0", "1"))
    rng = np.random.default_rng(0)
    X = rng.integers(0, 100, size=(400, 1)).astype(float)
    y = rng.integers(0, 2, 400)
    cfg = PipelineConfig(one_hot=True, classifier=NaiveBayesConfig())
    model = fit(cfg, batch_of(schema, X, y), seed=0)
    assert model._encoder.width_ == 65  # 64 kept levels + other


def test_all_missing_column_falls_back():
    schema = Schema((Feature("a"), Feature("b")), "y", ("0", "1"))
    X = np.array([[np.nan, 1.0], [np.nan, 2.0], [np.nan, 3.0], [np.nan, 4.0]])
    model = fit(PipelineConfig(), batch_of(schema, X, [0, 0, 1, 1]), seed=0)
    proba = predict_proba(model, batch_of(schema, X, [0, 0, 1, 1]))
    assert np.allclose(proba.sum(axis=1), 1.0)


def test_fingerprint_tracks_training_data():
    a = fit(PipelineConfig(), separable_1d(), 0)
    b = fit(PipelineConfig(), separable_1d(), 0)
    assert a.train_fingerprint == b.train_fingerprint
    other = batch_of(BIN_SCHEMA, [[0.0], [1.0], [10.0], [12.0]], [0, 0, 1, 1])
    c = fit(PipelineConfig(), other, 0)
    assert c.train_fingerprint != a.train_fingerprint
