import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import skillclf.evaluation as evaluation
from skillclf.errors import (
    ArchitectureMismatchError,
    BadFormatError,
    DimensionMismatchError,
    LengthMismatchError,
    TooFewInstancesError,
)
from skillclf.evaluation import (
    CvResult,
    ResultMatrix,
    TrialConfig,
    accuracy_binary,
    accuracy_multilabel,
    column_markings,
    kfold_split,
    load_grid,
    relative_difference,
    render_report,
    results_from_json,
    results_to_json,
    run_cv,
    run_grid,
)
from skillclf.neuralnet import Hyperparams

# --- metrics ------------------------------------------------------------------


def test_accuracy_binary_hand_values():
    assert accuracy_binary([0.9, 0.1, 0.8, 0.3], [1, 0, 1, 0]) == 1.0
    assert accuracy_binary([0.9, 0.1, 0.2, 0.3], [1, 0, 1, 0]) == 0.75
    assert accuracy_binary([0.1, 0.9], [1, 0]) == 0.0


def test_accuracy_binary_threshold_is_inclusive():
    assert accuracy_binary([0.5], [1]) == 1.0
    assert accuracy_binary([0.5], [0]) == 0.0
    assert accuracy_binary([0.3], [0], threshold=0.3) == 0.0


def test_accuracy_binary_rejects():
    with pytest.raises(LengthMismatchError):
        accuracy_binary([0.5], [1, 0])
    with pytest.raises(LengthMismatchError):
        accuracy_binary([], [])
    with pytest.raises(LengthMismatchError):
        accuracy_binary([[0.5]], [[1]])


def test_accuracy_multilabel_hand_values():
    # one instance: two of three outputs thresholded correctly
    assert accuracy_multilabel([[0.9, 0.2, 0.8]], [[1, 1, 1]]) == pytest.approx(2 / 3)
    # a perfect instance and the 2/3 instance average to 5/6
    probs = [[0.9, 0.8, 0.7], [0.9, 0.2, 0.8]]
    truth = [[1, 1, 1], [1, 1, 1]]
    assert accuracy_multilabel(probs, truth) == pytest.approx(5 / 6)


def test_accuracy_multilabel_matches_bruteforce_exactly():
    rng = np.random.default_rng(42)
    for _ in range(50):
        n = int(rng.integers(1, 20))
        w = int(rng.integers(1, 8))
        probs = rng.random((n, w))
        truth = rng.integers(0, 2, (n, w)).astype(float)
        fast = accuracy_multilabel(probs, truth)
        matches = 0
        for i in range(n):
            for j in range(w):
                if (probs[i, j] >= 0.5) == (truth[i, j] >= 0.5):
                    matches += 1
        assert fast == matches / (n * w)


def test_accuracy_multilabel_rejects():
    with pytest.raises(LengthMismatchError):
        accuracy_multilabel([0.5], [1])
    with pytest.raises(LengthMismatchError):
        accuracy_multilabel(np.empty((0, 3)), np.empty((0, 3)))


def test_relative_difference():
    assert relative_difference(98.02, 97.50) == pytest.approx(0.0053333, abs=1e-6)
    assert relative_difference(94.12, 94.07) > 0
    assert relative_difference(96.01, 96.24) < 0
    assert relative_difference(50.0, 50.0) == 0.0
    with pytest.raises(ZeroDivisionError):
        relative_difference(1.0, 0.0)


# --- fold construction -----------------------------------------------------------


@st.composite
def _fold_cases(draw):
    n = draw(st.integers(2, 200))
    k = draw(st.integers(2, min(10, n)))
    seed = draw(st.integers(0, 2**31 - 1))
    return n, k, seed


@settings(max_examples=200)
@given(_fold_cases())
def test_kfold_split_properties(case):
    n, k, seed = case
    folds = kfold_split(n, k, seed)
    assert len(folds) == k
    merged = np.concatenate(folds)
    assert sorted(merged.tolist()) == list(range(n))
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1
    again = kfold_split(n, k, seed)
    for a, b in zip(folds, again):
        np.testing.assert_array_equal(a, b)


def test_kfold_split_rejects():
    with pytest.raises(ValueError):
        kfold_split(10, 1, 0)
    with pytest.raises(TooFewInstancesError):
        kfold_split(3, 5, 0)


def test_kfold_split_seed_changes_order():
    a = np.concatenate(kfold_split(50, 5, 0))
    b = np.concatenate(kfold_split(50, 5, 1))
    assert not np.array_equal(a, b)


# --- CvResult and TrialConfig ------------------------------------------------------


def test_cv_result_statistics():
    r = CvResult(np.array([[0.5, 0.7], [0.9, 0.9]]))
    assert r.mean == pytest.approx(0.75)
    assert r.min == 0.5
    assert r.max == 0.9


def test_cv_result_rejects_bad_shapes():
    with pytest.raises(LengthMismatchError):
        CvResult(np.array([0.5, 0.7]))
    with pytest.raises(LengthMismatchError):
        CvResult(np.empty((0, 3)))


def test_trial_config_resolve():
    hp = Hyperparams(epochs=1, learning_rate=0.1)
    trial = TrialConfig(1, "768 : 128(lrelu) : no(sigmoid)", hp)
    assert trial.resolve(5).output_dim == 5
    assert trial.resolve(2).output_dim == 2
    fixed = TrialConfig(2, "768 : 128(elu) : 1(sigmoid)", hp)
    assert fixed.resolve(5).output_dim == 1


# --- grid files ----------------------------------------------------------------------


GRID_TEXT = """\
[
  {"trial": 1, "architecture": "12 : 6(tanh) : 1(sigmoid)",
   "epochs": 30, "learning_rate": 0.1},
  {"trial": 2, "architecture": "12 : 6(elu) : 1(sigmoid)",
   "epochs": 10, "learning_rate": 0.01, "optimizer": "rmsprop",
   "lambda": 1e-5, "batch_size": 16, "motivation": "decay probe"}
]
"""


def test_load_grid_defaults_and_fields():
    trials = load_grid(GRID_TEXT)
    assert [t.trial_id for t in trials] == [1, 2]
    first, second = trials
    assert first.hyperparams == Hyperparams(epochs=30, learning_rate=0.1)
    assert first.motivation == ""
    assert second.hyperparams.optimizer == "rmsprop"
    assert second.hyperparams.l2_rate == 1e-5
    assert second.hyperparams.batch_size == 16
    assert second.motivation == "decay probe"


@pytest.mark.parametrize(
    "text",
    [
        "not json",
        "{}",
        "[]",
        '[{"trial": 1}]',
        '[{"trial": 1, "architecture": "a", "epochs": 1}]',
        '[{"trial": 1, "architecture": "a", "epochs": 0, "learning_rate": 0.1}]',
        '[{"trial": 1, "architecture": "a", "epochs": 1, "learning_rate": 0.1},'
        ' {"trial": 1, "architecture": "b", "epochs": 1, "learning_rate": 0.1}]',
    ],
)
def test_load_grid_rejects(text):
    with pytest.raises(BadFormatError):
        load_grid(text)


# --- cross-validation ------------------------------------------------------------------


def _binary_blobs(n=48, dim=12, seed=0, positives=None, sep=2.0):
    rng = np.random.default_rng(seed)
    y = np.zeros(n)
    y[: n // 2 if positives is None else positives] = 1.0
    X = rng.standard_normal((n, dim)) * 0.3
    X[:, 0] += np.where(y == 1, sep, -sep)
    return X, y


def _trial(arch="12 : 6(tanh) : 1(sigmoid)", **kwargs):
    kwargs.setdefault("epochs", 30)
    kwargs.setdefault("learning_rate", 0.1)
    kwargs.setdefault("batch_size", 16)
    return TrialConfig(1, arch, Hyperparams(**kwargs))


def test_run_cv_learns_separable_data():
    X, y = _binary_blobs()
    result = run_cv(X, y, _trial(), k=3, repeats=2, base_seed=0)
    assert result.accuracies.shape == (2, 3)
    assert result.mean >= 0.95


def test_run_cv_is_deterministic():
    # overlapping blobs keep accuracy off the ceiling so seeds can differ
    X, y = _binary_blobs(positives=8, sep=0.2)
    trial = _trial(epochs=5)
    a = run_cv(X, y, trial, k=3, repeats=2, base_seed=5)
    b = run_cv(X, y, trial, k=3, repeats=2, base_seed=5)
    np.testing.assert_array_equal(a.accuracies, b.accuracies)
    c = run_cv(X, y, trial, k=3, repeats=2, base_seed=6)
    assert not np.array_equal(a.accuracies, c.accuracies)


def test_run_cv_results_do_not_depend_on_jobs():
    X, y = _binary_blobs(positives=8)
    serial = run_cv(X, y, _trial(), k=3, repeats=2, base_seed=1, jobs=1)
    parallel = run_cv(X, y, _trial(), k=3, repeats=2, base_seed=1, jobs=2)
    np.testing.assert_array_equal(serial.accuracies, parallel.accuracies)


def test_run_cv_multilabel_resolves_placeholder():
    rng = np.random.default_rng(2)
    n = 45
    Y = np.zeros((n, 3))
    Y[np.arange(n), np.arange(n) % 3] = 1.0
    X = rng.standard_normal((n, 12)) * 0.3
    for j in range(3):
        X[:, j] += 2.0 * Y[:, j]
    result = run_cv(
        X, Y, _trial("12 : 6(tanh) : no(sigmoid)"), k=3, repeats=1, base_seed=0
    )
    assert result.accuracies.shape == (1, 3)
    assert result.mean >= 0.9


def test_run_cv_clone_before_split_is_deterministic():
    X, y = _binary_blobs(positives=6)
    a = run_cv(X, y, _trial(), k=3, repeats=1, base_seed=0, clone_before_split=True)
    b = run_cv(X, y, _trial(), k=3, repeats=1, base_seed=0, clone_before_split=True)
    np.testing.assert_array_equal(a.accuracies, b.accuracies)


def test_run_cv_validation_errors():
    X, y = _binary_blobs()
    trial = _trial()
    with pytest.raises(DimensionMismatchError):
        run_cv(X[:, 0], y, trial, k=3, repeats=1, base_seed=0)
    with pytest.raises(LengthMismatchError):
        run_cv(X, y[:-1], trial, k=3, repeats=1, base_seed=0)
    with pytest.raises(DimensionMismatchError):
        run_cv(X[:, :5], y, trial, k=3, repeats=1, base_seed=0)
    with pytest.raises(ArchitectureMismatchError):
        run_cv(X, np.tile(y[:, None], (1, 2)), _trial("12 : 6(tanh) : 1(sigmoid)"),
               k=3, repeats=1, base_seed=0)
    with pytest.raises(ValueError):
        run_cv(X, y, trial, k=3, repeats=0, base_seed=0)
    with pytest.raises(TooFewInstancesError):
        run_cv(X[:2], y[:2], trial, k=3, repeats=1, base_seed=0)


def test_run_cv_never_trains_on_test_rows(monkeypatch):
    """Every training batch, clones included, stays disjoint from its
    test fold, and the test folds of one repeat partition the data."""
    X, y = _binary_blobs(n=30, positives=5, seed=3)
    X[:, -1] = np.arange(30)  # make every row identifiable
    captured = []

    def fake_train(net, inputs, targets, hp):
        captured.append(("train", np.asarray(inputs).copy()))
        return net, [0.0]

    def fake_predict(net, inputs):
        captured.append(("test", np.asarray(inputs).copy()))
        return np.full((len(inputs), 1), 0.6)

    monkeypatch.setattr(evaluation, "train", fake_train)
    monkeypatch.setattr(evaluation, "predict_batch", fake_predict)
    run_cv(X, y, _trial(), k=3, repeats=2, base_seed=0)

    assert len(captured) == 12
    pairs = [(captured[i][1], captured[i + 1][1]) for i in range(0, 12, 2)]
    assert all(captured[i][0] == "train" for i in range(0, 12, 2))
    seen_test_rows = []
    for train_X, test_X in pairs:
        train_ids = {float(row[-1]) for row in train_X}
        test_ids = {float(row[-1]) for row in test_X}
        assert train_ids & test_ids == set()
        # cloning grew the training multiset beyond the plain split
        assert len(train_X) > 30 - len(test_X)
        seen_test_rows.append(test_ids)
    for repeat in range(2):
        union = set().union(*seen_test_rows[repeat * 3 : repeat * 3 + 3])
        assert union == set(float(i) for i in range(30))


# --- grids over classes ---------------------------------------------------------------


def test_run_grid_records_failures_without_faking_cells():
    X, y = _binary_blobs(n=30, seed=1)
    tiny_X, tiny_y = X[:3], np.array([1.0, 0.0, 1.0])
    trials = [_trial()]
    matrix = run_grid(
        {"T1": (X, y), "T2": (tiny_X, tiny_y)}, trials, k=5, repeats=1, base_seed=0
    )
    assert (1, "T1") in matrix.cells
    assert (1, "T2") not in matrix.cells
    assert "5" in matrix.errors[(1, "T2")]
    assert matrix.mean(1, "T2") is None
    assert matrix.mean(1, "T1") >= 0.9


def test_run_grid_rejects_duplicate_trial_ids():
    X, y = _binary_blobs(n=30)
    trials = [_trial(), _trial()]
    with pytest.raises(BadFormatError):
        run_grid({"T1": (X, y)}, trials, k=3, repeats=1, base_seed=0)


# --- marking -----------------------------------------------------------------------------


def test_column_markings_margin_and_ties():
    matrix = ResultMatrix.from_means(
        ["T1"],
        {
            1: [90.0],   # best (tied, lowest id wins)
            2: [90.0],   # tied, becomes near-best
            3: [89.8],   # exactly 0.2 pp away: margin is exclusive
            4: [89.81],  # inside the margin
            5: [50.0],
        },
    )
    best, near = column_markings(matrix, "T1")
    assert best == 1
    assert near == frozenset({2, 4})


def test_column_markings_empty_column():
    matrix = ResultMatrix.from_means(["T1"], {1: [80.0]})
    stripped = ResultMatrix(
        matrix.level, matrix.k, matrix.repeats, matrix.seed, matrix.threshold,
        matrix.class_labels, matrix.trials, {}, {},
    )
    assert column_markings(stripped, "T1") == (None, frozenset())


def test_render_report_marks_cells():
    matrix = ResultMatrix.from_means(
        ["T1", "T2"],
        {1: [96.35, 70.0], 2: [96.22, 60.0], 3: [95.89, 50.0]},
    )
    report = render_report(matrix, ["accuracy_by_class.png"])
    assert "**96.35**" in report
    assert "*96.22*" in report
    assert "| 95.89 |" in report
    assert "![accuracy_by_class.png](accuracy_by_class.png)" in report
    assert "## Trials" in report
    assert "| T1 | T2 |" in report


def test_render_report_shows_failures():
    matrix = ResultMatrix.from_means(["T1", "T2"], {1: [96.0, 70.0]})
    cells = dict(matrix.cells)
    del cells[(1, "T2")]
    broken = ResultMatrix(
        matrix.level, matrix.k, matrix.repeats, matrix.seed, matrix.threshold,
        matrix.class_labels, matrix.trials, cells, {(1, "T2"): "too few instances"},
    )
    report = render_report(broken)
    assert "—" in report
    assert "## Failed cells" in report
    assert "- trial 1, T2: too few instances" in report


# --- result files --------------------------------------------------------------------------


def test_results_json_round_trip():
    X, y = _binary_blobs(n=30, seed=4)
    trials = [_trial()]
    matrix = run_grid(
        {"T1": (X, y), "T2": (X[:3], y[:3])}, trials, k=5, repeats=2, base_seed=3
    )
    text = results_to_json(matrix)
    loaded = results_from_json(text)
    assert loaded.level == matrix.level
    assert loaded.k == 5 and loaded.repeats == 2 and loaded.seed == 3
    assert loaded.threshold == matrix.threshold
    assert loaded.class_labels == matrix.class_labels
    assert loaded.trials == matrix.trials
    assert set(loaded.cells) == set(matrix.cells)
    for key in matrix.cells:
        np.testing.assert_array_equal(
            loaded.cells[key].accuracies, matrix.cells[key].accuracies
        )
    assert loaded.errors == matrix.errors
    # render identically after the round trip
    assert render_report(loaded) == render_report(matrix)


def test_results_from_json_rejects():
    with pytest.raises(BadFormatError):
        results_from_json("not json")
    with pytest.raises(BadFormatError):
        results_from_json('{"format": "other"}')
    with pytest.raises(BadFormatError):
        results_from_json('{"format": "skillclf-results", "trials": [{}]}')
