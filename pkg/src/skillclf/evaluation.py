"""Repeated k-fold evaluation of trial configurations and reporting.

A trial is an architecture plus hyperparameters; a grid is a list of
trials evaluated against per-class datasets. Results keep the full
repeats-by-folds accuracy tensor so reports can be re-rendered without
re-training. Rendered tables mark the best trial per class in bold and
trials within 0.2 percentage points of the best in italics.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ArchitectureMismatchError,
    BadFormatError,
    DimensionMismatchError,
    LengthMismatchError,
    SkillclfError,
    TooFewInstancesError,
)
from .hierarchy import oversample_indices
from .neuralnet import (
    Hyperparams,
    init_network,
    parse_architecture,
    predict_batch,
    substitute_output_width,
    train,
)

NEAR_BEST_MARGIN = 0.002  # 0.2 percentage points, exclusive
DEFAULT_THRESHOLD = 0.5


# --- metrics ---------------------------------------------------------------


def accuracy_binary(probabilities, targets, threshold: float = DEFAULT_THRESHOLD) -> float:
    """Fraction of instances whose thresholded probability matches the target."""
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if p.shape != y.shape or p.ndim != 1:
        raise LengthMismatchError(f"shapes differ: {p.shape} vs {y.shape}")
    if p.size == 0:
        raise LengthMismatchError("no instances")
    return float(((p >= threshold) == (y >= 0.5)).sum() / p.size)


def accuracy_multilabel(
    probabilities, targets, threshold: float = DEFAULT_THRESHOLD
) -> float:
    """Mean over instances of the per-instance fraction of outputs whose
    thresholded probability matches the target.

    All instances share one output width, so this equals the total match
    count divided by instances times width.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if p.shape != y.shape or p.ndim != 2:
        raise LengthMismatchError(f"shapes differ: {p.shape} vs {y.shape}")
    if p.size == 0:
        raise LengthMismatchError("no instances")
    matches = int(((p >= threshold) == (y >= 0.5)).sum())
    return matches / p.size


def relative_difference(a_m: float, a_e: float) -> float:
    """a_m / a_e - 1; positive when a_m is larger."""
    if a_e == 0:
        raise ZeroDivisionError("relative difference undefined for a_e = 0")
    return a_m / a_e - 1.0


# --- folds -----------------------------------------------------------------


def kfold_split(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Shuffle 0..n-1 with the seed and split into k folds.

    Fold sizes differ by at most one; together the folds partition the
    index range. Raises TooFewInstancesError when n < k.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if n < k:
        raise TooFewInstancesError(f"cannot split {n} instances into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


# --- cross-validation -------------------------------------------------------


@dataclass(frozen=True)
class CvResult:
    """Accuracy per (repeat, fold); summary statistics derive from it."""

    accuracies: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.accuracies, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise LengthMismatchError(
                f"accuracies must be a non-empty 2-D array, got shape {arr.shape}"
            )
        object.__setattr__(self, "accuracies", arr)

    @property
    def mean(self) -> float:
        return float(self.accuracies.mean())

    @property
    def min(self) -> float:
        return float(self.accuracies.min())

    @property
    def max(self) -> float:
        return float(self.accuracies.max())


@dataclass(frozen=True)
class TrialConfig:
    """One grid row. The architecture is kept in text form because the
    output width may be the ``no`` placeholder until a class binds it."""

    trial_id: int
    architecture: str
    hyperparams: Hyperparams
    motivation: str = ""

    def resolve(self, output_width: int):
        return parse_architecture(
            substitute_output_width(self.architecture, output_width)
        )


def _model_seed(base_seed: int, repeat: int, fold: int) -> int:
    return (base_seed + repeat) * 1000 + fold


def _run_fold(
    X: np.ndarray,
    Y: np.ndarray,
    arch,
    hyperparams: Hyperparams,
    k: int,
    base_seed: int,
    repeat: int,
    fold: int,
    augment: bool,
    threshold: float,
    dtype,
) -> float:
    folds = kfold_split(X.shape[0], k, base_seed + repeat)
    test_idx = folds[fold]
    train_idx = np.concatenate([folds[j] for j in range(k) if j != fold])
    binary = Y.ndim == 1
    if augment and binary:
        train_idx = train_idx[oversample_indices(Y[train_idx])]
    seed = _model_seed(base_seed, repeat, fold)
    hp = replace(hyperparams, seed=seed)
    net = init_network(arch, seed, dtype)
    trained, _ = train(net, X[train_idx], Y[train_idx], hp)
    probs = predict_batch(trained, X[test_idx])
    if binary:
        return accuracy_binary(probs[:, 0], Y[test_idx], threshold)
    return accuracy_multilabel(probs, Y[test_idx], threshold)


_WORKER_CTX: dict = {}


def _worker_init(ctx: dict) -> None:
    _WORKER_CTX.update(ctx)


def _worker_run(task: tuple[int, int]) -> float:
    c = _WORKER_CTX
    return _run_fold(
        c["X"], c["Y"], c["arch"], c["hyperparams"], c["k"], c["base_seed"],
        task[0], task[1], c["augment"], c["threshold"], c["dtype"],
    )


def run_cv(
    inputs,
    targets,
    config: TrialConfig,
    k: int,
    repeats: int,
    base_seed: int,
    *,
    augment: bool = True,
    clone_before_split: bool = False,
    threshold: float = DEFAULT_THRESHOLD,
    dtype=np.float32,
    jobs: int = 1,
) -> CvResult:
    """Repeated k-fold accuracy of one trial on one dataset.

    Repeat r shuffles with seed base_seed + r; the model for fold f of
    repeat r is seeded with (base_seed + r) * 1000 + f, so every cell is
    reproducible in isolation. Binary datasets are rebalanced by cloning
    inside each training split; clone_before_split instead clones once
    up front (the test folds then share clone sources with training
    folds, which inflates scores; kept for comparison runs). Results do
    not depend on jobs.
    """
    X = np.asarray(inputs, dtype=np.float64)
    Y = np.asarray(targets, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatchError(f"inputs must be 2-D, got {X.shape}")
    if Y.shape[0] != X.shape[0]:
        raise LengthMismatchError(f"{Y.shape[0]} targets for {X.shape[0]} inputs")
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    binary = Y.ndim == 1
    output_width = 1 if binary else Y.shape[1]
    arch = config.resolve(output_width)
    if arch.input_dim != X.shape[1]:
        raise DimensionMismatchError(
            f"architecture expects {arch.input_dim} inputs, data has {X.shape[1]}"
        )
    if arch.output_dim != output_width:
        raise ArchitectureMismatchError(
            f"architecture has {arch.output_dim} outputs, targets have {output_width}"
        )
    if augment and binary and clone_before_split:
        idx = oversample_indices(Y)
        X = X[idx]
        Y = Y[idx]
    kfold_split(X.shape[0], k, base_seed)  # validate n, k up front

    tasks = [(r, f) for r in range(repeats) for f in range(k)]
    if jobs > 1:
        ctx = {
            "X": X, "Y": Y, "arch": arch, "hyperparams": config.hyperparams,
            "k": k, "base_seed": base_seed,
            "augment": augment and not clone_before_split,
            "threshold": threshold, "dtype": dtype,
        }
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_worker_init, initargs=(ctx,)
        ) as pool:
            flat = list(pool.map(_worker_run, tasks))
    else:
        flat = [
            _run_fold(
                X, Y, arch, config.hyperparams, k, base_seed, r, f,
                augment and not clone_before_split, threshold, dtype,
            )
            for r, f in tasks
        ]
    return CvResult(np.array(flat, dtype=np.float64).reshape(repeats, k))


# --- grids -------------------------------------------------------------------


def load_grid(text: str) -> list[TrialConfig]:
    """Parse a JSON grid: a list of trial objects with keys trial,
    architecture, epochs, learning_rate and optional optimizer, lambda,
    batch_size, motivation."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BadFormatError(f"grid is not valid JSON: {exc}") from None
    if not isinstance(doc, list) or not doc:
        raise BadFormatError("grid must be a non-empty JSON list")
    trials = []
    seen: set[int] = set()
    for i, row in enumerate(doc):
        if not isinstance(row, dict):
            raise BadFormatError(f"grid row {i} must be an object")
        try:
            trial_id = int(row["trial"])
            architecture = str(row["architecture"])
            hp = Hyperparams(
                epochs=int(row["epochs"]),
                learning_rate=float(row["learning_rate"]),
                optimizer=str(row.get("optimizer", "adam")),
                l2_rate=float(row.get("lambda", 0.0)),
                batch_size=int(row.get("batch_size", 32)),
            )
        except KeyError as exc:
            raise BadFormatError(f"grid row {i} is missing {exc}") from None
        except (TypeError, ValueError) as exc:
            raise BadFormatError(f"grid row {i} is malformed: {exc}") from None
        if trial_id in seen:
            raise BadFormatError(f"duplicate trial id {trial_id}")
        seen.add(trial_id)
        trials.append(
            TrialConfig(trial_id, architecture, hp, str(row.get("motivation", "")))
        )
    return trials


@dataclass(frozen=True)
class ResultMatrix:
    """CvResults (or failure messages) per trial and class column."""

    level: int
    k: int
    repeats: int
    seed: int
    threshold: float
    class_labels: tuple[str, ...]
    trials: tuple[TrialConfig, ...]
    cells: Mapping[tuple[int, str], CvResult]
    errors: Mapping[tuple[int, str], str]

    def mean(self, trial_id: int, class_label: str) -> float | None:
        cell = self.cells.get((trial_id, class_label))
        return None if cell is None else cell.mean

    @classmethod
    def from_means(
        cls,
        class_labels: Sequence[str],
        mean_percent_rows: Mapping[int, Sequence[float]],
        level: int = 1,
        k: int = 1,
        repeats: int = 1,
        seed: int = 0,
    ) -> "ResultMatrix":
        """Build a matrix of single-value cells from percent means; used
        to render or mark externally computed tables."""
        hp = Hyperparams(epochs=1, learning_rate=1.0)
        trials = tuple(
            TrialConfig(t, "1 : 1(sigmoid)", hp) for t in sorted(mean_percent_rows)
        )
        cells = {}
        for t, row in mean_percent_rows.items():
            if len(row) != len(class_labels):
                raise LengthMismatchError(
                    f"trial {t} has {len(row)} means for {len(class_labels)} classes"
                )
            for label, pct in zip(class_labels, row):
                cells[(t, label)] = CvResult(np.array([[pct / 100.0]]))
        return cls(
            level, k, repeats, seed, DEFAULT_THRESHOLD,
            tuple(class_labels), trials, cells, {},
        )


def run_grid(
    class_datasets: Mapping[str, tuple],
    trials: Sequence[TrialConfig],
    k: int,
    repeats: int,
    base_seed: int,
    *,
    level: int = 1,
    augment: bool = True,
    clone_before_split: bool = False,
    threshold: float = DEFAULT_THRESHOLD,
    dtype=np.float32,
    jobs: int = 1,
) -> ResultMatrix:
    """Evaluate every trial against every class dataset.

    A cell whose evaluation raises a domain error is recorded as absent
    with the message kept; it is never filled with a fabricated score.
    The ``no`` output-width placeholder resolves per class from the
    target width.
    """
    ids = [t.trial_id for t in trials]
    if len(set(ids)) != len(ids):
        raise BadFormatError("duplicate trial ids in grid")
    cells: dict[tuple[int, str], CvResult] = {}
    errors: dict[tuple[int, str], str] = {}
    for trial in trials:
        for label, (inputs, targets) in class_datasets.items():
            try:
                cells[(trial.trial_id, label)] = run_cv(
                    inputs, targets, trial, k, repeats, base_seed,
                    augment=augment, clone_before_split=clone_before_split,
                    threshold=threshold, dtype=dtype, jobs=jobs,
                )
            except SkillclfError as exc:
                errors[(trial.trial_id, label)] = str(exc)
    return ResultMatrix(
        level, k, repeats, base_seed, threshold,
        tuple(class_datasets), tuple(trials), cells, errors,
    )


# --- marking and rendering ----------------------------------------------------


def column_markings(
    matrix: ResultMatrix, class_label: str
) -> tuple[int | None, frozenset[int]]:
    """(best trial id, trials within 0.2 pp of the best) for one class.

    The best is the highest mean; on ties the lowest trial id wins and
    the other tied trials count as near-best. Absent cells are skipped.
    """
    means = {
        t.trial_id: cell.mean
        for t in matrix.trials
        if (cell := matrix.cells.get((t.trial_id, class_label))) is not None
    }
    if not means:
        return None, frozenset()
    best_mean = max(means.values())
    best_id = min(t for t, m in means.items() if m == best_mean)
    near = frozenset(
        t for t, m in means.items() if t != best_id and best_mean - m < NEAR_BEST_MARGIN
    )
    return best_id, near


def _format_hp(trial: TrialConfig) -> str:
    hp = trial.hyperparams
    parts = [f"{hp.optimizer}", f"lr={hp.learning_rate:g}", f"epochs={hp.epochs}"]
    if hp.l2_rate:
        parts.append(f"lambda={hp.l2_rate:g}")
    if hp.batch_size != 32:
        parts.append(f"batch={hp.batch_size}")
    return ", ".join(parts)


def render_report(matrix: ResultMatrix, figure_names: Sequence[str] = ()) -> str:
    """Markdown report: the marked accuracy table, trial definitions,
    and any failed cells."""
    markings = {label: column_markings(matrix, label) for label in matrix.class_labels}
    lines = [
        "# Cross-validation report",
        "",
        f"Level {matrix.level} mean accuracy (%) over {matrix.repeats} runs of "
        f"{matrix.k}-fold cross-validation, seed {matrix.seed}, "
        f"threshold {matrix.threshold:g}.",
        "",
        "**Bold** marks the best trial per class; *italics* mark trials within "
        "0.2 percentage points of the best. Failed cells are shown as —.",
        "",
        "| Trial | " + " | ".join(matrix.class_labels) + " |",
        "|------:|" + "------:|" * len(matrix.class_labels),
    ]
    for trial in matrix.trials:
        row = [str(trial.trial_id)]
        for label in matrix.class_labels:
            cell = matrix.cells.get((trial.trial_id, label))
            if cell is None:
                row.append("—")
                continue
            text = f"{100.0 * cell.mean:.2f}"
            best_id, near = markings[label]
            if trial.trial_id == best_id:
                text = f"**{text}**"
            elif trial.trial_id in near:
                text = f"*{text}*"
            row.append(text)
        lines.append("| " + " | ".join(row) + " |")
    for name in figure_names:
        lines += ["", f"![{name}]({name})"]
    lines += [
        "",
        "## Trials",
        "",
        "| Trial | Architecture | Settings | Motivation |",
        "|------:|:-------------|:---------|:-----------|",
    ]
    for trial in matrix.trials:
        lines.append(
            f"| {trial.trial_id} | `{trial.architecture}` | {_format_hp(trial)} "
            f"| {trial.motivation} |"
        )
    if matrix.errors:
        lines += ["", "## Failed cells", ""]
        for (trial_id, label), message in sorted(matrix.errors.items()):
            lines.append(f"- trial {trial_id}, {label}: {message}")
    return "\n".join(lines) + "\n"


# --- result files ---------------------------------------------------------------


RESULTS_FORMAT = "skillclf-results"


def results_to_json(matrix: ResultMatrix) -> str:
    """Serialize a ResultMatrix, keeping every per-fold accuracy."""
    doc = {
        "format": RESULTS_FORMAT,
        "version": 1,
        "level": matrix.level,
        "k": matrix.k,
        "repeats": matrix.repeats,
        "seed": matrix.seed,
        "threshold": matrix.threshold,
        "classes": list(matrix.class_labels),
        "trials": [
            {
                "trial": t.trial_id,
                "architecture": t.architecture,
                "epochs": t.hyperparams.epochs,
                "learning_rate": t.hyperparams.learning_rate,
                "optimizer": t.hyperparams.optimizer,
                "lambda": t.hyperparams.l2_rate,
                "batch_size": t.hyperparams.batch_size,
                "motivation": t.motivation,
            }
            for t in matrix.trials
        ],
        "results": [],
    }
    for trial in matrix.trials:
        for label in matrix.class_labels:
            key = (trial.trial_id, label)
            entry: dict = {"trial": trial.trial_id, "class": label}
            cell = matrix.cells.get(key)
            if cell is not None:
                entry["mean"] = cell.mean
                entry["min"] = cell.min
                entry["max"] = cell.max
                entry["accuracies"] = cell.accuracies.tolist()
            else:
                entry["error"] = matrix.errors.get(key, "not evaluated")
            doc["results"].append(entry)
    return json.dumps(doc, indent=2) + "\n"


def results_from_json(text: str) -> ResultMatrix:
    """Inverse of results_to_json."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BadFormatError(f"results file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != RESULTS_FORMAT:
        raise BadFormatError(f"not a {RESULTS_FORMAT} file")
    try:
        trials = tuple(
            TrialConfig(
                int(row["trial"]),
                str(row["architecture"]),
                Hyperparams(
                    epochs=int(row["epochs"]),
                    learning_rate=float(row["learning_rate"]),
                    optimizer=str(row["optimizer"]),
                    l2_rate=float(row["lambda"]),
                    batch_size=int(row["batch_size"]),
                ),
                str(row.get("motivation", "")),
            )
            for row in doc["trials"]
        )
        class_labels = tuple(str(c) for c in doc["classes"])
        cells: dict[tuple[int, str], CvResult] = {}
        errors: dict[tuple[int, str], str] = {}
        for row in doc["results"]:
            key = (int(row["trial"]), str(row["class"]))
            if "accuracies" in row:
                cells[key] = CvResult(np.array(row["accuracies"], dtype=np.float64))
            else:
                errors[key] = str(row.get("error", "not evaluated"))
        return ResultMatrix(
            int(doc["level"]),
            int(doc["k"]),
            int(doc["repeats"]),
            int(doc["seed"]),
            float(doc["threshold"]),
            class_labels,
            trials,
            cells,
            errors,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise BadFormatError(f"malformed results file: {exc}") from None
