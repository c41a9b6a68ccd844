"""Two-level model stack: class membership gates subclass assignment.

Level 1 holds one binary network per class; a sentence whose class
probability clears the threshold is passed to that class's level-2
multi-label network, which scores each subclass. Minority positives are
rebalanced by cloning before training.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .corpus import Corpus, derive_level1_labels
from .embedding import EmbeddingTable
from .errors import (
    ArchitectureMismatchError,
    BadFormatError,
    DimensionMismatchError,
    MissingEmbeddingError,
    MissingKeyError,
    NoNegativesError,
    NoPositivesError,
)
from .neuralnet import (
    Hyperparams,
    ModelConfig,
    Mlp,
    init_network,
    load_model,
    predict_batch,
    save_model,
    train,
)
from .taxonomy import STANDARD_TAXONOMY, SkillLabel, Taxonomy

DEFAULT_THRESHOLD = 0.5

Key = tuple[str, int]


@dataclass(frozen=True)
class BinaryDataset:
    """Embedded sentences with a 0/1 target for one class."""

    class_index: int
    inputs: np.ndarray
    targets: np.ndarray
    keys: tuple[Key, ...]

    def __post_init__(self) -> None:
        if self.inputs.ndim != 2:
            raise DimensionMismatchError(f"inputs must be 2-D, got {self.inputs.shape}")
        if self.targets.shape != (self.inputs.shape[0],):
            raise DimensionMismatchError(
                f"targets shape {self.targets.shape}, expected ({self.inputs.shape[0]},)"
            )
        if len(self.keys) != self.inputs.shape[0]:
            raise DimensionMismatchError(
                f"{len(self.keys)} keys for {self.inputs.shape[0]} rows"
            )

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def positive_count(self) -> int:
        return int(self.targets.sum())

    @property
    def negative_count(self) -> int:
        return len(self) - self.positive_count


@dataclass(frozen=True)
class MultiLabelDataset:
    """Embedded sentences with one 0/1 target per subclass of a class."""

    class_index: int
    inputs: np.ndarray
    targets: np.ndarray
    keys: tuple[Key, ...]

    def __post_init__(self) -> None:
        if self.inputs.ndim != 2 or self.targets.ndim != 2:
            raise DimensionMismatchError(
                f"inputs {self.inputs.shape} and targets {self.targets.shape} must be 2-D"
            )
        if self.targets.shape[0] != self.inputs.shape[0]:
            raise DimensionMismatchError(
                f"{self.targets.shape[0]} target rows for {self.inputs.shape[0]} inputs"
            )
        if len(self.keys) != self.inputs.shape[0]:
            raise DimensionMismatchError(
                f"{len(self.keys)} keys for {self.inputs.shape[0]} rows"
            )

    def __len__(self) -> int:
        return self.inputs.shape[0]


def _embed_records(records, table: EmbeddingTable) -> np.ndarray:
    rows = []
    for rec in records:
        try:
            rows.append(table.lookup(rec.key))
        except MissingKeyError:
            raise MissingEmbeddingError(
                f"no embedding for sentence {rec.key[0]}:{rec.key[1]}"
            ) from None
    if not rows:
        return np.empty((0, table.dim), dtype=np.float64)
    return np.stack(rows)


def build_level1_dataset(
    corpus: Corpus, table: EmbeddingTable, class_index: int
) -> BinaryDataset:
    """Target 1 when any of the sentence's labels falls in the class."""
    inputs = _embed_records(corpus.records, table)
    bare = SkillLabel(class_index)
    targets = np.array(
        [1.0 if bare in derive_level1_labels(rec) else 0.0 for rec in corpus],
        dtype=np.float64,
    )
    keys = tuple(rec.key for rec in corpus)
    return BinaryDataset(class_index, inputs, targets, keys)


def build_level2_dataset(
    corpus: Corpus,
    table: EmbeddingTable,
    class_index: int,
    taxonomy: Taxonomy = STANDARD_TAXONOMY,
) -> MultiLabelDataset:
    """Rows are sentences with at least one subclass label of the class;
    target column y is 1 when the sentence carries T<class>.<y+1>."""
    count = taxonomy.subclass_count(class_index)
    members = [
        rec
        for rec in corpus
        if any(
            l.class_index == class_index and l.is_subclass for l in rec.labels
        )
    ]
    inputs = _embed_records(members, table)
    targets = np.zeros((len(members), count), dtype=np.float64)
    for i, rec in enumerate(members):
        for label in rec.labels:
            if label.class_index == class_index and label.is_subclass:
                targets[i, label.subclass_index - 1] = 1.0
    keys = tuple(rec.key for rec in members)
    return MultiLabelDataset(class_index, inputs, targets, keys)


def clone_factor(positive_count: int, negative_count: int) -> int:
    """How many times each positive appears after rebalancing."""
    if positive_count < 1:
        raise NoPositivesError("no positive instances")
    if negative_count < 1:
        raise NoNegativesError("no negative instances")
    return max(1, round(negative_count / positive_count))


def oversample_indices(targets: np.ndarray) -> np.ndarray:
    """Row indices that rebalance a binary target vector by cloning.

    All original rows keep their order; each positive row is then
    appended clone_factor - 1 more times, positives in original order.
    The result satisfies |positives * factor - negatives| <=
    ceil(positives / 2).
    """
    targets = np.asarray(targets)
    positives = np.flatnonzero(targets == 1)
    negatives_count = int(len(targets) - len(positives))
    factor = clone_factor(len(positives), negatives_count)
    original = np.arange(len(targets))
    return np.concatenate([original, np.repeat(positives, factor - 1)])


def augment_by_cloning(dataset: BinaryDataset) -> BinaryDataset:
    """Rebalance a binary dataset by repeating positive rows.

    Clones keep the key of their source row, so leakage checks by key
    still see them.
    """
    idx = oversample_indices(dataset.targets)
    return BinaryDataset(
        dataset.class_index,
        dataset.inputs[idx],
        dataset.targets[idx],
        tuple(dataset.keys[i] for i in idx),
    )


@dataclass(frozen=True)
class HierarchyModels:
    """Trained level-1 and level-2 networks plus the decision threshold.

    The hyperparams maps record what trained each network; they may be
    empty for bundles that did not store them.
    """

    level1: Mapping[int, Mlp]
    level2: Mapping[int, Mlp]
    threshold: float = DEFAULT_THRESHOLD
    provider_id: str = ""
    dim: int = 0
    level1_hyperparams: Mapping[int, Hyperparams] = field(default_factory=dict)
    level2_hyperparams: Mapping[int, Hyperparams] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")


@dataclass(frozen=True)
class PredictedLabels:
    """Probabilities and thresholded labels for one sentence."""

    labels: frozenset[SkillLabel]
    level1_probs: Mapping[int, float]
    level2_probs: Mapping[int, tuple[float, ...]]


def train_hierarchy(
    corpus: Corpus,
    table: EmbeddingTable,
    level1_configs: Mapping[int, ModelConfig],
    level2_configs: Mapping[int, ModelConfig],
    threshold: float = DEFAULT_THRESHOLD,
    taxonomy: Taxonomy = STANDARD_TAXONOMY,
    dtype=np.float32,
) -> HierarchyModels:
    """Train every class model and the level-2 models that have data.

    Level-1 training sets are rebalanced by cloning. A class with no
    subclass-labeled sentences gets no level-2 model and is reported
    with its bare label at prediction time.
    """
    level1: dict[int, Mlp] = {}
    level2: dict[int, Mlp] = {}
    hp1: dict[int, Hyperparams] = {}
    hp2: dict[int, Hyperparams] = {}
    for cls in taxonomy:
        x = cls.class_index
        config = level1_configs[x]
        if config.architecture.output_dim != 1:
            raise ArchitectureMismatchError(
                f"level-1 network for T{x} must have 1 output, "
                f"got {config.architecture.output_dim}"
            )
        ds = augment_by_cloning(build_level1_dataset(corpus, table, x))
        net = init_network(config.architecture, config.hyperparams.seed, dtype)
        level1[x], _ = train(net, ds.inputs, ds.targets, config.hyperparams)
        hp1[x] = config.hyperparams

        ds2 = build_level2_dataset(corpus, table, x, taxonomy)
        if len(ds2) == 0:
            continue
        config2 = level2_configs[x]
        if config2.architecture.output_dim != cls.subclass_count:
            raise ArchitectureMismatchError(
                f"level-2 network for T{x} must have {cls.subclass_count} outputs, "
                f"got {config2.architecture.output_dim}"
            )
        net2 = init_network(config2.architecture, config2.hyperparams.seed, dtype)
        level2[x], _ = train(net2, ds2.inputs, ds2.targets, config2.hyperparams)
        hp2[x] = config2.hyperparams
    return HierarchyModels(
        level1, level2, threshold, table.provider_id, table.dim, hp1, hp2
    )


def predict_sentence(models: HierarchyModels, vector: np.ndarray) -> PredictedLabels:
    """Classify one embedded sentence through both levels.

    Classes at or above the threshold gate their level-2 network; a
    gated class with no subclass at or above the threshold (or with no
    level-2 model) is reported as its bare label.
    """
    labels: set[SkillLabel] = set()
    level1_probs: dict[int, float] = {}
    level2_probs: dict[int, tuple[float, ...]] = {}
    for x, net in sorted(models.level1.items()):
        prob = float(predict_batch(net, vector)[0, 0])
        level1_probs[x] = prob
        if prob < models.threshold:
            continue
        subnet = models.level2.get(x)
        if subnet is None:
            labels.add(SkillLabel(x))
            continue
        probs = predict_batch(subnet, vector)[0]
        level2_probs[x] = tuple(float(p) for p in probs)
        chosen = [
            SkillLabel(x, y + 1) for y, p in enumerate(probs) if p >= models.threshold
        ]
        if chosen:
            labels.update(chosen)
        else:
            labels.add(SkillLabel(x))
    return PredictedLabels(frozenset(labels), level1_probs, level2_probs)


# --- bundle directory ------------------------------------------------------

_MANIFEST_NAME = "manifest.json"


def save_bundle(models: HierarchyModels, directory: str | Path) -> None:
    """Write one model file per network plus a manifest into a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": "skillclf-bundle",
        "version": 1,
        "threshold": models.threshold,
        "provider": models.provider_id,
        "dim": models.dim,
        "taxonomy": [
            {"label": f"T{cls.class_index}", "name": cls.name,
             "subclasses": cls.subclass_count}
            for cls in STANDARD_TAXONOMY
        ],
        "level1": {},
        "level2": {},
    }
    hp_maps = {"level1": models.level1_hyperparams, "level2": models.level2_hyperparams}
    for level, nets in (("level1", models.level1), ("level2", models.level2)):
        for x, net in sorted(nets.items()):
            filename = f"{level}_T{x}.json"
            meta = {"class": f"T{x}", "level": 1 if level == "level1" else 2}
            (directory / filename).write_text(
                save_model(net, hp_maps[level].get(x), meta), encoding="utf-8"
            )
            manifest[level][f"T{x}"] = filename
    (directory / _MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_bundle(directory: str | Path) -> HierarchyModels:
    """Restore a bundle written by save_bundle."""
    directory = Path(directory)
    manifest_path = directory / _MANIFEST_NAME
    if not manifest_path.is_file():
        raise BadFormatError(f"no {_MANIFEST_NAME} in {directory}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise BadFormatError(f"bad manifest: {exc}") from None
    if manifest.get("format") != "skillclf-bundle":
        raise BadFormatError("not a skillclf-bundle manifest")
    nets: dict[str, dict[int, Mlp]] = {"level1": {}, "level2": {}}
    hps: dict[str, dict[int, Hyperparams]] = {"level1": {}, "level2": {}}
    for level in ("level1", "level2"):
        table = manifest.get(level)
        if not isinstance(table, dict):
            raise BadFormatError(f"manifest {level} must be an object")
        for label, filename in table.items():
            x = SkillLabel.parse(label).class_index
            net, hp, _ = load_model((directory / filename).read_text(encoding="utf-8"))
            nets[level][x] = net
            if hp is not None:
                hps[level][x] = hp
    return HierarchyModels(
        nets["level1"],
        nets["level2"],
        float(manifest.get("threshold", DEFAULT_THRESHOLD)),
        str(manifest.get("provider", "")),
        int(manifest.get("dim", 0)),
        hps["level1"],
        hps["level2"],
    )
