"""Two-level taxonomy of transversal skills and the label notation.

Labels are written ``T<x>`` for a class and ``T<x>.<y>`` for a subclass,
with classes numbered 1..6 and subclasses numbered from 1 within each
class. The standard taxonomy is fixed: six classes with subclass counts
(3, 4, 4, 5, 2, 6).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import InvalidLabelError

CLASS_NAMES = (
    "Core skills and competences",
    "Thinking skills and competences",
    "Self-management skills and competences",
    "Social and communication skills and competences",
    "Physical and manual skills and competences",
    "Life skills and competences",
)

SUBCLASS_COUNTS = (3, 4, 4, 5, 2, 6)

_LABEL_RE = re.compile(r"T(\d+)(?:\.(\d+))?$")


@dataclass(frozen=True)
class SkillLabel:
    """A class or subclass label.

    ``subclass_index`` is None for a bare class label. Sort with
    label_sort_key, which puts bare labels before their subclasses.
    """

    class_index: int
    subclass_index: int | None = None

    def __post_init__(self) -> None:
        if self.class_index < 1:
            raise InvalidLabelError(f"class index must be >= 1, got {self.class_index}")
        if self.subclass_index is not None and self.subclass_index < 1:
            raise InvalidLabelError(
                f"subclass index must be >= 1, got {self.subclass_index}"
            )

    def __str__(self) -> str:
        if self.subclass_index is None:
            return f"T{self.class_index}"
        return f"T{self.class_index}.{self.subclass_index}"

    @property
    def is_subclass(self) -> bool:
        return self.subclass_index is not None

    @classmethod
    def parse(cls, text: str) -> "SkillLabel":
        """Parse ``T<x>`` or ``T<x>.<y>``; raises InvalidLabelError otherwise."""
        m = _LABEL_RE.match(text.strip())
        if m is None:
            raise InvalidLabelError(f"not a label: {text!r}")
        sub = m.group(2)
        return cls(int(m.group(1)), int(sub) if sub is not None else None)


def label_sort_key(label: SkillLabel) -> tuple[int, int]:
    return (label.class_index, label.subclass_index or 0)


@dataclass(frozen=True)
class TaxonomyClass:
    """One top-level skill class and its number of subclasses."""

    class_index: int
    name: str
    subclass_count: int

    def __post_init__(self) -> None:
        if self.class_index < 1:
            raise ValueError(f"class index must be >= 1, got {self.class_index}")
        if self.subclass_count < 1:
            raise ValueError(f"subclass count must be >= 1, got {self.subclass_count}")

    def subclasses(self) -> tuple[SkillLabel, ...]:
        return tuple(
            SkillLabel(self.class_index, y) for y in range(1, self.subclass_count + 1)
        )


def _standard_classes() -> tuple[TaxonomyClass, ...]:
    return tuple(
        TaxonomyClass(i + 1, name, count)
        for i, (name, count) in enumerate(zip(CLASS_NAMES, SUBCLASS_COUNTS))
    )


@dataclass(frozen=True)
class Taxonomy:
    """The fixed two-level taxonomy: six classes, subclass counts (3,4,4,5,2,6)."""

    classes: tuple[TaxonomyClass, ...] = field(default_factory=_standard_classes)

    def __post_init__(self) -> None:
        if len(self.classes) != 6:
            raise ValueError(f"expected 6 classes, got {len(self.classes)}")
        for i, cls in enumerate(self.classes):
            if cls.class_index != i + 1:
                raise ValueError(
                    f"class at position {i} has index {cls.class_index}, expected {i + 1}"
                )
        counts = tuple(cls.subclass_count for cls in self.classes)
        if counts != SUBCLASS_COUNTS:
            raise ValueError(f"subclass counts must be {SUBCLASS_COUNTS}, got {counts}")

    def __iter__(self):
        return iter(self.classes)

    @property
    def class_indices(self) -> tuple[int, ...]:
        return tuple(cls.class_index for cls in self.classes)

    def subclass_count(self, class_index: int) -> int:
        return self.get(class_index).subclass_count

    def get(self, class_index: int) -> TaxonomyClass:
        if not 1 <= class_index <= len(self.classes):
            raise InvalidLabelError(f"no class T{class_index}")
        return self.classes[class_index - 1]

    def validate_label(self, label: SkillLabel) -> SkillLabel:
        """Return the label if it exists in this taxonomy, else raise."""
        cls = self.get(label.class_index)
        if label.subclass_index is not None and label.subclass_index > cls.subclass_count:
            raise InvalidLabelError(
                f"class T{cls.class_index} has {cls.subclass_count} subclasses, "
                f"no {label}"
            )
        return label

    def parse_label(self, text: str) -> SkillLabel:
        return self.validate_label(SkillLabel.parse(text))


STANDARD_TAXONOMY = Taxonomy()
