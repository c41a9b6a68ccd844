"""Annotated sentence corpus: scrubbing, line grammar, synthetic generation.

The on-disk format is one record per line::

    <ad_id>: <sentence_index>; <text>; <labels>

where <labels> is ``0`` for an unlabeled sentence or a comma-separated
list such as ``T1.1, T1.3``. Lines starting with ``#`` and blank lines
are ignored. Text is scrubbed before it enters a corpus, so it never
contains ``;``, URLs, e-mail addresses, or control characters.
"""

from __future__ import annotations

import random
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import (
    DuplicateRecordError,
    InvalidIndexError,
    InvalidLabelError,
    InvalidSpecError,
    MalformedLineError,
)
from .taxonomy import STANDARD_TAXONOMY, SkillLabel, Taxonomy, label_sort_key

# Tokens are URL-like only with an explicit scheme or a www. prefix;
# bare domains stay, they are ordinary text.
_URL_RE = re.compile(r"(?<!\S)(?:[A-Za-z][A-Za-z0-9+.-]*://\S+|www\.\S+)")
_EMAIL_RE = re.compile(r"(?<!\S)\S+@\S+\.\S+")
_WS_RE = re.compile(r"\s+")
_SENTENCE_SPLIT_RE = re.compile(r"[.!?](?:(?=\s)|$)|\n")


def scrub_text(raw: str) -> str:
    """Normalize raw ad text into corpus-safe form.

    Removes control and other non-printable characters, URLs and e-mail
    addresses, replaces ``;`` with ``,``, and collapses whitespace runs
    to single spaces. Idempotent: scrubbing scrubbed text is a no-op.
    """
    # Strip non-printables first so a control character cannot splice two
    # fragments into a URL only the second pass would catch.
    kept = []
    for ch in raw:
        if ch.isspace():
            kept.append(ch)
        elif not unicodedata.category(ch).startswith("C"):
            kept.append(ch)
    text = "".join(kept)
    text = _URL_RE.sub("", text)
    text = _EMAIL_RE.sub("", text)
    text = text.replace(";", ",")
    return _WS_RE.sub(" ", text).strip()


def split_sentences(text: str) -> list[str]:
    """Split scrubbed text into sentences.

    Sentences end at ``.``, ``!`` or ``?`` followed by whitespace or end
    of string, or at a newline. Terminators are dropped; empty fragments
    are discarded. A period inside a token ("3.5", "B.Sc") does not split.
    """
    parts = _SENTENCE_SPLIT_RE.split(text)
    return [stripped for part in parts if (stripped := part.strip())]


@dataclass(frozen=True)
class SentenceRecord:
    """One annotated sentence of one job ad."""

    ad_id: str
    sentence_index: int
    text: str
    labels: frozenset[SkillLabel] = frozenset()

    def __post_init__(self) -> None:
        if self.sentence_index < 0:
            raise InvalidIndexError(
                f"sentence index must be >= 0, got {self.sentence_index}"
            )

    @property
    def key(self) -> tuple[str, int]:
        return (self.ad_id, self.sentence_index)


@dataclass(frozen=True)
class Corpus:
    """An ordered collection of sentence records with unique keys."""

    records: tuple[SentenceRecord, ...]
    provenance: str = ""

    def __post_init__(self) -> None:
        seen: set[tuple[str, int]] = set()
        for rec in self.records:
            if rec.key in seen:
                raise DuplicateRecordError(f"duplicate record key {rec.key}")
            seen.add(rec.key)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


def parse_annotated_line(
    line: str, taxonomy: Taxonomy = STANDARD_TAXONOMY
) -> SentenceRecord:
    """Parse one corpus line into a record.

    Raises MalformedLineError when the delimiter structure is wrong,
    InvalidIndexError for a non-integer sentence index, and
    InvalidLabelError for labels outside the taxonomy.
    """
    parts = line.split(";")
    if len(parts) != 3:
        raise MalformedLineError(
            f"expected 2 ';' delimiters, got {len(parts) - 1}: {line!r}"
        )
    head, text, labels_part = parts
    ad_id, colon, index_part = head.partition(":")
    if not colon:
        raise MalformedLineError(f"missing ':' after ad id: {line!r}")
    ad_id = ad_id.strip()
    if not ad_id:
        raise MalformedLineError(f"empty ad id: {line!r}")
    index_part = index_part.strip()
    if not index_part.isdigit():
        raise InvalidIndexError(f"sentence index must be an integer: {index_part!r}")
    labels_part = labels_part.strip()
    if not labels_part:
        raise MalformedLineError(f"empty label field: {line!r}")
    if labels_part == "0":
        labels: frozenset[SkillLabel] = frozenset()
    else:
        labels = frozenset(
            taxonomy.parse_label(token) for token in labels_part.split(",")
        )
    return SentenceRecord(ad_id, int(index_part), text.strip(), labels)


def format_record(record: SentenceRecord) -> str:
    if record.labels:
        labels = ", ".join(str(l) for l in sorted(record.labels, key=label_sort_key))
    else:
        labels = "0"
    return f"{record.ad_id}: {record.sentence_index}; {record.text}; {labels}"


def parse_corpus(
    text: str, taxonomy: Taxonomy = STANDARD_TAXONOMY, provenance: str = ""
) -> Corpus:
    """Parse a whole annotated file; '#' comments and blank lines are skipped.

    Line errors are re-raised with the 1-based line number prepended.
    """
    records = []
    seen: set[tuple[str, int]] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            record = parse_annotated_line(stripped, taxonomy)
        except (MalformedLineError, InvalidIndexError, InvalidLabelError) as exc:
            raise type(exc)(f"line {lineno}: {exc}") from None
        if record.key in seen:
            raise DuplicateRecordError(f"line {lineno}: duplicate record key {record.key}")
        seen.add(record.key)
        records.append(record)
    return Corpus(tuple(records), provenance=provenance)


def write_corpus(corpus: Corpus) -> str:
    """Render a corpus in canonical form; parse(write(c)) round-trips."""
    lines = [format_record(rec) for rec in corpus]
    return "\n".join(lines) + ("\n" if lines else "")


def derive_level1_labels(record: SentenceRecord) -> frozenset[SkillLabel]:
    """Collapse a record's labels to the bare classes they mention."""
    return frozenset(SkillLabel(l.class_index) for l in record.labels)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a deterministic synthetic corpus.

    ``label_counts`` maps labels to how many sentences carry exactly that
    label; ``negatives`` is the number of unlabeled sentences.
    """

    label_counts: Mapping[str, int] = field(default_factory=dict)
    negatives: int = 0
    seed: int = 0
    sentences_per_ad: int = 15

    def __post_init__(self) -> None:
        for label, count in self.label_counts.items():
            if count < 0:
                raise InvalidSpecError(f"negative count for {label}: {count}")
        if self.negatives < 0:
            raise InvalidSpecError(f"negative count of negatives: {self.negatives}")
        if self.sentences_per_ad < 1:
            raise InvalidSpecError(
                f"sentences_per_ad must be >= 1, got {self.sentences_per_ad}"
            )


def _label_vocabulary(label: SkillLabel) -> list[str]:
    """Keyword tokens unique to one label, disjoint across labels."""
    if label.subclass_index is None:
        stem = f"skill{label.class_index}x"
    else:
        stem = f"skill{label.class_index}s{label.subclass_index}"
    return [f"{stem}w{j}" for j in range(6)]


_FILLER_VOCABULARY = [f"filler{j}" for j in range(40)]


def generate_synthetic_corpus(
    spec: SyntheticSpec, taxonomy: Taxonomy = STANDARD_TAXONOMY
) -> Corpus:
    """Build a linearly separable corpus, deterministic in ``spec.seed``.

    Each labeled sentence mixes keywords unique to its label with shared
    filler tokens; negatives contain filler only. Sentences are grouped
    into ads of ``sentences_per_ad`` with ids s1, s2, ...
    """
    try:
        parsed = {token: taxonomy.parse_label(token) for token in spec.label_counts}
    except InvalidLabelError as exc:
        raise InvalidSpecError(f"unknown label in spec: {exc}") from None
    plan: list[frozenset[SkillLabel]] = []
    for token in sorted(parsed, key=lambda t: label_sort_key(parsed[t])):
        plan.extend([frozenset({parsed[token]})] * spec.label_counts[token])
    plan.extend([frozenset()] * spec.negatives)

    rng = random.Random(spec.seed)
    records = []
    for i, labels in enumerate(plan):
        if labels:
            (label,) = labels
            vocab = _label_vocabulary(label)
            words = rng.choices(vocab, k=rng.randint(3, 5))
            words += rng.choices(_FILLER_VOCABULARY, k=rng.randint(2, 3))
            rng.shuffle(words)
        else:
            words = rng.choices(_FILLER_VOCABULARY, k=rng.randint(4, 8))
        ad = i // spec.sentences_per_ad + 1
        pos = i % spec.sentences_per_ad + 1
        records.append(SentenceRecord(f"s{ad}", pos, " ".join(words), labels))
    return Corpus(tuple(records), provenance=f"synthetic(seed={spec.seed})")
