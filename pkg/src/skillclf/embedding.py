"""Sentence embeddings: a seeded hash provider and the vector file format.

The on-disk format is a TSV with one header line::

    #dim=<D>\\tcount=<N>\\tprovider=<id>

followed by N rows ``"<ad_id>:<sentence_index>"`` then D floats, tab
separated, 9 significant digits, rows sorted by key. The key field is
written in double quotes.
"""

from __future__ import annotations

import hashlib
import re
import struct
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    BadFormatError,
    BadHeaderError,
    CountMismatchError,
    DimensionMismatchError,
    DuplicateKeyError,
    MissingKeyError,
    UnparsableFloatError,
)

DEFAULT_DIM = 768

Key = tuple[str, int]


def hash_embed(text: str, dim: int = DEFAULT_DIM, seed: int = 0) -> np.ndarray:
    """Deterministic content-hash embedding of a sentence.

    Each lowercased whitespace token is hashed (keyed by the seed) to a
    64-bit value that seeds a PCG64 draw of a dim-length standard normal
    vector; token vectors are summed and the result L2-normalized. Text
    without tokens maps to the zero vector. Tokens are accumulated in
    sorted order so any reordering of the same token multiset produces a
    bit-identical vector.
    """
    if dim < 1:
        raise DimensionMismatchError(f"dim must be >= 1, got {dim}")
    key = struct.pack("<Q", seed & 0xFFFFFFFFFFFFFFFF)
    total = np.zeros(dim, dtype=np.float64)
    for token in sorted(text.lower().split()):
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=key).digest()
        token_seed = int.from_bytes(digest, "little")
        rng = np.random.Generator(np.random.PCG64(token_seed))
        total += rng.standard_normal(dim)
    norm = float(np.linalg.norm(total))
    if norm > 0.0:
        total /= norm
    return total


@dataclass(frozen=True)
class EmbeddingTable:
    """Fixed-dimension vectors keyed by (ad_id, sentence_index)."""

    provider_id: str
    dim: int
    entries: Mapping[Key, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise DimensionMismatchError(f"dim must be >= 1, got {self.dim}")
        for key, vec in self.entries.items():
            if vec.shape != (self.dim,):
                raise DimensionMismatchError(
                    f"vector for {key} has shape {vec.shape}, expected ({self.dim},)"
                )
            if not np.all(np.isfinite(vec)):
                raise UnparsableFloatError(f"non-finite vector for {key}")

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, key: Key) -> np.ndarray:
        try:
            return self.entries[key]
        except KeyError:
            raise MissingKeyError(f"no embedding for {key[0]}:{key[1]}") from None


def lookup_embedding(table: EmbeddingTable, key: Key) -> np.ndarray:
    return table.lookup(key)


def embed_corpus(
    records: Iterable, dim: int = DEFAULT_DIM, seed: int = 0
) -> EmbeddingTable:
    """Hash-embed every record of a corpus into a table."""
    entries = {rec.key: hash_embed(rec.text, dim, seed) for rec in records}
    return EmbeddingTable(hash_provider_id(seed, dim), dim, entries)


def hash_provider_id(seed: int, dim: int = DEFAULT_DIM) -> str:
    return f"hash(seed={seed},dim={dim})"


_HASH_PROVIDER_RE = re.compile(r"hash\(seed=(-?\d+),dim=(\d+)\)$")


def parse_hash_provider_id(provider_id: str) -> tuple[int, int] | None:
    """Recover (seed, dim) from a hash provider id, or None for other providers."""
    m = _HASH_PROVIDER_RE.match(provider_id)
    if m is None:
        return None
    return int(m.group(1)), int(m.group(2))


def _format_float(x: float) -> str:
    return f"{x:.9g}"


def write_embedding_file(table: EmbeddingTable) -> str:
    """Render a table in the TSV format, rows sorted by key."""
    lines = [f"#dim={table.dim}\tcount={len(table.entries)}\tprovider={table.provider_id}"]
    for (ad_id, idx) in sorted(table.entries):
        vec = table.entries[(ad_id, idx)]
        fields = "\t".join(_format_float(float(x)) for x in vec)
        lines.append(f'"{ad_id}:{idx}"\t{fields}')
    return "\n".join(lines) + "\n"


def _parse_header(line: str) -> tuple[int, int, str]:
    if not line.startswith("#"):
        raise BadHeaderError(f"missing '#' header line, got {line!r}")
    parts = line[1:].split("\t")
    if len(parts) != 3:
        raise BadHeaderError(f"header must have 3 tab-separated fields: {line!r}")
    values = {}
    for part, name in zip(parts, ("dim", "count", "provider")):
        prefix = name + "="
        if not part.startswith(prefix):
            raise BadHeaderError(f"expected {prefix}... in header, got {part!r}")
        values[name] = part[len(prefix):]
    try:
        dim = int(values["dim"])
        count = int(values["count"])
    except ValueError:
        raise BadHeaderError(f"dim and count must be integers: {line!r}") from None
    if dim < 1 or count < 0:
        raise BadHeaderError(f"dim must be >= 1 and count >= 0: {line!r}")
    return dim, count, values["provider"]


def _parse_key(field_text: str) -> Key:
    if not (field_text.startswith('"') and field_text.endswith('"') and len(field_text) >= 2):
        raise BadFormatError(f"key must be double-quoted: {field_text!r}")
    inner = field_text[1:-1]
    ad_id, colon, idx = inner.rpartition(":")
    if not colon or not idx.isdigit():
        raise BadFormatError(f"key must be \"<ad_id>:<index>\": {field_text!r}")
    return ad_id, int(idx)


def read_embedding_file(text: str) -> EmbeddingTable:
    """Parse and validate the TSV format; inverse of write_embedding_file."""
    lines = text.splitlines()
    if not lines:
        raise BadHeaderError("empty file")
    dim, count, provider_id = _parse_header(lines[0])
    entries: dict[Key, np.ndarray] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != dim + 1:
            raise DimensionMismatchError(
                f"line {lineno}: expected {dim + 1} fields, got {len(fields)}"
            )
        key = _parse_key(fields[0])
        if key in entries:
            raise DuplicateKeyError(f"line {lineno}: duplicate key {key[0]}:{key[1]}")
        try:
            vec = np.array([float(f) for f in fields[1:]], dtype=np.float64)
        except ValueError:
            raise UnparsableFloatError(f"line {lineno}: unparsable float") from None
        if not np.all(np.isfinite(vec)):
            raise UnparsableFloatError(f"line {lineno}: non-finite value")
        entries[key] = vec
    if len(entries) != count:
        raise CountMismatchError(f"header count={count} but {len(entries)} rows")
    return EmbeddingTable(provider_id, dim, entries)
