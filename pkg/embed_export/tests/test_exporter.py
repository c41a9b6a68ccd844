"""Exporter tests with a deterministic stub encoder.

The real sentence-transformers checkpoint is never loaded here; the
encoder seam is injected. Output files are validated with the embedding
table reader from the skillclf package, which is the consumer of this
format.
"""

import hashlib

import numpy as np
import pytest

from embed_export import cli
from embed_export.exporter import (
    DimensionMismatchError,
    ExportJob,
    MalformedCorpusError,
    export_embeddings,
    read_corpus_sentences,
)
from skillclf.embedding import read_embedding_file

CORPUS_TEXT = """\
# tiny fixture
a1: 0; Strong communication skills required; T4.1
a1: 1; Ability to work in a team; T4.1, T4.2

b7: 2; Basic plumbing knowledge; 0
"""


def _stub_encoder(dim=768):
    """Deterministic text-to-vector stand-in for a real checkpoint."""

    def encode(texts):
        out = np.empty((len(texts), dim))
        for i, text in enumerate(texts):
            digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
            seed = int.from_bytes(digest, "little")
            out[i] = np.random.default_rng(seed).standard_normal(dim)
        return out

    return encode


def _write_corpus(tmp_path, text=CORPUS_TEXT):
    path = tmp_path / "corpus.txt"
    path.write_text(text)
    return path


def test_read_corpus_sentences_skips_comments_and_blanks():
    rows = read_corpus_sentences(CORPUS_TEXT)
    assert [(r[0], r[1]) for r in rows] == [("a1", 0), ("a1", 1), ("b7", 2)]
    assert rows[2][2] == "Basic plumbing knowledge"


@pytest.mark.parametrize(
    "line",
    [
        "a1: 0; no label field",
        "a1 0; missing colon; 0",
        "a1: x; bad index; 0",
        "a1: 0; ; ",
        "a1: 0; first; 0\na1: 0; duplicate; 0",
    ],
)
def test_read_corpus_sentences_rejects(line):
    with pytest.raises(MalformedCorpusError):
        read_corpus_sentences(line)


def test_export_validates_under_the_table_reader(tmp_path):
    corpus = _write_corpus(tmp_path)
    out = tmp_path / "emb.tsv"
    job = ExportJob(str(corpus), "stub-checkpoint", str(out))
    count = export_embeddings(job, encoder=_stub_encoder())

    table = read_embedding_file(out.read_text())
    assert count == 3
    assert table.dim == 768
    assert table.provider_id == "stub-checkpoint"
    assert set(table.entries) == {("a1", 0), ("a1", 1), ("b7", 2)}

    raw = _stub_encoder()(["Strong communication skills required"])[0]
    np.testing.assert_allclose(table.entries[("a1", 0)], raw, rtol=1e-8, atol=1e-8)


def test_repeated_runs_are_byte_identical(tmp_path):
    corpus = _write_corpus(tmp_path)
    first = tmp_path / "one.tsv"
    second = tmp_path / "two.tsv"
    for out in (first, second):
        export_embeddings(
            ExportJob(str(corpus), "stub", str(out)), encoder=_stub_encoder()
        )
    assert first.read_bytes() == second.read_bytes()


def test_identical_sentences_get_identical_rows(tmp_path):
    corpus = _write_corpus(
        tmp_path,
        "a1: 0; Same sentence twice; 0\nz9: 4; Same sentence twice; 0\n",
    )
    out = tmp_path / "emb.tsv"
    export_embeddings(ExportJob(str(corpus), "stub", str(out)), encoder=_stub_encoder())
    table = read_embedding_file(out.read_text())
    np.testing.assert_array_equal(table.entries[("a1", 0)], table.entries[("z9", 4)])


def test_batch_size_does_not_change_the_output(tmp_path):
    corpus = _write_corpus(tmp_path)
    outs = []
    for batch in (1, 2, 64):
        out = tmp_path / f"emb_{batch}.tsv"
        export_embeddings(
            ExportJob(str(corpus), "stub", str(out), batch_size=batch),
            encoder=_stub_encoder(),
        )
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_narrow_model_without_override_is_rejected(tmp_path):
    corpus = _write_corpus(tmp_path)
    job = ExportJob(str(corpus), "stub-384", str(tmp_path / "emb.tsv"))
    with pytest.raises(DimensionMismatchError, match="384"):
        export_embeddings(job, encoder=_stub_encoder(dim=384))


def test_dim_override_accepts_a_narrow_model(tmp_path):
    corpus = _write_corpus(tmp_path)
    out = tmp_path / "emb.tsv"
    job = ExportJob(str(corpus), "stub-384", str(out), dim=384)
    export_embeddings(job, encoder=_stub_encoder(dim=384))
    table = read_embedding_file(out.read_text())
    assert table.dim == 384
    assert len(table.entries) == 3


def test_cli_uses_the_injected_builder(tmp_path, monkeypatch, capsys):
    corpus = _write_corpus(tmp_path)
    out = tmp_path / "emb.tsv"
    monkeypatch.setattr(
        "embed_export.exporter.build_encoder",
        lambda model_id, batch_size: _stub_encoder(),
    )
    code = cli.main(
        ["--corpus", str(corpus), "--model", "stub", "--out", str(out)]
    )
    assert code == 0
    assert "wrote 3 rows" in capsys.readouterr().err
    assert read_embedding_file(out.read_text()).provider_id == "stub"


def test_cli_reports_a_missing_corpus(tmp_path, capsys):
    code = cli.main(
        [
            "--corpus",
            str(tmp_path / "absent.txt"),
            "--model",
            "stub",
            "--out",
            str(tmp_path / "emb.tsv"),
        ]
    )
    assert code == 1
    assert "error" in capsys.readouterr().err
