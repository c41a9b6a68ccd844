"""Command-line interface.

Exit codes: 0 success, 1 domain error (bad data, missing keys, failed
training), 2 usage error. Every run prints its resolved configuration
to stderr so outputs can be reproduced from the log. File outputs are
written atomically (temp file then rename).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

from . import __version__
from .corpus import (
    SyntheticSpec,
    generate_synthetic_corpus,
    parse_corpus,
    scrub_text,
    split_sentences,
    write_corpus,
)
from .embedding import (
    DEFAULT_DIM,
    EmbeddingTable,
    embed_corpus,
    hash_embed,
    parse_hash_provider_id,
    read_embedding_file,
    write_embedding_file,
)
from .errors import BadFormatError, SkillclfError
from .evaluation import (
    ResultMatrix,
    column_markings,
    load_grid,
    relative_difference,
    render_report,
    results_from_json,
    results_to_json,
    run_grid,
)
from .hierarchy import (
    DEFAULT_THRESHOLD,
    build_level1_dataset,
    build_level2_dataset,
    load_bundle,
    predict_sentence,
    save_bundle,
    train_hierarchy,
)
from .neuralnet import (
    ModelConfig,
    parse_architecture,
    substitute_output_width,
)
from .taxonomy import STANDARD_TAXONOMY, SkillLabel, label_sort_key

_CLASS_CHOICES = [f"T{x}" for x in STANDARD_TAXONOMY.class_indices]


def _write_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    directory.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _echo_config(args: argparse.Namespace) -> None:
    skip = {"func", "command"}
    pairs = [
        f"{key}={value}"
        for key, value in sorted(vars(args).items())
        if key not in skip and value is not None
    ]
    print(f"config: command={args.command} " + " ".join(pairs), file=sys.stderr)


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


# --- subcommand handlers -----------------------------------------------------


def _cmd_scrub(args: argparse.Namespace) -> int:
    out_lines = []
    for line in _read_text(args.infile).splitlines():
        out_lines.extend(split_sentences(scrub_text(line)))
    _write_atomic(args.out, "\n".join(out_lines) + ("\n" if out_lines else ""))
    print(f"{len(out_lines)} sentences", file=sys.stderr)
    return 0


def _cmd_parse(args: argparse.Namespace) -> int:
    corpus = parse_corpus(_read_text(args.infile))
    print(f"{len(corpus)} records")
    if args.out:
        _write_atomic(args.out, write_corpus(corpus))
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    try:
        doc = json.loads(_read_text(args.spec))
    except json.JSONDecodeError as exc:
        raise BadFormatError(f"spec is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise BadFormatError("spec must be a JSON object")
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    spec = SyntheticSpec(
        label_counts={str(k): int(v) for k, v in dict(doc.get("labels", {})).items()},
        negatives=int(doc.get("negatives", 0)),
        seed=seed,
        sentences_per_ad=int(doc.get("sentences_per_ad", 15)),
    )
    corpus = generate_synthetic_corpus(spec)
    _write_atomic(args.out, write_corpus(corpus))
    print(f"{len(corpus)} records", file=sys.stderr)
    return 0


def _cmd_embed(args: argparse.Namespace) -> int:
    corpus = parse_corpus(_read_text(args.corpus))
    if args.provider == "hash":
        table = embed_corpus(corpus, dim=args.dim, seed=args.seed)
    else:
        source = read_embedding_file(_read_text(args.table))
        entries = {rec.key: source.lookup(rec.key) for rec in corpus}
        table = EmbeddingTable(source.provider_id, source.dim, entries)
    _write_atomic(args.out, write_embedding_file(table))
    print(f"{len(table)} vectors", file=sys.stderr)
    return 0


def _pick_trial(trials, trial_id):
    if trial_id is None:
        return trials[0]
    for trial in trials:
        if trial.trial_id == trial_id:
            return trial
    raise BadFormatError(f"no trial {trial_id} in grid")


def _cmd_train(args: argparse.Namespace) -> int:
    corpus = parse_corpus(_read_text(args.corpus))
    table = read_embedding_file(_read_text(args.embeddings))
    trial1 = _pick_trial(load_grid(_read_text(args.level1_grid)), args.level1_trial)
    trial2 = _pick_trial(load_grid(_read_text(args.level2_grid)), args.level2_trial)
    level1_configs = {}
    level2_configs = {}
    for cls in STANDARD_TAXONOMY:
        x = cls.class_index
        hp1 = replace(trial1.hyperparams, seed=args.seed + x)
        level1_configs[x] = ModelConfig(
            parse_architecture(substitute_output_width(trial1.architecture, 1)), hp1
        )
        hp2 = replace(trial2.hyperparams, seed=args.seed + 100 + x)
        level2_configs[x] = ModelConfig(
            parse_architecture(
                substitute_output_width(trial2.architecture, cls.subclass_count)
            ),
            hp2,
        )
    models = train_hierarchy(
        corpus, table, level1_configs, level2_configs, threshold=args.threshold
    )
    save_bundle(models, args.out)
    print(
        f"trained {len(models.level1)} level-1 and {len(models.level2)} "
        f"level-2 networks into {args.out}",
        file=sys.stderr,
    )
    return 0


def _format_prediction(text: str, predicted) -> str:
    if predicted.labels:
        labels = ", ".join(
            str(l) for l in sorted(predicted.labels, key=label_sort_key)
        )
    else:
        labels = "0"
    probs = []
    for x in sorted(predicted.level1_probs):
        probs.append(f"T{x}={predicted.level1_probs[x]:.4f}")
        for y, p in enumerate(predicted.level2_probs.get(x, ()), start=1):
            probs.append(f"T{x}.{y}={p:.4f}")
    return f"{text}\t{labels}\t{','.join(probs)}"


def _cmd_predict(args: argparse.Namespace) -> int:
    models = load_bundle(args.models)
    lines = []
    if args.text is not None:
        parsed = parse_hash_provider_id(models.provider_id)
        if parsed is None:
            raise BadFormatError(
                f"bundle provider {models.provider_id!r} cannot embed new text; "
                "use --in with --embeddings"
            )
        seed, dim = parsed
        scrubbed = scrub_text(args.text)
        vector = hash_embed(scrubbed, dim, seed)
        lines.append(_format_prediction(scrubbed, predict_sentence(models, vector)))
    else:
        corpus = parse_corpus(_read_text(args.infile))
        table = read_embedding_file(_read_text(args.embeddings))
        for rec in corpus:
            vector = table.lookup(rec.key)
            lines.append(_format_prediction(rec.text, predict_sentence(models, vector)))
    output = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        _write_atomic(args.out, output)
    else:
        sys.stdout.write(output)
    return 0


def _class_datasets(args, corpus, table, class_labels):
    datasets = {}
    for label in class_labels:
        x = SkillLabel.parse(label).class_index
        if args.level == 1:
            ds = build_level1_dataset(corpus, table, x)
            datasets[label] = (ds.inputs, ds.targets)
        else:
            ds2 = build_level2_dataset(corpus, table, x)
            datasets[label] = (ds2.inputs, ds2.targets)
    return datasets


def _run_matrix(args, class_labels) -> ResultMatrix:
    corpus = parse_corpus(_read_text(args.corpus))
    table = read_embedding_file(_read_text(args.embeddings))
    trials = load_grid(_read_text(args.grid))
    datasets = _class_datasets(args, corpus, table, class_labels)
    return run_grid(
        datasets,
        trials,
        args.k,
        args.repeats,
        args.seed,
        level=args.level,
        augment=not args.no_augment,
        clone_before_split=args.clone_before_split,
        threshold=args.threshold,
        jobs=args.jobs,
    )


def _cmd_cv(args: argparse.Namespace) -> int:
    matrix = _run_matrix(args, [args.cls])
    _write_atomic(args.out, results_to_json(matrix))
    best, _ = column_markings(matrix, args.cls)
    if best is not None:
        mean = matrix.mean(best, args.cls)
        print(f"best trial {best}: {100.0 * mean:.2f}%", file=sys.stderr)
    return 0


def _cmd_grid(args: argparse.Namespace) -> int:
    matrix = _run_matrix(args, _CLASS_CHOICES)
    _write_atomic(args.out, results_to_json(matrix))
    evaluated = len(matrix.cells)
    failed = len(matrix.errors)
    print(f"{evaluated} cells evaluated, {failed} failed", file=sys.stderr)
    return 0


def _best_means(matrix: ResultMatrix) -> dict[str, float]:
    best = {}
    for label in matrix.class_labels:
        best_id, _ = column_markings(matrix, label)
        if best_id is not None:
            best[label] = matrix.mean(best_id, label)
    return best


def _cmd_report(args: argparse.Namespace) -> int:
    from .figures import plot_accuracy_by_class, plot_relative_difference

    matrix = results_from_json(_read_text(args.results))
    out = Path(args.out)
    fig_dir = out.parent if str(out.parent) else Path(".")
    fig_dir.mkdir(parents=True, exist_ok=True)
    accuracy_png = "accuracy_by_class.png"
    plot_accuracy_by_class(matrix, fig_dir / accuracy_png)
    text = render_report(matrix, [accuracy_png])
    if args.compare:
        other = results_from_json(_read_text(args.compare))
        ours = _best_means(matrix)
        theirs = _best_means(other)
        shared = [l for l in matrix.class_labels if l in ours and l in theirs]
        rows = []
        values = []
        for label in shared:
            rd = relative_difference(ours[label], theirs[label])
            values.append(rd)
            rows.append(
                f"| {label} | {100.0 * ours[label]:.2f} | "
                f"{100.0 * theirs[label]:.2f} | {rd:+.4f} |"
            )
        compare_png = "relative_difference.png"
        plot_relative_difference(shared, values, fig_dir / compare_png)
        text += "\n".join(
            [
                "",
                "## Comparison",
                "",
                f"Per-class best means against `{args.compare}`; the relative",
                "difference is this run's best divided by the other's, minus 1.",
                "",
                "| Class | This run (%) | Other (%) | Relative difference |",
                "|:------|-------------:|----------:|--------------------:|",
            ]
            + rows
            + ["", f"![{compare_png}]({compare_png})", ""]
        )
    _write_atomic(out, text)
    print(f"report written to {out}", file=sys.stderr)
    return 0


# --- parser ------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skillclf",
        description="Hierarchical transversal-skill classification of job-ad sentences.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scrub", help="scrub raw ad text and split it into sentences")
    p.add_argument("--in", dest="infile", required=True, help="raw text file")
    p.add_argument("--out", required=True, help="one scrubbed sentence per line")
    p.set_defaults(func=_cmd_scrub)

    p = sub.add_parser("parse", help="validate an annotated corpus file")
    p.add_argument("--in", dest="infile", required=True, help="annotated corpus file")
    p.add_argument("--check", action="store_true", help="only validate and count")
    p.add_argument("--out", help="write the canonicalized corpus here")
    p.set_defaults(func=_cmd_parse)

    p = sub.add_parser("synth", help="generate a synthetic annotated corpus")
    p.add_argument("--spec", required=True, help="JSON recipe: labels, negatives, seed")
    p.add_argument("--seed", type=int, help="override the seed in the recipe")
    p.add_argument("--out", required=True, help="annotated corpus file to write")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("embed", help="embed corpus sentences into a vector table")
    p.add_argument("--corpus", required=True, help="annotated corpus file")
    p.add_argument(
        "--provider",
        choices=["hash", "file"],
        default="hash",
        help="hash: seeded content-hash vectors; file: copy rows from --table",
    )
    p.add_argument("--dim", type=int, default=DEFAULT_DIM, help="vector width")
    p.add_argument("--seed", type=int, default=0, help="hash provider seed")
    p.add_argument("--table", help="source table for --provider file")
    p.add_argument("--out", required=True, help="embedding table to write")
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("train", help="train the full two-level model stack")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--level1-grid", required=True, help="grid JSON for class models")
    p.add_argument("--level2-grid", required=True, help="grid JSON for subclass models")
    p.add_argument("--level1-trial", type=int, help="trial id (default: first row)")
    p.add_argument("--level2-trial", type=int, help="trial id (default: first row)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--out", required=True, help="bundle directory to write")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="classify sentences with a trained bundle")
    p.add_argument("--models", required=True, help="bundle directory")
    p.add_argument("--text", help="classify one sentence (hash-provider bundles)")
    p.add_argument("--in", dest="infile", help="annotated corpus file to classify")
    p.add_argument("--embeddings", help="embedding table covering --in")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=_cmd_predict)

    for name, with_class in (("cv", True), ("grid", False)):
        p = sub.add_parser(
            name,
            help=(
                "cross-validate one class" if with_class
                else "cross-validate every class"
            ),
        )
        p.add_argument("--level", type=int, choices=[1, 2], required=True)
        if with_class:
            p.add_argument(
                "--class", dest="cls", choices=_CLASS_CHOICES, required=True
            )
        p.add_argument("--corpus", required=True)
        p.add_argument("--embeddings", required=True)
        p.add_argument("--grid", required=True, help="grid JSON of trials")
        p.add_argument("--k", type=int, default=5, help="folds")
        p.add_argument("--repeats", type=int, default=5)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
        p.add_argument(
            "--clone-before-split",
            action="store_true",
            help="rebalance once before splitting instead of per training split",
        )
        p.add_argument(
            "--no-augment", action="store_true", help="disable rebalancing by cloning"
        )
        p.add_argument("--jobs", type=int, default=1, help="parallel fold workers")
        p.add_argument("--out", required=True, help="results JSON to write")
        p.set_defaults(func=_cmd_cv if with_class else _cmd_grid)

    p = sub.add_parser("report", help="render a results file to markdown and charts")
    p.add_argument("--results", required=True, help="results JSON from cv or grid")
    p.add_argument("--compare", help="second results JSON for a comparison section")
    p.add_argument("--out", required=True, help="markdown file; charts go alongside")
    p.set_defaults(func=_cmd_report)

    return parser


def run_command(argv=None) -> int:
    """Parse argv and run the chosen subcommand, mapping errors to exit codes."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "predict":
            if (args.text is None) == (args.infile is None):
                parser.error("predict needs exactly one of --text or --in")
            if args.infile is not None and args.embeddings is None:
                parser.error("predict --in requires --embeddings")
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 0
    _echo_config(args)
    try:
        return args.func(args)
    except SkillclfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    return run_command(argv)


if __name__ == "__main__":
    sys.exit(main())
