"""Command line front end.

Each subcommand is one pipeline stage: build toy data, train or slice an
encoder, index a corpus, search it, score the run, time the encoders, and
fold everything into the retention/speedup report. Every run prints a one
line result, records seed + input hashes in a JSON summary next to its
outputs, and removes partial outputs if it fails. Exit codes: 0 success,
1 runtime failure, 2 bad usage or missing inputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

from . import bench as bench_mod
from . import model_io, toydata
from .distill import TrainConfig, load_queries, train
from .encoder import EncoderModel
from .evaluation import evaluate_run, load_qrels, ndcg_at_k, relative_change
from .retrieval import (
    build_index,
    load_corpus,
    load_index,
    load_query_file,
    read_trec_run,
    run_retrieval,
    save_index,
    write_trec_run,
)
from .tokenizer import load_vocab


class UsageError(Exception):
    """Bad flags, malformed manifests, missing input files."""


class _OutputTracker:
    """Paths written by the running command, removed again on failure."""

    def __init__(self):
        self.files: list[str] = []
        self.made_dirs: list[str] = []

    def file(self, path: str) -> str:
        self.files.append(path)
        return path

    def ensure_dir(self, path: str) -> str:
        if path and not os.path.isdir(path):
            os.makedirs(path)
            self.made_dirs.append(path)
        return path

    def discard(self) -> None:
        for path in self.files:
            try:
                os.remove(path)
            except OSError:
                pass
        for path in reversed(self.made_dirs):
            try:
                os.rmdir(path)
            except OSError:
                pass


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _require_file(path: str, flag: str) -> str:
    if not os.path.isfile(path):
        raise UsageError(f"{flag}: no such file: {path}")
    return path


def _input_record(path: str, flag: str) -> dict:
    _require_file(path, flag)
    return {"path": path, "sha256": _sha256(path)}


def _write_summary(path: str, payload: dict, outputs: _OutputTracker) -> None:
    payload = dict(payload)
    payload["outputs"] = {p: _sha256(p) for p in outputs.files}
    outputs.file(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _load_checkpoint(path: str, flag: str) -> EncoderModel:
    _require_file(path, flag)
    return model_io.load(path)


def _track_checkpoint(path: str, outputs: _OutputTracker) -> None:
    outputs.file(path)
    vocab = os.path.join(os.path.dirname(path), model_io.default_vocab_name(path))
    outputs.file(vocab)


def _parse_layers(spec: str, teacher_layers: int) -> model_io.LayerScheme:
    if spec == "all":
        return model_io.LayerScheme(tuple(range(teacher_layers)))
    try:
        indices = tuple(int(part) for part in spec.split(","))
    except ValueError as e:
        raise UsageError(f"--layers: expected comma-separated integers, got {spec!r}") from e
    try:
        scheme = model_io.LayerScheme(indices)
        scheme.validate_for(teacher_layers)
    except (IndexError, ValueError) as e:
        raise UsageError(f"--layers: {e}") from e
    return scheme


def _model_name(path: str) -> str:
    stem = os.path.basename(path)
    return stem[:-5] if stem.endswith(".adec") else stem


# --- subcommands ----------------------------------------------------------


def _cmd_make_data(args, outputs: _OutputTracker) -> None:
    dataset = toydata.generate(
        seed=args.seed,
        n_topics=args.topics,
        n_docs=args.docs,
        n_eval_queries=args.eval_queries,
        n_train_queries=args.train_queries,
    )
    outputs.ensure_dir(args.out)
    for name in ("corpus.jsonl", "queries.jsonl", "qrels.tsv", "train_queries.jsonl", "vocab.txt"):
        outputs.file(os.path.join(args.out, name))
    toydata.write_dataset(dataset, args.out)
    _write_summary(
        os.path.join(args.out, "make_data.json"),
        {
            "command": "make-data",
            "seed": args.seed,
            "config": {
                "topics": args.topics,
                "docs": args.docs,
                "eval_queries": args.eval_queries,
                "train_queries": args.train_queries,
            },
            "inputs": {},
        },
        outputs,
    )
    print(
        f"make-data: {len(dataset.corpus)} docs, {len(dataset.eval_queries)} eval queries, "
        f"{len(dataset.train_queries)} train queries -> {args.out}"
    )


def _cmd_make_teacher(args, outputs: _OutputTracker) -> None:
    inputs = {
        "corpus": _input_record(args.corpus, "--corpus"),
        "vocab": _input_record(args.vocab, "--vocab"),
    }
    corpus = load_corpus(args.corpus)
    vocab = load_vocab(args.vocab)
    dataset = toydata.ToyDataset(
        corpus=corpus, eval_queries=[], qrels={}, train_queries=[], vocab=vocab
    )
    model = toydata.train_toy_teacher(
        dataset,
        seed=args.seed,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
    )
    outputs.ensure_dir(os.path.dirname(args.out))
    _track_checkpoint(args.out, outputs)
    model_io.save(model, args.out)
    _write_summary(
        args.out + ".json",
        {
            "command": "make-teacher",
            "seed": args.seed,
            "config": {
                "epochs": args.epochs,
                "batch_size": args.batch_size,
                "learning_rate": args.learning_rate,
                "encoder": model_io._config_dict(model.config),
            },
            "inputs": inputs,
            "model_id": model.provenance["model_id"],
        },
        outputs,
    )
    print(f"make-teacher: {model.config.num_layers}-layer encoder -> {args.out}")


def _cmd_extract(args, outputs: _OutputTracker) -> None:
    inputs = {"teacher": _input_record(args.teacher, "--teacher")}
    teacher = model_io.load(args.teacher)
    scheme = _parse_layers(args.layers, teacher.config.num_layers)
    student = model_io.extract_layers(teacher, scheme)
    if args.model_id:
        student.provenance["model_id"] = args.model_id
    outputs.ensure_dir(os.path.dirname(args.out))
    _track_checkpoint(args.out, outputs)
    model_io.save(student, args.out)
    _write_summary(
        args.out + ".json",
        {
            "command": "extract",
            "seed": args.seed,
            "config": {"layers": list(scheme.indices)},
            "inputs": inputs,
            "model_id": student.provenance["model_id"],
        },
        outputs,
    )
    print(
        f"extract: kept layers {list(scheme.indices)} of "
        f"{teacher.config.num_layers} -> {args.out}"
    )


_MANIFEST_KEYS = {"teacher", "layers", "student", "queries", "output_dir", "seed", "train"}


def _read_manifest(path: str) -> dict:
    _require_file(path, "--manifest")
    with open(path, encoding="utf-8") as f:
        try:
            manifest = json.load(f)
        except json.JSONDecodeError as e:
            raise UsageError(f"--manifest: not valid JSON: {e}") from e
    if not isinstance(manifest, dict):
        raise UsageError("--manifest: top level must be a JSON object")
    unknown = sorted(set(manifest) - _MANIFEST_KEYS)
    if unknown:
        raise UsageError(f"--manifest: unknown keys {unknown}")
    for key in ("teacher", "queries", "output_dir"):
        if key not in manifest:
            raise UsageError(f"--manifest: missing required key {key!r}")
    if ("layers" in manifest) == ("student" in manifest):
        raise UsageError("--manifest: exactly one of 'layers' or 'student' is required")
    train_block = manifest.get("train", {})
    if not isinstance(train_block, dict):
        raise UsageError("--manifest: 'train' must be an object")
    if "seed" in train_block:
        raise UsageError("--manifest: put 'seed' at the top level, not under 'train'")
    return manifest


def _cmd_distill(args, outputs: _OutputTracker) -> None:
    manifest = _read_manifest(args.manifest)
    seed = args.seed if args.seed is not None else int(manifest.get("seed", 0))
    inputs = {
        "manifest": _input_record(args.manifest, "--manifest"),
        "teacher": _input_record(manifest["teacher"], "manifest.teacher"),
        "queries": _input_record(manifest["queries"], "manifest.queries"),
    }
    train_block = dict(manifest.get("train", {}))
    train_block["seed"] = seed
    try:
        config = TrainConfig(**train_block)
    except TypeError as e:
        raise UsageError(f"--manifest: bad train block: {e}") from e

    teacher = model_io.load(manifest["teacher"])
    if "layers" in manifest:
        layers = manifest["layers"]
        if not isinstance(layers, list):
            raise UsageError("--manifest: 'layers' must be a list of integers")
        scheme = _parse_layers(",".join(str(i) for i in layers), teacher.config.num_layers)
        student = model_io.extract_layers(teacher, scheme)
    else:
        inputs["student"] = _input_record(manifest["student"], "manifest.student")
        student = model_io.load(manifest["student"])

    queries = load_queries(manifest["queries"])
    student, history = train(teacher, student, queries, config)

    out_dir = outputs.ensure_dir(manifest["output_dir"])
    ckpt = os.path.join(out_dir, "student.adec")
    _track_checkpoint(ckpt, outputs)
    model_io.save(student, ckpt)
    history_path = outputs.file(os.path.join(out_dir, "history.csv"))
    history.to_csv(history_path)
    _write_summary(
        os.path.join(out_dir, "distill.json"),
        {
            "command": "distill",
            "seed": seed,
            "config": {
                "train": {
                    "batch_size": config.batch_size,
                    "learning_rate": config.learning_rate,
                    "warmup_steps": config.warmup_steps,
                    "epochs": config.epochs,
                    "loss_kind": config.loss_kind,
                    "weight_decay": config.weight_decay,
                    "val_fraction": config.val_fraction,
                },
                "layers": manifest.get("layers"),
            },
            "inputs": inputs,
            "model_id": student.provenance["model_id"],
            "steps": len(history.steps),
            "final_loss": history.losses[-1] if history.losses else None,
            "val_distances": history.val_distances,
        },
        outputs,
    )
    first = history.val_distances[0] if history.val_distances else float("nan")
    last = history.val_distances[-1] if history.val_distances else float("nan")
    print(
        f"distill: {len(history.steps)} steps, val distance {first:.4f} -> {last:.4f}, "
        f"outputs in {out_dir}"
    )


def _cmd_index(args, outputs: _OutputTracker) -> None:
    inputs = {
        "checkpoint": _input_record(args.checkpoint, "--checkpoint"),
        "corpus": _input_record(args.corpus, "--corpus"),
    }
    model = model_io.load(args.checkpoint)
    corpus = load_corpus(args.corpus)
    index = build_index(corpus, model)
    outputs.ensure_dir(os.path.dirname(args.out))
    save_index(index, outputs.file(args.out))
    _write_summary(
        args.out + ".json",
        {
            "command": "index",
            "seed": args.seed,
            "config": {},
            "inputs": inputs,
            "documents": len(index.doc_ids),
            "dim": index.dim,
            "encoder_fingerprint": index.fingerprint,
        },
        outputs,
    )
    print(f"index: {len(index.doc_ids)} documents, dim {index.dim} -> {args.out}")


def _cmd_search(args, outputs: _OutputTracker) -> None:
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    inputs = {
        "index": _input_record(args.index, "--index"),
        "checkpoint": _input_record(args.checkpoint, "--checkpoint"),
        "queries": _input_record(args.queries, "--queries"),
    }
    index = load_index(args.index)
    model = model_io.load(args.checkpoint)
    queries = load_query_file(args.queries)
    run = run_retrieval(queries, index, model, k=args.k)
    outputs.ensure_dir(os.path.dirname(args.out))
    write_trec_run(run, outputs.file(args.out), runtag=args.runtag)
    _write_summary(
        args.out + ".json",
        {
            "command": "search",
            "seed": args.seed,
            "config": {"k": args.k, "runtag": args.runtag},
            "inputs": inputs,
            "queries_run": len(run),
            "query_encoder": model.provenance.get("model_id", "unknown"),
        },
        outputs,
    )
    print(f"search: {len(run)} queries, top {args.k} -> {args.out}")


def _cmd_eval(args, outputs: _OutputTracker) -> None:
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    inputs = {
        "run": _input_record(args.run, "--run"),
        "qrels": _input_record(args.qrels, "--qrels"),
    }
    run = read_trec_run(args.run)
    qrels = load_qrels(args.qrels)
    mean = evaluate_run(run, qrels, k=args.k)
    per_query = {qid: ndcg_at_k(run[qid], qrels.get(qid, {}), k=args.k) for qid in run}
    outputs.ensure_dir(args.out)
    per_query_path = outputs.file(os.path.join(args.out, "per_query.csv"))
    with open(per_query_path, "w", encoding="utf-8") as f:
        f.write(f"query_id,ndcg@{args.k}\n")
        for qid in sorted(per_query):
            f.write(f"{qid},{per_query[qid]!r}\n")
    _write_summary(
        os.path.join(args.out, "eval.json"),
        {
            "command": "eval",
            "seed": args.seed,
            "config": {"k": args.k},
            "inputs": inputs,
            "k": args.k,
            "ndcg": mean,
            "queries_evaluated": len(run),
        },
        outputs,
    )
    print(f"eval: nDCG@{args.k} = {mean:.4f} over {len(run)} queries -> {args.out}")


def _cmd_bench(args, outputs: _OutputTracker) -> None:
    try:
        batch_sizes = tuple(int(b) for b in args.batch_sizes.split(","))
    except ValueError as e:
        raise UsageError(f"--batch-sizes: expected comma-separated integers: {e}") from e
    if any(b < 1 for b in batch_sizes):
        raise UsageError("--batch-sizes: all sizes must be >= 1")
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    names = [_model_name(p) for p in args.checkpoints]
    if len(set(names)) != len(names):
        raise UsageError("--checkpoints: file names must be distinct (they name the models)")
    inputs = {"queries": _input_record(args.queries, "--queries")}
    for path, name in zip(args.checkpoints, names):
        inputs[name] = _input_record(path, "--checkpoints")
    queries = [text for _, text in load_query_file(args.queries)]

    results = []
    for path, name in zip(args.checkpoints, names):
        model = model_io.load(path)
        results.append(
            bench_mod.measure_throughput(
                model, queries, batch_sizes=batch_sizes, repeats=args.repeats, model_name=name
            )
        )
    rows = bench_mod.compare(results)

    outputs.ensure_dir(args.out)
    bench_mod.bench_csv(results, outputs.file(os.path.join(args.out, "bench.csv")))
    bench_mod.speedup_csv(rows, outputs.file(os.path.join(args.out, "speedup.csv")))
    chart_path = outputs.file(os.path.join(args.out, "speedup.txt"))
    with open(chart_path, "w", encoding="utf-8") as f:
        f.write(bench_mod.speedup_chart(rows) + "\n")
    _write_summary(
        os.path.join(args.out, "bench.json"),
        {
            "command": "bench",
            "seed": args.seed,
            "config": {"batch_sizes": list(batch_sizes), "repeats": args.repeats},
            "inputs": inputs,
            "hardware": results[0].hardware,
            "baseline": names[0],
            "qps": {
                r.model: {str(bs): r.qps_at(bs) for bs in batch_sizes} for r in results
            },
            "speedups": {
                f"{row['model']}@{row['batch_size']}": row["speedup"] for row in rows
            },
        },
        outputs,
    )
    best = max(rows, key=lambda r: r["speedup"])
    print(
        f"bench: {len(results)} models x {len(batch_sizes)} batch sizes, "
        f"max speedup {best['speedup']:.2f}x ({best['model']} @ bs={best['batch_size']}) "
        f"-> {args.out}"
    )


def _read_eval_json(path: str, flag: str) -> dict:
    _require_file(path, flag)
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    if "ndcg" not in payload:
        raise UsageError(f"{flag}: {path} does not look like an eval summary (no 'ndcg')")
    return payload


def _cmd_report(args, outputs: _OutputTracker) -> None:
    teacher_eval = _read_eval_json(args.teacher_eval, "--teacher-eval")
    teacher_ndcg = float(teacher_eval["ndcg"])
    k = teacher_eval.get("k", 10)
    inputs = {"teacher_eval": _input_record(args.teacher_eval, "--teacher-eval")}

    students = []
    for item in args.student_eval:
        if "=" in item:
            name, path = item.split("=", 1)
        else:
            path = item
            parent = os.path.basename(os.path.dirname(path))
            name = parent or _model_name(path)
        payload = _read_eval_json(path, "--student-eval")
        inputs[name] = _input_record(path, "--student-eval")
        students.append((name, float(payload["ndcg"])))
    if not students:
        raise UsageError("--student-eval: at least one student evaluation is required")

    speedup_rows = []
    if args.speedups:
        _require_file(args.speedups, "--speedups")
        inputs["speedups"] = _input_record(args.speedups, "--speedups")
        with open(args.speedups, encoding="utf-8") as f:
            header = f.readline().strip().split(",")
            if header != ["model", "batch_size", "qps", "speedup"]:
                raise UsageError(f"--speedups: unexpected header {header}")
            for line in f:
                model, bs, qps, sp = line.strip().split(",")
                speedup_rows.append(
                    {"model": model, "batch_size": int(bs), "qps": float(qps), "speedup": float(sp)}
                )
    best_speedup = {}
    for row in speedup_rows:
        cur = best_speedup.get(row["model"])
        if cur is None or row["speedup"] > cur:
            best_speedup[row["model"]] = row["speedup"]

    changes = [relative_change(ndcg, teacher_ndcg) for _, ndcg in students]
    average_change = sum(changes) / len(changes)
    retention = 1.0 + average_change

    outputs.ensure_dir(args.out)
    csv_path = outputs.file(os.path.join(args.out, "retention.csv"))
    with open(csv_path, "w", encoding="utf-8") as f:
        f.write(f"student,teacher_ndcg@{k},student_ndcg@{k},relative_change,retention\n")
        for (name, ndcg), change in zip(students, changes):
            f.write(f"{name},{teacher_ndcg!r},{ndcg!r},{change!r},{1.0 + change!r}\n")
        f.write(f"AVERAGE,{teacher_ndcg!r},,{average_change!r},{retention!r}\n")

    width = max(len("student"), max(len(name) for name, _ in students))
    lines = [
        f"{'student':<{width}}  {'nDCG@' + str(k):>10}  {'change':>8}  {'retention':>9}"
        + ("  speedup" if best_speedup else "")
    ]
    for (name, ndcg), change in zip(students, changes):
        line = f"{name:<{width}}  {ndcg:>10.4f}  {change:>+8.2%}  {1.0 + change:>9.2%}"
        if best_speedup:
            line += f"  {best_speedup.get(name, float('nan')):>6.2f}x"
        lines.append(line)
    lines.append(
        f"{'AVERAGE':<{width}}  {'':>10}  {average_change:>+8.2%}  {retention:>9.2%}"
    )
    lines.insert(0, f"teacher nDCG@{k} = {teacher_ndcg:.4f}")
    txt_path = outputs.file(os.path.join(args.out, "retention.txt"))
    with open(txt_path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")

    _write_summary(
        os.path.join(args.out, "report.json"),
        {
            "command": "report",
            "seed": args.seed,
            "config": {"k": k},
            "inputs": inputs,
            "teacher_ndcg": teacher_ndcg,
            "students": {
                name: {"ndcg": ndcg, "relative_change": change, "retention": 1.0 + change}
                for (name, ndcg), change in zip(students, changes)
            },
            "average_change": average_change,
            "retention": retention,
            "speedups": best_speedup,
        },
        outputs,
    )
    print(
        f"report: {len(students)} students, average change {average_change:+.2%}, "
        f"retention {retention:.2%} -> {args.out}"
    )


# --- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adec",
        description="Slice, distill, and benchmark asymmetric dual-encoder retrievers.",
    )
    parser.add_argument(
        "--traceback", action="store_true", help="re-raise errors instead of exiting cleanly"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-data", help="generate the synthetic retrieval dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--topics", type=int, default=40)
    p.add_argument("--docs", type=int, default=200)
    p.add_argument("--eval-queries", type=int, default=100)
    p.add_argument("--train-queries", type=int, default=1000)
    p.set_defaults(func=_cmd_make_data)

    p = sub.add_parser("make-teacher", help="train the toy dual-encoder teacher")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True, help="checkpoint path (.adec)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=6)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.set_defaults(func=_cmd_make_teacher)

    p = sub.add_parser("extract", help="slice teacher layers into a student checkpoint")
    p.add_argument("--teacher", required=True)
    p.add_argument("--layers", required=True, help="comma-separated indices, or 'all'")
    p.add_argument("--out", required=True)
    p.add_argument("--model-id", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("distill", help="align a student to its teacher per a JSON manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, default=None, help="overrides the manifest seed")
    p.set_defaults(func=_cmd_distill)

    p = sub.add_parser("index", help="embed a corpus into a dense index")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="index path (.npz)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("search", help="run queries against an index, write a TREC run")
    p.add_argument("--index", required=True)
    p.add_argument("--checkpoint", required=True, help="query encoder checkpoint")
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--runtag", default="adec")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("eval", help="score a TREC run against qrels with nDCG@k")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="measure query throughput; first checkpoint is baseline")
    p.add_argument("--checkpoints", nargs="+", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--batch-sizes", default="4,8,16,32,64")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("report", help="merge eval and bench outputs into retention tables")
    p.add_argument("--teacher-eval", required=True, help="teacher eval.json")
    p.add_argument(
        "--student-eval",
        nargs="+",
        required=True,
        help="student eval.json paths, optionally NAME=PATH",
    )
    p.add_argument("--speedups", default=None, help="speedup.csv from bench")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    outputs = _OutputTracker()
    try:
        args.func(args, outputs)
        return 0
    except UsageError as e:
        if args.traceback:
            raise
        outputs.discard()
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        if args.traceback:
            raise
        outputs.discard()
        print(f"error: missing file: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - the CLI boundary reports, not raises
        if args.traceback:
            raise
        outputs.discard()
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
