"""The hf-export command: convert a checkpoint, then prove it faithful.

Exit codes follow the adec convention: 0 success, 1 runtime failure
(including a failed parity check), 2 bad usage or unreadable inputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from adec.encoder import CLS, MEAN

from .convert import ExportError, ExportSpec, export
from .parity import DEFAULT_PROBES, DEFAULT_THRESHOLD, verify


class UsageError(Exception):
    pass


def _require_dir(path: str, flag: str) -> str:
    if not os.path.isdir(path):
        raise UsageError(f"{flag}: no such directory: {path}")
    return path


def _cmd_export(args) -> int:
    _require_dir(args.source, "--source")
    try:
        spec = ExportSpec(
            source=args.source,
            out_path=args.out,
            pooling=args.pooling,
            max_len=args.max_len,
            model_id=args.model_id,
        )
    except ValueError as e:
        raise UsageError(str(e)) from e
    result = export(spec)
    config = result.model.config
    print(
        f"export: {config.num_layers}-layer {config.hidden_dim}-dim encoder, "
        f"{result.tensor_count} tensors -> {result.checkpoint_path} "
        f"(+ {os.path.basename(result.vocab_path)})"
    )
    return 0


def _cmd_verify(args) -> int:
    _require_dir(args.source, "--source")
    if not os.path.isfile(args.checkpoint):
        raise UsageError(f"--checkpoint: no such file: {args.checkpoint}")
    if args.probes < 1:
        raise UsageError("--probes must be >= 1")
    if args.threshold <= 0:
        raise UsageError("--threshold must be positive")
    report = verify(
        args.source,
        args.checkpoint,
        count=args.probes,
        seed=args.seed,
        threshold=args.threshold,
    )
    print(report.to_text())
    if args.json:
        payload = {
            "passed": report.passed,
            "max_abs_diff": report.max_abs_diff,
            "threshold": report.threshold,
            "pooling": report.pooling,
            "probes": len(report.per_probe),
            "per_probe": report.per_probe,
            "mismatched_tensors": [list(pair) for pair in report.mismatched_tensors],
        }
        with open(args.json, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hf-export",
        description="Convert BERT-family archives to adec checkpoints and verify parity.",
    )
    parser.add_argument(
        "--traceback", action="store_true", help="re-raise errors instead of exiting cleanly"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="convert a local model directory to .adec")
    p.add_argument("--source", required=True, help="local directory with model files + vocab.txt")
    p.add_argument("--out", required=True, help="output checkpoint path (.adec)")
    p.add_argument("--pooling", choices=(MEAN, CLS), default=MEAN)
    p.add_argument("--max-len", type=int, default=None, help="truncate position table")
    p.add_argument("--model-id", default=None)
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("verify", help="compare pooled embeddings of source and checkpoint")
    p.add_argument("--source", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--probes", type=int, default=DEFAULT_PROBES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--json", default=None, help="also write the report as JSON")
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        if args.traceback:
            raise
        print(f"hf-export: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        if args.traceback:
            raise
        print(f"hf-export: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        if args.traceback:
            raise
        print(f"hf-export: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
