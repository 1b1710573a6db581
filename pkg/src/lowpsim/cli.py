"""Command-line entry point: ``lowpsim {quantize,enumerate,train,bench}``.

Exit codes: 0 success, 2 usage or validation failure, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import io
from .bench import DEFAULT_SIZES, IMPLEMENTATIONS, default_cases, run_bench, write_csv
from .errors import InvalidInputError, LowpError, UnsupportedFormatError
from .formats import BlockFloatFormat, FixedFormat, FloatFormat, RoundingMode
from .quant import QuantSpec, quantize_fused
from .scalar import enumerate_representable
from .train import QuantConfig, make_separable, mlp, train

EXIT_USAGE = 2
EXIT_NUMERIC = 3

DEFAULT_BENCH_FORMATS = {"fixed": FixedFormat(8, 4), "block": BlockFloatFormat(8), "float": FloatFormat(5, 2)}

# built-in training problem for `lowpsim train`
TRAIN_SAMPLES = 512
TRAIN_SIZES = (8, 16, 2)


class UsageError(LowpError):
    pass


def _csv_list(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def cmd_quantize(args) -> int:
    fmt = io.parse_format(args.format)
    t = io.read_tensor(args.input)
    io.write_tensor(args.output, quantize_fused(t, QuantSpec(fmt, args.rounding, args.seed)))
    return 0


def cmd_enumerate(args) -> int:
    fmt = io.parse_format(args.format)
    values = enumerate_representable(fmt, args.block_exponent)
    sys.stdout.write("".join(f"{v!r}\n" for v in values.tolist()))
    return 0


def cmd_train(args) -> int:
    cfg = io.load_config(args.config) if args.config else QuantConfig()
    data = make_separable(TRAIN_SAMPLES, TRAIN_SIZES[0], seed=args.seed)
    model = mlp(TRAIN_SIZES, seed=args.seed)
    trace = train(model, data, cfg, args.epochs, args.lr, args.momentum, args.seed, args.batch_size)
    if args.trace_out:
        with open(args.trace_out, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["epoch", "loss", "accuracy"])
            for s in trace:
                w.writerow([s.epoch, repr(s.loss), repr(s.accuracy)])
    final = trace[-1].accuracy if trace else float("nan")
    print(f"final accuracy: {final:.4f}")
    return 0


def _bench_format(text: str):
    return DEFAULT_BENCH_FORMATS[text] if text in DEFAULT_BENCH_FORMATS else io.parse_format(text)


def cmd_bench(args) -> int:
    formats = [_bench_format(f) for f in _csv_list(args.formats)]
    modes = [RoundingMode.parse(m) for m in _csv_list(args.modes)]
    impls = IMPLEMENTATIONS if args.impl == "both" else (args.impl,)
    if args.impl == "composed":
        for f in formats:
            if isinstance(f, FloatFormat):
                raise UnsupportedFormatError(f"--impl composed cannot run floating-point format {f}")
    try:
        sizes = [int(s) for s in _csv_list(args.sizes)] if args.sizes else list(DEFAULT_SIZES)
    except ValueError:
        raise UsageError(f"--sizes must be a comma-separated list of integers, got {args.sizes!r}") from None
    try:
        cases = default_cases(sizes, formats, modes, impls, args.repeats, args.warmup, args.threads)
    except ValueError as e:
        raise UsageError(str(e)) from None
    results = run_bench(cases, seed=args.seed)
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            write_csv(results, f)
    else:
        write_csv(results, sys.stdout)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lowpsim", description="Low-precision arithmetic simulation.")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quantize", help="quantize a tensor file")
    q.add_argument("--in", dest="input", required=True, type=Path)
    q.add_argument("--out", dest="output", required=True, type=Path)
    q.add_argument("--format", required=True, help="e.g. float:5:2, fixed:8:4[:symmetric][:wrap], block:8[:dim=0]")
    q.add_argument("--rounding", default="nearest_even", choices=[m.value for m in RoundingMode])
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=cmd_quantize)

    e = sub.add_parser("enumerate", help="print every representable value of a format")
    e.add_argument("--format", required=True)
    e.add_argument("--block-exponent", type=int, default=None)
    e.set_defaults(func=cmd_enumerate)

    t = sub.add_parser("train", help="train an MLP on the built-in separable dataset")
    t.add_argument("--config", type=Path, default=None, help="JSON quantization config")
    t.add_argument("--epochs", type=int, default=30)
    t.add_argument("--lr", type=float, default=0.05)
    t.add_argument("--momentum", type=float, default=0.9)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--trace-out", type=Path, default=None)
    t.set_defaults(func=cmd_train)

    b = sub.add_parser("bench", help="time fused vs composed quantization")
    b.add_argument("--sizes", default=None, help="comma-separated element counts (default 2^10..2^24)")
    b.add_argument("--formats", default="fixed,block,float", help="kinds (fixed, block, float) or format strings")
    b.add_argument("--modes", default="nearest_even")
    b.add_argument("--impl", default="both", choices=[*IMPLEMENTATIONS, "both"])
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--warmup", type=int, default=1)
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--csv", type=Path, default=None)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidInputError as e:
        print(f"lowpsim: numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (LowpError, OSError, ValueError) as e:
        print(f"lowpsim: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
