"""Command-line entry point: ``nbbfrac info|map|verify|simulate|bench``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import maps
from .bench import PRESETS, BenchConfig, bench_run, write_csv
from .core import (
    FractalError,
    cell_count,
    compression_factor,
    hausdorff_dimension,
    load_descriptor,
)
from .export import export_frame
from .oracle import verify_maps, verify_stencil
from .stencil import BACKENDS, StencilRule, max_workers, run_simulation
from .storage import DEFAULT_MEMORY_CAP

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _pair(text: str) -> tuple[int, int]:
    try:
        a, b = (int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated integers, got {text!r}")
    return a, b


def _levels(text: str) -> range:
    try:
        if ".." in text:
            a, b = text.split("..")
            return range(int(a), int(b) + 1)
        return range(int(text), int(text) + 1)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a level or range a..b, got {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _rule(text: str) -> StencilRule:
    try:
        return StencilRule.parse(text)
    except FractalError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nbbfrac",
        description="Compact storage, coordinate maps and stencils for NBB fractals.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def fractal_args(p):
        p.add_argument("--fractal", required=True, help="built-in name or @descriptor-file")
        p.add_argument("--level", type=int, required=True, help="scale level r")

    p = sub.add_parser("info", help="print descriptor, size and compression figures")
    fractal_args(p)

    p = sub.add_parser("map", help="convert between embedded and compact coordinates")
    fractal_args(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--to-compact", type=_pair, metavar="X,Y")
    g.add_argument("--to-embedded", type=_pair, metavar="CX,CY")
    p.add_argument("--mma", action="store_true", help="evaluate nu through the matrix form")

    p = sub.add_parser("verify", help="check the maps (and optionally the stencil backends)")
    fractal_args(p)
    p.add_argument("--stencil", action="store_true")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--rule", type=_rule, default=StencilRule())
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--block-size", type=int)

    p = sub.add_parser("simulate", help="run Game of Life on the fractal")
    fractal_args(p)
    p.add_argument("--backend", choices=BACKENDS, default="compact")
    p.add_argument("--rule", type=_rule, default=StencilRule())
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--block-size", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--precompute", action="store_true", help="use a neighbor-index table")
    p.add_argument("--mem-cap", type=int, default=DEFAULT_MEMORY_CAP)
    p.add_argument("--out", help="directory for frames")
    p.add_argument("--format", choices=("pbm",), default="pbm")
    p.add_argument("--every", type=int, default=1, help="write a frame every k steps")

    p = sub.add_parser("bench", help="time the backends and write CSV")
    p.add_argument("--fractal", required=True, help="built-in name or @descriptor-file")
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    p.add_argument("--levels", type=_levels)
    p.add_argument("--backends", type=lambda t: tuple(t.split(",")), default=BACKENDS)
    p.add_argument("--reps", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--block-sizes", type=_int_list)
    p.add_argument("--csv", required=True, help="output path, or - for stdout")
    p.add_argument("--mem-cap", type=int, default=DEFAULT_MEMORY_CAP)
    p.add_argument("--workers", type=int, default=1, help="0 means all cores")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--rule", type=_rule, default=StencilRule())
    return parser


def cmd_info(args, out):
    desc = load_descriptor(args.fractal)
    r = args.level
    w, h = maps.compact_dims(desc, r)
    print(f"name={desc.name}", file=out)
    print(f"k={desc.k}", file=out)
    print(f"s={desc.s}", file=out)
    print(f"level={r}", file=out)
    print(f"n={desc.s ** r}", file=out)
    print(f"cells={cell_count(desc, r)}", file=out)
    print(f"compact_dims={w}x{h}", file=out)
    print(f"hausdorff={hausdorff_dimension(desc):.4f}", file=out)
    print(f"compression={compression_factor(desc, r):.4f}", file=out)
    return EXIT_OK


def cmd_map(args, out):
    desc = load_descriptor(args.fractal)
    if args.to_compact is not None:
        fn = maps.nu_via_mma if args.mma else maps.nu
        cx, cy = fn(desc, args.level, *args.to_compact)
        print(f"{cx},{cy}", file=out)
    else:
        x, y = maps.lam(desc, args.level, *args.to_embedded)
        print(f"{x},{y}", file=out)
    return EXIT_OK


def cmd_verify(args, out):
    desc = load_descriptor(args.fractal)
    report = verify_maps(desc, args.level)
    print(report.format(), file=out)
    ok = report.passed
    if args.stencil:
        srep = verify_stencil(
            desc, args.level, args.rule, args.seed, args.steps, args.density, args.block_size
        )
        print(srep.format(), file=out)
        ok = ok and srep.passed
    return EXIT_OK if ok else EXIT_FAIL


def cmd_simulate(args, out):
    desc = load_descriptor(args.fractal)
    on_step = None
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        every = max(1, args.every)

        def on_step(state):
            if state.iteration % every == 0:
                path = os.path.join(args.out, f"frame_{state.iteration:06d}.{args.format}")
                export_frame(state.front, path, args.format)

    res = run_simulation(
        desc, args.level, args.backend, args.rule, args.steps, args.seed, args.density,
        args.block_size, args.workers or max_workers(), args.mem_cap, args.precompute, on_step,
    )
    if args.out:
        export_frame(res.state.front, os.path.join(args.out, f"final.{args.format}"), args.format)
    total = sum(res.step_seconds)
    mean_ms = 1000.0 * total / len(res.step_seconds) if res.step_seconds else 0.0
    alive = int(res.state.front.buffer.sum())
    print(f"backend={args.backend}", file=out)
    print(f"steps={args.steps}", file=out)
    print(f"alive={alive}", file=out)
    print(f"hash={res.hash:016x}", file=out)
    print(f"mean_ms_per_step={mean_ms:.3f}", file=out)
    return EXIT_OK


def cmd_bench(args, out):
    desc = load_descriptor(args.fractal)
    preset = PRESETS[args.preset]
    cfg = BenchConfig(
        desc=desc,
        levels=args.levels if args.levels is not None else preset["levels"],
        backends=args.backends,
        reps=args.reps if args.reps is not None else preset["reps"],
        iters=args.iters if args.iters is not None else preset["iters"],
        block_sizes=args.block_sizes if args.block_sizes is not None else preset["block_sizes"],
        mem_cap=args.mem_cap,
        workers=args.workers or max_workers(),
        seed=args.seed,
        density=args.density,
        rule=args.rule,
    )
    for b in cfg.backends:
        if b not in BACKENDS:
            raise FractalError(f"unknown backend {b!r}")
    records = bench_run(cfg)
    if args.csv == "-":
        write_csv(records, out)
    else:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            write_csv(records, fh)
    return EXIT_OK


COMMANDS = {
    "info": cmd_info,
    "map": cmd_map,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "bench": cmd_bench,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args, out)
    except (FractalError, OSError) as exc:
        print(f"nbbfrac {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
