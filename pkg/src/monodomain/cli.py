"""Command-line front end: template generation, runs, and the benchmark.

Three subcommands mirror the intended workflow::

    monodomain generate [-g [minimal|full]] [-vol LABEL ...] [-o FOLDER]
    monodomain run -f FILE.prm [-vol LABEL ...] [-o FOLDER] [--threads N]
    monodomain benchmark [--element {hex,tet,both}] [--dx ...] [--expensive]

Exit codes: 0 on success, 1 for parameter-file problems (parse or binding
errors, message qualified with the parameter path), 2 for command-line
usage errors, 3 when the numerical solution diverges at run time.

Relative paths inside a parameter file have two anchors: input files
(mesh, fiber VTU, restored checkpoint) resolve against the parameter
file's folder, while output files (CSV, VTK, checkpoints, traces) land in
the ``-o`` folder.  Absolute paths are used verbatim.
"""

import argparse
import os
import sys

from . import __version__
from .benchmark import (
    EXPENSIVE_RESOLUTION,
    STANDARD_RESOLUTIONS,
    convergence_table,
    evaluate_cases,
    run_benchmark_case,
    write_convergence_csv,
)
from .config import bind_parameters, build_simulation
from .errors import (
    ConfigError,
    MonodomainError,
    NonFiniteSolution,
    NonFiniteState,
    ParseError,
    SolverDivergence,
)
from .geometry import ElementKind
from .outputs import write_vtk
from .params import Verbosity, generate_template, parse_prm
from .simulation import TIMING_SECTIONS, run

MANIFEST_VERSION = 1
TEMPLATE_NAME = "monodomain.prm"
MANIFEST_NAME = "run_manifest.txt"
BENCHMARK_CSV_NAME = "benchmark_convergence.csv"

_DIVERGENCE = (SolverDivergence, NonFiniteSolution, NonFiniteState)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="monodomain",
        description="Monodomain cardiac electrophysiology solver.",
    )
    parser.add_argument("--version", action="version",
                        version=f"monodomain {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    gen = sub.add_parser(
        "generate",
        help="write a template parameter file",
        description="Write a template parameter file and print its path.")
    gen.add_argument(
        "-g", dest="verbosity", nargs="?", const="default",
        default="default", choices=("minimal", "default", "full"),
        help="template detail level; bare -g keeps the default tier")
    gen.add_argument(
        "-vol", dest="volumes", nargs="+", metavar="LABEL",
        help="volume labels, one subsection each; omitting the flag "
             "produces a single global 'Volumetric parameters' section")
    gen.add_argument(
        "-o", dest="output", default=".", metavar="FOLDER",
        help="folder for the generated file (default: current folder)")

    runp = sub.add_parser(
        "run",
        help="run a simulation from a parameter file",
        description="Bind a parameter file and run the simulation; "
                    "artifacts are written into the output folder.")
    runp.add_argument(
        "-f", dest="param_file", required=True, metavar="FILE.prm",
        help="parameter file to run")
    runp.add_argument(
        "-vol", dest="volumes", nargs="+", metavar="LABEL",
        help="volume labels; when given they must match the volume "
             "subsections of the parameter file, in order")
    runp.add_argument(
        "-o", dest="output", default=".", metavar="FOLDER",
        help="output folder (default: current folder)")
    _runtime_flags(runp)

    bench = sub.add_parser(
        "benchmark",
        help="run the slab convergence benchmark",
        description="Run the cuboid activation benchmark over a set of "
                    "space/time resolutions and report the convergence "
                    "of the far-corner activation time.  The exit code "
                    "is 0 once the report is written; the pass/fail "
                    "lines carry the threshold verdicts.")
    bench.add_argument(
        "--element", choices=("hex", "tet", "both"), default="both",
        help="element kind(s) to run (default: both)")
    bench.add_argument(
        "--dx", dest="dx", nargs="+", type=float, metavar="MM",
        help="spatial resolutions in mm, a subset of 0.5 0.2 0.1 "
             "(default: all three); the time step is paired automatically")
    bench.add_argument(
        "--expensive", action="store_true",
        help="append the 0.05 mm / 0.001 ms pair (hours of runtime)")
    bench.add_argument(
        "--cache", metavar="FOLDER", default=None,
        help="cache folder for per-case results; completed cases are "
             "reloaded instead of recomputed")
    bench.add_argument(
        "-o", dest="output", default=".", metavar="FOLDER",
        help="folder for the convergence CSV (default: current folder)")
    _runtime_flags(bench)

    return parser


def _runtime_flags(sub):
    sub.add_argument(
        "--threads", type=int, default=None, metavar="N",
        help="cap the data-parallel thread pool (default: all cores)")
    sub.add_argument(
        "--seed-free", action="store_true",
        help="reserved for interface stability; the solver uses no "
             "random numbers, so this flag is a no-op")


def _apply_threads(requested, parser):
    """Cap the numba pool; returns the effective thread count."""
    import numba

    if requested is None:
        return numba.get_num_threads()
    if requested < 1:
        parser.error("--threads must be at least 1")
    effective = min(requested, numba.config.NUMBA_NUM_THREADS)
    numba.set_num_threads(effective)
    return effective


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


def cmd_generate(args, parser):
    labels = tuple(args.volumes or ())
    try:
        text = generate_template(Verbosity.from_name(args.verbosity), labels)
    except (MonodomainError, ValueError) as err:
        parser.error(str(err))  # bad labels are a usage problem: exit 2
    os.makedirs(args.output, exist_ok=True)
    path = os.path.join(args.output, TEMPLATE_NAME)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)
    print(path)
    return 0


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def _resolve_paths(bound, base_dir, out_dir):
    """Anchor relative paths: inputs at the parameter file, outputs at -o."""

    def _in(path):
        if path and not os.path.isabs(path):
            return os.path.join(base_dir, path)
        return path

    def _out(path):
        if path and not os.path.isabs(path):
            return os.path.join(out_dir, path)
        return path

    bound.mesh.filename = _in(bound.mesh.filename)
    bound.fibers.import_path = _in(bound.fibers.import_path)
    bound.serialization.restore_from = _in(bound.serialization.restore_from)
    bound.fibers.output_stem = _out(bound.fibers.output_stem)
    bound.serialization.filename = _out(bound.serialization.filename)
    bound.output.field_stem = _out(bound.output.field_stem)
    bound.output.csv_path = _out(bound.output.csv_path)
    bound.activation.path = _out(bound.activation.path)
    for vol in bound.volumes:
        vol.zero_d_csv = _out(vol.zero_d_csv)


def _check_volume_labels(flag_labels, bound):
    if flag_labels is None:
        return
    file_labels = [vol.label for vol in bound.volumes]
    if list(flag_labels) != file_labels:
        raise ConfigError(
            "Electrophysiology / Physical constants and models",
            f"-vol labels {list(flag_labels)} do not match the volume "
            f"subsections of the parameter file {file_labels}")


def _timing_rows(timings, steps):
    """Table rows (name, total, per-step or None) sorted by total."""
    rows = []
    for name in sorted(TIMING_SECTIONS, key=lambda n: -timings.get(n, 0.0)):
        total = timings.get(name, 0.0)
        per_step = total / steps if steps and name != "Initialization" \
            else None
        rows.append((name, total, per_step))
    return rows


def _print_timing_report(timings, steps):
    rows = _timing_rows(timings, steps)
    grand = sum(total for _, total, _ in rows) or 1.0
    print()
    print(f"{'Section':<22}{'Total [s]':>12}{'Per step [s]':>15}"
          f"{'Fraction [%]':>15}")
    for name, total, per_step in rows:
        per = f"{per_step:.6f}" if per_step is not None else "-"
        print(f"{name:<22}{total:>12.2f}{per:>15}{100 * total / grand:>15.1f}")
    print(f"{'Total':<22}{grand:>12.2f}{'-':>15}{100.0:>15.1f}")


def _write_manifest(path, entries):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"manifest version = {MANIFEST_VERSION}\n")
        for key, value in entries:
            fh.write(f"{key} = {value}\n")


def cmd_run(args, parser):
    threads = _apply_threads(args.threads, parser)
    try:
        with open(args.param_file, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        print(f"error: cannot read {args.param_file}: {err}",
              file=sys.stderr)
        return 1

    os.makedirs(args.output, exist_ok=True)
    bound = bind_parameters(parse_prm(text))
    _check_volume_labels(args.volumes, bound)
    _resolve_paths(bound, os.path.dirname(os.path.abspath(args.param_file)),
                   args.output)
    config = build_simulation(bound)

    if bound.fibers.output_enabled:
        stem = bound.fibers.output_stem
        fiber_path = stem if stem.endswith(".vtk") else stem + ".vtk"
        write_vtk(fiber_path, config.mesh, {
            "fiber": config.fibers.f0,
            "sheet": config.fibers.s0,
            "sheet_normal": config.fibers.n0,
        })

    n_steps = int(round(config.final_time / config.dt))
    print(f"mesh: {config.mesh.num_nodes} nodes, "
          f"{config.mesh.num_elements} {config.mesh.element_kind.value} "
          f"elements; {len(config.volumes)} volume(s); "
          f"{n_steps} steps of {config.dt:g} s on {threads} thread(s)")

    resume = bound.serialization.restore_from or None
    report = run(config, resume_from=resume)

    _print_timing_report(report.timings, report.steps)

    entries = [
        ("program", f"monodomain {__version__}"),
        ("subcommand", "run"),
        ("parameter file", os.path.abspath(args.param_file)),
        ("output folder", os.path.abspath(args.output)),
        ("threads", threads),
        ("element kind", config.mesh.element_kind.value),
        ("degrees of freedom", config.mesh.num_nodes),
        ("volumes", ", ".join(v.label for v in config.volumes)),
        ("bdf order", config.bdf_order),
        ("time step [s]", repr(config.dt)),
        ("final time [s]", repr(config.final_time)),
        ("steps completed", report.steps),
        ("max cg iterations", report.max_cg_iterations),
    ]
    for name in TIMING_SECTIONS:
        entries.append((f"time {name} [s]",
                        f"{report.timings.get(name, 0.0):.3f}"))
    entries.append(("time total [s]",
                    f"{sum(report.timings.values()):.3f}"))
    if report.csv_path:
        entries.append(("csv", os.path.abspath(report.csv_path)))
    if config.activation.enabled:
        entries.append(("activation map",
                        os.path.abspath(config.activation.path)))
    if config.checkpoint.enabled:
        entries.append(("checkpoint",
                        os.path.abspath(config.checkpoint.path)))
    manifest_path = os.path.join(args.output, MANIFEST_NAME)
    _write_manifest(manifest_path, entries)
    print(f"\nmanifest: {manifest_path}")
    return 0


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------


def _benchmark_resolutions(args, parser):
    table = {dx: dt for dx, dt in STANDARD_RESOLUTIONS}
    if args.dx is None:
        chosen = list(STANDARD_RESOLUTIONS)
    else:
        chosen = []
        for dx in args.dx:
            if dx not in table:
                parser.error(
                    f"--dx {dx:g} is not a benchmark resolution; "
                    f"pick from {sorted(table, reverse=True)}")
            chosen.append((dx, table[dx]))
    if args.expensive:
        chosen.append(EXPENSIVE_RESOLUTION)
    return chosen


def cmd_benchmark(args, parser):
    threads = _apply_threads(args.threads, parser)
    kinds = {
        "hex": (ElementKind.HEX8,),
        "tet": (ElementKind.TET4,),
        "both": (ElementKind.HEX8, ElementKind.TET4),
    }[args.element]
    resolutions = _benchmark_resolutions(args, parser)

    print(f"running {len(kinds) * len(resolutions)} case(s) "
          f"on {threads} thread(s)")
    cases = []
    for kind in kinds:
        for dx_mm, dt_ms in sorted(resolutions, reverse=True):
            case = run_benchmark_case(dx_mm, dt_ms, kind,
                                      cache_dir=args.cache)
            cases.append(case)
            print(f"  {kind.value} dx={dx_mm:g} mm dt={dt_ms:g} ms: "
                  f"P1={case.p1_ms:.3f} P9={case.p9_ms:.3f} "
                  f"P8={case.p8_ms:.3f} ms "
                  f"({case.num_dofs} DOFs, {case.wall_seconds:.0f} s)")

    print()
    print(convergence_table(cases))
    lines, _ = evaluate_cases(cases)
    print()
    for line in lines:
        print(line)

    os.makedirs(args.output, exist_ok=True)
    csv_path = os.path.join(args.output, BENCHMARK_CSV_NAME)
    write_convergence_csv(csv_path, cases)
    print(f"\nconvergence data: {csv_path}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "generate": cmd_generate,
        "run": cmd_run,
        "benchmark": cmd_benchmark,
    }
    try:
        return handlers[args.subcommand](args, parser)
    except _DIVERGENCE as err:
        print(f"error: solver diverged: {err}", file=sys.stderr)
        return 3
    except MonodomainError as err:
        if isinstance(err, ParseError):
            source = getattr(args, "param_file", "input")
            print(f"error: {source}: {err}", file=sys.stderr)
        else:
            print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
