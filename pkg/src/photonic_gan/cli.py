"""``photonic-gan`` command-line driver.

Subcommands::

    simulate      schedule and cost one model, write report + schedule CSV
    compare-opts  energy of every optimization toggle, normalized to baseline
    dse           exhaustive [N, K, L, M] grid search under a power budget
    tconv-check   sparse vs dense transposed-conv verification suite

Exit codes: 0 success, 1 verification failure, 2 bad command line,
3 unreadable or malformed model/config file, 4 invalid model,
5 physical constraint violated, 6 layer cannot be mapped.

Every output file starts with ``#`` comment lines holding the tool version,
the command, the seed and the full effective configuration, and carries no
timestamps, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from ._jit import backend_name
from .devices import DeviceConfig, load_device_config
from .dse import ALL_OPTS, DEFAULT_GRID, SearchSpace, explore, points_to_csv
from .errors import ModelParseError, PhotonicGanError
from .ir import bundled_models_dir, load_model, param_count
from .numerics import execute, init_params, tconv_forward_dense
from .perf import BREAKDOWN_KEYS, evaluate, quick_report
from .schedule import ArchConfig, ScheduleOpts, validate_schedule
from .sparse import tconv_forward_sparse
from .tconv_check import exhaustive_sweep, random_sweep, rows_to_csv

DEFAULT_ARCH = "16,2,11,3"
PAPER_OPTIMUM = (16, 2, 11, 3)

COMPARE_CONFIGS = (
    ("Baseline", ScheduleOpts()),
    ("S/W Optimized", ScheduleOpts(sparse=True)),
    ("Pipelined", ScheduleOpts(pipelined=True)),
    ("Power Gating", ScheduleOpts(power_gating=True)),
    ("All", ALL_OPTS),
)


def _header(command: str, args, devices: DeviceConfig, **extra) -> list[str]:
    lines = [f"photonic-gan {__version__}", f"command: {command}", f"seed: {args.seed}"]
    lines += [f"{k}: {v}" for k, v in extra.items()]
    lines.append("devices: " + json.dumps(devices.to_dict(), sort_keys=True, separators=(",", ":")))
    return lines


def _resolve_model(text: str) -> Path:
    """A path, or the stem of a bundled model (``dcgan_like``)."""
    path = Path(text)
    if not path.exists() and "/" not in text and not text.endswith((".yaml", ".yml")):
        bundled = bundled_models_dir() / f"{text}.yaml"
        if bundled.exists():
            return bundled
    return path


def _model_paths(args) -> list[Path]:
    paths = [_resolve_model(m) for m in (args.model or [])]
    if args.models:
        root = Path(args.models)
        if not root.is_dir():
            raise ModelParseError(f"model directory not found: {root}")
        paths += sorted(root.glob("*.yaml")) + sorted(root.glob("*.yml"))
    if not paths:
        paths = sorted(bundled_models_dir().glob("*.yaml"))
    return paths


def _devices(args) -> DeviceConfig:
    return load_device_config(args.devices) if args.devices else DeviceConfig()


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


def _csv(header, fieldnames, rows) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    w = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    devices = _devices(args)
    arch = ArchConfig.parse(args.arch, power_budget_w=args.budget)
    opts = ScheduleOpts.parse(args.opts)
    path = _resolve_model(args.model[0]) if args.model else bundled_models_dir() / "dcgan_like.yaml"
    graph = load_model(path)
    schedule, rep = evaluate(graph, arch, opts, devices)
    violations = validate_schedule(schedule, arch)
    if violations:
        for v in violations[:10]:
            print(f"schedule violation ({v.kind}): {v.message}", file=sys.stderr)
        return 1

    # functional check: the sparse dataflow must not change what the model computes
    params = init_params(graph, args.seed)
    ref = execute(graph, graph_input(graph, args.seed), params, tconv_forward_dense)[-1]
    got = execute(graph, graph_input(graph, args.seed), params, tconv_forward_sparse)[-1]
    numeric_diff = float(abs(ref - got).max())

    header = _header("simulate", args, devices, model=graph.name, arch=arch.label, opts=opts.label,
                     budget_w=arch.power_budget_w)
    out = Path(args.out)
    row = {"model": graph.name, "N": arch.N, "K": arch.K, "L": arch.L, "M": arch.M, "opts": opts.label,
           **rep.as_row(args.breakdown)}
    _write(out, "report.csv", _csv(header, list(row), [row]))
    _write(out, "schedule.csv", schedule.to_csv(header))

    lines = [f"# {h}" for h in header] + [
        f"model            {graph.name} ({len(graph)} layers, {param_count(graph)} parameters)",
        f"architecture     {arch.label}  (N columns, K rows, L dense units, M conv units)",
        f"optimizations    {opts.label}",
        f"latency          {rep.total_latency_ns:.6g} ns",
        f"energy           {rep.total_energy_j:.6g} J",
        f"average power    {rep.avg_power_w:.6g} W",
        f"peak power       {rep.peak_power_w:.6g} W (budget {arch.power_budget_w:g} W)",
        f"GOPS             {rep.gops:.6g}  (2 ops per logical dense MAC)",
        f"EPB              {rep.epb_j_per_bit:.6g} J/bit  (8-bit inputs and weights)",
        f"dense MACs       {rep.dense_macs}",
        f"performed MACs   {rep.reduced_macs} ({rep.eliminated_macs} eliminated)",
        f"tile ops         {rep.n_ops}",
        f"sparse vs dense  max |diff| {numeric_diff:.3g} on a seeded forward pass",
        "gating intervals " + "; ".join(f"{['dense', 'conv'][b]} [{a:.6g}, {z:.6g}) ns"
                                         for b, a, z in schedule.gating),
        f"route switches   {len(schedule.switches)}",
        "energy breakdown",
    ] + [f"  {k:14s} {rep.breakdown_j[k]:.6g} J" for k in BREAKDOWN_KEYS]
    _write(out, "report.txt", "\n".join(lines) + "\n")
    print("\n".join(line for line in lines if not line.startswith("#")))
    print(f"wrote {out / 'report.txt'}, {out / 'report.csv'}, {out / 'schedule.csv'}")
    return 0


def graph_input(graph, seed):
    """Seeded input tensor for the functional check."""
    return np.random.default_rng(seed + 1).normal(size=graph.input_shape.as_tuple())


def cmd_compare_opts(args) -> int:
    devices = _devices(args)
    arch = ArchConfig.parse(args.arch, power_budget_w=args.budget)
    graphs = [load_model(p) for p in _model_paths(args)]
    rows = []
    for graph in graphs:
        base = None
        for label, opts in COMPARE_CONFIGS:
            rep = quick_report(graph, arch, opts, devices)
            base = rep.total_energy_j if base is None else base
            rows.append({"model": graph.name, "config": label, "opts": opts.label,
                         "energy_j": rep.total_energy_j, "normalized_energy": rep.total_energy_j / base,
                         "latency_ns": rep.total_latency_ns, "gops": rep.gops, "epb_j_per_bit": rep.epb_j_per_bit})
    header = _header("compare-opts", args, devices, arch=arch.label, models=",".join(g.name for g in graphs))
    path = _write(Path(args.out), "compare_opts.csv", _csv(header, list(rows[0]), rows))
    width = max(len(g.name) for g in graphs)
    print(f"{'model':{width}s}  " + "  ".join(f"{label:>13s}" for label, _ in COMPARE_CONFIGS))
    for graph in graphs:
        vals = [r["normalized_energy"] for r in rows if r["model"] == graph.name]
        print(f"{graph.name:{width}s}  " + "  ".join(f"{v:13.4f}" for v in vals))
    print(f"wrote {path}")
    return 0


def cmd_dse(args) -> int:
    devices = _devices(args)
    graphs = tuple(load_model(p) for p in _model_paths(args))
    try:
        space = SearchSpace.from_grid(args.grid, graphs, args.budget)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = explore(space, devices, ALL_OPTS)
    header = _header("dse", args, devices, grid=args.grid, budget_w=args.budget, opts=ALL_OPTS.label,
                     models=",".join(g.name for g in graphs))
    path = _write(Path(args.out), "dse_points.csv", points_to_csv(result, header))
    ranked = sorted((p for p in result.points if p.feasible), key=lambda p: p.rank_key())
    print(f"{len(result.points)} points, {result.n_feasible} feasible under {args.budget:g} W")
    if result.empty_feasible_set:
        print("empty feasible set: no configuration fits the power budget")
    else:
        b = result.best
        print(f"best {b.config.label}: objective {b.objective:.6g}, GOPS {b.gops:.6g}, "
              f"EPB {b.epb:.6g} J/bit, peak {b.peak_power_w:.6g} W")
        ref = next((i for i, p in enumerate(ranked) if p.config.as_tuple() == PAPER_OPTIMUM), None)
        if ref is not None:
            print(f"[16,2,11,3] ranks {ref + 1} of {len(ranked)} feasible points")
    print(f"wrote {path}")
    return 0


def cmd_tconv_check(args) -> int:
    rows = exhaustive_sweep(args.seed) + random_sweep(args.cases, args.seed)
    header = _header("tconv-check", args, DeviceConfig(), cases=args.cases, backend=backend_name())
    path = _write(Path(args.out), "tconv_check.csv", rows_to_csv(rows, header))
    bad = [r for r in rows if not r.match]
    n_ex = sum(r.sweep == "exhaustive" for r in rows)
    print(f"exhaustive geometries: {n_ex}, random cases: {len(rows) - n_ex}, mismatches: {len(bad)}")
    for r in bad[:10]:
        print(f"mismatch: {asdict(r)}", file=sys.stderr)
    print(f"wrote {path}")
    return 1 if bad else 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photonic-gan",
        description="Simulate GAN inference on a silicon-photonic accelerator model.",
        epilog="Exit codes: 0 ok, 1 verification failure, 2 usage, 3 parse or missing file, "
               "4 invalid model, 5 physical constraint, 6 unmappable layer.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, models=True):
        if models:
            p.add_argument("--model", action="append", help="model YAML path or bundled model name (repeatable)")
            p.add_argument("--models", help="directory of model YAML files (default: bundled models)")
        p.add_argument("--devices", help="device config YAML overriding the built-in device table")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--seed", type=int, default=0, help="seed for weights and randomized suites")

    p = sub.add_parser("simulate", help="schedule and cost one model")
    common(p)
    p.add_argument("--arch", default=DEFAULT_ARCH, help="N,K,L,M (default 16,2,11,3)")
    p.add_argument("--opts", default="all", help="sparse,pipeline,gating | all | none (default all)")
    p.add_argument("--budget", type=float, default=100.0, help="power budget in W (default 100)")
    p.add_argument("--breakdown", action="store_true", help="add per-device energy columns to report.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare-opts", help="normalized energy of each optimization toggle")
    common(p)
    p.add_argument("--arch", default=DEFAULT_ARCH, help="N,K,L,M (default 16,2,11,3)")
    p.add_argument("--budget", type=float, default=100.0)
    p.set_defaults(func=cmd_compare_opts)

    p = sub.add_parser("dse", help="exhaustive [N,K,L,M] search maximizing mean GOPS/EPB")
    common(p)
    p.add_argument("--grid", default=DEFAULT_GRID,
                   help=f"per-axis lo:hi[:step], a|b|c or a value; bounds inclusive (default {DEFAULT_GRID})")
    p.add_argument("--budget", type=float, default=100.0, help="peak power budget in W (default 100)")
    p.set_defaults(func=cmd_dse)

    p = sub.add_parser("tconv-check", help="verify sparse transposed conv against the dense oracle")
    common(p, models=False)
    p.add_argument("--cases", type=int, default=500, help="randomized multi-channel int8 cases (default 500)")
    p.set_defaults(func=cmd_tconv_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PhotonicGanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        # argument values that parse but make no sense (e.g. a malformed --arch)
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
