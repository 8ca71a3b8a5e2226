"""Command line entry point: gen, eqd, run, sweep, report.

Errors are printed to stderr as one JSON object and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ._seeding import derive_seed
from .errors import QaoaError
from .harness import (
    FAMILIES,
    ExperimentConfig,
    WorkItem,
    load_records,
    make_instance,
    run_experiment,
    tune_allocator,
    write_reports,
)
from .optimize import DEFAULT_EPS, multi_run, trace_records
from .problems import hamiltonian_for, instance_from_dict, instance_to_json
from .qfi import DEFAULT_CONFIRMATIONS, DEFAULT_SAMPLES, EQD_RANK_TOL, eqd_curve_csv, overparam_depth
from .theory import ring_optimal_depth, ring_optimal_depth_status


def _read_instance(path: str) -> dict:
    text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    return json.loads(text.strip().splitlines()[0])


def _emit(obj) -> None:
    print(json.dumps(obj, indent=None))


def cmd_gen(a) -> int:
    cell = {"n": a.n}
    if a.family == "maxcut-random":
        cell["q"] = a.q
    elif a.family == "maxcut-regular":
        cell["k"] = a.k
    elif a.family == "max2sat":
        cell["m"] = a.m
    lines = []
    for i in range(a.count):
        item = WorkItem(f"{a.family}-{i}", a.family, cell, derive_seed(a.seed, i) if a.count > 1 else a.seed)
        inst = make_instance(item)
        d = inst.to_dict()
        if a.family == "ring":
            d["optimal_depth"] = ring_optimal_depth(a.n)
            d["optimal_depth_status"] = ring_optimal_depth_status(a.n)
            lines.append(json.dumps(d, sort_keys=True))
        else:
            lines.append(instance_to_json(inst))
    text = "\n".join(lines) + "\n"
    if a.out:
        Path(a.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_eqd(a) -> int:
    h = hamiltonian_for(instance_from_dict(_read_instance(a.instance)))
    p_max = a.p_max or (1 << h.n) + a.confirmations
    res = overparam_depth(h, p_max, a.confirmations, a.samples, a.seed, a.tau)
    if a.csv:
        Path(a.csv).write_text(eqd_curve_csv(res.curve), encoding="utf-8")
    _emit(
        {
            "p_c": res.p_c,
            "saturated": res.saturated,
            "confirmations": res.confirmations,
            "samples": a.samples,
            "rank_tol": a.tau,
            "eqd": res.eqd_values,
        }
    )
    return 0


def cmd_run(a) -> int:
    inst = instance_from_dict(_read_instance(a.instance))
    h = hamiltonian_for(inst)
    res = multi_run(h, a.runs, a.p_max, a.eps, a.seed, a.id)
    if a.traces:
        with open(a.traces, "w", encoding="utf-8") as f:
            for row in trace_records(res):
                f.write(json.dumps(row) + "\n")
    _emit(
        {
            "instance_id": a.id,
            "e_g": res.e_g,
            "p_star": res.p_star,
            "solved": res.solved,
            "success": res.success_curve(),
            "best_error": res.best_errors(),
        }
    )
    return 0


def cmd_sweep(a) -> int:
    cfg = ExperimentConfig.load(a.config)
    counts = {"ok": 0, "degenerate": 0, "error": 0}
    for rec in run_experiment(cfg):
        counts[rec.status] += 1
        if not a.quiet:
            print(
                json.dumps({"record_id": rec.record_id, "status": rec.status, "p_c": rec.p_c, "p_star": rec.p_star}),
                file=sys.stderr,
            )
    if cfg.report_dir:
        write_reports(load_records(cfg.records_path), cfg.report_dir)
    _emit({"records_path": cfg.records_path, "new_records": counts})
    return 0


def cmd_report(a) -> int:
    recs = load_records(a.records)
    paths = write_reports(recs, a.out_dir, a.bin_width)
    _emit({"records": len(recs), "tables": {k: str(v) for k, v in paths.items()}})
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qaoa-overparam", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="emit instance JSON")
    g.add_argument("--family", choices=FAMILIES, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--q", type=float, default=0.5)
    g.add_argument("--k", type=int, default=3)
    g.add_argument("--m", type=int, default=0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("eqd", help="EQD curve and p_c for one instance")
    e.add_argument("instance", help="instance JSON file, or - for stdin")
    e.add_argument("--p-max", type=int)
    e.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    e.add_argument("--confirmations", type=int, default=DEFAULT_CONFIRMATIONS)
    e.add_argument("--tau", type=float, default=EQD_RANK_TOL)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--csv", help="write the curve as CSV here")
    e.set_defaults(func=cmd_eqd)

    r = sub.add_parser("run", help="layerwise multi-run on one instance")
    r.add_argument("instance")
    r.add_argument("--runs", type=int, default=20)
    r.add_argument("--p-max", type=int, default=150)
    r.add_argument("--eps", type=float, default=DEFAULT_EPS)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--id", default="instance")
    r.add_argument("--traces", help="write per-(run, depth) JSON lines here")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run an experiment config")
    s.add_argument("config")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_sweep)

    rp = sub.add_parser("report", help="aggregate a records file into CSV tables")
    rp.add_argument("records")
    rp.add_argument("--out-dir", default="reports")
    rp.add_argument("--bin-width", type=float, default=0.1)
    rp.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    tune_allocator()
    try:
        return args.func(args)
    except QaoaError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
