"""Experiment sweeps: config, per-instance pipeline, JSON-lines records and reports.

A sweep walks a grid of problem cells, generates seeded instances in each,
measures p_c from the EQD curve and runs the layerwise heuristic R times.
One JSON line is appended per instance as soon as it finishes, so an
interrupted sweep can be resumed by skipping record ids already on disk.
"""

from __future__ import annotations

import csv
import ctypes
import ctypes.util
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, Optional

import jsonschema
import numpy as np

from . import __version__
from ._seeding import derive_seed
from .errors import ConfigError, QaoaError
from .optimize import InstanceResult, multi_run, result_from_dict, result_to_dict, unsolved_sentinel
from .problems import (
    Instance,
    hamiltonian_for,
    random_2sat,
    random_graph,
    random_regular_graph,
    ring_graph,
)
from .qfi import DEFAULT_CONFIRMATIONS, DEFAULT_SAMPLES, EQD_RANK_TOL, overparam_depth

WORKERS_ENV = "QAOA_WORKERS"
FAMILIES = ("ring", "maxcut-regular", "maxcut-random", "max2sat")
_FAMILY_CODE = {f: i for i, f in enumerate(FAMILIES)}
FAST_TIER_MAX_N = {"ring": 12, "maxcut-random": 7, "maxcut-regular": 7, "max2sat": 6}
DEFAULT_P_MAX = 150

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["family", "n", "seed"],
    "properties": {
        "name": {"type": "string"},
        "family": {"enum": list(FAMILIES)},
        "tier": {"enum": ["fast", "extended"]},
        "n": {"type": "array", "items": {"type": "integer", "minimum": 2, "maximum": 20}, "minItems": 1},
        "q": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "k": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "m": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "alpha": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "instances": {"type": "integer", "minimum": 1},
        "runs": {"type": "integer", "minimum": 1},
        "p_max": {"type": "integer", "minimum": 1},
        "p_max_over_pc": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "eps": {"type": "number", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "eqd_samples": {"type": "integer", "minimum": 1},
        "eqd_confirmations": {"type": "integer", "minimum": 1},
        "eqd_p_max": {"type": ["integer", "null"], "minimum": 1},
        "rank_tol": {"type": "number", "exclusiveMinimum": 0},
        "records_path": {"type": "string"},
        "report_dir": {"type": ["string", "null"]},
    },
}


@dataclass
class ExperimentConfig:
    family: str
    n: list[int]
    seed: int
    name: str = "sweep"
    tier: str = "fast"
    q: list[float] = field(default_factory=list)
    k: list[int] = field(default_factory=list)
    m: list[int] = field(default_factory=list)
    alpha: list[float] = field(default_factory=list)
    instances: int = 10
    runs: int = 20
    p_max: int = DEFAULT_P_MAX
    # optional cap p_max <= ceil(p_max_over_pc * p_c), per instance
    p_max_over_pc: Optional[float] = None
    eps: float = 1e-8
    eqd_samples: int = DEFAULT_SAMPLES
    eqd_confirmations: int = DEFAULT_CONFIRMATIONS
    eqd_p_max: Optional[int] = None
    rank_tol: float = EQD_RANK_TOL
    records_path: str = "records.jsonl"
    report_dir: Optional[str] = None

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(d, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
            raise ConfigError(f"{where}: {exc.message}") from None
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(d)

    def validate(self) -> None:
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if self.tier not in ("fast", "extended"):
            raise ConfigError(f"unknown tier {self.tier!r}")
        if not self.n:
            raise ConfigError("n grid is empty")
        if self.tier == "fast" and max(self.n) > FAST_TIER_MAX_N[self.family]:
            raise ConfigError(
                f"fast tier caps {self.family} at n <= {FAST_TIER_MAX_N[self.family]}; use tier 'extended'"
            )
        if self.family == "ring" and min(self.n) < 3:
            raise ConfigError("ring needs n >= 3")
        if self.family == "maxcut-random" and not self.q:
            raise ConfigError("maxcut-random needs a q grid")
        if self.family == "maxcut-regular":
            if not self.k:
                raise ConfigError("maxcut-regular needs a k grid")
            for n in self.n:
                for k in self.k:
                    if k >= n or (n * k) % 2:
                        raise ConfigError(f"no simple {k}-regular graph on {n} vertices")
        if self.family == "max2sat" and not (self.m or self.alpha):
            raise ConfigError("max2sat needs an m or alpha grid")
        if self.eps < 0 or self.runs < 1 or self.instances < 1 or self.p_max < 1:
            raise ConfigError("eps, runs, instances and p_max must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    def science_hash(self) -> str:
        """Digest of everything that affects results; output locations are excluded."""
        d = self.to_dict()
        for key in ("records_path", "report_dir", "name"):
            d.pop(key)
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class WorkItem:
    record_id: str
    family: str
    cell: dict
    seed: int


def _fmt(x) -> str:
    return f"{x:g}" if isinstance(x, float) else str(x)


def work_items(cfg: ExperimentConfig) -> list[WorkItem]:
    """Deterministic instance list for the config grid."""
    items = []
    code = _FAMILY_CODE[cfg.family]
    for n in cfg.n:
        if cfg.family == "ring":
            cells = [{"n": n}]
            count = 1
        elif cfg.family == "maxcut-random":
            cells = [{"n": n, "q": q} for q in cfg.q]
            count = cfg.instances
        elif cfg.family == "maxcut-regular":
            cells = [{"n": n, "k": k} for k in cfg.k]
            count = cfg.instances
        else:
            ms = list(cfg.m) + [int(round(a * n)) for a in cfg.alpha]
            cells = [{"n": n, "m": m} for m in dict.fromkeys(ms)]
            count = cfg.instances
        for cell in cells:
            key = [int(round(1000 * v)) for v in cell.values()]
            for i in range(count):
                tag = "-".join(f"{k}{_fmt(v)}" for k, v in cell.items())
                rid = f"{cfg.family}-{tag}-i{i}"
                items.append(WorkItem(rid, cfg.family, dict(cell), derive_seed(cfg.seed, code, *key, i)))
    return items


def make_instance(item: WorkItem) -> Instance:
    c = item.cell
    if item.family == "ring":
        return ring_graph(c["n"])
    if item.family == "maxcut-random":
        return random_graph(c["n"], c["q"], item.seed)
    if item.family == "maxcut-regular":
        return random_regular_graph(c["n"], c["k"], item.seed)
    return random_2sat(c["n"], c["m"], item.seed)


@dataclass
class SweepRecord:
    record_id: str
    status: str  # ok | degenerate | error
    family: str
    cell: dict
    instance: dict
    provenance: dict
    p_c: Optional[int] = None
    p_c_saturated: bool = False
    eqd_curve: list[int] = field(default_factory=list)
    eqd_sample_ranks: list[list[int]] = field(default_factory=list)
    result: Optional[InstanceResult] = None
    error: Optional[dict] = None

    @property
    def n(self) -> int:
        return int(self.instance["n"])

    @property
    def p_star(self) -> Optional[int]:
        if self.status == "degenerate":
            return 0
        return self.result.p_star if self.result is not None else None

    @property
    def p_star_is_sentinel(self) -> bool:
        return self.result is not None and not self.result.solved

    def normalized_depths(self) -> list[float]:
        return [p / self.p_c for p in range(1, self.result.p_max + 1)]

    def to_dict(self) -> dict:
        d = {
            "record_id": self.record_id,
            "status": self.status,
            "family": self.family,
            "cell": self.cell,
            "instance": self.instance,
            "p_c": self.p_c,
            "p_c_saturated": self.p_c_saturated,
            "eqd_curve": self.eqd_curve,
            "eqd_sample_ranks": self.eqd_sample_ranks,
            "p_star": self.p_star,
            "p_star_sentinel": self.p_star_is_sentinel,
            "result": result_to_dict(self.result) if self.result is not None else None,
            "error": self.error,
            "provenance": self.provenance,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SweepRecord":
        res = result_from_dict(d["result"]) if d.get("result") else None
        return cls(
            record_id=d["record_id"],
            status=d["status"],
            family=d["family"],
            cell=d["cell"],
            instance=d["instance"],
            provenance=d["provenance"],
            p_c=d.get("p_c"),
            p_c_saturated=d.get("p_c_saturated", False),
            eqd_curve=d.get("eqd_curve", []),
            eqd_sample_ranks=d.get("eqd_sample_ranks", []),
            result=res,
            error=d.get("error"),
        )


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def process_item(item: WorkItem, cfg: ExperimentConfig) -> SweepRecord:
    """Full pipeline for one instance. Failures become error records."""
    prov = {
        "config_hash": cfg.science_hash(),
        "version": __version__,
        "started": _now(),
        "instance_seed": item.seed,
        "rank_tol": cfg.rank_tol,
        "eqd_samples": cfg.eqd_samples,
        "eqd_confirmations": cfg.eqd_confirmations,
    }
    rec = SweepRecord(item.record_id, "ok", item.family, item.cell, {}, prov)
    try:
        inst = make_instance(item)
        rec.instance = inst.to_dict()
        h = hamiltonian_for(inst)
        if np.ptp(h.cost) == 0:
            # every string is optimal: nothing to solve, p* = 0
            rec.status = "degenerate"
            return rec
        eqd_p_max = cfg.eqd_p_max or (1 << h.n) + cfg.eqd_confirmations
        op = overparam_depth(
            h, eqd_p_max, cfg.eqd_confirmations, cfg.eqd_samples, derive_seed(item.seed, 2), cfg.rank_tol
        )
        rec.p_c = op.p_c
        rec.p_c_saturated = op.saturated
        rec.eqd_curve = op.eqd_values
        rec.eqd_sample_ranks = [r.ranks for r in op.curve]
        p_max = cfg.p_max
        if cfg.p_max_over_pc is not None:
            p_max = min(p_max, max(1, math.ceil(cfg.p_max_over_pc * op.p_c)))
        res = multi_run(h, cfg.runs, p_max, cfg.eps, derive_seed(item.seed, 1), item.record_id)
        res.p_c = op.p_c
        rec.result = res
    except QaoaError as exc:
        rec.status = "error"
        rec.error = exc.to_dict()
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        rec.status = "error"
        rec.error = {"error": type(exc).__name__, "message": str(exc)}
    finally:
        prov["finished"] = _now()
    return rec


def _process_item_dict(args) -> dict:
    item, cfg = args
    return process_item(item, cfg).to_dict()


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        w = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if w < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1")
    return w


def load_records(path) -> list[SweepRecord]:
    """Parse a records file, skipping a truncated trailing line."""
    return [SweepRecord.from_dict(d) for d in _read_jsonl(Path(path))]


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    rows = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError:
            break
    return rows


def run_experiment(cfg: ExperimentConfig) -> Iterator[SweepRecord]:
    """Yield one record per instance, appending each to ``cfg.records_path`` as it completes.

    Record ids already present in the file are skipped, so rerunning the same
    config resumes an interrupted sweep.
    """
    path = Path(cfg.records_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    done = _read_jsonl(path)
    # rewrite without a possibly truncated last line
    path.write_text("".join(json.dumps(d) + "\n" for d in done), encoding="utf-8")
    seen = {d["record_id"] for d in done}
    todo = [it for it in work_items(cfg) if it.record_id not in seen]
    workers = worker_count()
    with path.open("a", encoding="utf-8") as out:
        if workers == 1:
            results = (process_item(it, cfg).to_dict() for it in todo)
            pool = None
        else:
            pool = ProcessPoolExecutor(max_workers=workers)
            results = pool.map(_process_item_dict, [(it, cfg) for it in todo])
        try:
            for d in results:
                out.write(json.dumps(d) + "\n")
                out.flush()
                yield SweepRecord.from_dict(d)
        finally:
            if pool is not None:
                pool.shutdown(cancel_futures=True)


def _ok(records: Iterable[SweepRecord]) -> list[SweepRecord]:
    return [r for r in records if r.status == "ok" and r.result is not None and r.p_c]


def success_at_normalized(rec: SweepRecord, x: float) -> tuple[bool, float]:
    """(solved by depth x * p_c, success probability at the largest depth <= x * p_c)."""
    p = int(math.floor(x * rec.p_c + 1e-9))
    res = rec.result
    solved = res.solved and res.p_star <= p
    if p < 1:
        return solved, 0.0
    # past the recorded budget the cumulative flags stay at their last value
    return solved, res.success_curve()[min(p, res.p_max) - 1]


def aggregate_normalized(records: Iterable[SweepRecord], bin_width: float = 0.1, x_max: Optional[float] = None) -> list[dict]:
    """Rows (p/p_c upper bin edge, fraction solved, mean success over solved instances).

    Counting is cumulative: an instance solved at p/p_c = x counts as solved at
    every larger normalized depth.
    """
    recs = _ok(records)
    if not recs:
        return []
    if x_max is None:
        x_max = max(r.result.p_max / r.p_c for r in recs)
    n_bins = max(1, int(math.ceil(x_max / bin_width - 1e-9)))
    rows = []
    for b in range(1, n_bins + 1):
        x = round(b * bin_width, 10)
        solved_ids, probs = [], []
        for r in recs:
            solved, prob = success_at_normalized(r, x)
            if solved:
                solved_ids.append(r.record_id)
                probs.append(prob)
        rows.append(
            {
                "p_over_pc": x,
                "instances": len(recs),
                "solved": len(solved_ids),
                "solved_fraction": len(solved_ids) / len(recs),
                "mean_success_solved": float(np.mean(probs)) if probs else None,
                "record_ids": ";".join(solved_ids),
            }
        )
    return rows


def _geomean(values: list[float]) -> float:
    if len(set(values)) == 1:
        return float(values[0])  # exact, avoids exp(log(x)) rounding
    return float(np.exp(np.mean(np.log(values))))


def _group_key(r: SweepRecord) -> tuple:
    if r.family == "max2sat":
        return (r.family, r.cell["m"] / r.cell["n"], r.n)
    return (r.family, None, r.n)


def scaling_report(records: Iterable[SweepRecord]) -> list[dict]:
    """Per (family, clause density, n): geometric means of p* and p_c.

    Unsolved instances enter with p* = 2^n - 1 and are counted in ``sentinels``.
    """
    groups: dict[tuple, list[SweepRecord]] = {}
    for r in _ok(records):
        groups.setdefault(_group_key(r), []).append(r)
    rows = []
    for (family, alpha, n), recs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1] or 0, kv[0][2])):
        stars = [r.p_star for r in recs]
        rows.append(
            {
                "family": family,
                "alpha": alpha,
                "n": n,
                "instances": len(recs),
                "geomean_p_star": _geomean(stars),
                "sentinels": sum(r.p_star_is_sentinel for r in recs),
                "sentinel_value": unsolved_sentinel(n),
                "geomean_p_c": _geomean([r.p_c for r in recs]),
                "record_ids": ";".join(r.record_id for r in recs),
            }
        )
    return rows


def scatter_counts(records: Iterable[SweepRecord]) -> list[dict]:
    """Multiplicity of each (n, p*, p_c) point for density-weighted scatter plots."""
    counts: dict[tuple, list[str]] = {}
    for r in _ok(records):
        counts.setdefault((r.family, r.n, r.p_star, r.p_c), []).append(r.record_id)
    return [
        {"family": f, "n": n, "p_star": ps, "p_c": pc, "count": len(ids), "record_ids": ";".join(ids)}
        for (f, n, ps, pc), ids in sorted(counts.items())
    ]


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return buf.getvalue()


def write_reports(records: list[SweepRecord], out_dir, bin_width: float = 0.1) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tables = {
        "normalized.csv": aggregate_normalized(records, bin_width),
        "scaling.csv": scaling_report(records),
        "scatter.csv": scatter_counts(records),
    }
    paths = {}
    for name, rows in tables.items():
        paths[name] = out / name
        paths[name].write_text(rows_to_csv(rows), encoding="utf-8")
    return paths


def tune_allocator() -> bool:
    """Keep large numpy temporaries on the heap instead of fresh mmaps (glibc only).

    The simulator allocates MB-sized scratch arrays on every gradient call; with
    the default mmap threshold each one costs page faults, which showed up as
    roughly a third of total runtime. Returns False where mallopt is unavailable.
    """
    name = ctypes.util.find_library("c")
    if not name:
        return False
    try:
        libc = ctypes.CDLL(name)
        m_trim_threshold, m_mmap_threshold = -1, -3
        ok = libc.mallopt(m_mmap_threshold, 1 << 30) and libc.mallopt(m_trim_threshold, 1 << 31)
        return bool(ok)
    except (OSError, AttributeError):
        return False
