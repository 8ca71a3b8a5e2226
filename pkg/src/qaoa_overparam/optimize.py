"""Local minimization, the layerwise depth-growing heuristic and run statistics.

All R runs of an instance advance through the depths together: at each depth
the still-active runs are minimized as one batch so that the simulator works
on a (2^n, R) block instead of R separate vectors. Every run keeps its own
random stream, its own BFGS state and its own stopping decision.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ._seeding import derive_seed
from .errors import NumericalFailureError
from .problems import DiagonalHamiltonian, ground_energy, spectral_gap
from .statevector import TWO_PI, ParameterVector, energy_and_gradient_batch

DEFAULT_EPS = 1e-8
GTOL = 1e-10
MAXITER = 1000

# a step that lowers f by less than this relative amount counts as stalled
FTOL = 1e-15
_ARMIJO_C1 = 1e-4
_MAX_BACKTRACK = 40


@dataclass
class MinimizeResult:
    x: np.ndarray  # (R, d)
    fun: np.ndarray  # (R,)
    nit: np.ndarray
    status: list[str]


def bfgs_batch(
    fg: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    x0: np.ndarray,
    gtol: float = GTOL,
    maxiter: int = MAXITER,
    ftol: float = FTOL,
) -> MinimizeResult:
    """Dense BFGS with backtracking Armijo steps, run independently on each row of x0.

    ``fg`` maps an (m, d) block of points to (values (m,), gradients (m, d)).
    A row stops when its gradient infinity-norm is <= gtol, after ``maxiter``
    iterations, or when a step no longer lowers the value by more than
    ``ftol`` relative (the floating-point floor near a minimum).
    """
    x = np.array(x0, dtype=float, copy=True)
    r, dim = x.shape
    f, g = fg(x)
    _check_finite(f, x)
    nit = np.zeros(r, dtype=int)
    status = ["running"] * r

    # working set: rows still iterating, compacted whenever some of them stop so
    # the per-row inverse Hessians are updated in place rather than gathered
    ids = np.arange(r)
    xa, fa, ga = x.copy(), f.copy(), g.copy()
    hinv = np.tile(np.eye(dim), (r, 1, 1))
    fresh = np.ones(r, dtype=bool)
    na = np.zeros(r, dtype=int)

    while ids.size:
        gmax = np.abs(ga).max(axis=1) if dim else np.zeros(ids.size)
        stop = np.where(gmax <= gtol, "gtol", np.where(na >= maxiter, "maxiter", ""))
        if stop.any():
            ids, xa, fa, ga, hinv, fresh, na = _retire(stop, ids, (x, f, g, nit), (xa, fa, ga, na), status, hinv, fresh)
            if not ids.size:
                break
        m = ids.size

        step = -np.einsum("rij,rj->ri", hinv, ga)
        slope = np.einsum("ri,ri->r", step, ga)
        uphill = slope >= 0
        if uphill.any():
            # lost positive definiteness: fall back to steepest descent
            hinv[uphill] = np.eye(dim)
            fresh[uphill] = True
            step[uphill] = -ga[uphill]
            slope[uphill] = -np.einsum("ri,ri->r", ga[uphill], ga[uphill])

        alpha = np.ones(m)
        pend = np.arange(m)
        x_new = np.empty((m, dim))
        f_new = np.empty(m)
        g_new = np.empty((m, dim))
        ok = np.zeros(m, dtype=bool)
        for _ in range(_MAX_BACKTRACK):
            xt = xa[pend] + alpha[pend, None] * step[pend]
            ft, gt = fg(xt)
            finite = np.isfinite(ft)
            accept = finite & (ft <= fa[pend] + _ARMIJO_C1 * alpha[pend] * slope[pend])
            acc = pend[accept]
            x_new[acc], f_new[acc], g_new[acc] = xt[accept], ft[accept], gt[accept]
            ok[acc] = True
            rej = ~accept
            if not rej.any():
                break
            # quadratic model of the step, clipped to [0.1, 0.5] of the current alpha
            pr = pend[rej]
            a = alpha[pr]
            with np.errstate(divide="ignore", invalid="ignore"):
                denom = 2.0 * (ft[rej] - fa[pr] - slope[pr] * a)
                a_q = -slope[pr] * a * a / denom
            a_q = np.where(np.isfinite(a_q) & finite[rej], a_q, 0.5 * a)
            alpha[pr] = np.clip(a_q, 0.1 * a, 0.5 * a)
            pend = pr

        stop = np.where(ok, "", "no_descent").astype("<U10")
        acc = np.flatnonzero(ok)
        if acc.size:
            xs, fs, gs = x_new[acc], f_new[acc], g_new[acc]
            sv = xs - xa[acc]
            y = gs - ga[acc]
            sy = np.einsum("ri,ri->r", sv, y)
            upd = sy > 1e-300
            if upd.any():
                u = acc[upd]
                su, yu, syu = sv[upd], y[upd], sy[upd]
                whole = u.size == m
                h = hinv if whole else hinv[u]
                first = fresh[u]
                if first.any():
                    h[first] *= (syu[first] / np.einsum("ri,ri->r", yu[first], yu[first]))[:, None, None]
                    fresh[u[first]] = False
                hy = np.einsum("rij,rj->ri", h, yu)
                rho = 1.0 / syu
                coef = rho * rho * np.einsum("ri,ri->r", yu, hy) + rho
                # H += coef s s^T - rho (hy s^T + s hy^T), as two rank-one updates
                h += (coef[:, None] * su - rho[:, None] * hy)[:, :, None] * su[:, None, :]
                h -= (rho[:, None] * su)[:, :, None] * hy[:, None, :]
                if not whole:
                    hinv[u] = h
            stalled = (fa[acc] - fs) <= ftol * np.maximum(np.maximum(np.abs(fa[acc]), np.abs(fs)), 1.0)
            xa[acc], fa[acc], ga[acc] = xs, fs, gs
            na[acc] += 1
            stop[acc[stalled]] = "ftol"
        if stop.any():
            ids, xa, fa, ga, hinv, fresh, na = _retire(stop, ids, (x, f, g, nit), (xa, fa, ga, na), status, hinv, fresh)
    return MinimizeResult(x, f, nit, status)


def _retire(stop, ids, out, work, status, hinv, fresh):
    """Copy rows with a stop reason to the outputs and drop them from the working set."""
    keep = stop == ""
    for j in np.flatnonzero(~keep):
        i = ids[j]
        for o, w in zip(out, work):
            o[i] = w[j]
        status[i] = str(stop[j])
    xa, fa, ga, na = (w[keep] for w in work)
    return ids[keep], xa, fa, ga, hinv[keep], fresh[keep], na


def _check_finite(f: np.ndarray, x: np.ndarray) -> None:
    bad = ~np.isfinite(f)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise NumericalFailureError(
            "non-finite energy during minimization",
            {"row": i, "energy": float(f[i]), "params": x[i].tolist()},
        )


def local_minimize(
    h: DiagonalHamiltonian,
    p: int,
    init: ParameterVector,
    gtol: float = GTOL,
    maxiter: int = MAXITER,
) -> tuple[ParameterVector, float]:
    """Quasi-Newton descent from ``init`` with analytic gradients."""
    if init.p != p:
        raise ValueError(f"init has depth {init.p}, expected {p}")
    if not init.is_finite():
        raise NumericalFailureError("non-finite initial parameters", {"params": init.to_list()})
    res = bfgs_batch(lambda t: energy_and_gradient_batch(h, t), init.to_array()[None, :], gtol, maxiter)
    return ParameterVector.from_array(res.x[0]), float(res.fun[0])


@dataclass
class RunTrace:
    """One layerwise run. Raw lists cover the depths actually optimized.

    ``monotone`` and ``converged`` span 1..p_max once post-processed.
    """

    run: int
    seed: int
    p_max: int
    eps: float
    raw: list[float] = field(default_factory=list)
    params: list[list[list[float]]] = field(default_factory=list)
    wall_ms: list[float] = field(default_factory=list)
    monotone: list[float] = field(default_factory=list)
    converged: list[bool] = field(default_factory=list)

    @property
    def p_conv(self) -> Optional[int]:
        for p, flag in enumerate(self.converged, start=1):
            if flag:
                return p
        return None

    def params_at(self, p: int) -> ParameterVector:
        """Optimized angles recorded at depth p."""
        arr = np.asarray(self.params[p - 1], dtype=float).reshape(-1, 2)
        return ParameterVector(arr[:, 0], arr[:, 1])


def enforce_monotone(trace: RunTrace) -> RunTrace:
    """Running minimum of the error over depth, padded to p_max; flags follow the new curve."""
    mono = np.minimum.accumulate(np.asarray(trace.raw, dtype=float)).tolist() if trace.raw else []
    if mono and len(mono) < trace.p_max:
        mono += [mono[-1]] * (trace.p_max - len(mono))
    conv = [e <= trace.eps for e in mono]
    # cumulative: once converged, converged at every larger depth
    for k in range(1, len(conv)):
        conv[k] = conv[k] or conv[k - 1]
    return replace(trace, monotone=mono, converged=conv)


def _layerwise_batch(
    h: DiagonalHamiltonian, p_max: int, eps: float, seeds: list[int], runs: list[int]
) -> list[RunTrace]:
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    if eps < 0:
        raise ValueError("tolerance must be non-negative")
    e_g, _ = ground_energy(h)
    rngs = [np.random.default_rng(s) for s in seeds]
    traces = [RunTrace(run=k, seed=s, p_max=p_max, eps=eps) for k, s in zip(runs, seeds)]
    thetas = np.zeros((len(seeds), 0))
    active = np.ones(len(seeds), dtype=bool)

    def fg(t):
        return energy_and_gradient_batch(h, t)

    for p in range(1, p_max + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        fresh = np.array([[TWO_PI * rngs[i].random(), np.pi * rngs[i].random()] for i in idx])
        x0 = np.hstack([thetas[idx], fresh])
        t0 = time.perf_counter()
        res = bfgs_batch(fg, x0)
        ms = 1e3 * (time.perf_counter() - t0)
        new = np.zeros((len(seeds), 2 * p))
        new[idx] = res.x
        thetas = new
        for j, i in enumerate(idx):
            err = float(res.fun[j]) - e_g
            tr = traces[i]
            tr.raw.append(err)
            tr.params.append(ParameterVector.from_array(res.x[j]).to_list())
            tr.wall_ms.append(ms)
            if err <= eps:
                active[i] = False
    return traces


def layerwise_run(h: DiagonalHamiltonian, p_max: int, eps: float = DEFAULT_EPS, seed: int = 0) -> RunTrace:
    """Grow the circuit one randomly initialized layer at a time, re-optimizing all angles.

    Stops at p_max or as soon as the energy error drops to eps. Returns the raw trace.
    """
    return _layerwise_batch(h, p_max, eps, [seed], [0])[0]


@dataclass
class InstanceResult:
    instance_id: str
    n: int
    e_g: float
    eps: float
    p_max: int
    traces: list[RunTrace]
    p_c: Optional[int] = None

    @property
    def runs(self) -> int:
        return len(self.traces)

    def best_errors(self) -> list[float]:
        """Best post-processed error over runs at each depth 1..p_max."""
        return np.min([t.monotone for t in self.traces], axis=0).tolist()

    @property
    def p_star(self) -> int:
        return optimal_depth(self, self.eps)

    @property
    def solved(self) -> bool:
        return any(t.p_conv is not None for t in self.traces)

    def success_curve(self) -> list[float]:
        return [success_probability(self, p) for p in range(1, self.p_max + 1)]


def run_seeds(seed: int, runs: int) -> list[int]:
    return [derive_seed(seed, r) for r in range(runs)]


def multi_run(
    h: DiagonalHamiltonian,
    runs: int,
    p_max: int,
    eps: float = DEFAULT_EPS,
    seed: int = 0,
    instance_id: str = "",
) -> InstanceResult:
    """R independent layerwise runs with sub-seeds derived from (seed, run index)."""
    if runs < 1:
        raise ValueError("need at least one run")
    raw = _layerwise_batch(h, p_max, eps, run_seeds(seed, runs), list(range(runs)))
    e_g, _ = ground_energy(h)
    return InstanceResult(instance_id, h.n, e_g, eps, p_max, [enforce_monotone(t) for t in raw])


def unsolved_sentinel(n: int) -> int:
    return (1 << n) - 1


def optimal_depth(result: InstanceResult, eps: Optional[float] = None) -> int:
    """Smallest depth whose best post-processed error is <= eps, else 2^n - 1."""
    eps = result.eps if eps is None else eps
    for p, e in enumerate(result.best_errors(), start=1):
        if e <= eps:
            return p
    return unsolved_sentinel(result.n)


def success_probability(result: InstanceResult, p: int) -> float:
    if not 1 <= p <= result.p_max:
        raise ValueError(f"depth {p} outside 1..{result.p_max}")
    return sum(t.converged[p - 1] for t in result.traces) / len(result.traces)


def tolerance_from_gap(h: DiagonalHamiltonian, alpha: float) -> float:
    """eps = alpha * gap; then the ground-space overlap is at least 1 - alpha."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return alpha * spectral_gap(h)


def trace_records(result: InstanceResult) -> list[dict]:
    """JSON-lines rows, one per (run, depth)."""
    rows = []
    for t in result.traces:
        for p in range(1, result.p_max + 1):
            ran = p <= len(t.raw)
            rows.append(
                {
                    "instance_id": result.instance_id,
                    "run": t.run,
                    "p": p,
                    "energy_error_raw": t.raw[p - 1] if ran else None,
                    "energy_error_monotone": t.monotone[p - 1],
                    "converged": bool(t.converged[p - 1]),
                    "wall_ms": round(t.wall_ms[p - 1], 3) if ran else 0.0,
                }
            )
    return rows


def result_to_dict(result: InstanceResult) -> dict:
    return {
        "instance_id": result.instance_id,
        "n": result.n,
        "e_g": result.e_g,
        "eps": result.eps,
        "p_max": result.p_max,
        "p_c": result.p_c,
        "traces": [
            {
                "run": t.run,
                "seed": t.seed,
                "raw": t.raw,
                "params": t.params,
                "wall_ms": t.wall_ms,
            }
            for t in result.traces
        ],
    }


def result_from_dict(d: dict) -> InstanceResult:
    traces = [
        enforce_monotone(
            RunTrace(
                run=t["run"], seed=t["seed"], p_max=d["p_max"], eps=d["eps"],
                raw=list(t["raw"]), params=t["params"], wall_ms=list(t.get("wall_ms", [])),
            )
        )
        for t in d["traces"]
    ]
    return InstanceResult(d["instance_id"], d["n"], d["e_g"], d["eps"], d["p_max"], traces, d.get("p_c"))
