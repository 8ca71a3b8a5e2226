"""Diagonal problem Hamiltonians for MAX-CUT and MAX-2-SAT plus instance generators.

Bit convention used everywhere in the package: basis index ``x`` is read in
natural binary order with qubit / vertex / variable 1 as the most significant bit.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import DimensionMismatchError, InvalidSizeError, UndefinedGapError

Literal = tuple[int, bool]
Clause = tuple[Literal, Literal]


def basis_bits(n: int) -> np.ndarray:
    """(2^n, n) array of bits; column i holds the value of qubit i+1."""
    idx = np.arange(1 << n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.int8)


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple[tuple[int, int], ...]
    seed: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise InvalidSizeError(f"graph needs at least one vertex, got n={self.n}")
        canon = []
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop on vertex {i}")
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise ValueError(f"edge ({i}, {j}) outside 1..{self.n}")
            canon.append((min(i, j), max(i, j)))
        if len(set(canon)) != len(canon):
            raise ValueError("duplicate edge")
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    def degrees(self) -> list[int]:
        deg = [0] * self.n
        for i, j in self.edges:
            deg[i - 1] += 1
            deg[j - 1] += 1
        return deg

    def to_dict(self) -> dict:
        return {"kind": "maxcut", "n": self.n, "edges": [list(e) for e in self.edges], "seed": self.seed}


@dataclass(frozen=True)
class SatInstance:
    n: int
    clauses: tuple[Clause, ...]
    seed: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        canon = []
        for clause in self.clauses:
            (a, na), (b, nb) = clause
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"clause {clause} repeats variable {a}")
            if not (1 <= a <= self.n and 1 <= b <= self.n):
                raise ValueError(f"clause {clause} references a variable outside 1..{self.n}")
            canon.append(((a, bool(na)), (b, bool(nb))))
        object.__setattr__(self, "clauses", tuple(canon))

    @property
    def m(self) -> int:
        return len(self.clauses)

    @property
    def density(self) -> float:
        return self.m / self.n

    def to_dict(self) -> dict:
        return {
            "kind": "max2sat",
            "n": self.n,
            "clauses": [[[v, int(neg)] for v, neg in c] for c in self.clauses],
            "seed": self.seed,
        }


Instance = Union[Graph, SatInstance]


@dataclass(frozen=True, eq=False)
class DiagonalHamiltonian:
    """H = sum_x cost[x] |x><x| on n qubits."""

    n: int
    cost: np.ndarray
    # distinct cost values and the index of each basis state into them
    levels: np.ndarray = field(init=False, repr=False)
    level_index: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        cost = np.array(self.cost, dtype=float)
        if cost.shape != (1 << self.n,):
            raise DimensionMismatchError(f"cost has shape {cost.shape}, expected ({1 << self.n},)")
        if not np.all(np.isfinite(cost)):
            raise ValueError("cost contains non-finite entries")
        levels, index = np.unique(cost, return_inverse=True)
        for a in (cost, levels, index):
            a.setflags(write=False)
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "level_index", index.ravel())

    @property
    def dim(self) -> int:
        return 1 << self.n


def instance_to_json(inst: Instance) -> str:
    return json.dumps(inst.to_dict(), sort_keys=True)


def instance_from_dict(d: dict) -> Instance:
    kind = d.get("kind")
    if kind == "maxcut":
        return Graph(int(d["n"]), tuple(tuple(e) for e in d["edges"]), seed=d.get("seed"))
    if kind == "max2sat":
        clauses = tuple(tuple((int(v), bool(neg)) for v, neg in c) for c in d["clauses"])
        return SatInstance(int(d["n"]), clauses, seed=d.get("seed"))
    raise ValueError(f"unknown instance kind {kind!r}")


def hamiltonian_for(inst: Instance) -> DiagonalHamiltonian:
    if isinstance(inst, Graph):
        return maxcut_hamiltonian(inst)
    return max2sat_hamiltonian(inst)


def maxcut_hamiltonian(g: Graph) -> DiagonalHamiltonian:
    """Ising form sum_{(i,j)} Z_i Z_j: +1 per uncut edge, -1 per cut edge."""
    z = 1 - 2 * basis_bits(g.n).astype(np.int64)
    cost = np.zeros(1 << g.n, dtype=np.int64)
    for i, j in g.edges:
        cost += z[:, i - 1] * z[:, j - 1]
    return DiagonalHamiltonian(g.n, cost.astype(float))


def max2sat_hamiltonian(s: SatInstance) -> DiagonalHamiltonian:
    """Count of violated clauses; each clause projects onto its single falsifying pair."""
    bits = basis_bits(s.n).astype(bool)
    cost = np.zeros(1 << s.n, dtype=np.int64)
    for (a, na), (b, nb) in s.clauses:
        # literal x is false when bit == neg
        cost += (bits[:, a - 1] == na) & (bits[:, b - 1] == nb)
    return DiagonalHamiltonian(s.n, cost.astype(float))


def ring_graph(n: int) -> Graph:
    if n < 3:
        raise InvalidSizeError(f"ring needs n >= 3, got {n}")
    edges = [(j, j + 1) for j in range(1, n)] + [(1, n)]
    return Graph(n, tuple(edges))


def random_graph(n: int, q: float, seed: int) -> Graph:
    """Erdos-Renyi G(n, q); pairs visited in lexicographic order."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"edge probability must lie in [0, 1], got {q}")
    rng = np.random.default_rng(seed)
    pairs = list(itertools.combinations(range(1, n + 1), 2))
    keep = rng.random(len(pairs)) < q
    return Graph(n, tuple(p for p, k in zip(pairs, keep) if k), seed=seed)


def random_regular_graph(n: int, k: int, seed: int, max_tries: int = 10_000) -> Graph:
    """k-regular simple graph from the pairing model.

    Stubs are matched in random order; a pairing that would create a self-loop
    or a repeated edge is put back into the pool and reshuffled. If the pool can
    no longer produce a valid pair, the attempt is discarded and restarted.
    """
    if k < 0 or k >= n or (n * k) % 2:
        raise InvalidSizeError(f"no simple {k}-regular graph on {n} vertices")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        edges = _try_pairing(n, k, rng)
        if edges is not None:
            return Graph(n, tuple(edges), seed=seed)
    raise RuntimeError(f"pairing model failed {max_tries} times for n={n}, k={k}")


def _try_pairing(n: int, k: int, rng: np.random.Generator) -> Optional[set]:
    edges: set[tuple[int, int]] = set()
    stubs = [v for v in range(1, n + 1) for _ in range(k)]
    while stubs:
        rng.shuffle(stubs)
        leftover = []
        for a, b in zip(stubs[::2], stubs[1::2]):
            e = (min(a, b), max(a, b))
            if a != b and e not in edges:
                edges.add(e)
            else:
                leftover += [a, b]
        if leftover and not _can_pair(leftover, edges):
            return None
        stubs = leftover
    return edges


def _can_pair(stubs: list, edges: set) -> bool:
    verts = sorted(set(stubs))
    return any((a, b) not in edges for a, b in itertools.combinations(verts, 2))


def random_2sat(n: int, m: int, seed: int) -> SatInstance:
    """m independent clauses over a uniform pair of distinct variables with uniform signs."""
    if n < 2:
        raise InvalidSizeError(f"2-SAT needs n >= 2, got {n}")
    if m < 0:
        raise ValueError(f"clause count must be non-negative, got {m}")
    rng = np.random.default_rng(seed)
    pairs = list(itertools.combinations(range(1, n + 1), 2))
    which = rng.integers(0, len(pairs), size=m)
    negs = rng.integers(0, 2, size=(m, 2)).astype(bool)
    clauses = tuple(
        ((pairs[w][0], bool(negs[c, 0])), (pairs[w][1], bool(negs[c, 1]))) for c, w in enumerate(which)
    )
    return SatInstance(n, clauses, seed=seed)


def ground_energy(h: DiagonalHamiltonian) -> tuple[float, int]:
    e_g = float(h.cost.min())
    return e_g, int(np.count_nonzero(h.cost == e_g))


def spectral_gap(h: DiagonalHamiltonian) -> float:
    levels = np.unique(h.cost)
    if levels.size < 2:
        raise UndefinedGapError("constant Hamiltonian has no spectral gap")
    return float(levels[1] - levels[0])
