"""Quantum Fisher information, effective quantum dimension and overparametrization depth."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from ._seeding import derive_seed
from .errors import OverparamDepthNotFound
from .problems import DiagonalHamiltonian
from .statevector import ParameterVector, derivative_states, qaoa_state

log = logging.getLogger(__name__)

DEFAULT_RANK_TOL = 1e-10
# eqd works on 4 sigma^2 from an SVD, so its noise floor is ~1e-30 relative
EQD_RANK_TOL = 1e-20
DEFAULT_SAMPLES = 3
DEFAULT_CONFIRMATIONS = 2
# kept/dropped eigenvalue ratio below which the rank cut is reported as ambiguous
GAP_WARN_RATIO = 1e3


def qfi_from_states(psi: np.ndarray, dpsi: np.ndarray) -> np.ndarray:
    """F_jk = 4 Re(<d_j psi|d_k psi> - <d_j psi|psi><psi|d_k psi>) for rows of dpsi."""
    gram = dpsi.conj() @ dpsi.T
    ov = dpsi @ psi.conj()  # <psi|d_k psi>
    f = 4.0 * np.real(gram - np.outer(ov.conj(), ov))
    return 0.5 * (f + f.T)


def qfi_matrix(h: DiagonalHamiltonian, params: ParameterVector) -> np.ndarray:
    return qfi_from_states(qaoa_state(h, params), derivative_states(h, params))


def tangent_matrix(h: DiagonalHamiltonian, params: ParameterVector) -> np.ndarray:
    """Real matrix B with F = 4 B^T B: stacked Re/Im of the projected derivative states."""
    psi = qaoa_state(h, params)
    dpsi = derivative_states(h, params)
    a = dpsi - np.outer(dpsi @ psi.conj(), psi)
    return np.vstack([a.real.T, a.imag.T])


def qfi_spectrum(h: DiagonalHamiltonian, params: ParameterVector) -> np.ndarray:
    """Ascending QFI eigenvalues computed as 4 sigma^2 of the tangent matrix.

    Avoids squaring the condition number, which matters once the smallest
    genuine eigenvalues fall below ~1e-10 of the largest (ring n >= 12).
    """
    if params.p == 0:
        return np.zeros(0)
    s = np.linalg.svd(tangent_matrix(h, params), compute_uv=False)
    return np.sort(4.0 * s**2)


def numerical_rank(m: np.ndarray, tau: float = DEFAULT_RANK_TOL) -> int:
    """Eigenvalues above tau * max(largest eigenvalue, 1)."""
    if m.size == 0:
        return 0
    return spectrum_rank(np.linalg.eigvalsh(m), tau)


def spectrum_rank(w: np.ndarray, tau: float) -> int:
    """Rank of an ascending eigenvalue list under the relative cut."""
    if tau <= 0:
        raise ValueError("rank tolerance must be positive")
    if w.size == 0:
        return 0
    cut = tau * max(float(w[-1]), 1.0)
    kept = w[w > cut]
    dropped = w[w <= cut]
    if kept.size and dropped.size:
        big_drop = max(float(dropped.max()), 0.0)
        if big_drop > 0 and kept.min() / big_drop < GAP_WARN_RATIO:
            log.warning(
                "ambiguous rank cut: smallest kept %.3e vs largest dropped %.3e (tau=%g)",
                kept.min(), big_drop, tau,
            )
    return int(kept.size)


@dataclass
class EqdReport:
    p: int
    rank_samples: list[tuple[int, int]]
    eqd: int
    tau: float = EQD_RANK_TOL

    @property
    def ranks(self) -> list[int]:
        return [r for _, r in self.rank_samples]


def eqd(
    h: DiagonalHamiltonian,
    p: int,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tau: float = EQD_RANK_TOL,
) -> EqdReport:
    """Maximum QFI rank over uniformly random parameter points at depth p."""
    if p < 1 or n_samples < 1:
        raise ValueError("need p >= 1 and n_samples >= 1")
    samples = []
    for i in range(n_samples):
        s = derive_seed(seed, p, i)
        params = ParameterVector.random(p, np.random.default_rng(s))
        samples.append((s, spectrum_rank(qfi_spectrum(h, params), tau)))
    return EqdReport(p, samples, max(r for _, r in samples), tau)


@dataclass
class OverparamResult:
    p_c: int
    curve: list[EqdReport]
    confirmations: int
    saturated: bool = field(default=False)

    @property
    def eqd_values(self) -> list[int]:
        return [r.eqd for r in self.curve]

    def __iter__(self):
        # allows ``p_c, curve = overparam_depth(...)``
        yield self.p_c
        yield self.curve


def overparam_depth(
    h: DiagonalHamiltonian,
    p_max: int,
    confirmations: int = DEFAULT_CONFIRMATIONS,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tau: float = EQD_RANK_TOL,
) -> OverparamResult:
    """Smallest depth after which EQD stays flat for ``confirmations`` more layers.

    Stops immediately once EQD hits the real dimension of the projective state
    space, 2 (2^n - 1), since it cannot grow past that.
    """
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    bound = 2 * ((1 << h.n) - 1)
    curve: list[EqdReport] = []
    for p in range(1, p_max + 1):
        rep = eqd(h, p, n_samples, seed, tau)
        curve.append(rep)
        if rep.eqd >= bound:
            first = next(r.p for r in curve if r.eqd == rep.eqd)
            return OverparamResult(first, curve, confirmations, saturated=True)
        if p > confirmations:
            tail = [r.eqd for r in curve[-(confirmations + 1):]]
            if len(set(tail)) == 1:
                return OverparamResult(p - confirmations, curve, confirmations)
    raise OverparamDepthNotFound(f"EQD still growing at p_max={p_max}", curve)


def eqd_curve_csv(curve: list[EqdReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["depth", "eqd", "sample_ranks"])
    for r in curve:
        w.writerow([r.p, r.eqd, ";".join(str(x) for x in r.ranks)])
    return buf.getvalue()
