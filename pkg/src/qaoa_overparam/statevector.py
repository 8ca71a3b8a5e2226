"""Exact statevector simulation of the QAOA ansatz.

A layer is ``exp(-i beta H_x) exp(-i gamma H)``. The cost phase is an elementwise
multiplication in the computational basis. The mixer ``H_x = sum_j X_j`` is
diagonal after a Walsh-Hadamard transform ``W`` (``W X_j W = Z_j``), with
eigenvalue ``n - 2 popcount(y)`` on Hadamard-basis index ``y``, so one mixer
layer is ``W diag(exp(-i beta d)) W``.

States are plain complex128 numpy arrays of length 2^n, returned read-only.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatchError
from .problems import DiagonalHamiltonian

TWO_PI = 2.0 * np.pi

# dense W up to this size, then W_a (x) W_b split, then butterfly
_DENSE_WHT_MAX_QUBITS = 6
_SPLIT_WHT_MAX_QUBITS = 16


@dataclass(frozen=True, eq=False)
class ParameterVector:
    """Per-layer angles. Flat ordering is (gamma_1, beta_1, ..., gamma_p, beta_p)."""

    gammas: np.ndarray
    betas: np.ndarray

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.gammas, dtype=float)).copy()
        b = np.atleast_1d(np.asarray(self.betas, dtype=float)).copy()
        if g.shape != b.shape or g.ndim != 1:
            raise ValueError(f"gammas {g.shape} and betas {b.shape} must be equal-length vectors")
        g.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "gammas", g)
        object.__setattr__(self, "betas", b)

    @property
    def p(self) -> int:
        return self.gammas.size

    def to_array(self) -> np.ndarray:
        theta = np.empty(2 * self.p)
        theta[0::2] = self.gammas
        theta[1::2] = self.betas
        return theta

    @classmethod
    def from_array(cls, theta) -> "ParameterVector":
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1 or theta.size % 2:
            raise ValueError("flat parameter array must have even length")
        return cls(theta[0::2], theta[1::2])

    @classmethod
    def empty(cls) -> "ParameterVector":
        return cls(np.zeros(0), np.zeros(0))

    @classmethod
    def random(cls, p: int, rng: np.random.Generator) -> "ParameterVector":
        """Uniform over gamma in [0, 2pi), beta in [0, pi)."""
        draws = rng.random((p, 2))
        return cls(TWO_PI * draws[:, 0], np.pi * draws[:, 1])

    def canonical(self) -> "ParameterVector":
        return ParameterVector(np.mod(self.gammas, TWO_PI), np.mod(self.betas, np.pi))

    def append(self, gamma: float, beta: float) -> "ParameterVector":
        return ParameterVector(np.append(self.gammas, gamma), np.append(self.betas, beta))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.gammas)) and np.all(np.isfinite(self.betas)))

    def to_list(self) -> list[list[float]]:
        return [[float(g), float(b)] for g, b in zip(self.gammas, self.betas)]


@lru_cache(maxsize=None)
def _hadamard_matrix(n: int) -> np.ndarray:
    w = np.array([[1.0]])
    h = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    for _ in range(n):
        w = np.kron(w, h)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=None)
def mixer_spectrum(n: int) -> np.ndarray:
    """Eigenvalues of H_x indexed by Hadamard-basis label: n - 2 popcount(y)."""
    y = np.arange(1 << n)
    pop = np.zeros(1 << n, dtype=np.int64)
    for j in range(n):
        pop += (y >> j) & 1
    d = (n - 2 * pop).astype(float)
    d.setflags(write=False)
    return d


def wht(v: np.ndarray, n: int) -> np.ndarray:
    """Normalized Walsh-Hadamard transform along axis 0 (self-inverse)."""
    if n <= _SPLIT_WHT_MAX_QUBITS:
        # W is real: act on the interleaved (re, im) float view
        v = np.ascontiguousarray(v, dtype=complex)
        x = v.view(float).reshape(v.shape[0], -1)
        if n <= _DENSE_WHT_MAX_QUBITS:
            return (_hadamard_matrix(n) @ x).view(complex).reshape(v.shape)
        # W_n = W_a (x) W_b: one product on the high bits, one batched on the low bits
        a = n // 2
        b = n - a
        y = (_hadamard_matrix(a) @ x.reshape(1 << a, -1)).reshape(1 << a, 1 << b, -1)
        return (_hadamard_matrix(b) @ y).reshape(-1).view(complex).reshape(v.shape)
    tail = v.shape[1:]
    out = np.array(v, dtype=complex)
    s = 1.0 / np.sqrt(2.0)
    for j in range(n):
        x = out.reshape((1 << j, 2, 1 << (n - j - 1)) + tail)
        a = x[:, 0].copy()
        b = x[:, 1]
        x[:, 0] = (a + b) * s
        x[:, 1] = (a - b) * s
    return out


def plus_state(n: int) -> np.ndarray:
    psi = np.full(1 << n, 1.0 / np.sqrt(1 << n), dtype=complex)
    psi.setflags(write=False)
    return psi


def _check(h: DiagonalHamiltonian, state: np.ndarray | None = None) -> None:
    if h.cost.shape != (1 << h.n,):
        raise DimensionMismatchError(f"Hamiltonian on {h.n} qubits has {h.cost.size} entries")
    if state is not None and state.shape != (1 << h.n,):
        raise DimensionMismatchError(f"state of length {state.shape} vs {h.n}-qubit Hamiltonian")


def apply_layer(h: DiagonalHamiltonian, psi: np.ndarray, gamma: float, beta: float) -> np.ndarray:
    _check(h, psi)
    n = h.n
    out = np.exp(-1j * gamma * h.cost) * psi
    out = wht(out, n)
    out *= np.exp(-1j * beta * mixer_spectrum(n))
    return wht(out, n)


def qaoa_state(h: DiagonalHamiltonian, params: ParameterVector) -> np.ndarray:
    """|psi_p> = prod_k e^{-i beta_k H_x} e^{-i gamma_k H} |+>^n."""
    _check(h)
    psi = plus_state(h.n)
    for g, b in zip(params.gammas, params.betas):
        psi = apply_layer(h, psi, g, b)
    psi = np.asarray(psi, dtype=complex)
    psi.setflags(write=False)
    return psi


def expectation(state: np.ndarray, h: DiagonalHamiltonian) -> float:
    _check(h, state)
    return float(np.dot(h.cost, np.abs(state) ** 2))


def ground_overlap(state: np.ndarray, h: DiagonalHamiltonian) -> float:
    """Probability weight on the ground space of h."""
    _check(h, state)
    mask = h.cost == h.cost.min()
    return float(np.sum(np.abs(state[mask]) ** 2))


def energy(h: DiagonalHamiltonian, theta: np.ndarray) -> float:
    """Energy at a flat parameter array (gamma_1, beta_1, ...)."""
    return expectation(qaoa_state(h, ParameterVector.from_array(theta)), h)


def phase_table(values: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """exp(-i * angle * values) with shape angles.shape + values.shape.

    Exponentials are taken once per distinct value; problem costs and the mixer
    spectrum have few distinct levels, so this is much cheaper than a direct exp.
    """
    levels, inv = np.unique(values, return_inverse=True)
    z = np.exp(-1j * np.multiply.outer(angles, levels))
    return z[..., inv.ravel()]


@lru_cache(maxsize=None)
def _mixer_levels(n: int) -> tuple[np.ndarray, np.ndarray]:
    levels, inv = np.unique(mixer_spectrum(n), return_inverse=True)
    return levels, inv.ravel()


def _layer_phases(levels: np.ndarray, index: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """(p, 2^n, R) phases from (R, p) angles."""
    x = angles.T[:, None, :] * levels[None, :, None]
    z = np.empty(x.shape, dtype=complex)
    # cos/sin on the real grid is several times cheaper than a complex exp
    np.cos(x, out=z.real)
    np.sin(x, out=z.imag)
    np.negative(z.imag, out=z.imag)
    return z[:, index, :]


class _WhtPlan:
    """W applied between (2^n, R) complex buffers through precomputed float views.

    ``views`` reshapes a (..., 2^n, R) buffer once; the hot loop then only calls matmul.
    """

    def __init__(self, n: int, r: int):
        self.n = n
        self.r = r
        a = n // 2
        if n <= _DENSE_WHT_MAX_QUBITS:
            self.mode = "dense"
            self.w = _hadamard_matrix(n)
        elif n <= _SPLIT_WHT_MAX_QUBITS:
            self.mode = "split"
            self.shape_a = (1 << a, (1 << (n - a)) * 2 * r)
            self.shape3 = (1 << a, 1 << (n - a), 2 * r)
            self.wa = _hadamard_matrix(a)
            self.wb = _hadamard_matrix(n - a)
            self.tmp = np.empty(self.shape_a)
            self.tmp3 = self.tmp.reshape(self.shape3)
        else:
            self.mode = "butterfly"

    def views(self, buf: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(source view, destination view) of a complex (..., 2^n, R) buffer."""
        if self.mode == "butterfly":
            return buf, buf
        f = buf.view(float)
        if self.mode == "dense":
            return f, f
        lead = buf.shape[:-2]
        return f.reshape(lead + self.shape_a), f.reshape(lead + self.shape3)

    def __call__(self, src: np.ndarray, dst: np.ndarray) -> None:
        if self.mode == "dense":
            np.matmul(self.w, src, out=dst)
        elif self.mode == "split":
            np.matmul(self.wa, src, out=self.tmp)
            np.matmul(self.wb, self.tmp3, out=dst)
        else:
            dst[...] = wht(src, self.n)


def energy_and_gradient_batch(h: DiagonalHamiltonian, thetas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Energies (R,) and gradients (R, 2p) for R flat parameter rows in one adjoint sweep.

    States for all rows are propagated together as columns of a (2^n, R) array.
    """
    _check(h)
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    r, two_p = thetas.shape
    p = two_p // 2
    n = h.n
    dim = 1 << n
    c = h.cost
    d = mixer_spectrum(n)
    ph_c = _layer_phases(h.levels, h.level_index, thetas[:, 0::2])
    ph_b = _layer_phases(*_mixer_levels(n), thetas[:, 1::2])
    w = _WhtPlan(n, r)
    tmp = np.empty((dim, r), dtype=complex)
    psi = np.full((dim, r), 1.0 / np.sqrt(dim), dtype=complex)

    # after_phase[k]: computational basis, after the cost phase of layer k
    # after_mix[k]: Hadamard basis, after the mixer of layer k
    after_phase = np.empty((p, dim, r), dtype=complex)
    after_mix = np.empty((p, dim, r), dtype=complex)
    ap_s, ap_d = w.views(after_phase)
    am_s, am_d = w.views(after_mix)
    tmp_s, tmp_d = w.views(tmp)
    psi_s, psi_d = w.views(psi)
    for k in range(p):
        np.multiply(ph_c[k], psi, out=after_phase[k])
        w(ap_s[k], tmp_d)
        np.multiply(tmp, ph_b[k], out=after_mix[k])
        w(am_s[k], psi_d)

    e = c @ (psi.real**2 + psi.imag**2)
    # conjugated adjoint states at the same two points of every layer; W is real,
    # so conj(lambda) propagates with the forward phases and no conjugation pass is needed
    mu_phase = np.empty((p, dim, r), dtype=complex)
    mu_mix = np.empty((p, dim, r), dtype=complex)
    mp_s, mp_d = w.views(mu_phase)
    mm_s, mm_d = w.views(mu_mix)
    mu = c[:, None] * psi.conj()
    mu_s, _ = w.views(mu)
    for k in range(p - 1, -1, -1):
        w(mu_s, mm_d[k])
        np.multiply(mu_mix[k], ph_b[k], out=tmp)
        w(tmp_s, mp_d[k])
        np.multiply(mu_phase[k], ph_c[k], out=mu)
    grad = np.empty((r, two_p))
    # Im sum_i w_i conj(l_i) s_i, contracted for all layers at once
    mu_mix *= after_mix
    mu_phase *= after_phase
    grad[:, 1::2] = 2.0 * (d @ mu_mix.imag).T
    grad[:, 0::2] = 2.0 * (c @ mu_phase.imag).T
    return e, grad


def energy_and_gradient(h: DiagonalHamiltonian, theta: np.ndarray) -> tuple[float, np.ndarray]:
    """Energy and its gradient w.r.t. the flat parameters (gamma_1, beta_1, ...)."""
    e, g = energy_and_gradient_batch(h, np.asarray(theta, dtype=float)[None, :])
    return float(e[0]), g[0]


def energy_gradient(h: DiagonalHamiltonian, params: ParameterVector) -> np.ndarray:
    return energy_and_gradient(h, params.to_array())[1]


def derivative_states(h: DiagonalHamiltonian, params: ParameterVector) -> np.ndarray:
    """Rows are d|psi>/d theta_j in flat parameter order, shape (2p, 2^n).

    Each generator (-iH after the cost phase, -iH_x after the mixer) is inserted
    as its layer is reached and the resulting column is carried through all
    remaining layers together with the earlier ones.
    """
    _check(h)
    n, p = h.n, params.p
    c = h.cost
    d = mixer_spectrum(n)
    dim = 1 << n
    psi = np.array(plus_state(n))
    cols = np.zeros((dim, 2 * p), dtype=complex)
    for k, (g, b) in enumerate(zip(params.gammas, params.betas)):
        ph = np.exp(-1j * g * c)
        psi = ph * psi
        cols[:, : 2 * k] *= ph[:, None]
        cols[:, 2 * k] = -1j * c * psi

        mx = np.exp(-1j * b * d)
        psi_t = wht(psi, n) * mx
        cols_t = wht(cols[:, : 2 * k + 1], n) * mx[:, None]
        cols[:, : 2 * k + 1] = wht(cols_t, n)
        cols[:, 2 * k + 1] = wht(-1j * d * psi_t, n)
        psi = wht(psi_t, n)
    out = cols.T.copy()
    out.setflags(write=False)
    return out
