"""Closed-form results for MAX-CUT on the ring (ring of disagrees).

Layers are indexed in application order: layer 1 acts first on |+>^n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidDepthError, InvalidSizeError
from .statevector import ParameterVector

Q = math.pi / 4  # every angle of the schedule except the two middle ones


@dataclass(frozen=True)
class RingSchedule:
    n: int
    params: ParameterVector

    @property
    def depth(self) -> int:
        return self.params.p


def ring_analytic_angles(n: int) -> RingSchedule:
    """Depth-n/2 angles reaching the ring ground energy -n.

    All angles are pi/4 except a (pi/8 mixer, 3pi/8 cost) pair in the middle of
    the circuit. For n = 4m+2 the pair sits in layer m+1. For n = 4m it
    straddles layers m and m+1: beta_m = pi/8 and gamma_{m+1} = 3pi/8, which
    are the two adjacent exponentials at the exact center of the gate sequence.
    """
    if n < 4 or n % 2:
        raise InvalidSizeError(f"analytic schedule needs even n >= 4, got {n}")
    p = n // 2
    gammas = np.full(p, Q)
    betas = np.full(p, Q)
    if n % 4 == 2:
        m = (n - 2) // 4
        betas[m] = math.pi / 8
        gammas[m] = 3 * math.pi / 8
    else:
        m = n // 4
        betas[m - 1] = math.pi / 8
        gammas[m] = 3 * math.pi / 8
    return RingSchedule(n, ParameterVector(gammas, betas))


def middle_layer_params(n: int, beta: float, gamma: float) -> ParameterVector:
    """V^m U(gamma, beta) V^m with V = U(pi/4, pi/4), n = 4m+2."""
    if n % 4 != 2 or n < 2:
        raise InvalidSizeError(f"middle-layer family needs n = 4m+2, got {n}")
    m = (n - 2) // 4
    gammas = np.full(2 * m + 1, Q)
    betas = np.full(2 * m + 1, Q)
    gammas[m] = gamma
    betas[m] = beta
    return ParameterVector(gammas, betas)


def ring_middle_angle_energy(n: int, beta: float, gamma: float) -> float:
    """Energy of the middle-layer family: n sin(4 gamma) sin(4 beta)."""
    if n % 4 != 2 or n < 2:
        raise InvalidSizeError(f"closed form holds for n = 4m+2, got {n}")
    return n * math.sin(4 * gamma) * math.sin(4 * beta)


def ring_subopt_energy(n: int, p: int) -> float:
    """Best energy below the optimal depth: -n p / (p + 1)."""
    if not 1 <= p < n // 2:
        raise InvalidDepthError(f"formula holds for 1 <= p < {n // 2}, got p={p}")
    return -n * p / (p + 1)


def ring_ground_energy(n: int) -> float:
    return float(-n if n % 2 == 0 else -(n - 2))


def ring_drop(n: int) -> float:
    """E*_{p*-1} - E*_{p*}: 2 for even n, 2/(n-1) for odd n."""
    if n < 4:
        raise InvalidSizeError(f"drop defined for n >= 4, got {n}")
    return 2.0 if n % 2 == 0 else 2.0 / (n - 1)


def ring_optimal_depth(n: int) -> int:
    if n < 3:
        raise InvalidSizeError(f"ring needs n >= 3, got {n}")
    return n // 2


def ring_optimal_depth_status(n: int) -> str:
    """Provenance label for ring_optimal_depth(n)."""
    if n % 2 == 0:
        return "upper bound proven (explicit angles); lower bound conjectured (numerical)"
    return "conjectured (numerical)"
