"""Feedback-bit allocation: interference weights, water-filling, DoF budgets."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import NetworkConfig
from .errors import ConfigError, InstanceTooLargeError
from .quantize import gamma_bar
from .topology import TopologyKind


@dataclass(frozen=True)
class BitAllocation:
    bits: tuple
    total: int

    def __post_init__(self):
        if any(b < 0 for b in self.bits):
            raise ConfigError("bit counts must be non-negative")
        if sum(self.bits) > self.total:
            raise ConfigError(f"allocation {self.bits} exceeds budget {self.total}")

    def __iter__(self):
        return iter(self.bits)

    def __len__(self):
        return len(self.bits)


@dataclass(frozen=True)
class WeightVector:
    a: np.ndarray
    kind: Optional[TopologyKind] = None


def _weights_array(weights) -> np.ndarray:
    a = np.asarray(getattr(weights, "a", weights), dtype=float)
    if np.any(a <= 0):
        raise ConfigError("interference weights must be positive")
    return a


def weights(config: NetworkConfig, kind) -> WeightVector:
    """Weight ``a_k`` of each precoder: the bound coefficient its quantization error contributes.

    For the centralized topologies, precoder ``k`` leaks into receivers
    ``k-1`` and ``k-2``; in CSI exchange precoders 1 and 2 leak into
    receivers K-1 and K and precoder ``k >= 3`` into receiver ``k-2``.
    """
    kind = TopologyKind.parse(kind)
    K, M = config.K, config.M
    gain = config.path_gain()
    c = gamma_bar(M) * config.P * M * M
    if kind in (TopologyKind.STAR, TopologyKind.CENTRALIZED_RECEIVER):
        a = [c * (gain[(k - 2) % K, k] + gain[(k - 1) % K, k]) for k in range(K)]
    elif kind is TopologyKind.CSI_EXCHANGE:
        a = [c * (gain[K - 1, 0] + gain[K - 2, 0]), c * (gain[K - 2, 1] + gain[K - 1, 1])]
        a += [c * gain[k - 2, k] for k in range(2, K)]
    else:
        raise ConfigError("full feedback has no interference weights")
    return WeightVector(np.array(a), kind)


def allocation_objective(weights, bits, M: int) -> float:
    """``sum_k a_k 2^(-B_k/(M-1))``."""
    a = _weights_array(weights)
    return float(np.sum(a * 2.0 ** (-np.asarray(bits, dtype=float) / (M - 1))))


@dataclass(frozen=True)
class WaterfillSolution:
    weights: np.ndarray
    continuous: np.ndarray
    water_level: float
    active: tuple
    integer: BitAllocation

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "continuous": self.continuous.tolist(),
            "integer": list(self.integer.bits),
            "water_level": self.water_level,
            "active_set": list(self.active),
            "total_bits": self.integer.total,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _round_to_budget(a: np.ndarray, continuous: np.ndarray, total: int, M: int) -> np.ndarray:
    """Floor, then hand leftover bits one by one to the largest objective decrease."""
    B = np.floor(continuous + 1e-9).astype(int)
    # the tolerance above can overshoot by a bit when entries sit at integer+1e-10
    while B.sum() > total:
        B[int(np.argmax(B))] -= 1
    for _ in range(total - int(B.sum())):
        gain = a * (2.0 ** (-B / (M - 1)) - 2.0 ** (-(B + 1) / (M - 1)))
        B[int(np.argmax(gain))] += 1
    return B


def waterfill(weights, total_bits: int, M: int) -> WaterfillSolution:
    """Minimize ``sum a_k 2^(-B_k/(M-1))`` subject to ``sum B_k = total_bits``.

    Users whose closed-form share would be negative are dropped one at a
    time (smallest weight first) and the water level recomputed.
    """
    if total_bits < 0:
        raise ConfigError("total bit budget must be non-negative")
    if M < 2:
        raise ConfigError("M must be at least 2")
    a = _weights_array(weights)
    K = len(a)
    n = M - 1
    cont = np.zeros(K)
    active = list(range(K))
    level = float(total_bits)
    if total_bits > 0:
        while True:
            log_term = n * np.log2(n / a[active])
            level = total_bits + float(np.sum(log_term))
            share = level / len(active) - log_term
            if share.min() >= 0:
                cont[active] = share
                break
            # the smallest weight has the largest n/a_k; ties drop the later index
            worst = max(active, key=lambda k: (-a[k], k))
            active.remove(worst)
    integer = _round_to_budget(a, cont, int(total_bits), M)
    return WaterfillSolution(a, cont, level, tuple(active), BitAllocation(tuple(int(b) for b in integer), int(total_bits)))


def compositions(total: int, parts: int) -> np.ndarray:
    """All non-negative integer vectors of length ``parts`` summing to ``total``, lexicographic."""
    rows = []
    for cuts in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        row = []
        for c in cuts:
            row.append(c - prev - 1)
            prev = c
        row.append(total + parts - 2 - prev)
        rows.append(row)
    arr = np.array(rows, dtype=int).reshape(-1, parts)
    return arr[np.lexsort(arr.T[::-1])]


def brute_force_allocation(weights, total_bits: int, M: int) -> BitAllocation:
    """Exhaustive integer optimum (lexicographically first among ties)."""
    a = _weights_array(weights)
    if total_bits > 24 or len(a) > 6:
        raise InstanceTooLargeError("brute force limited to B_T <= 24 and K <= 6")
    cand = compositions(int(total_bits), len(a))
    obj = (a[None, :] * 2.0 ** (-cand / (M - 1))).sum(axis=1)
    best = obj.min()
    idx = int(np.flatnonzero(obj <= best * (1 + 1e-12))[0])
    return BitAllocation(tuple(int(b) for b in cand[idx]), int(total_bits))


def equal_allocation(K: int, total_bits: int) -> BitAllocation:
    """Equal split; any remainder goes to the lowest-indexed users."""
    base, extra = divmod(int(total_bits), K)
    return BitAllocation(tuple(base + (1 if k < extra else 0) for k in range(K)), int(total_bits))


def nint(x: float) -> int:
    """Nearest integer, halves rounded up."""
    return int(math.floor(x + 0.5))


def total_bits_for_dof_raw(weights, C: float, M: int) -> float:
    """Unrounded total budget ``(M-1)(sum log2 a_k - C)`` keeping residual interference constant."""
    a = _weights_array(weights)
    return float((M - 1) * (np.sum(np.log2(a)) - C))


def total_bits_for_dof(weights, C: float, P: float, M: int, K: int) -> int:
    """Nearest-integer total budget for full DoF, clamped at zero.

    Evaluated in the power-separated form
    ``K (M-1) log2 P + (M-1)(sum log2(a_k / P) - C)``.
    """
    if C <= 0:
        raise ConfigError("C must be positive")
    a = _weights_array(weights)
    if len(a) != K:
        raise ConfigError(f"expected {K} weights, got {len(a)}")
    raw = K * (M - 1) * math.log2(P) + (M - 1) * (float(np.sum(np.log2(a / P))) - C)
    return max(0, nint(raw))


def distributed_bits_raw(weights, C: float, K: int, M: int) -> np.ndarray:
    a = _weights_array(weights)
    return (M - 1) * (np.log2(a) - C / K)


def distributed_bits(weights, C: float, K: int, M: int) -> BitAllocation:
    """Per-user budgets from local weights only: ``nint((M-1)(log2 a_k - C/K))``, clamped at 0."""
    if C <= 0:
        raise ConfigError("C must be positive")
    raw = distributed_bits_raw(weights, C, K, M)
    bits = tuple(max(0, nint(b)) for b in raw)
    return BitAllocation(bits, sum(bits))


def dof_centralized_allocation(weights, C: float, P: float, M: int, K: int) -> WaterfillSolution:
    """Round the DoF total first, then water-fill it across users."""
    return waterfill(weights, total_bits_for_dof(weights, C, P, M, K), M)
