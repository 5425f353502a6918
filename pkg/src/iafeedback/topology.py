"""CSI feedback topologies: overhead ledgers and limited-feedback simulation.

Node labels in overhead ledgers are one-based (``T1``..``TK`` for
transmitters, ``R1``..``RK`` for receivers, ``CSI-BS`` for the star hub);
array indices elsewhere stay zero-based.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence

import numpy as np

from .channel import ChannelRealization, NetworkConfig, SeedLike, make_rng
from .errors import ConfigError
from .ia_core import (
    DEFAULT_SELECTION,
    EigenSelection,
    alignment_pairs,
    chain_step,
    exchange_factors,
    filter_from_nullspace,
    normalize_columns,
    select_eigenvectors,
)
from .quantize import VectorQuantizer, gamma_bar, quantize_channel_matrix


class TopologyKind(str, Enum):
    FULL_FEEDBACK = "full"
    CENTRALIZED_RECEIVER = "centralized"
    STAR = "star"
    CSI_EXCHANGE = "exchange"

    @classmethod
    def parse(cls, value) -> "TopologyKind":
        if isinstance(value, cls):
            return value
        aliases = {"fullfeedback": "full", "full_feedback": "full", "centralizedreceiver": "centralized",
                   "centralized_receiver": "centralized", "csiexchange": "exchange", "csi_exchange": "exchange"}
        key = str(value).strip().lower()
        return cls(aliases.get(key, key))


# -- overhead ledgers ----------------------------------------------------


@dataclass(frozen=True)
class LinkEntry:
    sender: str
    receiver: str
    payload: str  # "channel_matrix" or "precoder"
    coefficients: int
    stage: int  # sequential dependency depth of this transfer


@dataclass(frozen=True)
class OverheadReport:
    kind: TopologyKind
    K: int
    M: int
    d: int
    entries: tuple

    @property
    def total(self) -> int:
        return sum(e.coefficients for e in self.entries)

    @property
    def depth(self) -> int:
        """Number of sequential stages (hops) the protocol needs."""
        return max((e.stage for e in self.entries), default=0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["sender", "receiver", "payload_kind", "coefficients"])
        for e in self.entries:
            writer.writerow([e.sender, e.receiver, e.payload, e.coefficients])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"topology": self.kind.value, "K": self.K, "M": self.M, "d": self.d, "total": self.total}


def overhead_closed_form(kind, K: int, M: int, d: int) -> int:
    kind = TopologyKind.parse(kind)
    if kind is TopologyKind.FULL_FEEDBACK:
        return K * (K - 1) * M * M
    if kind is TopologyKind.CENTRALIZED_RECEIVER:
        return (K - 1) * M * M + K * M * d
    if kind is TopologyKind.STAR:
        return K * M * M + K * M * d
    return M * M + 2 * (K - 1) * M * d


def overhead(kind, K: int, M: int, d: int) -> OverheadReport:
    """Enumerate every CSI transfer the topology's protocol performs."""
    kind = TopologyKind.parse(kind)
    if K < 2 or M < 1 or d < 1:
        raise ConfigError("K, M and d must be positive (K >= 2)")
    if kind is TopologyKind.CSI_EXCHANGE and K < 4:
        raise ConfigError("CSI exchange needs K >= 4")
    mat, vec = M * M, M * d
    entries: List[LinkEntry] = []
    if kind is TopologyKind.FULL_FEEDBACK:
        # every receiver broadcasts each of its K-1 interfering channels
        for k in range(1, K + 1):
            for j in range(1, K + 1):
                if j != k:
                    entries.append(LinkEntry(f"R{k}", "broadcast", "channel_matrix", mat, 1))
    elif kind is TopologyKind.CENTRALIZED_RECEIVER:
        for k in range(2, K + 1):
            entries.append(LinkEntry(f"R{k}", "R1", "channel_matrix", mat, 1))
        for k in range(1, K + 1):
            entries.append(LinkEntry("R1", f"T{k}", "precoder", vec, 2))
    elif kind is TopologyKind.STAR:
        for k in range(1, K + 1):
            entries.append(LinkEntry(f"R{k}", "CSI-BS", "channel_matrix", mat, 1))
        for k in range(1, K + 1):
            entries.append(LinkEntry("CSI-BS", f"T{k}", "precoder", vec, 2))
    else:
        entries.append(LinkEntry(f"R{K - 1}", f"R{K}", "channel_matrix", mat, 1))
        entries.append(LinkEntry(f"R{K}", "T1", "precoder", vec, 2))
        entries.append(LinkEntry(f"R{K}", "T2", "precoder", vec, 2))
        for k in range(2, K):
            stage = 2 * (k - 1) + 1
            entries.append(LinkEntry(f"T{k}", f"R{k - 1}", "precoder", vec, stage))
            entries.append(LinkEntry(f"R{k - 1}", f"T{k + 1}", "precoder", vec, stage + 1))
    return OverheadReport(kind, K, M, d, tuple(entries))


# -- limited-feedback simulation ----------------------------------------


@dataclass
class QuantizedLink:
    """Outcome of one feedback round: designed vs. quantized beamformers.

    Arrays use shape ``(K, M, 1)`` for beamformers/filters so they plug
    into the perfect-CSI helpers of :mod:`iafeedback.ia_core`.
    """

    kind: TopologyKind
    precoders: np.ndarray  # designed (pre-quantization) v^[k]
    precoders_hat: np.ndarray
    filters_hat: np.ndarray
    sigmas: np.ndarray
    reference_vectors: np.ndarray  # (K, M)
    error_directions: np.ndarray  # (K, M)
    sigma_M: float = 0.0
    bits: tuple = field(default=())


def _as_bits(bits, K: int) -> list:
    values = list(getattr(bits, "bits", bits))
    if len(values) != K:
        raise ConfigError(f"need {K} bit budgets, got {len(values)}")
    out = []
    for b in values:
        if b is None or (isinstance(b, float) and math.isinf(b)):
            out.append(None)
        elif b < 0:
            raise ConfigError("bit budgets must be non-negative")
        else:
            out.append(b)
    return out


def _require_single_stream(config: NetworkConfig):
    if config.d != 1:
        raise ConfigError("limited-feedback simulation covers single-stream (d = 1) IA only")


def _receive_filters(H: np.ndarray, pairs, v_ref: np.ndarray, vhat: np.ndarray) -> np.ndarray:
    """Filter of each receiver: null the reference direction and the non-paired interferers."""
    K, M = vhat.shape
    R = np.empty((K, M, 1), dtype=complex)
    for k, a, b in pairs:
        others = [H[k, m] @ vhat[m] for m in range(K) if m not in (k, a, b)]
        blockers = np.stack([v_ref[k]] + others, axis=1)
        R[k] = filter_from_nullspace(blockers, (H[k, k] @ vhat[k])[:, None], 1, rank=blockers.shape[1])
    return R


def _link(kind, V, quantized, pairs, v_ref, H, sigma_M, bits) -> QuantizedLink:
    vhat = np.stack([q.quantized for q in quantized])
    return QuantizedLink(
        kind=kind,
        precoders=V[:, :, None],
        precoders_hat=vhat[:, :, None],
        filters_hat=_receive_filters(H, pairs, v_ref, vhat),
        sigmas=np.array([q.sigma for q in quantized]),
        reference_vectors=v_ref,
        error_directions=np.stack([q.error_direction for q in quantized]),
        sigma_M=sigma_M,
        bits=tuple(bits),
    )


def simulate_centralized(
    config: NetworkConfig,
    realization: ChannelRealization,
    precoders: np.ndarray,
    bits,
    seed: SeedLike,
    quantizer: Optional[VectorQuantizer] = None,
    kind=TopologyKind.STAR,
) -> QuantizedLink:
    """Quantize centrally computed chain precoders (star / centralized receiver).

    Receiver ``k`` keeps the reference direction ``H[k, k+1] v[k+1]`` and
    nulls every interferer except ``k+1`` and ``k+2`` (mod K), whose
    quantization errors are left as residual interference.
    """
    _require_single_stream(config)
    H = realization.H
    K = config.K
    bits = _as_bits(bits, K)
    rng = make_rng(seed)
    quantizer = quantizer or VectorQuantizer()
    V = np.asarray(precoders)[:, :, 0]
    quantized = [quantizer.quantize(V[k], bits[k], rng) for k in range(K)]
    v_ref = np.stack([H[k, (k + 1) % K] @ V[(k + 1) % K] for k in range(K)])
    pairs = alignment_pairs(K, "chain")
    return _link(TopologyKind.parse(kind), V, quantized, pairs, v_ref, H, 0.0, bits)


def simulate_csi_exchange(
    config: NetworkConfig,
    realization: ChannelRealization,
    bits,
    seed: SeedLike,
    b_m=None,
    quantizer: Optional[VectorQuantizer] = None,
    selection: EigenSelection = DEFAULT_SELECTION,
) -> QuantizedLink:
    """Run the sequential CSI-exchange protocol with quantized feedback.

    Receiver K-1 forwards its product matrix to receiver K (quantized with
    ``b_m`` bits when given). Receiver K designs and quantizes the first two
    precoders; afterwards receiver ``k-2`` designs precoder ``k`` against
    the *quantized* precoder ``k-1`` it was forwarded.
    """
    _require_single_stream(config)
    if config.K < 4:
        raise ConfigError("CSI exchange needs K >= 4")
    H = realization.H
    K = config.K
    bits = _as_bits(bits, K)
    rng = make_rng(seed)
    quantizer = quantizer or VectorQuantizer()

    he_a, he_b = exchange_factors(H)
    sigma_M = 0.0
    if b_m is not None and not (isinstance(b_m, float) and math.isinf(b_m)):
        he_a, sigma_M = quantize_channel_matrix(he_a, b_m, rng, quantizer=quantizer)

    V = np.empty((K, config.M), dtype=complex)
    quantized = []
    V[0] = select_eigenvectors(he_a @ he_b, 1, selection)[:, 0]
    V[1] = normalize_columns((he_b @ V[0])[:, None])[:, 0]
    quantized.append(quantizer.quantize(V[0], bits[0], rng))
    quantized.append(quantizer.quantize(V[1], bits[1], rng))
    for k in range(2, K):
        V[k] = chain_step(H, k, quantized[k - 1].quantized[:, None])[:, 0]
        quantized.append(quantizer.quantize(V[k], bits[k], rng))

    vhat = [q.quantized for q in quantized]
    v_ref = np.stack(
        [H[k, k + 1] @ vhat[k + 1] for k in range(K - 2)] + [H[K - 2, 0] @ V[0], H[K - 1, 0] @ V[0]]
    )
    pairs = alignment_pairs(K, "exchange")
    return _link(TopologyKind.CSI_EXCHANGE, V, quantized, pairs, v_ref, H, sigma_M, bits)


def simulate_topology(
    kind,
    config: NetworkConfig,
    realization: ChannelRealization,
    bits,
    seed: SeedLike,
    quantizer: Optional[VectorQuantizer] = None,
    precoders: Optional[np.ndarray] = None,
    b_m=None,
) -> QuantizedLink:
    """Dispatch to the simulation matching ``kind``."""
    from .ia_core import ia_precoders_chain

    kind = TopologyKind.parse(kind)
    if kind is TopologyKind.CSI_EXCHANGE:
        return simulate_csi_exchange(config, realization, bits, seed, b_m=b_m, quantizer=quantizer)
    if kind is TopologyKind.FULL_FEEDBACK:
        raise ConfigError("full feedback has no limited-feedback simulation")
    if precoders is None:
        precoders = ia_precoders_chain(config, realization)
    return simulate_centralized(config, realization, precoders, bits, seed, quantizer, kind=kind)


# -- measurements ----------------------------------------------------------


def interference_terms(config: NetworkConfig, realization: ChannelRealization, link: QuantizedLink) -> np.ndarray:
    """``terms[k, j] = P d_kj^-alpha |r_k^H H[k, j] v_j|^2`` for ``j != k`` (0 on the diagonal)."""
    r = link.filters_hat[:, :, 0]
    v = link.precoders_hat[:, :, 0]
    g = np.einsum("km,kjmn,jn->kj", r.conj(), realization.H, v)
    terms = config.P * config.path_gain() * np.abs(g) ** 2
    np.fill_diagonal(terms, 0.0)
    return terms


def residual_interference(config: NetworkConfig, realization: ChannelRealization, link: QuantizedLink) -> np.ndarray:
    """Per-receiver residual interference power summed over every interferer."""
    return interference_terms(config, realization, link).sum(axis=1)


def desired_gains(realization: ChannelRealization, link: QuantizedLink) -> np.ndarray:
    r = link.filters_hat[:, :, 0]
    v = link.precoders_hat[:, :, 0]
    H = realization.H
    return np.abs(np.einsum("km,kmn,kn->k", r.conj(), H[np.arange(len(r)), np.arange(len(r))], v)) ** 2


def sum_throughput_limited(config: NetworkConfig, realization: ChannelRealization, link: QuantizedLink) -> float:
    """Sum rate with residual interference treated as noise."""
    signal = config.P * np.diag(config.path_gain()) * desired_gains(realization, link)
    resid = residual_interference(config, realization, link)
    return float(np.sum(np.log2(1.0 + signal / (resid + 1.0))))


def throughput_loss_bound(config: NetworkConfig, expected_residuals: Sequence[float]) -> float:
    """Jensen bound ``K log2(1 + sum(E[I_k]) / K)`` on the mean throughput loss."""
    res = np.asarray(expected_residuals, dtype=float)
    if np.any(res < 0):
        raise ConfigError("residual interference cannot be negative")
    return float(config.K * math.log2(1.0 + res.sum() / config.K))


def residual_bounds(kind, config: NetworkConfig, bits) -> np.ndarray:
    """Closed-form upper bounds on each receiver's mean residual interference."""
    kind = TopologyKind.parse(kind)
    K, M = config.K, config.M
    bits = _as_bits(bits, K)
    gain = config.path_gain()
    c = gamma_bar(M) * config.P * M * M

    def term(k, j):
        return 0.0 if bits[j] is None else c * gain[k, j] * 2.0 ** (-bits[j] / (M - 1))

    if kind is TopologyKind.CSI_EXCHANGE:
        out = [term(k, k + 2) for k in range(K - 2)]
        out += [term(K - 2, 0) + term(K - 2, 1), term(K - 1, 0) + term(K - 1, 1)]
    elif kind in (TopologyKind.STAR, TopologyKind.CENTRALIZED_RECEIVER):
        out = [term(k, (k + 1) % K) + term(k, (k + 2) % K) for k in range(K)]
    else:
        raise ConfigError(f"no residual bound for {kind.value}")
    return np.array(out)


def misaligned_sources(kind, K: int) -> List[tuple]:
    """Transmitters expected to leave residual interference at each receiver."""
    kind = TopologyKind.parse(kind)
    if kind is TopologyKind.CSI_EXCHANGE:
        return [(k + 2,) for k in range(K - 2)] + [(0, 1), (0, 1)]
    return [((k + 1) % K, (k + 2) % K) for k in range(K)]
