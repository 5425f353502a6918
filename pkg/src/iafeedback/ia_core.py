"""Closed-form interference alignment precoders and zero-forcing receivers.

Precoder and filter sets are arrays of shape ``(K, M, d)``: ``V[k]`` is the
precoder of transmitter ``k``, ``R[k]`` the filter of receiver ``k``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelRealization, NetworkConfig
from .errors import AlignmentError, ConfigError, EigenGapError, SingularChannelError

ALIGNMENT_TOL = 1e-9
ZF_RANK_TOL = 1e-6
EIGEN_GAP_TOL = 1e-8


@dataclass(frozen=True)
class EigenSelection:
    """Which ``d`` eigenvectors to take from the alignment eigenproblem.

    ``strategy`` is ``"largest"`` (largest-magnitude eigenvalues, the
    default), ``"smallest"``, or ``"indices"`` together with ``indices``
    into the magnitude-descending eigenvalue order.
    """

    strategy: str = "largest"
    indices: Optional[Sequence[int]] = None

    def __post_init__(self):
        if self.strategy not in ("largest", "smallest", "indices"):
            raise ConfigError(f"unknown eigen selection strategy {self.strategy!r}")
        if self.strategy == "indices":
            if not self.indices or len(set(self.indices)) != len(self.indices):
                raise ConfigError("indices must be a non-empty list of distinct positions")

    def pick(self, order: np.ndarray, d: int) -> np.ndarray:
        """Select ``d`` positions from eigen-indices sorted by descending magnitude."""
        if self.strategy == "largest":
            return order[:d]
        if self.strategy == "smallest":
            return order[::-1][:d]
        if len(self.indices) != d or max(self.indices) >= len(order) or min(self.indices) < 0:
            raise ConfigError(f"need exactly {d} indices in [0, {len(order)})")
        return order[list(self.indices)]


DEFAULT_SELECTION = EigenSelection()


def phase_fix(x: np.ndarray) -> np.ndarray:
    """Rotate each column so its first non-negligible entry is real positive."""
    x = np.array(x, dtype=complex)
    cols = x.reshape(x.shape[0], -1)
    for c in range(cols.shape[1]):
        col = cols[:, c]
        idx = np.flatnonzero(np.abs(col) > 1e-12 * max(np.abs(col).max(), 1e-300))
        if idx.size:
            col *= np.exp(-1j * np.angle(col[idx[0]]))
    return cols.reshape(x.shape)


def normalize_columns(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=0, keepdims=True)


def _solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(A, B)
    except np.linalg.LinAlgError as exc:
        raise SingularChannelError(str(exc)) from exc


def sorted_eig(A: np.ndarray):
    """Eigenvalues/right eigenvectors sorted by descending eigenvalue magnitude."""
    try:
        lam, vecs = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise SingularChannelError(f"eigendecomposition failed: {exc}") from exc
    order = np.argsort(-np.abs(lam), kind="stable")
    return lam[order], phase_fix(normalize_columns(vecs[:, order]))


def select_eigenvectors(A: np.ndarray, d: int, selection: EigenSelection = DEFAULT_SELECTION) -> np.ndarray:
    lam, vecs = sorted_eig(A)
    return vecs[:, selection.pick(np.arange(len(lam)), d)]


def chain_step(H: np.ndarray, k: int, prev: np.ndarray) -> np.ndarray:
    """Precoder of transmitter ``k`` aligned with transmitter ``k-1`` at receiver ``k-2``.

    Solves ``span(H[k-2, k] V_k) = span(H[k-2, k-1] V_{k-1})`` (indices mod K).
    """
    K = H.shape[0]
    r = (k - 2) % K
    return normalize_columns(_solve(H[r, k], H[r, (k - 1) % K] @ prev))


def chain_product(H: np.ndarray) -> np.ndarray:
    """The K-factor product whose eigenvectors give the first precoder."""
    K = H.shape[0]
    prod = _solve(H[K - 1, 1], H[K - 1, 0])
    for k in list(range(2, K)) + [0]:
        r = (k - 2) % K
        prod = _solve(H[r, k], H[r, (k - 1) % K] @ prod)
    return prod


def exchange_factors(H: np.ndarray):
    """``(He_{K-1}, He_K)`` of the two-receiver eigenproblem (zero-based rows K-2, K-1)."""
    K = H.shape[0]
    he_a = _solve(H[K - 2, 0], H[K - 2, 1])
    he_b = _solve(H[K - 1, 1], H[K - 1, 0])
    return he_a, he_b


def ia_precoders_chain(
    config: NetworkConfig,
    realization: ChannelRealization,
    selection: EigenSelection = DEFAULT_SELECTION,
) -> np.ndarray:
    """Closed-form IA precoders from the full product chain."""
    H = realization.H
    K, d = config.K, config.d
    V = np.empty((K, config.M, d), dtype=complex)
    V[0] = select_eigenvectors(chain_product(H), d, selection)
    for k in range(1, K):
        V[k] = chain_step(H, k, V[k - 1])
    return V


def ia_precoders_exchange(
    config: NetworkConfig,
    realization: ChannelRealization,
    selection: EigenSelection = DEFAULT_SELECTION,
    he_a: Optional[np.ndarray] = None,
) -> np.ndarray:
    """IA precoders for the CSI-exchange ordering.

    The first two precoders are aligned at receivers K-1 and K (zero-based
    K-2, K-1); the rest follow the sequential chain. ``he_a`` replaces the
    product matrix forwarded by receiver K-1, e.g. with a quantized copy.
    """
    if config.K < 4:
        raise ConfigError("CSI exchange needs K >= 4")
    H = realization.H
    K, d = config.K, config.d
    exact_a, he_b = exchange_factors(H)
    he_a = exact_a if he_a is None else he_a
    V = np.empty((K, config.M, d), dtype=complex)
    V[0] = select_eigenvectors(he_a @ he_b, d, selection)
    V[1] = normalize_columns(he_b @ V[0])
    for k in range(2, K):
        V[k] = chain_step(H, k, V[k - 1])
    return V


# -- alignment verification ------------------------------------------------


def alignment_pairs(K: int, scheme: str = "chain"):
    """Per receiver, the two transmitters whose images must share a span."""
    if scheme == "chain":
        return [(k, (k + 1) % K, (k + 2) % K) for k in range(K)]
    if scheme == "exchange":
        pairs = [(k, k + 1, k + 2) for k in range(K - 2)]
        return pairs + [(K - 2, 0, 1), (K - 1, 0, 1)]
    raise ConfigError(f"unknown alignment scheme {scheme!r}")


def span_residual(A: np.ndarray, B: np.ndarray) -> float:
    """``||(I - P_A) B|| / ||B||`` with ``P_A`` the projector onto span(A)."""
    Q, _ = np.linalg.qr(A)
    resid = B - Q @ (Q.conj().T @ B)
    return float(np.linalg.norm(resid) / np.linalg.norm(B))


def alignment_error(
    config: NetworkConfig,
    realization: ChannelRealization,
    precoders: np.ndarray,
    scheme: str = "chain",
) -> float:
    """Worst span mismatch over all pairs that must be aligned (0 is perfect)."""
    H = realization.H
    worst = 0.0
    for k, a, b in alignment_pairs(config.K, scheme):
        A = H[k, a] @ precoders[a]
        B = H[k, b] @ precoders[b]
        worst = max(worst, span_residual(A, B), span_residual(B, A))
    return worst


# -- receive filters ------------------------------------------------------


def filter_from_nullspace(blockers: np.ndarray, desired: np.ndarray, d: int, rank: Optional[int] = None) -> np.ndarray:
    """Unit-norm filter columns orthogonal to ``blockers`` with maximal desired gain.

    ``blockers`` is M x n. The desired columns are projected onto the
    orthogonal complement of span(blockers) and orthonormalized in order.
    ``rank`` fixes the dimension of the blocked subspace; by default it is
    estimated from the singular values.
    """
    M = blockers.shape[0]
    U, s, _ = np.linalg.svd(blockers, full_matrices=True)
    if rank is None:
        rank = int(np.sum(s > ZF_RANK_TOL * max(s[0], 1e-300))) if s.size else 0
    if M - rank < d:
        raise AlignmentError(f"blocked subspace has dimension {rank}; only {M - rank} < {d} left for the signal")
    null = U[:, rank:]
    proj = null @ (null.conj().T @ desired)
    Q, Rq = np.linalg.qr(proj)
    # QR leaves a column phase ambiguity; make r^H H v real positive.
    Q = Q * np.exp(1j * np.angle(np.diag(Rq)))[None, :]
    return Q[:, :d]


def zf_receive_filter(
    config: NetworkConfig,
    realization: ChannelRealization,
    precoders: np.ndarray,
    k: int,
) -> np.ndarray:
    """Zero-forcing filter of receiver ``k`` for aligned precoders."""
    H = realization.H
    interferers = [H[k, j] @ precoders[j] for j in range(config.K) if j != k]
    if interferers:
        blockers = np.concatenate(interferers, axis=1)
        blockers = blockers[:, np.linalg.norm(blockers, axis=0) > 0]
    else:
        blockers = np.zeros((config.M, 0), dtype=complex)
    desired = H[k, k] @ precoders[k]
    if blockers.shape[1] == 0:
        return normalize_columns(desired)[:, : config.d]
    return filter_from_nullspace(blockers, desired, config.d)


def zf_filters(config: NetworkConfig, realization: ChannelRealization, precoders: np.ndarray) -> np.ndarray:
    return np.stack([zf_receive_filter(config, realization, precoders, k) for k in range(config.K)])


def interference_leakage(config: NetworkConfig, realization: ChannelRealization, precoders, filters) -> np.ndarray:
    """Per-receiver ``sum_{j != k} P d_kj^-alpha |r^H H v|^2`` (per stream power P/d)."""
    H = realization.H
    gain = config.path_gain()
    out = np.zeros(config.K)
    for k in range(config.K):
        for j in range(config.K):
            if j != k:
                g = filters[k].conj().T @ H[k, j] @ precoders[j]
                out[k] += config.P / config.d * gain[k, j] * float(np.sum(np.abs(g) ** 2))
    return out


def stream_power(config: NetworkConfig) -> float:
    """Per-stream transmit power: P/d (equal to P in the single-stream case)."""
    return config.P / config.d


def sum_throughput_perfect(config: NetworkConfig, realization: ChannelRealization, precoders, filters) -> float:
    """Sum rate in bits/s/Hz with all interference zero-forced."""
    H = realization.H
    gain = config.path_gain()
    total = 0.0
    for k in range(config.K):
        g = np.einsum("mi,mn,ni->i", filters[k].conj(), H[k, k], precoders[k])
        total += float(np.sum(np.log2(1.0 + stream_power(config) * gain[k, k] * np.abs(g) ** 2)))
    return total


# -- perturbation of the first precoder ---------------------------------


def perturbed_v1(
    realization: ChannelRealization,
    selection: EigenSelection,
    delta_H: np.ndarray,
    sigma_M: float,
    gap_tol: float = EIGEN_GAP_TOL,
):
    """First-order and exact first precoder under a perturbed exchange matrix.

    The forwarded product matrix becomes ``sqrt(1-s) He + sqrt(s) dH`` with
    ``||dH||_F = 1``. The first-order vector is expanded in the right
    eigenvectors of the unperturbed product, using the matching left
    eigenvectors (rows of the inverse eigenvector matrix) for the
    coefficients. Both results are scaled so their component along the
    unperturbed eigenvector (measured by its left eigenvector) is 1, which
    makes them directly comparable.

    Returns
    -------
    first_order, exact : ndarray, shape (M,)
    """
    delta_H = np.asarray(delta_H, dtype=complex)
    if not np.isclose(np.linalg.norm(delta_H), 1.0, atol=1e-9):
        raise ConfigError("delta_H must have unit Frobenius norm")
    if not 0.0 <= sigma_M <= 1.0:
        raise ConfigError("sigma_M must lie in [0, 1]")
    he_a, he_b = exchange_factors(realization.H)
    A = he_a @ he_b
    lam, vecs = sorted_eig(A)
    m = int(selection.pick(np.arange(len(lam)), 1)[0])
    gaps = np.abs(lam[m] - np.delete(lam, m))
    if gaps.min() < gap_tol * max(np.abs(lam).max(), 1e-300):
        raise EigenGapError(f"eigenvalue gap {gaps.min():.3e} below tolerance")
    left = np.linalg.inv(vecs)  # row k is the left eigenvector dual to vecs[:, k]
    v_m = vecs[:, m]
    E = delta_H @ he_b
    eps = np.sqrt(sigma_M)
    first = v_m.copy()
    for k in range(len(lam)):
        if k != m:
            first = first + eps * (left[k] @ E @ v_m) / (lam[m] - lam[k]) * vecs[:, k]

    perturbed = np.sqrt(1.0 - sigma_M) * he_a @ he_b + eps * E
    lam_p, vecs_p = np.linalg.eig(perturbed)
    target = np.sqrt(1.0 - sigma_M) * lam[m]
    exact = vecs_p[:, int(np.argmin(np.abs(lam_p - target)))]
    exact = exact / (left[m] @ exact)
    return first, exact


def phase_aligned_error(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``v - w'`` where ``w'`` is ``w`` normalized and rotated so ``v^H w'`` is real positive."""
    v = v / np.linalg.norm(v)
    w = w / np.linalg.norm(w)
    inner = np.vdot(v, w)
    if abs(inner) > 0:
        w = w * np.exp(-1j * np.angle(inner))
    return v - w


def eigen_sensitivity(realization: ChannelRealization, selection: EigenSelection = DEFAULT_SELECTION) -> float:
    """``sum_{k != m} ||He_K||_F^2 / |lambda_m - lambda_k|^2`` for the exchange product."""
    he_a, he_b = exchange_factors(realization.H)
    lam, _ = sorted_eig(he_a @ he_b)
    m = int(selection.pick(np.arange(len(lam)), 1)[0])
    gaps = np.abs(lam[m] - np.delete(lam, m)) ** 2
    return float(np.sum(np.linalg.norm(he_b) ** 2 / gaps))


# -- serialization ----------------------------------------------------------


def precoders_to_json(V: np.ndarray) -> str:
    """Serialize a ``(K, M, d)`` precoder/filter set as nested [re, im] pairs."""
    return json.dumps({"shape": list(V.shape), "real": V.real.tolist(), "imag": V.imag.tolist()})


def precoders_from_json(text: str) -> np.ndarray:
    data = json.loads(text)
    V = np.array(data["real"]) + 1j * np.array(data["imag"])
    return V.reshape(data["shape"])
