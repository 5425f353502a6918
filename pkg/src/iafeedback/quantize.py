"""Random vector quantization (RVQ) of beamformers and channel matrices.

Two interchangeable routes are provided: explicit codebooks of ``2**B``
isotropic unit vectors searched by chordal distance, and an exact
statistical sampler of the resulting distortion for budgets too large to
enumerate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .channel import SeedLike, complex_normal, derived_rng, make_rng
from .errors import CodebookTooLargeError, ConfigError

#: Largest bit count for which ``build_codebook`` enumerates entries.
MAX_EXPLICIT_BITS = 24


def gamma_bar(M: int) -> float:
    """Distortion-bound constant ``Gamma(1/(M-1)) / (M-1)``."""
    return math.gamma(1.0 / (M - 1)) / (M - 1)


def distortion_bound(dim: int, bits: float) -> float:
    """Upper bound on the mean RVQ distortion ``E[sigma]`` in dimension ``dim``."""
    return gamma_bar(dim) * 2.0 ** (-bits / (dim - 1))


def exact_mean_distortion(dim: int, bits: float) -> float:
    """Exact ``E[sigma] = N * Beta(N, dim/(dim-1))`` for ``N = 2**bits`` codewords."""
    N = 2.0 ** bits
    a = dim / (dim - 1.0)
    if N < 1e6:
        ratio = math.lgamma(N) - math.lgamma(N + a)
    else:
        # lgamma difference cancels catastrophically; use its large-N expansion
        ratio = -a * math.log(N) - a * (a - 1.0) / (2.0 * N)
    return math.exp(math.log(N) + math.lgamma(a) + ratio)


@dataclass(frozen=True)
class Codebook:
    dim: int
    bits: int
    entries: np.ndarray  # (2**bits, dim), unit-norm rows

    def __len__(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class QuantizationResult:
    """``quantized = sqrt(1 - sigma) v + sqrt(sigma) error_direction``."""

    quantized: np.ndarray
    sigma: float
    error_direction: np.ndarray
    index: Optional[int] = None


def random_unit_vectors(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    z = complex_normal(rng, (n, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def build_codebook(
    dim: int,
    bits: int,
    seed: SeedLike,
    max_bits: int = MAX_EXPLICIT_BITS,
    cache_dir: Optional[Union[str, Path]] = None,
) -> Codebook:
    """``2**bits`` i.i.d. isotropic unit vectors in C^dim.

    With ``cache_dir`` set and an integer seed, entries are persisted as
    ``.npy`` files keyed by ``(dim, bits, seed)``.
    """
    if bits < 0 or int(bits) != bits:
        raise ConfigError(f"bits must be a non-negative integer, got {bits}")
    bits = int(bits)
    if bits > max_bits:
        raise CodebookTooLargeError(f"{bits} bits exceeds the explicit cap of {max_bits}")
    path = None
    if cache_dir is not None and isinstance(seed, int):
        path = Path(cache_dir) / f"rvq_d{dim}_b{bits}_s{seed}.npy"
        if path.exists():
            return Codebook(dim, bits, np.load(path))
    entries = random_unit_vectors(make_rng(seed), 2 ** bits, dim)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.save(path, entries)
    entries.setflags(write=False)
    return Codebook(dim, bits, entries)


@lru_cache(maxsize=64)
def shared_codebook(dim: int, bits: int, seed: int) -> Codebook:
    """Process-wide cached codebook (codebooks are immutable)."""
    return build_codebook(dim, bits, seed)


@lru_cache(maxsize=256)
def _nested_block(dim: int, level: int, seed: int) -> np.ndarray:
    n = 1 if level == 0 else 2 ** (level - 1)
    block = random_unit_vectors(derived_rng(seed, dim, level), n, dim)
    block.setflags(write=False)
    return block


@lru_cache(maxsize=64)
def nested_codebook(dim: int, bits: int, seed: int) -> Codebook:
    """Codebook whose first ``2**b`` entries form the ``b``-bit codebook for every ``b <= bits``.

    Entries are still i.i.d. isotropic, so each member has the plain RVQ
    distortion law; nesting only couples outcomes across bit budgets.
    """
    if bits < 0 or bits > MAX_EXPLICIT_BITS:
        raise CodebookTooLargeError(f"{bits} bits outside 0..{MAX_EXPLICIT_BITS}")
    entries = np.concatenate([_nested_block(dim, b, seed) for b in range(bits + 1)])
    entries.setflags(write=False)
    return Codebook(dim, bits, entries)


def decompose(v: np.ndarray, w: np.ndarray, index: Optional[int] = None) -> QuantizationResult:
    """Split the codeword ``w`` into its component along ``v`` and an orthogonal error."""
    inner = np.vdot(v, w)
    if abs(inner) > 0:
        w = w * np.exp(-1j * np.angle(inner))
    c = min(abs(inner), 1.0)
    sigma = max(0.0, 1.0 - c * c)
    if sigma > 0:
        err = w - c * v
        err = err / np.linalg.norm(err)
    else:
        err = np.zeros_like(v)
    return QuantizationResult(quantized=w, sigma=float(sigma), error_direction=err, index=index)


def quantize_vector(v: np.ndarray, codebook: Codebook) -> QuantizationResult:
    """Nearest codeword in chordal distance; the codeword is phase-rotated so ``v^H w >= 0``."""
    v = np.asarray(v, dtype=complex).ravel()
    if v.size != codebook.dim:
        raise ConfigError(f"vector has dimension {v.size}, codebook {codebook.dim}")
    v = v / np.linalg.norm(v)
    corr = np.abs(codebook.entries.conj() @ v)
    i = int(np.argmax(corr))
    return decompose(v, codebook.entries[i], i)


def sample_rvq_sigma(dim: int, bits: float, rng: np.random.Generator, size=None):
    """Draw the RVQ distortion: min of ``2**bits`` i.i.d. Beta(dim-1, 1) variables.

    Uses the inverse CDF ``(1 - (1-u)**(1/N))**(1/(dim-1))`` evaluated in a
    form that stays accurate for very large ``N``.
    """
    if dim < 2:
        raise ConfigError("dimension must be at least 2")
    u = rng.random(size)
    inner = -np.expm1(np.log1p(-u) * 2.0 ** (-bits))
    return inner ** (1.0 / (dim - 1))


def orthogonal_unit(v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Unit vector uniform on the sphere of the orthogonal complement of ``v``."""
    v = v / np.linalg.norm(v)
    z = complex_normal(rng, v.shape)
    z = z - v * np.vdot(v, z)
    return z / np.linalg.norm(z)


def sample_rvq_distortion(dim: int, bits: float, seed: SeedLike, source: Optional[np.ndarray] = None):
    """One ``(sigma, error_direction)`` draw.

    The direction is uniform on the orthogonal complement of ``source`` when
    given, otherwise uniform on the unit sphere of C^dim.
    """
    rng = make_rng(seed)
    sigma = float(sample_rvq_sigma(dim, bits, rng))
    if source is None:
        direction = random_unit_vectors(rng, 1, dim)[0]
    else:
        direction = orthogonal_unit(np.asarray(source, dtype=complex).ravel(), rng)
    return sigma, direction


def quantize_vector_statistical(v: np.ndarray, bits: float, seed: SeedLike) -> QuantizationResult:
    """Draw a quantized vector with the exact RVQ distortion law."""
    rng = make_rng(seed)
    v = np.asarray(v, dtype=complex).ravel()
    v = v / np.linalg.norm(v)
    sigma, err = sample_rvq_distortion(v.size, bits, rng, source=v)
    return QuantizationResult(quantized=np.sqrt(1 - sigma) * v + np.sqrt(sigma) * err, sigma=sigma, error_direction=err)


class VectorQuantizer:
    """Quantizer policy shared by the feedback-topology simulations.

    Budgets up to ``explicit_cap`` bits use fixed nested codebooks derived
    from ``codebook_seed`` (the B-bit codebook is a prefix of the (B+1)-bit
    one); larger budgets use the statistical sampler. ``bits=None`` (or
    infinity) bypasses quantization.
    """

    def __init__(self, codebook_seed: int = 0, explicit_cap: int = 16):
        if explicit_cap > MAX_EXPLICIT_BITS:
            raise ConfigError(f"explicit_cap may not exceed {MAX_EXPLICIT_BITS}")
        self.codebook_seed = int(codebook_seed)
        self.explicit_cap = int(explicit_cap)

    def __repr__(self) -> str:
        return f"VectorQuantizer(codebook_seed={self.codebook_seed}, explicit_cap={self.explicit_cap})"

    def codebook(self, dim: int, bits: int) -> Codebook:
        return nested_codebook(dim, bits, self.codebook_seed)

    def quantize(self, v: np.ndarray, bits, rng: np.random.Generator) -> QuantizationResult:
        v = np.asarray(v, dtype=complex).ravel()
        v = v / np.linalg.norm(v)
        if bits is None or math.isinf(bits):
            return QuantizationResult(quantized=v, sigma=0.0, error_direction=np.zeros_like(v))
        if float(bits).is_integer() and bits <= self.explicit_cap:
            return quantize_vector(v, self.codebook(v.size, int(bits)))
        return quantize_vector_statistical(v, bits, rng)


def quantize_channel_matrix(
    H: np.ndarray,
    B_M,
    seed: SeedLike,
    quantizer: Optional[VectorQuantizer] = None,
    codebook: Optional[Codebook] = None,
):
    """Quantize the direction of ``vec(H)`` in dimension M^2 and restore the norm.

    Returns ``(H_hat, sigma_M)``; ``H_hat`` has the Frobenius norm of ``H``.
    An explicit ``codebook`` overrides the quantizer policy.
    """
    H = np.asarray(H, dtype=complex)
    norm = np.linalg.norm(H)
    if norm == 0:
        raise ConfigError("cannot quantize the zero matrix")
    if codebook is not None:
        res = quantize_vector(H.reshape(-1) / norm, codebook)
        return norm * res.quantized.reshape(H.shape), res.sigma
    quantizer = quantizer or VectorQuantizer()
    res = quantizer.quantize(H.reshape(-1) / norm, B_M, make_rng(seed))
    return norm * res.quantized.reshape(H.shape), res.sigma
