"""Scenario configuration and seeded channel / geometry generation.

Indices are zero-based throughout the package: user ``k`` in code is user
``k + 1`` in the usual 1..K notation. ``H[k, j]`` is the channel from
transmitter ``j`` to receiver ``k``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Union

import numpy as np

from .errors import ChannelGenerationError, ConfigError

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]

#: Redraw any fading matrix whose 2-norm condition number exceeds this.
COND_CAP = 1e6
MAX_REDRAWS = 100


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Return a PCG64 generator for ``seed`` (passes generators through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def derived_rng(base_seed: int, *key: int) -> np.random.Generator:
    """Independent stream addressed by ``(base_seed, key...)``.

    Streams depend only on the key, never on call order, so trials can be
    evaluated in any order or process and still draw identical numbers.
    """
    ss = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(x) for x in key))
    return np.random.Generator(np.random.PCG64(ss))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. CN(0, 1) samples: real and imaginary parts each of variance 1/2."""
    z = rng.standard_normal(size=(2,) + tuple(np.atleast_1d(shape)))
    return (z[0] + 1j * z[1]) / math.sqrt(2.0)


@dataclass(frozen=True)
class NetworkConfig:
    """One K-user MIMO interference channel scenario.

    Parameters
    ----------
    K : int
        Number of transmitter/receiver pairs (at least 4).
    M : int
        Antennas per node; must equal ``(K - 1) * d``.
    d : int
        Streams per user.
    alpha : float
        Path-loss exponent.
    P : float
        Linear transmit power; noise has unit variance.
    distances : ndarray, shape (K, K)
        ``distances[k, j]`` is the receiver-k / transmitter-j distance,
        normalized so the diagonal is 1.
    """

    K: int
    M: int
    d: int = 1
    alpha: float = 3.5
    P: float = 1.0
    distances: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.K < 4:
            raise ConfigError(f"K must be at least 4, got {self.K}")
        if self.d < 1:
            raise ConfigError(f"d must be at least 1, got {self.d}")
        if self.M != (self.K - 1) * self.d:
            raise ConfigError(f"M must equal (K-1)*d = {(self.K - 1) * self.d}, got {self.M}")
        if not self.P > 0:
            raise ConfigError(f"P must be positive, got {self.P}")
        dist = np.ones((self.K, self.K)) if self.distances is None else np.array(self.distances, dtype=float)
        if dist.shape != (self.K, self.K):
            raise ConfigError(f"distances must be {self.K}x{self.K}, got {dist.shape}")
        if np.any(dist <= 0):
            raise ConfigError("all distances must be positive")
        if not np.allclose(np.diag(dist), 1.0):
            raise ConfigError("diagonal distances must be normalized to 1")
        dist.setflags(write=False)
        object.__setattr__(self, "distances", dist)

    @classmethod
    def from_snr_db(cls, K: int, M: int, snr_db: float, **kwargs) -> "NetworkConfig":
        return cls(K=K, M=M, P=10.0 ** (snr_db / 10.0), **kwargs)

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.P)

    def path_gain(self) -> np.ndarray:
        """Matrix of large-scale power gains ``d_kj ** -alpha``."""
        return self.distances ** (-self.alpha)

    def with_power(self, P: float) -> "NetworkConfig":
        return NetworkConfig(self.K, self.M, self.d, self.alpha, P, self.distances)

    def with_distances(self, distances: np.ndarray) -> "NetworkConfig":
        return NetworkConfig(self.K, self.M, self.d, self.alpha, self.P, distances)


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of all K x K fading matrices; ``H[k, j]`` is M x M."""

    H: np.ndarray
    redraws: int = 0

    @property
    def K(self) -> int:
        return self.H.shape[0]

    @property
    def M(self) -> int:
        return self.H.shape[2]


def generate_channels(
    config: NetworkConfig,
    seed: SeedLike,
    cond_cap: float = COND_CAP,
    max_redraws: int = MAX_REDRAWS,
) -> ChannelRealization:
    """Draw i.i.d. CN(0, 1) fading for every link.

    Matrices whose condition number exceeds ``cond_cap`` are redrawn in
    place; the number of redraws is recorded on the result.
    """
    rng = make_rng(seed)
    K, M = config.K, config.M
    H = complex_normal(rng, (K, K, M, M))
    redraws = 0
    bad = np.linalg.cond(H) > cond_cap
    while np.any(bad):
        if redraws >= max_redraws:
            raise ChannelGenerationError(f"condition cap {cond_cap:g} still violated after {redraws} redraws")
        for k, j in zip(*np.nonzero(bad)):
            H[k, j] = complex_normal(rng, (M, M))
            redraws += 1
        bad = np.linalg.cond(H) > cond_cap
    H.setflags(write=False)
    return ChannelRealization(H=H, redraws=redraws)


def effective_channel(config: NetworkConfig, realization: ChannelRealization, k: int, j: int) -> np.ndarray:
    """Channel from transmitter ``j`` to receiver ``k`` including path loss."""
    K = config.K
    if not (0 <= k < K and 0 <= j < K):
        raise IndexError(f"link ({k}, {j}) out of range for K={K}")
    return config.distances[k, j] ** (-config.alpha / 2.0) * realization.H[k, j]


def sample_distance_ratios(K: int, low: float, high: float, seed: SeedLike) -> np.ndarray:
    """Off-diagonal distance ratios i.i.d. Uniform[low, high]; unit diagonal."""
    if low > high:
        raise ConfigError(f"low ({low}) must not exceed high ({high})")
    if low < 1:
        raise ConfigError(f"distance ratios start at 1, got low={low}")
    rng = make_rng(seed)
    dist = rng.uniform(low, high, size=(K, K)) if high > low else np.full((K, K), float(low))
    np.fill_diagonal(dist, 1.0)
    return dist


# -- configuration files ---------------------------------------------------

CONFIG_KEYS = ("K", "M", "d", "alpha", "P_dB", "distance_mode", "ratio_low", "ratio_high", "seed")
DISTANCE_MODES = ("fixed_ratio", "uniform_ratio")


@dataclass(frozen=True)
class ScenarioFile:
    """Contents of a scenario configuration file."""

    K: int = 4
    M: int = 3
    d: int = 1
    alpha: float = 3.5
    P_dB: float = 30.0
    distance_mode: str = "uniform_ratio"
    ratio_low: float = 1.0
    ratio_high: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.distance_mode not in DISTANCE_MODES:
            raise ConfigError(f"distance_mode must be one of {DISTANCE_MODES}, got {self.distance_mode!r}")
        if self.ratio_low > self.ratio_high:
            raise ConfigError("ratio_low must not exceed ratio_high")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ScenarioFile":
        unknown = set(data) - set(CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**dict(data))

    def to_mapping(self) -> dict:
        return {key: getattr(self, key) for key in CONFIG_KEYS}

    def distances(self, seed: SeedLike = None) -> np.ndarray:
        if self.distance_mode == "fixed_ratio":
            return sample_distance_ratios(self.K, self.ratio_low, self.ratio_low, None)
        return sample_distance_ratios(self.K, self.ratio_low, self.ratio_high, self.seed if seed is None else seed)

    def network_config(self, seed: SeedLike = None) -> NetworkConfig:
        return NetworkConfig.from_snr_db(
            self.K, self.M, self.P_dB, d=self.d, alpha=self.alpha, distances=self.distances(seed)
        )


def load_scenario(path: Union[str, Path]) -> ScenarioFile:
    """Read a scenario from YAML (``.yaml``/``.yml``) or JSON."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml

        data = yaml.safe_load(text) or {}
    else:
        data = json.loads(text)
    return ScenarioFile.from_mapping(data)


def save_scenario(scenario: ScenarioFile, path: Union[str, Path]) -> None:
    path = Path(path)
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml

        path.write_text(yaml.safe_dump(scenario.to_mapping(), sort_keys=False))
    else:
        path.write_text(json.dumps(scenario.to_mapping(), indent=2) + "\n")
