"""System configuration, random channel generation and seeded RNG streams.

The downlink has a single base station with ``M`` transmit antennas serving
``K`` users.  User ``k`` has ``N_k`` receive antennas and gets ``L_k`` data
streams.  Channels are block-flat i.i.d. Rayleigh: every entry of ``H_k``
(shape ``M x N_k``, so the downlink channel seen by the user is ``H_k^H``)
is a zero-mean, unit-variance circularly-symmetric complex Gaussian.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

__all__ = [
    "SystemConfig",
    "ChannelRealization",
    "SeededRng",
    "build_system_config",
    "draw_channel",
]


@dataclass(frozen=True)
class SystemConfig:
    """Validated antenna/stream bookkeeping for one downlink scenario.

    Use :func:`build_system_config` instead of constructing directly; it
    performs the resolvability checks.
    """

    M: int
    K: int
    N_per_user: tuple
    L_per_user: tuple
    B: int
    P_max: float
    sigma2: float

    @property
    def L(self):
        """Total number of data streams."""
        return sum(self.L_per_user)

    @property
    def N(self):
        """Total number of receive antennas."""
        return sum(self.N_per_user)

    @property
    def stream_user(self):
        """Tuple mapping global stream index -> owning user index."""
        return tuple(k for k in range(self.K) for _ in range(self.L_per_user[k]))

    @property
    def stream_within_user(self):
        """Tuple mapping global stream index -> 1-based index inside its user."""
        return tuple(i + 1 for k in range(self.K) for i in range(self.L_per_user[k]))

    def user_stream_slice(self, k):
        """Slice of global stream indices owned by user ``k``."""
        start = sum(self.L_per_user[:k])
        return slice(start, start + self.L_per_user[k])


@dataclass(frozen=True)
class ChannelRealization:
    """One block-fading realization: per-user ``H_k`` and the stacked ``H``."""

    per_user: tuple  # tuple of (M, N_k) complex arrays

    @property
    def H(self):
        """Stacked ``M x N`` channel ``[H_1 ... H_K]``."""
        return np.concatenate(self.per_user, axis=1)

    def user(self, k):
        return self.per_user[k]


class SeededRng:
    """Deterministic random stream: same seed gives a bit-identical sequence.

    ``seed`` may be an int or a tuple of ints; tuples are hashed through
    ``numpy.random.SeedSequence`` so per-trial streams derived from
    ``(base_seed, trial_index)`` are reproducible and order-independent.
    """

    def __init__(self, seed):
        self.seed = seed
        entropy = seed if isinstance(seed, (tuple, list)) else (int(seed),)
        self.generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    @classmethod
    def for_trial(cls, base_seed, trial_index):
        """RNG for one Monte Carlo trial, independent of evaluation order."""
        return cls((int(base_seed), int(trial_index)))

    def complex_gaussian(self, shape):
        """i.i.d. CN(0, 1) samples: unit variance split between re/im parts."""
        g = self.generator
        return (g.standard_normal(shape) + 1j * g.standard_normal(shape)) / np.sqrt(2.0)

    def unit_directions(self, count, dim):
        """``count`` independent uniform unit-norm complex ``dim``-vectors."""
        v = self.complex_gaussian((count, dim))
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    def bits(self, shape):
        return self.generator.integers(0, 2, size=shape, dtype=np.int8)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)


def build_system_config(M, K, N_list, L_list, B, P_max=1.0, sigma2=1.0):
    """Validate and assemble a :class:`SystemConfig`.

    Raises :class:`DimensionError` when the configuration is unresolvable
    (``L > M`` or ``L_k > N_k``) or any count/power is out of range.
    """
    N_list = tuple(int(n) for n in N_list)
    L_list = tuple(int(l) for l in L_list)
    if len(N_list) != K or len(L_list) != K:
        raise DimensionError(
            f"need {K} per-user antenna/stream counts, got {len(N_list)}/{len(L_list)}"
        )
    if M < 1 or K < 1:
        raise DimensionError("M and K must be at least 1")
    if any(n < 1 for n in N_list) or any(l < 1 for l in L_list):
        raise DimensionError("every N_k and L_k must be at least 1")
    for k, (n, l) in enumerate(zip(N_list, L_list)):
        if l > n:
            raise DimensionError(f"user {k}: L_k={l} exceeds N_k={n}")
    L = sum(L_list)
    if L > M:
        raise DimensionError(f"total streams L={L} exceeds transmit antennas M={M}")
    if B < 0:
        raise DimensionError("feedback bits B must be non-negative")
    if P_max <= 0 or sigma2 <= 0:
        raise DimensionError("P_max and sigma2 must be positive")
    return SystemConfig(int(M), int(K), N_list, L_list, int(B), float(P_max), float(sigma2))


def draw_channel(config, rng):
    """Draw a fresh i.i.d. CN(0, 1) channel realization for every user."""
    per_user = tuple(
        rng.complex_gaussian((config.M, n_k)) for n_k in config.N_per_user
    )
    return ChannelRealization(per_user)
