"""Portable counter-based pseudo-random generator.

All stochastic behaviour in this package (synthetic sweeps, k-means++
seeding, minibatch shuffling, weight init) flows through this generator so
that results are bit-identical across runs and reimplementable in any
language from the recurrence below.

Stream definition, all arithmetic mod 2**64:

    GAMMA = 0x9E3779B97F4A7C15
    u_i   = mix64(seed + (i + 1) * GAMMA)          for i = 0, 1, 2, ...

    mix64(z):                                      (splitmix64 finaliser)
        z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
        z ^= z >> 27;  z *= 0x94D049BB133111EB
        z ^= z >> 31
        return z

This is splitmix64 with the state written in closed form, which makes the
stream random-access and trivially vectorisable.  Derived quantities:

    float64 in [0, 1):   (u >> 11) * 2**-53
    integer in [0, n):   ((u >> 32) * n) >> 32        (requires n < 2**32)
    normals:             Box-Muller on consecutive pairs, with
                         u1 = ((a >> 11) + 1) * 2**-53  in (0, 1]
                         z0 = sqrt(-2 ln u1) cos(2 pi u2)
                         z1 = sqrt(-2 ln u1) sin(2 pi u2)

Integer outputs are exactly reproducible everywhere.  Float outputs are
reproducible on any IEEE-754 double platform up to the quality of libm's
log/cos/sin (add/mul/div/sqrt are exact by the standard).

Child streams: derive_seed(seed, *salts) folds each salt into the seed with
mix64(seed ^ (salt * GAMMA)), giving independent substreams for e.g. one
sweep, one training round, or one k-means init.
"""

from __future__ import annotations

import numpy as np

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1

_INV_2_53 = float(2.0**-53)


def mix64(z: int) -> int:
    """splitmix64 finaliser on a Python int (exact 64-bit semantics)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    z = (z ^ (z >> 31)) & _MASK
    return z


def derive_seed(seed: int, *salts: int) -> int:
    """Fold salts into a seed to name an independent child stream."""
    s = seed & _MASK
    for salt in salts:
        s = mix64(s ^ ((salt * _GAMMA) & _MASK))
    return s


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_MIX1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_MIX2)
    z = z ^ (z >> np.uint64(31))
    return z


class PortableRng:
    """Sequential view over the counter-based stream defined above."""

    def __init__(self, seed: int):
        self._seed = np.uint64(seed & _MASK)
        self._counter = 0

    @property
    def seed(self) -> int:
        return int(self._seed)

    def spawn(self, salt: int) -> "PortableRng":
        """Independent child generator; does not advance this stream."""
        return PortableRng(derive_seed(int(self._seed), salt))

    def u64(self, n: int) -> np.ndarray:
        """Next n raw 64-bit outputs."""
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        return _mix64_array(self._seed + idx * np.uint64(_GAMMA))

    def uniform(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """n float64 values in [low, high)."""
        base = (self.u64(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        return base * (high - low) + low

    def integers(self, n: int, low: int, high: int) -> np.ndarray:
        """n int64 values in [low, high); span must be below 2**32."""
        span = high - low
        if not 0 < span < (1 << 32):
            raise ValueError(f"integer span must be in [1, 2**32), got {span}")
        top = self.u64(n) >> np.uint64(32)
        return (((top * np.uint64(span)) >> np.uint64(32)).astype(np.int64)) + low

    def normal(self, n: int, mu: float = 0.0, sigma: float = 1.0) -> np.ndarray:
        """n float64 normal deviates via Box-Muller on consecutive pairs."""
        pairs = (n + 1) // 2
        raw = self.u64(2 * pairs)
        u1 = ((raw[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
        u2 = (raw[1::2] >> np.uint64(11)).astype(np.float64) * _INV_2_53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * np.pi) * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n] * sigma + mu

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        perm = np.arange(n, dtype=np.int64)
        if n < 2:
            return perm
        draws = self.u64(n - 1)
        for i in range(n - 1, 0, -1):
            j = int((int(draws[n - 1 - i]) * (i + 1)) >> 64)
            perm[i], perm[j] = perm[j], perm[i]
        return perm
