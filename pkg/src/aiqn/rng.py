"""Counter-based splittable random number generation.

Every output word is a hash of (key, counter), so a stream's value at any
position depends only on (seed, position) and never on evaluation history.
Child streams created with split() are keyed by (seed, child index) alone,
which keeps parallel work reproducible regardless of scheduling order.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)
# Distinct increment for deriving child keys, so split streams never
# alias the parent's output sequence.
_SPLIT_SALT = np.uint64(0x6A09E667F3BCC909)

_INV_2_53 = 1.0 / float(1 << 53)


def _finalize(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    z = (z ^ (z >> np.uint64(30))) * _MIX_A
    z = (z ^ (z >> np.uint64(27))) * _MIX_B
    return z ^ (z >> np.uint64(31))


class Rng:
    """Deterministic stream of uniforms and normals.

    Single-owner mutable: the stream position advances with every draw.
    Use split() to hand independent streams to parallel consumers.
    """

    def __init__(self, seed: int, _key: int | None = None):
        self.seed = int(seed) & _MASK64
        self._key = np.uint64(self.seed if _key is None else _key)
        self.position = 0

    def _words(self, n: int) -> np.ndarray:
        counters = np.arange(self.position + 1, self.position + n + 1, dtype=np.uint64)
        self.position += n
        with np.errstate(over="ignore"):
            return _finalize(self._key + counters * _GOLDEN)

    def uniforms(self, shape) -> np.ndarray:
        """i.i.d. draws in [0, 1) with full 53-bit mantissas."""
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        words = self._words(n)
        return ((words >> np.uint64(11)).astype(np.float64) * _INV_2_53).reshape(shape)

    def uniform(self) -> float:
        return float(self.uniforms(()))

    def normals(self, shape) -> np.ndarray:
        """i.i.d. standard normals via Box-Muller.

        Each output consumes exactly two uniform draws (the cosine branch),
        so the stream position advances by a fixed, data-independent amount.
        """
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        u = self.uniforms((n, 2))
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        z = r * np.cos(2.0 * np.pi * u[:, 1])
        return z.reshape(shape)

    def normal(self) -> float:
        return float(self.normals(()))

    def integers(self, n: int, upper: int) -> np.ndarray:
        """n draws uniform over {0, ..., upper-1} (floor of a uniform scale)."""
        if upper < 1:
            raise DomainError(f"integers() needs upper >= 1, got {upper}")
        return np.minimum((self.uniforms(n) * upper).astype(np.int64), upper - 1)

    def split(self, k: int) -> list["Rng"]:
        """k independent child streams, reproducible from (seed, index).

        Splitting does not consume from or depend on this stream's position.
        """
        if k < 1:
            raise DomainError(f"split() needs k >= 1, got {k}")
        idx = np.arange(1, k + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            keys = _finalize((self._key ^ _SPLIT_SALT) + idx * _GOLDEN)
        return [Rng(self.seed, _key=int(key)) for key in keys]
