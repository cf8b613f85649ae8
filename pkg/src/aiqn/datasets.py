"""Dataset generators for the benchmark tasks.

The bars task is an 8x8 single-channel image family built for inpainting
diagnostics: the top half fixes a vertical bar in one of columns 0-3, and
the bottom half places a bar at one of exactly two equally likely columns
determined by the top one, so every prefix has two known completion modes.
"""

from __future__ import annotations

import numpy as np

from .distributions import AnalyticDist
from .errors import DomainError
from .rng import Rng

BARS_SIDE = 8
BARS_DIM = BARS_SIDE * BARS_SIDE
BARS_BG = 0.1
BARS_FG = 0.9
BARS_NOISE = 0.05
_TOP_COLUMNS = 4


def gen_scalar(dist: AnalyticDist, count: int, rng: Rng) -> np.ndarray:
    """[count, 1] draws from an analytic distribution."""
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    return dist.sample(rng, count).reshape(count, 1)


def gen_gaussian2d(rho: float, count: int, rng: Rng) -> np.ndarray:
    """Standard bivariate Gaussian with correlation rho."""
    if not -1.0 < rho < 1.0:
        raise DomainError(f"correlation must lie in (-1, 1), got {rho}")
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    z = rng.normals((count, 2))
    x = np.empty_like(z)
    x[:, 0] = z[:, 0]
    x[:, 1] = rho * z[:, 0] + np.sqrt(1.0 - rho * rho) * z[:, 1]
    return x


def bar_bottom_columns(top_column: int) -> tuple[int, int]:
    """The two ground-truth bottom-bar columns for a given top column."""
    if not 0 <= top_column < _TOP_COLUMNS:
        raise DomainError(f"top column must lie in 0..{_TOP_COLUMNS - 1}, got {top_column}")
    return top_column, top_column + 4


def bars_clean_image(top_column: int, bottom_column: int) -> np.ndarray:
    """Noise-free bars image as a flat [64] vector."""
    img = np.full((BARS_SIDE, BARS_SIDE), BARS_BG)
    img[0:4, top_column] = BARS_FG
    img[4:8, bottom_column] = BARS_FG
    return img.ravel()


def bars_modes(top_column: int) -> np.ndarray:
    """[2, 32] noise-free bottom halves for the two completion modes."""
    return np.stack([bars_clean_image(top_column, c)[BARS_DIM // 2:]
                     for c in bar_bottom_columns(top_column)])


def gen_bars(count: int, rng: Rng) -> np.ndarray:
    """[count, 64] noisy bars images; pixel values stay inside [0, 1]."""
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    out = np.empty((count, BARS_DIM))
    for i in range(count):
        top = int(rng.integers(1, _TOP_COLUMNS)[0])
        choices = bar_bottom_columns(top)
        bottom = choices[int(rng.uniform() < 0.5)]
        noise = (rng.uniforms(BARS_DIM) * 2.0 - 1.0) * BARS_NOISE
        out[i] = bars_clean_image(top, bottom) + noise
    return out


def nearest_mode(bottom_half: np.ndarray, modes: np.ndarray) -> int:
    """Index of the Euclidean-nearest mode; ties go to the lowest index."""
    dists = np.linalg.norm(modes - bottom_half[None, :], axis=1)
    return int(np.argmin(dists))
