"""Analytic denoisers and synthetic scenes for closed-loop verification.

The oracle denoiser inverts the forward noising identity for a known clean
latent, so every sampler contract can be checked end to end without a
learned model.  Scenes are simple moving shapes with exact ground-truth
masks; the patch embedding proxy stands in for a visual encoder.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .core import LatentSequence, NoiseSchedule, check_latent
from .errors import DomainError, ParameterError
from .tracking import MaskTrack


@dataclasses.dataclass(frozen=True)
class OracleSpec:
    """Target for the analytic denoiser: one latent, or one per frame."""

    x0_star: np.ndarray | None = None
    frames: np.ndarray | None = None  # (F, C, H, W)

    def __post_init__(self):
        if (self.x0_star is None) == (self.frames is None):
            raise ParameterError("provide exactly one of x0_star or frames")
        if self.x0_star is not None:
            object.__setattr__(self, "x0_star", check_latent(self.x0_star, "x0_star"))
        else:
            object.__setattr__(self, "frames", LatentSequence(self.frames).data)


class _Oracle:
    """predict_eps(x, t) = (x - sqrt(ab_t) x0*) / sqrt(1 - ab_t)."""

    def __init__(self, x0_star: np.ndarray, s: NoiseSchedule):
        self.x0_star = x0_star
        self.s = s

    def predict_eps(self, x_t: np.ndarray, t: int) -> np.ndarray:
        if not (0 <= t <= self.s.T):
            raise ParameterError(f"t must lie in [0, {self.s.T}], got {t}")
        ab = self.s.alpha_bar[t]
        if ab == 1.0:
            raise DomainError("oracle eps is undefined at t=0 (zero noise floor)")
        return (x_t - np.sqrt(ab) * self.x0_star) / np.sqrt(1.0 - ab)


class _SequenceOracle(_Oracle):
    """Frame-indexed oracle bank; defaults to frame 0, for_frame(k) selects.

    Frame indices past the end clamp to the last target so open-ended
    generation keeps a defined pull.
    """

    def __init__(self, frames: np.ndarray, s: NoiseSchedule):
        super().__init__(frames[0], s)
        self.frames = frames

    def for_frame(self, k: int) -> _Oracle:
        if k < 0:
            raise ParameterError(f"frame index must be >= 0, got {k}")
        return _Oracle(self.frames[min(k, len(self.frames) - 1)], self.s)


def oracle_denoiser(spec: OracleSpec, s: NoiseSchedule):
    """Build the analytic denoiser for a known target."""
    if spec.x0_star is not None:
        return _Oracle(spec.x0_star, s)
    return _SequenceOracle(spec.frames, s)


def moving_square_scene(
    frames: int,
    grid: int,
    square: int,
    velocity: tuple[int, int],
    channels: int = 4,
    value: float = 1.0,
) -> tuple[LatentSequence, MaskTrack]:
    """Square of constant value drifting over a zero background.

    velocity is (dx, dy) in pixels per frame (dx = columns, dy = rows); the
    square clamps at the borders instead of leaving the grid.  Returns the
    latent sequence and the exact per-frame masks as a fully linked track.
    """
    if frames < 1 or grid < 1 or channels < 1:
        raise ParameterError("frames, grid, and channels must be >= 1")
    if not (1 <= square <= grid):
        raise ParameterError(f"square side must lie in [1, {grid}], got {square}")
    dx, dy = int(velocity[0]), int(velocity[1])
    hi = grid - square
    data = np.zeros((frames, channels, grid, grid))
    masks = np.zeros((frames, grid, grid), dtype=bool)
    for k in range(frames):
        col = min(max(k * dx, 0), hi)
        row = min(max(k * dy, 0), hi)
        masks[k, row : row + square, col : col + square] = True
        data[k, :, row : row + square, col : col + square] = value
    track = MaskTrack(masks=masks, linked=(True,) * frames, tau=0.0)
    return LatentSequence(data), track


def checkerboard_frame(grid: int, channels: int = 4, hi: float = 1.0, lo: float = -1.0) -> np.ndarray:
    """Unit-cell checkerboard, identical across channels; a cheap pattern
    that is far from any moving-square scene in the proxy embedding space."""
    if grid < 1 or channels < 1:
        raise ParameterError("grid and channels must be >= 1")
    rows, cols = np.indices((grid, grid))
    board = np.where((rows + cols) % 2 == 0, hi, lo)
    return np.broadcast_to(board, (channels, grid, grid)).astype(np.float64).copy()


def patch_embedding_proxy(frame: np.ndarray, patches: int) -> np.ndarray:
    """Unit-normalized vector of per-patch channel means, length patches**2."""
    frame = check_latent(frame, "frame")
    _, h, w = frame.shape
    if patches < 1:
        raise ParameterError(f"patches must be >= 1, got {patches}")
    if h % patches or w % patches:
        raise ParameterError(f"patches={patches} must divide frame size {h}x{w}")
    ph, pw = h // patches, w // patches
    pooled = frame.mean(axis=0).reshape(patches, ph, patches, pw).mean(axis=(1, 3))
    vec = pooled.ravel()
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise ParameterError("frame pools to the zero vector; proxy embedding is undefined")
    return vec / norm
