"""Region blending, residual stabilization, and tail-noise reinitialization.

blend_region swaps conditioned content into the masked region of a latent;
gamma_residual adds a small global Gaussian residual that keeps the edited
latent from settling into an off-manifold fixed point; reinit_tail_noise
builds the noise for a freshly appended queue tail by keeping the low
spatial frequencies of the most recent output (re-noised to the terminal
level) and replacing the rest with fresh noise.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .core import NoiseSchedule, RandomSource, check_latent, forward_diffuse
from .errors import ParameterError


@dataclasses.dataclass(frozen=True)
class BlendParams:
    """Conditioning strength; the in-mask interpolation weight is
    min(1, strength / 2) so the default strength 2.0 is pure replacement.

    weight_override pins the weight directly (tests, ablations)."""

    strength: float = 2.0
    weight_override: float | None = None

    def __post_init__(self):
        if self.strength < 0.0:
            raise ParameterError(f"strength must be >= 0, got {self.strength}")
        if self.weight_override is not None and not (0.0 <= self.weight_override <= 1.0):
            raise ParameterError(f"weight_override must lie in [0, 1], got {self.weight_override}")

    @property
    def weight(self) -> float:
        if self.weight_override is not None:
            return self.weight_override
        return min(1.0, self.strength / 2.0)


@dataclasses.dataclass(frozen=True)
class ResidualParams:
    """Scale of the global Gaussian residual added after a blend."""

    gamma: float = 0.05

    def __post_init__(self):
        if self.gamma < 0.0:
            raise ParameterError(f"gamma must be >= 0, got {self.gamma}")


def blend_region(x_t: np.ndarray, x_cond_t: np.ndarray, m: np.ndarray, p: BlendParams) -> np.ndarray:
    """Interpolate conditioned content into the masked region.

    Outside the mask the input passes through bit-identically; inside, the
    output is (1-w) * x_t + w * x_cond_t with w = p.weight.
    """
    x_t = check_latent(x_t, "x_t")
    x_cond_t = check_latent(x_cond_t, "x_cond_t")
    if x_cond_t.shape != x_t.shape:
        raise ParameterError(f"conditioned latent shape {x_cond_t.shape} does not match {x_t.shape}")
    m = np.asarray(m)
    if m.shape != x_t.shape[1:]:
        raise ParameterError(f"mask shape {m.shape} does not match latent grid {x_t.shape[1:]}")
    m = m.astype(bool)
    w = p.weight
    if w == 0.0:
        return x_t.copy()
    inner = x_cond_t if w == 1.0 else (1.0 - w) * x_t + w * x_cond_t
    return np.where(m[None], inner, x_t)


def gamma_residual(x_mix: np.ndarray, p: ResidualParams, rng: RandomSource) -> np.ndarray:
    """Add gamma-scaled Gaussian noise over the whole latent (no mask)."""
    x_mix = check_latent(x_mix, "x_mix")
    if p.gamma == 0.0:
        return x_mix.copy()
    return x_mix + p.gamma * rng.normal(x_mix.shape)


def lowpass_mask(h: int, w: int, cutoff: float) -> np.ndarray:
    """Ideal square low-pass over unshifted FFT indices.

    Keeps frequencies with max(|u|, |v|) <= cutoff * min(h, w); cutoff 0.5
    therefore covers every frequency of an even square grid, and cutoff 0
    is the empty mask by convention.
    """
    if not (0.0 <= cutoff <= 0.5):
        raise ParameterError(f"cutoff must lie in [0, 0.5], got {cutoff}")
    if h < 1 or w < 1:
        raise ParameterError("mask dimensions must be >= 1")
    if cutoff == 0.0:
        return np.zeros((h, w))
    radius = cutoff * min(h, w)
    fu = np.abs(np.fft.fftfreq(h) * h)
    fv = np.abs(np.fft.fftfreq(w) * w)
    keep = (fu[:, None] <= radius) & (fv[None, :] <= radius)
    return keep.astype(np.float64)


def reinit_tail_noise(
    x_recent: np.ndarray, s: NoiseSchedule, cutoff: float, rng: RandomSource
) -> np.ndarray:
    """Terminal-level noise that carries the recent frame's low frequencies.

    Draw order is fixed: first the forward-diffusion noise for x_recent,
    then the fresh replacement noise.  cutoff 0 returns the fresh noise
    untouched; the general path splits each channel's 2-d spectrum with an
    ideal low-pass and recombines.
    """
    x_recent = check_latent(x_recent, "x_recent")
    _, h, w = x_recent.shape
    mask = lowpass_mask(h, w, cutoff)
    diffused = forward_diffuse(x_recent, s.T, s, rng)
    fresh = rng.normal(x_recent.shape)
    if not mask.any():
        return fresh
    spectrum = mask[None] * np.fft.fft2(diffused) + (1.0 - mask)[None] * np.fft.fft2(fresh)
    return np.fft.ifft2(spectrum).real
