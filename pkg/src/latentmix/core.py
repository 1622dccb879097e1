"""Latent containers, noise schedules, and the seeded random source.

Latent frames are plain float64 arrays of shape (C, H, W); sequences stack
them into (F, C, H, W).  All stochastic code draws from RandomSource so that
a run is a pure function of its seed.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import ParameterError

SCHEDULE_KINDS = ("linear", "scaled_linear")

# scaled_linear over 1000 steps with this beta range is the common latent
# diffusion operating point; used as the config default.
DEFAULT_T = 1000
DEFAULT_BETA_START = 0.00085
DEFAULT_BETA_END = 0.012


def check_latent(x, name: str = "latent") -> np.ndarray:
    """Coerce to a float64 (C, H, W) array and validate finiteness."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or min(x.shape) < 1:
        raise ParameterError(f"{name} must be a nonempty (C, H, W) array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ParameterError(f"{name} contains non-finite values")
    return x


@dataclasses.dataclass(frozen=True)
class LatentSequence:
    """Ordered stack of latent frames, shape (F, C, H, W)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 4 or min(data.shape) < 1:
            raise ParameterError(f"sequence must be a nonempty (F, C, H, W) array, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ParameterError("sequence contains non-finite values")
        object.__setattr__(self, "data", data)

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def frame_shape(self) -> tuple[int, int, int]:
        return self.data.shape[1:]

    def frame(self, i: int) -> np.ndarray:
        return self.data[i]

    @classmethod
    def from_frames(cls, frames) -> "LatentSequence":
        return cls(np.stack([check_latent(f) for f in frames]))


@dataclasses.dataclass(frozen=True)
class NoiseSchedule:
    """Variance schedule: beta[t-1] for t=1..T, alpha_bar[t] for t=0..T.

    alpha_bar is the cumulative product of (1 - beta); alpha_bar[0] == 1 and
    the sequence is strictly decreasing.
    """

    T: int
    beta: np.ndarray
    alpha_bar: np.ndarray
    kind: str

    def __post_init__(self):
        if self.T < 1:
            raise ParameterError(f"T must be >= 1, got {self.T}")
        beta = np.asarray(self.beta, dtype=np.float64)
        ab = np.asarray(self.alpha_bar, dtype=np.float64)
        if beta.shape != (self.T,) or ab.shape != (self.T + 1,):
            raise ParameterError("schedule arrays do not match T")
        if np.any(beta <= 0.0) or np.any(beta >= 1.0):
            raise ParameterError("beta values must lie in (0, 1)")
        if ab[0] != 1.0:
            raise ParameterError("alpha_bar[0] must be 1")
        if np.any(np.diff(ab) >= 0.0):
            raise ParameterError("alpha_bar must be strictly decreasing")
        # consistency: alpha_bar[t] / alpha_bar[t-1] == 1 - beta[t]
        ratio = ab[1:] / ab[:-1]
        if np.max(np.abs(ratio - (1.0 - beta))) > 1e-12:
            raise ParameterError("alpha_bar inconsistent with beta")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha_bar", ab)


def make_schedule(
    T: int = DEFAULT_T,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
    kind: str = "scaled_linear",
) -> NoiseSchedule:
    """Build a NoiseSchedule.

    kind "linear" interpolates beta directly; "scaled_linear" interpolates
    in sqrt(beta) space and squares, which front-loads smaller betas.
    """
    if not isinstance(T, (int, np.integer)) or T < 1:
        raise ParameterError(f"T must be a positive integer, got {T!r}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ParameterError(f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})")
    if kind not in SCHEDULE_KINDS:
        raise ParameterError(f"unknown schedule kind {kind!r}")
    if kind == "linear":
        beta = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    else:
        beta = np.linspace(beta_start**0.5, beta_end**0.5, T, dtype=np.float64) ** 2
    alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - beta)])
    return NoiseSchedule(T=int(T), beta=beta, alpha_bar=alpha_bar, kind=kind)


class RandomSource:
    """Deterministic, splittable random stream.

    Backed by numpy's PCG64 generator; normals come from numpy's ziggurat
    implementation, which is stream-stable for a fixed numpy release.  A
    child stream is a pure function of (root seed, spawn path), never of the
    parent's draw position, so streams can be derived in any order.
    """

    def __init__(self, seed: int, _path: tuple = ()):
        if not isinstance(seed, (int, np.integer)) or seed < 0:
            raise ParameterError(f"seed must be a nonnegative integer, got {seed!r}")
        self.seed = int(seed)
        self.path = tuple(int(k) for k in _path)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, *key: int) -> "RandomSource":
        """Derive an independent stream keyed by integers."""
        return RandomSource(self.seed, self.path + key)

    def normal(self, shape) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def uniform(self, shape) -> np.ndarray:
        return self._gen.random(shape)

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, path={self.path})"


def forward_diffuse(x0: np.ndarray, t: int, s: NoiseSchedule, rng: RandomSource) -> np.ndarray:
    """Noise a clean latent to level t: sqrt(ab_t) * x0 + sqrt(1 - ab_t) * eps.

    Always consumes one normal draw of x0's shape, including at t=0 where the
    output equals x0 exactly.
    """
    x0 = check_latent(x0, "x0")
    if not (0 <= t <= s.T):
        raise ParameterError(f"t must lie in [0, {s.T}], got {t}")
    ab = s.alpha_bar[t]
    eps = rng.normal(x0.shape)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps
