"""Deterministic DDIM stepping, momentum-corrected stepping, and inversion.

One reverse step from level t to t_prev:

    x0_hat = (x_t - sqrt(1 - ab_t) * eps_hat) / sqrt(ab_t)
    dir_t  = sqrt(1 - ab_prev - sigma_t^2) * eps_hat
    x_prev = sqrt(ab_prev) * x0_hat + dir_t + sigma_t * noise

with ab the cumulative alpha product and sigma_t the usual eta-scaled
stochastic width.  The momentum variant recomputes the emission from a
corrected x0 estimate: a velocity buffer accumulates the per-step drift
g_t = x_t - x_prev_ddim + lam * dir_t and is folded back in with a weight
kappa that ramps linearly from 0 at t=T to kappa0 at t=0, so the correction
stays inert early and grows as structure settles.
"""

from __future__ import annotations

import dataclasses
from typing import Protocol, runtime_checkable

import numpy as np

from .core import LatentSequence, NoiseSchedule, RandomSource, check_latent
from .errors import NumericError, ParameterError, SingularScheduleError


@runtime_checkable
class Denoiser(Protocol):
    def predict_eps(self, x_t: np.ndarray, t: int) -> np.ndarray: ...


@dataclasses.dataclass(frozen=True)
class StepOutput:
    """Result of one reverse step."""

    x_prev: np.ndarray
    x0_hat: np.ndarray
    dir: np.ndarray
    kappa_used: float = 0.0


@dataclasses.dataclass(frozen=True)
class MomentumState:
    """Velocity buffer and momentum hyperparameters for one trajectory.

    v starts at zeros (so the first corrected step at t=T equals the vanilla
    step); prev_x records the last emitted latent for shape diagnostics.
    """

    v: np.ndarray
    beta: float
    lam: float
    kappa0: float
    T: int
    prev_x: np.ndarray | None = None

    def __post_init__(self):
        if not (0.0 <= self.beta <= 1.0):
            raise ParameterError(f"momentum beta must lie in [0, 1], got {self.beta}")
        if self.kappa0 < 0.0:
            raise ParameterError(f"kappa0 must be >= 0, got {self.kappa0}")
        if self.lam < 0.0:
            raise ParameterError(f"lam must be >= 0, got {self.lam}")
        if self.T < 1:
            raise ParameterError(f"T must be >= 1, got {self.T}")

    @classmethod
    def fresh(cls, shape, T: int, beta: float = 0.9, lam: float = 1.0, kappa0: float = 2.0) -> "MomentumState":
        return cls(v=np.zeros(shape), beta=beta, lam=lam, kappa0=kappa0, T=T)


def kappa_at(t: int, T: int, kappa0: float) -> float:
    """Correction weight kappa0 * (1 - t/T): 0 at t=T, kappa0 at t=0."""
    return kappa0 * (1.0 - t / T)


def predict_x0(x_t: np.ndarray, t: int, eps_hat: np.ndarray, s: NoiseSchedule) -> np.ndarray:
    """Clean-latent estimate implied by a noise prediction at level t."""
    if not (0 <= t <= s.T):
        raise ParameterError(f"t must lie in [0, {s.T}], got {t}")
    ab = s.alpha_bar[t]
    if ab == 0.0:
        raise SingularScheduleError(f"alpha_bar[{t}] is zero; x0 is unrecoverable")
    return (x_t - np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(ab)


def sigma_for(s: NoiseSchedule, t: int, t_prev: int, eta: float) -> float:
    if eta == 0.0:
        return 0.0
    ab_t = s.alpha_bar[t]
    ab_prev = s.alpha_bar[t_prev]
    return eta * np.sqrt((1.0 - ab_prev) / (1.0 - ab_t)) * np.sqrt(1.0 - ab_t / ab_prev)


def _check_step_args(x_t, t, s, t_prev, eta, rng):
    x_t = check_latent(x_t, "x_t")
    if not (1 <= t <= s.T):
        raise ParameterError(f"step source t must lie in [1, {s.T}], got {t}")
    if t_prev is None:
        t_prev = t - 1
    if not (0 <= t_prev < t):
        raise ParameterError(f"t_prev must lie in [0, {t}), got {t_prev}")
    if eta < 0.0:
        raise ParameterError(f"eta must be >= 0, got {eta}")
    if eta > 0.0 and rng is None:
        raise ParameterError("eta > 0 requires an rng")
    return x_t, t_prev


def _predict(denoiser, x_t, t):
    eps_hat = np.asarray(denoiser.predict_eps(x_t, t), dtype=np.float64)
    if eps_hat.shape != x_t.shape:
        raise ParameterError(f"denoiser output shape {eps_hat.shape} does not match input {x_t.shape}")
    if not np.all(np.isfinite(eps_hat)):
        raise ParameterError("denoiser produced non-finite values")
    return eps_hat


def _direction(s, t_prev, sigma, eps_hat):
    rad = 1.0 - s.alpha_bar[t_prev] - sigma * sigma
    if rad < -1e-12:
        raise ParameterError(f"sigma^2 exceeds 1 - alpha_bar[{t_prev}]; lower eta")
    return np.sqrt(max(rad, 0.0)) * eps_hat


def _emit(s, t_prev, x0_hat, direction, noise):
    x = np.sqrt(s.alpha_bar[t_prev]) * x0_hat + direction
    if noise is not None:
        x = x + noise
    return x


def ddim_step(
    x_t: np.ndarray,
    t: int,
    denoiser: Denoiser,
    s: NoiseSchedule,
    eta: float = 0.0,
    rng: RandomSource | None = None,
    t_prev: int | None = None,
) -> StepOutput:
    """One vanilla reverse step from t to t_prev (default t-1)."""
    x_t, t_prev = _check_step_args(x_t, t, s, t_prev, eta, rng)
    eps_hat = _predict(denoiser, x_t, t)
    x0_hat = predict_x0(x_t, t, eps_hat, s)
    sigma = sigma_for(s, t, t_prev, eta)
    direction = _direction(s, t_prev, sigma, eps_hat)
    noise = sigma * rng.normal(x_t.shape) if sigma > 0.0 else None
    x_prev = _emit(s, t_prev, x0_hat, direction, noise)
    return StepOutput(x_prev=x_prev, x0_hat=x0_hat, dir=direction, kappa_used=0.0)


def momentum_step(
    x_t: np.ndarray,
    t: int,
    denoiser: Denoiser,
    s: NoiseSchedule,
    state: MomentumState,
    eta: float = 0.0,
    rng: RandomSource | None = None,
    t_prev: int | None = None,
) -> tuple[StepOutput, MomentumState]:
    """One momentum-corrected reverse step.

    Computes the provisional DDIM emission first, forms the drift against it,
    updates the velocity buffer, then re-emits from the corrected x0 estimate
    reusing the same stochastic noise sample as the provisional emission.
    """
    x_t, t_prev = _check_step_args(x_t, t, s, t_prev, eta, rng)
    if state.T != s.T:
        raise ParameterError(f"state horizon T={state.T} does not match schedule T={s.T}")
    if state.v.shape != x_t.shape:
        raise ParameterError(f"state velocity shape {state.v.shape} does not match latent {x_t.shape}")

    eps_hat = _predict(denoiser, x_t, t)
    x0_ddim = predict_x0(x_t, t, eps_hat, s)
    sigma = sigma_for(s, t, t_prev, eta)
    direction = _direction(s, t_prev, sigma, eps_hat)
    noise = sigma * rng.normal(x_t.shape) if sigma > 0.0 else None
    x_prev_ddim = _emit(s, t_prev, x0_ddim, direction, noise)

    g = x_t - x_prev_ddim + state.lam * direction
    v = state.beta * state.v + (1.0 - state.beta) * g
    kappa = kappa_at(t, state.T, state.kappa0)
    x0_corr = x0_ddim + kappa * v
    x_prev = _emit(s, t_prev, x0_corr, direction, noise)

    out = StepOutput(x_prev=x_prev, x0_hat=x0_corr, dir=direction, kappa_used=kappa)
    return out, dataclasses.replace(state, v=v, prev_x=x_prev)


def step_grid(T: int, steps: int) -> np.ndarray:
    """Uniform timestep sub-grid 0 = g_0 < g_1 < ... < g_steps = T."""
    if steps < 1:
        raise ParameterError(f"steps must be >= 1, got {steps}")
    grid = np.rint(np.linspace(0.0, T, steps + 1)).astype(int)
    if np.any(np.diff(grid) <= 0):
        raise ParameterError(f"steps={steps} does not fit T={T}: sub-grid degenerates")
    return grid


def ddim_invert(x0: np.ndarray, denoiser: Denoiser, s: NoiseSchedule, steps: int) -> LatentSequence:
    """Deterministic inversion: walk a clean latent up a uniform sub-grid.

    Each hop queries the denoiser at the target level with the current,
    lower-noise latent (the level-0 latent itself is never queried), forms
    the x0 estimate at the source level, and re-noises to the target:

        x_next = sqrt(ab_next) * x0_hat + sqrt(1 - ab_next) * eps_hat

    Returns the trajectory of steps+1 latents; entry 0 is the input.
    """
    x = check_latent(x0, "x0")
    grid = step_grid(s.T, steps)
    traj = [x]
    for k in range(steps):
        t_src, t_dst = int(grid[k]), int(grid[k + 1])
        eps_hat = _predict(denoiser, x, t_dst)
        x0_hat = predict_x0(x, t_src, eps_hat, s)
        x = np.sqrt(s.alpha_bar[t_dst]) * x0_hat + np.sqrt(1.0 - s.alpha_bar[t_dst]) * eps_hat
        traj.append(x)
    return LatentSequence(np.stack(traj))


def ddim_sample(
    x_T: np.ndarray,
    denoiser: Denoiser,
    s: NoiseSchedule,
    steps: int | None = None,
    eta: float = 0.0,
    rng: RandomSource | None = None,
) -> np.ndarray:
    """Full reverse sweep down a uniform sub-grid (default: every level)."""
    x = check_latent(x_T, "x_T")
    grid = step_grid(s.T, steps if steps is not None else s.T)
    for k in range(len(grid) - 1, 0, -1):
        out = ddim_step(x, int(grid[k]), denoiser, s, eta=eta, rng=rng, t_prev=int(grid[k - 1]))
        x = out.x_prev
    return x
