"""Latent-space mask segmentation and overlap-linked tracking.

Masks are boolean (H, W) grids.  Tracking is deliberately simple: segment
every frame independently, then link frame k to frame k-1 by IoU; a frame
whose overlap does not exceed the threshold keeps the previous frame's mask
so one bad segmentation cannot yank the region across the scene.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Protocol, runtime_checkable

import numpy as np
from scipy import ndimage

from .core import LatentSequence
from .errors import ParameterError


@runtime_checkable
class Segmenter(Protocol):
    def segment(self, x: np.ndarray) -> np.ndarray: ...


@dataclasses.dataclass(frozen=True)
class MaskTrack:
    """Per-frame masks with linkage decisions.

    linked[k] is False where frame k kept the previous mask instead of its
    own segmentation; degenerate marks a track whose very first segmentation
    came back empty.
    """

    masks: np.ndarray  # (F, H, W) bool
    linked: tuple[bool, ...]
    tau: float
    degenerate: bool = False

    def __post_init__(self):
        masks = np.asarray(self.masks).astype(bool)
        if masks.ndim != 3 or masks.shape[0] < 1:
            raise ParameterError(f"mask stack must be (F, H, W), got shape {np.shape(self.masks)}")
        if len(self.linked) != masks.shape[0]:
            raise ParameterError("linked flags must match the number of masks")
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "linked", tuple(bool(b) for b in self.linked))

    def __len__(self) -> int:
        return self.masks.shape[0]


def _as_mask(m, name="mask") -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2:
        raise ParameterError(f"{name} must be a 2-d grid, got shape {m.shape}")
    return m.astype(bool)


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union; two empty masks count as identical (1.0)."""
    a = _as_mask(a, "a")
    b = _as_mask(b, "b")
    if a.shape != b.shape:
        raise ParameterError(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def threshold_segment(x: np.ndarray, theta: float, largest_component: bool = False) -> np.ndarray:
    """Mean absolute channel value above theta, optionally pruned to the
    largest 4-connected component."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ParameterError(f"expected a (C, H, W) latent, got shape {x.shape}")
    if theta < 0.0:
        raise ParameterError(f"theta must be >= 0, got {theta}")
    mask = np.mean(np.abs(x), axis=0) > theta
    if largest_component and mask.any():
        labels, count = ndimage.label(mask)  # default structure = 4-connectivity
        if count > 1:
            sizes = ndimage.sum_labels(mask, labels, index=np.arange(1, count + 1))
            mask = labels == (1 + int(np.argmax(sizes)))
    return mask


class ThresholdSegmenter:
    """Segmenter wrapper around threshold_segment."""

    def __init__(self, theta: float = 0.5, largest_component: bool = False):
        self.theta = theta
        self.largest_component = largest_component

    def segment(self, x: np.ndarray) -> np.ndarray:
        return threshold_segment(x, self.theta, self.largest_component)


class OverlapTracker:
    """Incremental IoU-linked tracker.

    update() consumes one frame at a time so callers that see frames in
    streaming order (e.g. the denoising queue at its injection point) share
    the exact linking rule with batch track_masks().
    """

    def __init__(self, segmenter: Segmenter | Callable[[np.ndarray], np.ndarray], tau: float):
        if not (0.0 <= tau <= 1.0):
            raise ParameterError(f"tau must lie in [0, 1], got {tau}")
        self._segment = segmenter.segment if hasattr(segmenter, "segment") else segmenter
        self.tau = tau
        self.masks: list[np.ndarray] = []
        self.linked: list[bool] = []
        self.degenerate = False

    def update(self, x: np.ndarray) -> tuple[np.ndarray, bool]:
        m = _as_mask(self._segment(x), "segmenter output")
        if not self.masks:
            # first frame anchors the track even when empty; flag it so
            # downstream consumers can tell the track never locked on
            self.degenerate = not m.any()
            accepted = True
        else:
            accepted = iou(m, self.masks[-1]) > self.tau
            if not accepted:
                m = self.masks[-1]
        self.masks.append(m)
        self.linked.append(accepted)
        return m, accepted

    def as_track(self, count: int | None = None) -> MaskTrack:
        if not self.masks:
            raise ParameterError("tracker has not seen any frames")
        n = len(self.masks) if count is None else count
        if not (1 <= n <= len(self.masks)):
            raise ParameterError(f"cannot export {n} of {len(self.masks)} tracked frames")
        return MaskTrack(
            masks=np.stack(self.masks[:n]),
            linked=tuple(self.linked[:n]),
            tau=self.tau,
            degenerate=self.degenerate,
        )


def track_masks(latents: LatentSequence, seg: Segmenter, tau: float) -> MaskTrack:
    """Segment every frame and link masks across time by IoU overlap."""
    tracker = OverlapTracker(seg, tau)
    for i in range(len(latents)):
        tracker.update(latents.frame(i))
    return tracker.as_track()
