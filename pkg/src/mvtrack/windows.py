"""Sliding windows over per-camera tracklets.

A window anchored at keyframe ``k`` covers ``[k - nu // 2, k + ceil(nu / 2))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError
from .svtrack import Tracklet2D


@dataclass(frozen=True)
class WindowConfig:
    size: int = 30
    step: int = 20

    def __post_init__(self):
        if self.size < 1 or self.step < 1:
            raise ConfigError("window size and step must be >= 1")
        if self.step >= self.size:
            raise ConfigError(
                f"window step ({self.step}) must be smaller than size ({self.size}) "
                "so adjacent windows overlap"
            )

    @property
    def overlap(self) -> int:
        return self.size - self.step

    @property
    def latency(self) -> int:
        """Frames between a frame's arrival and its window closing."""
        return self.size - self.size // 2


PRESETS = {
    "setup": WindowConfig(30, 20),
    "ablation": WindowConfig(50, 30),
    "ablation-short": WindowConfig(30, 20),
    "ablation-long": WindowConfig(70, 50),
}


def window_range(k: int, size: int) -> tuple[int, int]:
    return k - size // 2, k + (size + 1) // 2


@dataclass
class Window:
    keyframe: int
    start: int
    stop: int
    tracklets: list[Tracklet2D] = field(default_factory=list)

    @property
    def frames(self) -> range:
        return range(self.start, self.stop)


def crop(tracklets, k: int, size: int) -> Window:
    """Restrict tracklets to the window at ``k``; empty restrictions are dropped."""
    if size < 1:
        raise ConfigError("window size must be >= 1")
    start, stop = window_range(k, size)
    kept = []
    for tl in tracklets:
        part = tl.restricted(start, stop)
        if part.observations:
            kept.append(part)
    return Window(k, start, stop, kept)


def keyframes(length: int, size: int, step: int) -> list[int]:
    """Keyframes traversing a stream of ``length`` frames."""
    if length < 1:
        raise ValueError("stream length must be >= 1")
    out = []
    k = size // 2
    while k - size // 2 <= length - 1:
        out.append(k)
        k += step
    return out
