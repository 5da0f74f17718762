"""Hot-key classification: how many candidate workers a key may use."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError

NON_HOT_CANDIDATES = 2


def default_theta(workers: int) -> float:
    return 1.0 / (4 * workers)


def compute_dmin(hot_mass: float, workers: int) -> int:
    """Minimum candidate count for hot keys: the hot share of the workers.

    ``clamp(ceil(hot_mass * workers), 2, workers)``.
    """
    if not 0.0 <= hot_mass <= 1.0:
        raise ValueError(f"hot_mass must lie in [0, 1], got {hot_mass}")
    if workers < 1:
        raise ConfigError("workers", "must be positive")
    d = math.ceil(hot_mass * workers)
    return max(2, min(d, workers)) if workers >= 2 else workers


@dataclass
class HotKeyTable:
    """Remembered grants per hot key plus the classification thresholds."""

    theta: float
    workers: int
    d_min: int = 2
    granted: dict[bytes, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 < self.theta < 1.0:
            raise ConfigError("theta", "must lie in (0, 1)")
        if self.workers < 1:
            raise ConfigError("workers", "must be positive")
        if self.d_min < 2:
            raise ConfigError("d_min", "must be >= 2")

    def classify(self, key: bytes, f_k: float | None, f_top: float) -> int:
        """Return the candidate-worker count ``d`` for ``key``.

        Keys at or below ``theta`` (or untracked) get 2. Hot keys get
        ``workers / 2**floor(log2(f_top / f_k))``, raised to ``d_min`` and
        never below what the key was granted before.
        """
        if self.workers < 2:
            raise ConfigError("workers", "classification needs at least 2 workers")
        if f_k is None or f_k <= self.theta:
            return NON_HOT_CANDIDATES
        if f_k > f_top:
            raise ValueError(f"f_k ({f_k}) exceeds f_top ({f_top})")

        index = math.floor(math.log2(f_top / f_k))
        d = self.workers >> index if index < 63 else 0
        if d < self.d_min:
            d = self.d_min
        prior = self.granted.get(key)
        if prior is None or prior < d:
            self.granted[key] = d
        else:
            d = prior
        return min(d, self.workers)

    def forget(self, key: bytes) -> None:
        self.granted.pop(key, None)

    def set_workers(self, workers: int, theta: float | None = None) -> None:
        # stored grants stay as-is and are clamped at use time
        self.workers = workers
        if theta is not None:
            self.theta = theta
        self.d_min = min(max(self.d_min, 2), max(workers, 2))

    def update_dmin(self, hot_mass: float) -> int:
        self.d_min = compute_dmin(hot_mass, max(self.workers, 2))
        return self.d_min
