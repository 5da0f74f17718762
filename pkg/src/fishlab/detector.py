"""Epoch-based recent hot-key detection.

A bounded SpaceSaving-style counter set: at most ``capacity`` keys are
tracked, an untracked key replaces the minimum counter and inherits its
value plus one. Every ``epoch_size`` observations all counters (and the total
observed mass) are multiplied by ``alpha`` so stale hotness fades out.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

from .errors import ConfigError, EmptySketchError

DEFAULT_CAPACITY = 1000
DEFAULT_EPOCH_SIZE = 1000
DEFAULT_ALPHA = 0.2


@dataclass
class FrequencySketch:
    capacity: int = DEFAULT_CAPACITY
    epoch_size: int = DEFAULT_EPOCH_SIZE
    alpha: float = DEFAULT_ALPHA
    entries: dict[bytes, float] = field(default_factory=dict)
    tuples_in_epoch: int = 0
    total_mass: float = 0.0
    decays: int = 0

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ConfigError("k_max", "must be a positive integer")
        if self.epoch_size < 1:
            raise ConfigError("epoch_size", "must be a positive integer")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha", "must lie in [0, 1]")
        # key -> insertion sequence number; used for the ReplaceMin tie-break
        self._inserted: dict[bytes, int] = {}
        self._seq = itertools.count()
        # lazy min-heap of (count, insertion seq, key); stale items are skipped
        self._heap: list[tuple[float, int, bytes]] = []
        self._max_key: bytes | None = None
        self._max_count = 0.0
        for key, count in list(self.entries.items()):
            self._inserted[key] = next(self._seq)
            self._bump_max(key, count)
        self._rebuild_heap()

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: bytes) -> bool:
        return key in self.entries

    @property
    def epoch_complete(self) -> bool:
        """True when the next :meth:`observe` will decay first."""
        return self.tuples_in_epoch >= self.epoch_size

    def observe(self, key: bytes) -> bytes | None:
        """Count one occurrence of ``key``.

        Returns the key evicted by ReplaceMin, or ``None``.
        """
        if self.tuples_in_epoch >= self.epoch_size:
            self.decay_epoch()

        entries = self.entries
        evicted = None
        count = entries.get(key)
        if count is not None:
            count += 1.0
        elif len(entries) < self.capacity:
            count = 1.0
            self._inserted[key] = next(self._seq)
        else:
            evicted, min_count = self._pop_min()
            del entries[evicted]
            del self._inserted[evicted]
            count = min_count + 1.0
            self._inserted[key] = next(self._seq)
        entries[key] = count
        heapq.heappush(self._heap, (count, self._inserted[key], key))
        self._bump_max(key, count)

        self.tuples_in_epoch += 1
        self.total_mass += 1.0
        return evicted

    def decay_epoch(self) -> None:
        a = self.alpha
        if a != 1.0:
            for key in self.entries:
                self.entries[key] *= a
            self.total_mass *= a
            self._max_count *= a
        self.tuples_in_epoch = 0
        self.decays += 1
        # uniform scaling preserves order; rebuilding just drops stale items
        self._rebuild_heap()

    def frequency(self, key: bytes) -> float | None:
        """Decayed relative frequency ``c_k / S``; ``None`` if untracked."""
        count = self.entries.get(key)
        if count is None:
            return None
        if self.total_mass <= 0.0:
            return 0.0
        return count / self.total_mass

    def top_frequency(self) -> float:
        if not self.entries:
            raise EmptySketchError("top_frequency of an empty sketch")
        if self.total_mass <= 0.0:
            return 0.0
        return self._max_count / self.total_mass

    def hot_mass(self, theta: float) -> float:
        """Sum of frequencies strictly above ``theta``."""
        s = self.total_mass
        if s <= 0.0:
            return 0.0
        mass = sum(c for c in self.entries.values() if c / s > theta) / s
        return min(mass, 1.0)

    def min_count(self) -> float:
        if not self.entries:
            raise EmptySketchError("min_count of an empty sketch")
        count, _, _ = self._peek_min()
        return count

    # -- internals ---------------------------------------------------------

    def _bump_max(self, key: bytes, count: float) -> None:
        if self._max_key is None or count > self._max_count:
            self._max_key = key
            self._max_count = count

    def _rebuild_heap(self) -> None:
        ins = self._inserted
        self._heap = [(c, ins[k], k) for k, c in self.entries.items()]
        heapq.heapify(self._heap)

    def _peek_min(self) -> tuple[float, int, bytes]:
        heap = self._heap
        entries, ins = self.entries, self._inserted
        while True:
            count, seq, key = heap[0]
            if entries.get(key) == count and ins.get(key) == seq:
                return heap[0]
            heapq.heappop(heap)

    def _pop_min(self) -> tuple[bytes, float]:
        count, _, key = self._peek_min()
        heapq.heappop(self._heap)
        return key, count
