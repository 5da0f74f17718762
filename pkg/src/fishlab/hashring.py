"""Consistent hashing over a 2**32 ring with virtual nodes."""

from __future__ import annotations

import bisect
from typing import Iterable

from .errors import StateError

RING_SIZE = 1 << 32
DEFAULT_VNODES = 16

_FNV_OFFSET = 0x811C9DC5
_FNV_PRIME = 0x01000193
_MASK = 0xFFFFFFFF


def fnv1a_32(data: bytes, h: int = _FNV_OFFSET) -> int:
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK
    return h


def fmix32(h: int) -> int:
    """murmur3 finalizer; spreads FNV's weak low-entropy tail across all bits."""
    h ^= h >> 16
    h = (h * 0x85EBCA6B) & _MASK
    h ^= h >> 13
    h = (h * 0xC2B2AE35) & _MASK
    h ^= h >> 16
    return h


def seed_bytes(seed: int) -> bytes:
    return (seed % (1 << 64)).to_bytes(8, "big")


def ring_hash(data: bytes, seed: int = 0) -> int:
    """32-bit position of ``data``: FNV-1a over (8-byte seed, data), then fmix32."""
    return fmix32(fnv1a_32(data, fnv1a_32(seed_bytes(seed))))


def vnode_label(worker: int, index: int) -> bytes:
    return str(worker).encode("ascii") + b"\x00" + str(index).encode("ascii")


class HashRing:
    """Sorted ring of (position, worker) with ``vnodes`` positions per worker.

    Colliding positions are resolved by probing forward one slot at a time.
    Candidate lists are memoised per (key, d) and dropped on any membership
    change.
    """

    def __init__(self, workers: Iterable[int] = (), vnodes: int = DEFAULT_VNODES, seed: int = 0) -> None:
        if vnodes < 1:
            raise ValueError("vnodes must be positive")
        self.vnodes = vnodes
        self.seed = seed
        self._positions: list[int] = []
        self._owners: list[int] = []
        self._by_worker: dict[int, list[int]] = {}
        self._cache: dict[tuple[bytes, int], tuple[int, ...]] = {}
        self._key_pos: dict[bytes, int] = {}
        for w in workers:
            self.add_worker(w)

    def __len__(self) -> int:
        return len(self._positions)

    def __contains__(self, worker: int) -> bool:
        return worker in self._by_worker

    @property
    def workers(self) -> list[int]:
        return sorted(self._by_worker)

    @property
    def positions(self) -> list[tuple[int, int]]:
        return list(zip(self._positions, self._owners))

    def add_worker(self, worker: int) -> None:
        if worker in self._by_worker:
            raise ValueError(f"worker {worker} already on the ring")
        taken = set(self._positions)
        mine = []
        for i in range(self.vnodes):
            pos = ring_hash(vnode_label(worker, i), self.seed)
            while pos in taken:
                pos = (pos + 1) & _MASK
            taken.add(pos)
            idx = bisect.bisect_left(self._positions, pos)
            self._positions.insert(idx, pos)
            self._owners.insert(idx, worker)
            mine.append(pos)
        self._by_worker[worker] = mine
        self._cache.clear()

    def remove_worker(self, worker: int) -> None:
        if worker not in self._by_worker:
            raise StateError(f"worker {worker} is not on the ring")
        if len(self._by_worker) == 1:
            raise StateError("cannot remove the last worker")
        for pos in self._by_worker.pop(worker):
            idx = bisect.bisect_left(self._positions, pos)
            del self._positions[idx]
            del self._owners[idx]
        self._cache.clear()

    def key_position(self, key: bytes) -> int:
        pos = self._key_pos.get(key)
        if pos is None:
            pos = self._key_pos[key] = ring_hash(key, self.seed)
        return pos

    def owner(self, key: bytes) -> int:
        return self.candidates(key, 1)[0]

    def candidates(self, key: bytes, d: int) -> tuple[int, ...]:
        """Up to ``d`` distinct workers met walking clockwise from the key."""
        cached = self._cache.get((key, d))
        if cached is not None:
            return cached
        if not self._positions:
            raise StateError("hash ring is empty")
        if d < 1:
            raise ValueError("d must be >= 1")
        want = min(d, len(self._by_worker))
        n = len(self._positions)
        i = bisect.bisect_left(self._positions, self.key_position(key))
        owners = self._owners
        seen: list[int] = []
        for step in range(n):
            w = owners[(i + step) % n]
            if w not in seen:
                seen.append(w)
                if len(seen) == want:
                    break
        result = tuple(seen)
        self._cache[(key, d)] = result
        return result
