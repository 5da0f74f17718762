"""Heuristic worker assignment.

Each source keeps its own view of every worker: an inferred backlog ``C_w``
(tuples), the tuples it assigned since the last refresh ``N_w`` and a sampled
per-tuple service time ``P_w``. Every ``interval`` simulated seconds the
backlog is aged by the work the worker could have done in that time; the
tuple goes to the candidate with the smallest ``C_w * P_w``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import StateError

DEFAULT_INTERVAL = 10.0
SAMPLE_WEIGHT = 0.5


@dataclass
class WorkerEstimate:
    backlog: float = 0.0
    assigned: int = 0
    capacity: float | None = None  # seconds per tuple

    @property
    def wait(self) -> float:
        if self.capacity is None:
            raise StateError("no capacity sample for worker")
        return self.backlog * self.capacity


class Assigner:
    def __init__(self, workers: Iterable[int] = (), interval: float = DEFAULT_INTERVAL, t_start: float = 0.0) -> None:
        if interval <= 0:
            raise ValueError("interval must be positive")
        self.interval = interval
        self.t_prior = t_start
        self.refreshes = 0
        self.estimates: dict[int, WorkerEstimate] = {w: WorkerEstimate() for w in workers}

    def add_worker(self, worker: int, capacity: float | None = None) -> None:
        if worker in self.estimates:
            raise ValueError(f"worker {worker} already tracked")
        self.estimates[worker] = WorkerEstimate(capacity=capacity)

    def remove_worker(self, worker: int) -> None:
        if self.estimates.pop(worker, None) is None:
            raise StateError(f"unknown worker {worker}")

    def sample_capacity(self, worker: int, measured: float) -> float:
        if not measured > 0:
            raise ValueError(f"capacity sample must be positive, got {measured}")
        est = self.estimates.get(worker)
        if est is None:
            raise StateError(f"unknown worker {worker}")
        if est.capacity is None:
            est.capacity = measured
        else:
            est.capacity = (1 - SAMPLE_WEIGHT) * est.capacity + SAMPLE_WEIGHT * measured
        return est.capacity

    def refresh(self, t_cur: float) -> bool:
        """Age every backlog if more than ``interval`` has passed. Returns
        whether a refresh happened."""
        if t_cur < self.t_prior:
            raise ValueError(f"time went backwards: {t_cur} < {self.t_prior}")
        T = self.interval
        if t_cur - self.t_prior <= T:
            return False
        for est in self.estimates.values():
            p = est.capacity
            pending = est.backlog + est.assigned
            if p is not None and pending * p > T:
                est.backlog = (pending * p - T) / p
            else:
                est.backlog = 0.0
            est.assigned = 0
        self.t_prior = t_cur
        self.refreshes += 1
        return True

    def select(self, candidates: Sequence[int]) -> int:
        """Pick the candidate with the shortest estimated wait; earlier
        candidates win ties."""
        if not candidates:
            raise ValueError("empty candidate list")
        estimates = self.estimates
        best = None
        best_wait = 0.0
        for w in candidates:
            est = estimates.get(w)
            if est is None:
                raise StateError(f"unknown worker {w}")
            wait = est.wait
            if best is None or best_wait > wait:
                best, best_wait = est, wait
                chosen = w
        best.backlog += 1
        best.assigned += 1
        return chosen

    def waits(self) -> dict[int, float]:
        return {w: est.wait for w, est in self.estimates.items()}
