"""Discrete-event simulation of sources routing tuples to FIFO workers.

Every worker serves its queue one tuple at a time with a constant per-tuple
service time, so a tuple handed to worker ``w`` at time ``t`` completes at
``max(t, free_at[w]) + P_w``. Arrivals are processed in stream order; timed
events (capacity sampling, worker add/remove, imbalance sampling) are kept in
a heap and interleaved with arrivals by time.

"Execution time" in the load-balance comparisons is the makespan: the time
the last tuple completes.
"""

from __future__ import annotations

import heapq
import itertools
import math
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, StateError
from .grouping import GroupingScheme, SchemeConfig, make_scheme
from .workload import TupleEvent

DEFAULT_SERVICE_TIME = 0.001

# ordering of timed events that share a timestamp with an arrival
_BEFORE_ARRIVALS = 0
_AFTER_ARRIVALS = 2


@dataclass(frozen=True)
class WorkerEvent:
    time: float
    action: str  # "add" or "remove"
    worker: int
    capacity: float | None = None

    def __post_init__(self) -> None:
        if self.action not in ("add", "remove"):
            raise ConfigError("worker_events", f"unknown action {self.action!r}")
        if self.time < 0:
            raise ConfigError("worker_events", "event time must be >= 0")


def uniform_capacities(workers: int, service_time: float = DEFAULT_SERVICE_TIME) -> tuple[float, ...]:
    return (service_time,) * workers


def alternating_capacities(workers: int, service_time: float = DEFAULT_SERVICE_TIME) -> tuple[float, ...]:
    """Half the workers twice as fast: per-tuple times alternate P, P/2."""
    return tuple(service_time if i % 2 == 0 else service_time / 2 for i in range(workers))


@dataclass(frozen=True)
class SimConfig:
    worker_count: int
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    capacities: tuple[float, ...] | None = None
    source_count: int = 1
    worker_events: tuple[WorkerEvent, ...] = ()
    imbalance_sample_period: float = 1.0
    capacity_sample_period: float | None = None
    noise_stddev: float = 0.0
    service_time: float = DEFAULT_SERVICE_TIME
    seed: int = 0

    def resolved_capacities(self) -> tuple[float, ...]:
        if self.capacities is None:
            return uniform_capacities(self.worker_count, self.service_time)
        return tuple(self.capacities)

    def validate(self) -> None:
        if self.worker_count < 1:
            raise ConfigError("worker_count", "must be positive")
        if self.source_count < 1:
            raise ConfigError("source_count", "must be positive")
        caps = self.resolved_capacities()
        if len(caps) != self.worker_count:
            raise ConfigError("capacities", f"expected {self.worker_count} values, got {len(caps)}")
        if any(not p > 0 for p in caps):
            raise ConfigError("capacities", "service times must be positive")
        if not self.imbalance_sample_period > 0:
            raise ConfigError("imbalance_sample_period", "must be positive")
        if self.capacity_sample_period is not None and not self.capacity_sample_period > 0:
            raise ConfigError("capacity_sample_period", "must be positive")
        if self.noise_stddev < 0:
            raise ConfigError("noise_stddev", "must be >= 0")
        times = [ev.time for ev in self.worker_events]
        if times != sorted(times):
            raise ConfigError("worker_events", "event times must be non-decreasing")
        self.scheme.validate()


@dataclass
class RunTrace:
    arrivals: np.ndarray
    completions: np.ndarray
    placement: dict[int, set[bytes]]
    distinct_keys: int
    imbalance_samples: list[float]
    routed: int
    rerouted: int = 0
    # final worker and (re)dispatch time of each tuple
    workers: np.ndarray | None = None
    dispatched: np.ndarray | None = None


@dataclass(frozen=True)
class MetricsReport:
    makespan: float
    latency_mean: float
    latency_p50: float
    latency_p95: float
    latency_p99: float
    throughput: float
    memory_units: int
    memory_ratio_vs_fg: float
    mean_imbalance: float

    def as_dict(self) -> dict[str, float | int]:
        return asdict(self)


def nearest_rank(sorted_values: np.ndarray | Sequence[float], pct: float) -> float:
    n = len(sorted_values)
    if n == 0:
        raise ValueError("percentile of an empty list")
    rank = max(1, math.ceil(pct / 100.0 * n))
    return float(sorted_values[rank - 1])


def compute_metrics(trace: RunTrace) -> MetricsReport:
    if len(trace.completions) == 0:
        raise ValueError("cannot compute metrics of an empty trace")
    if np.isnan(trace.completions).any():
        raise StateError("trace has tuples that never completed")
    lat = np.sort(trace.completions - trace.arrivals)
    makespan = float(trace.completions.max())
    memory = sum(len(keys) for keys in trace.placement.values())
    samples = trace.imbalance_samples
    return MetricsReport(
        makespan=makespan,
        latency_mean=float(lat.mean()),
        latency_p50=nearest_rank(lat, 50),
        latency_p95=nearest_rank(lat, 95),
        latency_p99=nearest_rank(lat, 99),
        throughput=len(lat) / makespan if makespan > 0 else math.inf,
        memory_units=memory,
        memory_ratio_vs_fg=memory / trace.distinct_keys,
        mean_imbalance=float(np.mean(samples)) if samples else 0.0,
    )


class Simulation:
    """One run of a stream through ``source_count`` sources and the workers.

    ``probe`` (tests only) is called after every routing decision as
    ``probe(sim, source_index, t)``.
    """

    def __init__(
        self,
        cfg: SimConfig,
        stream: Sequence[TupleEvent],
        probe: Callable[[Simulation, int, float], None] | None = None,
    ) -> None:
        cfg.validate()
        self.cfg = cfg
        self.stream = stream
        self.probe = probe
        self.capacity = dict(enumerate(cfg.resolved_capacities()))
        self.active: list[int] = sorted(self.capacity)
        self.schemes: list[GroupingScheme] = [
            make_scheme(cfg.scheme, self.active, source_index=s) for s in range(cfg.source_count)
        ]
        self.free_at = {w: 0.0 for w in self.active}
        self.pending: dict[int, deque[tuple[float, int]]] = {w: deque() for w in self.active}
        n = len(stream)
        self.arrivals = np.fromiter((ev.arrival_time for ev in stream), dtype=np.float64, count=n)
        self.completions = np.full(n, np.nan)
        self.assigned = np.full(n, -1, dtype=np.int64)
        self.dispatched = np.full(n, np.nan)
        self.imbalance: list[float] = []
        self.rerouted = 0
        self._rng = np.random.default_rng(cfg.seed)
        self._heap: list[tuple[float, int, int, str, object]] = []
        self._seq = itertools.count()
        self._events_left = len(cfg.worker_events)
        self._stream_done = n == 0

    # -- public ------------------------------------------------------------

    def run(self) -> RunTrace:
        cfg = self.cfg
        cap_period = cfg.capacity_sample_period or cfg.scheme.interval
        self._push(0.0, _BEFORE_ARRIVALS, "capacity", cap_period)
        self._push(cfg.imbalance_sample_period, _AFTER_ARRIVALS, "imbalance", cfg.imbalance_sample_period)
        for ev in cfg.worker_events:
            self._push(ev.time, _BEFORE_ARRIVALS, "worker", ev)

        n_src = cfg.source_count
        for j, ev in enumerate(self.stream):
            t = ev.arrival_time
            self._drain(t)
            src = j % n_src
            self._dispatch(j, src, ev.key, t)
        self._stream_done = True
        self._drain(math.inf)

        placement: dict[int, set[bytes]] = {}
        for scheme in self.schemes:
            for w, keys in scheme.tracked_state().items():
                placement.setdefault(w, set()).update(keys)
        return RunTrace(
            arrivals=self.arrivals,
            completions=self.completions,
            placement=placement,
            distinct_keys=len({ev.key for ev in self.stream}),
            imbalance_samples=self.imbalance,
            routed=len(self.stream),
            rerouted=self.rerouted,
            workers=self.assigned,
            dispatched=self.dispatched,
        )

    def queue_length(self, worker: int, t: float) -> int:
        """Tuples at ``worker`` not yet completed at time ``t``."""
        q = self.pending[worker]
        while q and q[0][0] <= t:
            q.popleft()
        return len(q)

    # -- internals ---------------------------------------------------------

    def _push(self, t: float, order: int, kind: str, payload: object) -> None:
        heapq.heappush(self._heap, (t, order, next(self._seq), kind, payload))

    def _drain(self, t: float) -> None:
        """Process timed events due before an arrival at ``t``."""
        heap = self._heap
        while heap:
            et, order, _, kind, payload = heap[0]
            if et > t or (et == t and order > 1):
                return
            heapq.heappop(heap)
            if kind == "capacity":
                self._sample_capacities()
                if not self._stream_done:
                    self._push(et + payload, _BEFORE_ARRIVALS, "capacity", payload)
            elif kind == "worker":
                self._events_left -= 1
                self._apply_worker_event(payload)
            else:
                self._sample_imbalance(et)
                if not self._stream_done or self._events_left or self._busy_after(et):
                    self._push(et + payload, _AFTER_ARRIVALS, "imbalance", payload)

    def _busy_after(self, t: float) -> bool:
        return any(self.free_at[w] > t for w in self.active)

    def _dispatch(self, j: int, src: int, key: bytes, t: float) -> None:
        w = self.schemes[src].route(key, t)
        if w not in self.free_at:
            raise StateError(f"scheme routed to inactive worker {w}")
        done = max(t, self.free_at[w]) + self.capacity[w]
        self.free_at[w] = done
        self.pending[w].append((done, j))
        self.completions[j] = done
        self.assigned[j] = w
        self.dispatched[j] = t
        if self.probe is not None:
            self.probe(self, src, t)

    def _sample_capacities(self) -> None:
        sd = self.cfg.noise_stddev
        for scheme in self.schemes:
            for w in self.active:
                p = self.capacity[w]
                if sd > 0:
                    p *= max(0.05, 1.0 + sd * self._rng.standard_normal())
                scheme.sample_capacity(w, p)

    def _sample_imbalance(self, t: float) -> None:
        loads = [self.queue_length(w, t) * self.capacity[w] for w in self.active]
        self.imbalance.append(max(loads) - sum(loads) / len(loads))

    def _apply_worker_event(self, ev: WorkerEvent) -> None:
        if ev.action == "add":
            if ev.worker in self.free_at:
                raise StateError(f"worker {ev.worker} is already active")
            p = ev.capacity if ev.capacity is not None else self.cfg.service_time
            if not p > 0:
                raise ConfigError("worker_events", "added worker needs a positive service time")
            self.capacity[ev.worker] = p
            self.active = sorted([*self.active, ev.worker])
            self.free_at[ev.worker] = ev.time
            self.pending[ev.worker] = deque()
            for scheme in self.schemes:
                scheme.add_worker(ev.worker, capacity=p)
            return

        w = ev.worker
        if w not in self.free_at:
            raise StateError(f"cannot remove unknown worker {w}")
        if len(self.active) == 1:
            raise StateError("removing the last worker")
        self.queue_length(w, ev.time)
        leftover = self.pending.pop(w)
        del self.free_at[w]
        self.active.remove(w)
        for scheme in self.schemes:
            scheme.remove_worker(w)
        n_src = self.cfg.source_count
        for _, j in leftover:
            self.rerouted += 1
            self._dispatch(j, j % n_src, self.stream[j].key, ev.time)


def simulate(cfg: SimConfig, stream: Sequence[TupleEvent]) -> RunTrace:
    return Simulation(cfg, stream).run()


def run(cfg: SimConfig, stream: Sequence[TupleEvent]) -> MetricsReport:
    """Simulate ``stream`` under ``cfg`` and summarise it."""
    return compute_metrics(simulate(cfg, stream))
