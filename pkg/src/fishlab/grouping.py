"""Stream grouping schemes behind one ``route(key, t_cur) -> worker`` call.

``sg``   round-robin (shuffle grouping)
``fg``   consistent-hash owner of the key (fields grouping)
``pkg``  two hashed choices, least locally-assigned wins
``dc``   lifetime heavy hitters get ``d`` hashed choices, others as pkg
``wc``   lifetime heavy hitters may use every worker, others as pkg
``fish`` decayed heavy hitters, candidate count from the classifier,
         candidates from the ring, shortest inferred wait wins
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .assigner import DEFAULT_INTERVAL, Assigner
from .classifier import NON_HOT_CANDIDATES, HotKeyTable, default_theta
from .detector import DEFAULT_ALPHA, DEFAULT_CAPACITY, DEFAULT_EPOCH_SIZE, FrequencySketch
from .errors import ConfigError, StateError
from .hashring import DEFAULT_VNODES, HashRing, ring_hash

SCHEMES = ("sg", "fg", "pkg", "dc", "wc", "fish")
ASSIGNMENT_MODES = ("estimate", "count")

_THETA_RULE = re.compile(r"^\s*(\d+(?:\.\d*)?|\.\d+)\s*/\s*(\d+(?:\.\d*)?|\.\d+)?\s*n\s*$")


def resolve_theta(rule: str | float, workers: int) -> float:
    """Hot-key threshold for ``workers``.

    ``rule`` is a number, ``"auto"`` (same as ``"1/4n"``) or a ``"a/bn"``
    expression meaning ``a / (b * workers)``.
    """
    if isinstance(rule, (int, float)):
        theta = float(rule)
    else:
        text = rule.strip().lower()
        if text == "auto":
            return default_theta(workers)
        m = _THETA_RULE.match(text)
        if m:
            num = float(m.group(1))
            den = float(m.group(2)) if m.group(2) else 1.0
            theta = num / (den * workers)
        else:
            try:
                theta = float(text)
            except ValueError:
                raise ConfigError("theta", f"cannot parse rule {rule!r}") from None
    if not 0.0 < theta < 1.0:
        raise ConfigError("theta", f"resolves to {theta}, outside (0, 1)")
    return theta


@dataclass(frozen=True)
class SchemeConfig:
    kind: str = "fish"
    k_max: int = DEFAULT_CAPACITY
    epoch_size: int = DEFAULT_EPOCH_SIZE
    alpha: float = DEFAULT_ALPHA
    theta: str | float = "1/4n"
    dmin: str | int = "hot_mass"
    vnodes: int = DEFAULT_VNODES
    ring_seed: int = 0
    interval: float = DEFAULT_INTERVAL
    assignment: str = "estimate"
    hash_seed: int = 0

    def validate(self) -> None:
        if self.kind not in SCHEMES:
            raise ConfigError("schemes", f"unknown scheme {self.kind!r}; expected one of {', '.join(SCHEMES)}")
        if self.assignment not in ASSIGNMENT_MODES:
            raise ConfigError("assignment", f"expected one of {', '.join(ASSIGNMENT_MODES)}")
        if self.k_max < 1:
            raise ConfigError("k_max", "must be positive")
        if self.epoch_size < 1:
            raise ConfigError("epoch_size", "must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha", "must lie in [0, 1]")
        if self.vnodes < 1:
            raise ConfigError("vnodes", "must be positive")
        if self.interval <= 0:
            raise ConfigError("interval", "must be positive")
        if isinstance(self.dmin, str) and self.dmin != "hot_mass":
            raise ConfigError("dmin", "expected 'hot_mass' or an integer >= 2")
        if isinstance(self.dmin, int) and self.dmin < 2:
            raise ConfigError("dmin", "expected 'hot_mass' or an integer >= 2")
        resolve_theta(self.theta, 4)

    def with_kind(self, kind: str) -> SchemeConfig:
        return replace(self, kind=kind)


class GroupingScheme:
    """Common bookkeeping: active workers and per-worker key placement."""

    kind = ""

    def __init__(self, workers: Iterable[int], cfg: SchemeConfig) -> None:
        self.cfg = cfg
        self.active: list[int] = sorted(workers)
        if not self.active:
            raise StateError("a grouping scheme needs at least one worker")
        self.placement: dict[int, set[bytes]] = {w: set() for w in self.active}
        self.load: dict[int, int] = {w: 0 for w in self.active}

    def route(self, key: bytes, t_cur: float) -> int:
        if not self.active:
            raise StateError("no active workers")
        w = self._choose(key, t_cur)
        self.placement[w].add(key)
        self.load[w] += 1
        return w

    def tracked_state(self) -> dict[int, set[bytes]]:
        """Distinct keys ever routed to each worker (removed workers included)."""
        return self.placement

    def add_worker(self, worker: int, capacity: float | None = None) -> None:
        if worker in self.active:
            raise ValueError(f"worker {worker} already active")
        self.active = sorted([*self.active, worker])
        self.placement.setdefault(worker, set())
        self.load[worker] = 0
        self._on_add(worker, capacity)

    def remove_worker(self, worker: int) -> None:
        if worker not in self.active:
            raise StateError(f"unknown worker {worker}")
        if len(self.active) == 1:
            raise StateError("cannot remove the last worker")
        self.active.remove(worker)
        self._on_remove(worker)

    def sample_capacity(self, worker: int, measured: float) -> None:
        """Only schemes that use capacities care."""

    def least_loaded(self, candidates: Sequence[int]) -> int:
        load = self.load
        return min(candidates, key=load.__getitem__)

    def _choose(self, key: bytes, t_cur: float) -> int:
        raise NotImplementedError

    def _on_add(self, worker: int, capacity: float | None) -> None:
        pass

    def _on_remove(self, worker: int) -> None:
        pass


class ShuffleGrouping(GroupingScheme):
    kind = "sg"

    def __init__(self, workers: Iterable[int], cfg: SchemeConfig, offset: int = 0) -> None:
        super().__init__(workers, cfg)
        self._cursor = offset % len(self.active)

    def _choose(self, key: bytes, t_cur: float) -> int:
        i = self._cursor % len(self.active)
        self._cursor = i + 1
        return self.active[i]


class FieldsGrouping(GroupingScheme):
    kind = "fg"

    def __init__(self, workers: Iterable[int], cfg: SchemeConfig) -> None:
        super().__init__(workers, cfg)
        self.ring = HashRing(self.active, vnodes=cfg.vnodes, seed=cfg.ring_seed)

    def _choose(self, key: bytes, t_cur: float) -> int:
        return self.ring.candidates(key, 1)[0]

    def _on_add(self, worker: int, capacity: float | None) -> None:
        self.ring.add_worker(worker)

    def _on_remove(self, worker: int) -> None:
        self.ring.remove_worker(worker)


class _HashedChoices(GroupingScheme):
    """Base for the power-of-choices family: seeded hashes modulo the active
    worker list, least locally-assigned candidate wins."""

    def __init__(self, workers: Iterable[int], cfg: SchemeConfig) -> None:
        super().__init__(workers, cfg)
        self._hashes: dict[bytes, list[int]] = {}
        self._choices: dict[tuple[bytes, int], tuple[int, ...]] = {}

    def _hash_seed(self, i: int) -> int:
        return self.cfg.hash_seed * 1_000_003 + i + 1

    def choices(self, key: bytes, d: int) -> tuple[int, ...]:
        cached = self._choices.get((key, d))
        if cached is not None:
            return cached
        hashes = self._hashes.setdefault(key, [])
        while len(hashes) < d:
            hashes.append(ring_hash(key, self._hash_seed(len(hashes))))
        n = len(self.active)
        picked: list[int] = []
        for h in hashes[:d]:
            w = self.active[h % n]
            if w not in picked:
                picked.append(w)
        result = tuple(picked)
        self._choices[(key, d)] = result
        return result

    def _on_add(self, worker: int, capacity: float | None) -> None:
        self._choices.clear()

    def _on_remove(self, worker: int) -> None:
        self._choices.clear()


class PartialKeyGrouping(_HashedChoices):
    kind = "pkg"

    def _choose(self, key: bytes, t_cur: float) -> int:
        return self.least_loaded(self.choices(key, 2))


class _LifetimeHeavyHitters(_HashedChoices):
    """D-C / W-C: undecayed SpaceSaving over the whole stream."""

    def __init__(self, workers: Iterable[int], cfg: SchemeConfig) -> None:
        super().__init__(workers, cfg)
        self.sketch = FrequencySketch(capacity=cfg.k_max, epoch_size=cfg.epoch_size, alpha=1.0)
        n = len(self.active)
        self.table = HotKeyTable(theta=resolve_theta(cfg.theta, n), workers=n)

    def _observe(self, key: bytes) -> float | None:
        sketch, table = self.sketch, self.table
        if sketch.epoch_complete and self.cfg.dmin == "hot_mass":
            table.update_dmin(sketch.hot_mass(table.theta))
        evicted = sketch.observe(key)
        if evicted is not None:
            table.forget(evicted)
        return sketch.frequency(key)

    def _resize(self) -> None:
        n = len(self.active)
        self.table.set_workers(n, resolve_theta(self.cfg.theta, n))

    def _on_add(self, worker: int, capacity: float | None) -> None:
        super()._on_add(worker, capacity)
        self._resize()

    def _on_remove(self, worker: int) -> None:
        super()._on_remove(worker)
        self._resize()


class DChoices(_LifetimeHeavyHitters):
    kind = "dc"

    def __init__(self, workers: Iterable[int], cfg: SchemeConfig) -> None:
        super().__init__(workers, cfg)
        if isinstance(cfg.dmin, int):
            self.table.d_min = cfg.dmin

    def _choose(self, key: bytes, t_cur: float) -> int:
        f_k = self._observe(key)
        if len(self.active) < 2:
            return self.active[0]
        d = self.table.classify(key, f_k, self.sketch.top_frequency())
        return self.least_loaded(self.choices(key, d))


class WChoices(_LifetimeHeavyHitters):
    kind = "wc"

    def _choose(self, key: bytes, t_cur: float) -> int:
        f_k = self._observe(key)
        if f_k is not None and f_k > self.table.theta:
            return self.least_loaded(self.active)
        return self.least_loaded(self.choices(key, NON_HOT_CANDIDATES))


class FishGrouping(GroupingScheme):
    kind = "fish"

    def __init__(self, workers: Iterable[int], cfg: SchemeConfig, capacities: dict[int, float] | None = None) -> None:
        super().__init__(workers, cfg)
        n = len(self.active)
        self.sketch = FrequencySketch(capacity=cfg.k_max, epoch_size=cfg.epoch_size, alpha=cfg.alpha)
        self.table = HotKeyTable(theta=resolve_theta(cfg.theta, n), workers=n)
        if isinstance(cfg.dmin, int):
            self.table.d_min = min(cfg.dmin, max(n, 2))
        self.ring = HashRing(self.active, vnodes=cfg.vnodes, seed=cfg.ring_seed)
        self.assigner = Assigner(self.active, interval=cfg.interval)
        for w, p in (capacities or {}).items():
            self.assigner.sample_capacity(w, p)
        self.by_count = cfg.assignment == "count"
        self.last_candidates: tuple[int, ...] = ()
        self.last_d = 0

    def candidate_count(self, key: bytes) -> int:
        """Observe ``key`` and classify it; returns the candidate count."""
        sketch, table = self.sketch, self.table
        if sketch.epoch_complete and self.cfg.dmin == "hot_mass":
            table.update_dmin(sketch.hot_mass(table.theta))
        evicted = sketch.observe(key)
        if evicted is not None:
            table.forget(evicted)
        if len(self.active) < 2:
            return 1
        return table.classify(key, sketch.frequency(key), sketch.top_frequency())

    def _choose(self, key: bytes, t_cur: float) -> int:
        d = self.candidate_count(key)
        cands = self.ring.candidates(key, d)
        self.last_d = d
        self.last_candidates = cands
        self.assigner.refresh(t_cur)
        if self.by_count:
            w = self.least_loaded(cands)
            est = self.assigner.estimates[w]
            est.backlog += 1
            est.assigned += 1
            return w
        return self.assigner.select(cands)

    def sample_capacity(self, worker: int, measured: float) -> None:
        self.assigner.sample_capacity(worker, measured)

    def _resize(self) -> None:
        n = len(self.active)
        self.table.set_workers(n, resolve_theta(self.cfg.theta, n))

    def _on_add(self, worker: int, capacity: float | None) -> None:
        self.ring.add_worker(worker)
        self.assigner.add_worker(worker, capacity)
        self._resize()

    def _on_remove(self, worker: int) -> None:
        self.ring.remove_worker(worker)
        self.assigner.remove_worker(worker)
        self._resize()


def make_scheme(
    cfg: SchemeConfig,
    workers: Iterable[int],
    source_index: int = 0,
    capacities: dict[int, float] | None = None,
) -> GroupingScheme:
    cfg.validate()
    workers = list(workers)
    if cfg.kind == "sg":
        return ShuffleGrouping(workers, cfg, offset=source_index)
    if cfg.kind == "fg":
        return FieldsGrouping(workers, cfg)
    if cfg.kind == "pkg":
        return PartialKeyGrouping(workers, cfg)
    if cfg.kind == "dc":
        return DChoices(workers, cfg)
    if cfg.kind == "wc":
        return WChoices(workers, cfg)
    return FishGrouping(workers, cfg, capacities=capacities)
