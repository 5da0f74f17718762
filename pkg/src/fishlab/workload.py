"""Stream sources: the time-evolving Zipf generator and tuple-file ingestion.

The generator produces two phases. The first ``phase_split * N`` tuples draw
key ``i`` with probability proportional to ``i**-z``; the remainder draw it
with probability proportional to ``(k - i + 1)**-z``, so the hottest key flips
from ``1`` to ``k`` part way through the stream.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, ParseError


@dataclass(frozen=True, slots=True)
class TupleEvent:
    arrival_time: float
    key: bytes

    def __post_init__(self) -> None:
        if not self.key:
            raise ValueError("tuple key must be non-empty")
        if self.arrival_time < 0:
            raise ValueError("arrival_time must be non-negative")


@dataclass(frozen=True)
class ZipfEvolvingConfig:
    """Parameters of the two-phase Zipf stream.

    ``arrival_rate`` may be ``math.inf`` for a batch arrival where every tuple
    shows up at time zero.
    """

    total_tuples: int
    distinct_keys: int
    skew: float
    phase_split: float = 0.8
    arrival_rate: float = math.inf
    rng_seed: int = 0

    def validate(self) -> None:
        if self.total_tuples <= 0:
            raise ConfigError("total_tuples", "must be a positive integer")
        if self.distinct_keys <= 0:
            raise ConfigError("distinct_keys", "must be a positive integer")
        if not self.skew >= 0:
            raise ConfigError("skew", "must be >= 0")
        if not 0.0 < self.phase_split <= 1.0:
            raise ConfigError("phase_split", "must lie in (0, 1]")
        if not self.arrival_rate > 0:
            raise ConfigError("arrival_rate", "must be positive")
        if self.total_tuples >= 2 and math.floor(self.phase_split * self.total_tuples) < 1:
            raise ConfigError("phase_split", "first phase would be empty")


def zipf_probabilities(distinct_keys: int, skew: float) -> np.ndarray:
    """Exact probabilities of keys ``1..k`` under ``Pr[i] ∝ i**-skew``."""
    ranks = np.arange(1, distinct_keys + 1, dtype=np.float64)
    weights = ranks ** -skew
    return weights / weights.sum()


def _inverse_cdf_draw(rng: np.random.Generator, cdf: np.ndarray, n: int) -> np.ndarray:
    # returns 0-based ranks
    u = rng.random(n)
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, len(cdf) - 1)


def generate_zipf_ranks(cfg: ZipfEvolvingConfig) -> np.ndarray:
    """Integer key ids (1-based) of the stream, without timestamps."""
    cfg.validate()
    k = cfg.distinct_keys
    cdf = np.cumsum(zipf_probabilities(k, cfg.skew))
    cdf[-1] = 1.0
    n1 = math.floor(cfg.phase_split * cfg.total_tuples)
    n2 = cfg.total_tuples - n1
    rng = np.random.default_rng(cfg.rng_seed)
    first = _inverse_cdf_draw(rng, cdf, n1) + 1
    # phase 2: Pr[i] ∝ (k - i + 1)^-z, i.e. i = k - r for a 0-based zipf rank r
    second = k - _inverse_cdf_draw(rng, cdf, n2)
    return np.concatenate([first, second]).astype(np.int64)


def generate_zipf_evolving(cfg: ZipfEvolvingConfig) -> list[TupleEvent]:
    ranks = generate_zipf_ranks(cfg)
    rate = cfg.arrival_rate
    # cache the byte rendering of each distinct id
    names: dict[int, bytes] = {}
    events = []
    for j, r in enumerate(ranks.tolist()):
        key = names.get(r)
        if key is None:
            key = names[r] = str(r).encode("ascii")
        events.append(TupleEvent(j / rate, key))
    return events


def read_tuple_file(path: str | os.PathLike) -> list[TupleEvent]:
    """Parse a ``<arrival_time>\\t<key>`` file.

    Blank lines and ``#`` comments are skipped. Raises :class:`ParseError`
    with the offending line number on malformed or out-of-order records.
    """
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot open tuple file {path}: {exc.strerror}") from exc

    events: list[TupleEvent] = []
    last = -math.inf
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2 or not parts[1]:
                raise ParseError("expected '<arrival_time>\\t<key>'", lineno)
            try:
                t = float(parts[0])
            except ValueError:
                raise ParseError(f"bad arrival time {parts[0]!r}", lineno) from None
            if not math.isfinite(t) or t < 0:
                raise ParseError(f"arrival time must be finite and >= 0, got {parts[0]!r}", lineno)
            if t < last:
                raise ParseError(f"arrival time {t} decreases (previous {last})", lineno)
            last = t
            events.append(TupleEvent(t, parts[1].encode("utf-8")))
    return events


def write_tuple_file(path: str | os.PathLike, events: Iterable[TupleEvent]) -> int:
    """Write events in the tuple-file format; returns the record count."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ev in events:
            fh.write(f"{ev.arrival_time!r}\t{ev.key.decode('utf-8')}\n")
            n += 1
    return n


def distinct_keys(events: Sequence[TupleEvent]) -> int:
    return len({ev.key for ev in events})
