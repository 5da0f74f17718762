"""Experiment matrices: config parsing, scenario fan-out, CSV/JSON output and
the plain-text comparison report.

Config files are INI-style ``key = value`` text with ``[section]`` headers;
list values are comma-separated. See ``configs/reproduction.ini``.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import logging
import math
import os
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import ConfigError, ParseError
from .grouping import ASSIGNMENT_MODES, SCHEMES, SchemeConfig
from .simulator import MetricsReport, SimConfig, WorkerEvent, alternating_capacities, run, uniform_capacities
from .workload import TupleEvent, ZipfEvolvingConfig, generate_zipf_evolving, read_tuple_file

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "scheme",
    "workers",
    "z",
    "seed",
    "makespan_s",
    "lat_mean_s",
    "lat_p50_s",
    "lat_p95_s",
    "lat_p99_s",
    "throughput_tps",
    "memory_units",
    "memory_ratio_fg",
    "mean_imbalance_s",
)

SEED_ENV = "FISHLAB_SEED"

# section -> key -> kind
_SCHEMA: dict[str, dict[str, str]] = {
    "matrix": {"schemes": "schemes", "workers": "ints", "skews": "floats", "seeds": "ints"},
    "workload": {
        "source": "str",
        "tuples": "int",
        "keys": "int",
        "phase_split": "float",
        "arrival_rate": "float",
    },
    "detector": {"k_max": "int", "epoch_size": "int", "alpha": "float"},
    "classifier": {"theta": "str", "dmin": "str"},
    "assigner": {"interval": "float", "noise_stddev": "float", "mode": "str", "capacity_sample_period": "float"},
    "ring": {"vnodes": "int", "seed": "int"},
    "simulation": {
        "service_time": "float",
        "capacities": "str",
        "sources": "int",
        "imbalance_sample_period": "float",
        "worker_events": "str",
    },
    "output": {"csv": "str", "json": "str"},
}


@dataclass(frozen=True)
class Scenario:
    scheme: str
    workers: int
    z: float | None
    seed: int

    @property
    def key(self) -> str:
        z = "file" if self.z is None else repr(self.z)
        return f"{self.scheme}/{self.workers}/{z}/{self.seed}"


@dataclass(frozen=True)
class ExperimentConfig:
    schemes: tuple[str, ...]
    worker_counts: tuple[int, ...]
    skews: tuple[float, ...]
    seeds: tuple[int, ...]
    source: str = "zipf"
    tuples: int = 200_000
    keys: int = 5000
    phase_split: float = 0.8
    arrival_rate: float = math.inf
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    capacity_sample_period: float | None = None
    noise_stddev: float = 0.0
    service_time: float = 0.001
    capacities: str = "uniform"
    sources: int = 1
    imbalance_sample_period: float = 1.0
    worker_events: tuple[WorkerEvent, ...] = ()
    csv_path: str = "results.csv"
    json_path: str = "summary.json"

    @property
    def from_file(self) -> bool:
        return self.source != "zipf"

    def scenarios(self) -> list[Scenario]:
        skews: Sequence[float | None] = (None,) if self.from_file else self.skews
        return [
            Scenario(scheme, n, z, seed)
            for scheme in self.schemes
            for n in self.worker_counts
            for z in skews
            for seed in self.seeds
        ]

    def workload(self, z: float, seed: int) -> ZipfEvolvingConfig:
        return ZipfEvolvingConfig(
            total_tuples=self.tuples,
            distinct_keys=self.keys,
            skew=z,
            phase_split=self.phase_split,
            arrival_rate=self.arrival_rate,
            rng_seed=seed,
        )

    def sim_config(self, sc: Scenario) -> SimConfig:
        if self.capacities == "alternating":
            caps = alternating_capacities(sc.workers, self.service_time)
        else:
            caps = uniform_capacities(sc.workers, self.service_time)
        return SimConfig(
            worker_count=sc.workers,
            scheme=replace(self.scheme, kind=sc.scheme, hash_seed=sc.seed),
            capacities=caps,
            source_count=self.sources,
            worker_events=self.worker_events,
            imbalance_sample_period=self.imbalance_sample_period,
            capacity_sample_period=self.capacity_sample_period,
            noise_stddev=self.noise_stddev,
            service_time=self.service_time,
            seed=sc.seed,
        )


# -- parsing -----------------------------------------------------------------


def _convert(section: str, key: str, kind: str, raw: str):
    name = key
    text = raw.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "str":
            if not text:
                raise ValueError("empty value")
            return text
        items = [t.strip() for t in text.split(",") if t.strip()]
        if not items:
            raise ValueError("list must be non-empty")
        if kind == "ints":
            return tuple(int(t) for t in items)
        if kind == "floats":
            return tuple(float(t) for t in items)
        if kind == "schemes":
            bad = [t for t in items if t.lower() not in SCHEMES]
            if bad:
                raise ValueError(f"unknown scheme {bad[0]!r}; expected {'|'.join(SCHEMES)}")
            return tuple(t.lower() for t in items)
    except ValueError as exc:
        raise ConfigError(name, f"[{section}] {exc}") from None
    raise AssertionError(kind)


def parse_worker_events(text: str) -> tuple[WorkerEvent, ...]:
    """``"<time> add|remove <worker> [<service time>]"`` items, comma-separated."""
    events = []
    for item in text.split(","):
        parts = item.split()
        if not parts:
            continue
        if len(parts) not in (3, 4):
            raise ConfigError("worker_events", f"cannot parse {item.strip()!r}")
        try:
            t = float(parts[0])
            w = int(parts[2])
            cap = float(parts[3]) if len(parts) == 4 else None
        except ValueError:
            raise ConfigError("worker_events", f"cannot parse {item.strip()!r}") from None
        events.append(WorkerEvent(t, parts[1].lower(), w, cap))
    return tuple(events)


def parse_config(text: str, base_dir: str | os.PathLike = ".") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep key case so unknown keys are reported verbatim
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", str(exc).splitlines()[0]) from None

    values: dict[str, dict[str, object]] = defaultdict(dict)
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(section, f"unknown section [{section}]")
        for key, raw in parser.items(section):
            kind = _SCHEMA[section].get(key)
            if kind is None:
                raise ConfigError(key, f"unknown key in [{section}]")
            values[section][key] = _convert(section, key, kind, raw)

    matrix = values["matrix"]
    for key in ("schemes", "workers", "seeds"):
        if key not in matrix:
            raise ConfigError(key, "[matrix] is missing this required key")
    wl = values["workload"]
    source = str(wl.get("source", "zipf"))
    if source != "zipf":
        path = Path(source)
        if not path.is_absolute():
            path = Path(base_dir) / path
        if not path.is_file():
            raise ConfigError("source", f"tuple file {source!r} not found")
        source = os.path.normpath(path)
    elif "skews" not in matrix:
        raise ConfigError("skews", "[matrix] is missing this required key")

    seeds = matrix["seeds"]
    env_seed = os.environ.get(SEED_ENV)
    if env_seed:
        try:
            seeds = (int(env_seed),)
        except ValueError:
            raise ConfigError(SEED_ENV, f"not an integer: {env_seed!r}") from None

    det, cls, asg, ring, sim, out = (values[s] for s in ("detector", "classifier", "assigner", "ring", "simulation", "output"))
    dmin: str | int = cls.get("dmin", "hot_mass")
    if dmin != "hot_mass":
        try:
            dmin = int(dmin)
        except ValueError:
            raise ConfigError("dmin", "expected 'hot_mass' or an integer") from None
    mode = asg.get("mode", "estimate")
    if mode not in ASSIGNMENT_MODES:
        raise ConfigError("mode", f"expected one of {', '.join(ASSIGNMENT_MODES)}")
    scheme = SchemeConfig(
        k_max=det.get("k_max", 1000),
        epoch_size=det.get("epoch_size", 1000),
        alpha=det.get("alpha", 0.2),
        theta=cls.get("theta", "1/4n"),
        dmin=dmin,
        vnodes=ring.get("vnodes", 16),
        ring_seed=ring.get("seed", 0),
        interval=asg.get("interval", 10.0),
        assignment=mode,
    )
    capacities = sim.get("capacities", "uniform")
    if capacities not in ("uniform", "alternating"):
        raise ConfigError("capacities", "expected 'uniform' or 'alternating'")

    def out_path(key: str, default: str) -> str:
        p = Path(str(out.get(key, default)))
        return os.path.normpath(p if p.is_absolute() else Path(base_dir) / p)

    cfg = ExperimentConfig(
        schemes=matrix["schemes"],
        worker_counts=matrix["workers"],
        skews=matrix.get("skews", ()),
        seeds=seeds,
        source=source,
        tuples=wl.get("tuples", 200_000),
        keys=wl.get("keys", 5000),
        phase_split=wl.get("phase_split", 0.8),
        arrival_rate=wl.get("arrival_rate", math.inf),
        scheme=scheme,
        capacity_sample_period=asg.get("capacity_sample_period"),
        noise_stddev=asg.get("noise_stddev", 0.0),
        service_time=sim.get("service_time", 0.001),
        capacities=capacities,
        sources=sim.get("sources", 1),
        imbalance_sample_period=sim.get("imbalance_sample_period", 1.0),
        worker_events=parse_worker_events(sim["worker_events"]) if "worker_events" in sim else (),
        csv_path=out_path("csv", "results.csv"),
        json_path=out_path("json", "summary.json"),
    )
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if any(n < 1 for n in cfg.worker_counts):
        raise ConfigError("workers", "worker counts must be positive")
    if not cfg.from_file:
        for z in cfg.skews:
            cfg.workload(z, 0).validate()
    if cfg.sources < 1:
        raise ConfigError("sources", "must be positive")
    if not cfg.service_time > 0:
        raise ConfigError("service_time", "must be positive")
    cfg.scheme.validate()
    for n in cfg.worker_counts:
        cfg.sim_config(Scenario(cfg.schemes[0], n, None, 0)).validate()


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, base_dir=p.parent)


# -- running -------------------------------------------------------------------


@lru_cache(maxsize=4)
def _cached_stream(source: str, wl: ZipfEvolvingConfig | None) -> tuple[TupleEvent, ...]:
    if wl is None:
        return tuple(read_tuple_file(source))
    return tuple(generate_zipf_evolving(wl))


def scenario_stream(cfg: ExperimentConfig, sc: Scenario) -> Sequence[TupleEvent]:
    wl = None if cfg.from_file else cfg.workload(sc.z, sc.seed)
    return _cached_stream(cfg.source, wl)


def _round(x: float) -> float:
    return float(f"{x:.9g}")


def report_row(sc: Scenario, m: MetricsReport) -> dict[str, object]:
    return {
        "scheme": sc.scheme,
        "workers": sc.workers,
        "z": sc.z,
        "seed": sc.seed,
        "makespan_s": _round(m.makespan),
        "lat_mean_s": _round(m.latency_mean),
        "lat_p50_s": _round(m.latency_p50),
        "lat_p95_s": _round(m.latency_p95),
        "lat_p99_s": _round(m.latency_p99),
        "throughput_tps": _round(m.throughput),
        "memory_units": m.memory_units,
        "memory_ratio_fg": _round(m.memory_ratio_vs_fg),
        "mean_imbalance_s": _round(max(m.mean_imbalance, 0.0)),
    }


def run_scenario(cfg: ExperimentConfig, sc: Scenario) -> dict[str, object]:
    log.info("running %s", sc.key)
    metrics = run(cfg.sim_config(sc), scenario_stream(cfg, sc))
    return report_row(sc, metrics)


def _run_one(args: tuple[ExperimentConfig, Scenario]) -> dict[str, object]:
    return run_scenario(*args)


def iter_results(cfg: ExperimentConfig, jobs: int = 1) -> Iterator[dict[str, object]]:
    """Rows in matrix order, regardless of completion order."""
    scenarios = cfg.scenarios()
    if jobs <= 1:
        for sc in scenarios:
            yield run_scenario(cfg, sc)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(_run_one, [(cfg, sc) for sc in scenarios])


def _csv_cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_csv(rows: Iterable[dict[str, object]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_csv_cell(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def format_summary(rows: Iterable[dict[str, object]]) -> str:
    summary = {}
    for row in rows:
        sc = Scenario(row["scheme"], row["workers"], row["z"], row["seed"])
        summary[sc.key] = {c: row[c] for c in CSV_COLUMNS}
    return json.dumps(summary, indent=2, sort_keys=True) + "\n"


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> list[dict[str, object]]:
    """Run the whole matrix, writing the CSV and JSON summary.

    Completed rows are flushed even when a later scenario fails; the
    exception is re-raised afterwards.
    """
    rows: list[dict[str, object]] = []
    try:
        for row in iter_results(cfg, jobs):
            rows.append(row)
    finally:
        _write(cfg.csv_path, format_csv(rows))
        _write(cfg.json_path, format_summary(rows))
    return rows


def _write(path: str, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# -- report --------------------------------------------------------------------


def read_results(path: str | os.PathLike) -> list[dict[str, object]]:
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise ParseError(f"cannot open {path}: {exc.strerror}") from None
    rows = []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise ParseError("CSV header does not match the results schema", 1)
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(CSV_COLUMNS):
                raise ParseError(f"expected {len(CSV_COLUMNS)} fields, got {len(rec)}", lineno)
            try:
                row: dict[str, object] = {
                    "scheme": rec[0],
                    "workers": int(rec[1]),
                    "z": float(rec[2]) if rec[2] else None,
                    "seed": int(rec[3]),
                    "memory_units": int(rec[10]),
                }
                for i, col in enumerate(CSV_COLUMNS):
                    if col not in row:
                        row[col] = float(rec[i])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if row["scheme"] not in SCHEMES:
                raise ParseError(f"unknown scheme {row['scheme']!r}", lineno)
            rows.append(row)
    return rows


def _mean(xs: list[float]) -> float:
    return sum(xs) / len(xs)


def comparison_tables(rows: Sequence[dict[str, object]]) -> dict[str, dict[tuple, dict[str, float]]]:
    """Per (workers, z): seed-averaged makespan / SG and memory / FG.

    Memory falls back to the stored ratio against distinct keys when the
    matrix has no FG run.
    """
    grouped: dict[tuple, dict[str, list[dict[str, object]]]] = defaultdict(lambda: defaultdict(list))
    for row in rows:
        grouped[(row["workers"], row["z"])][row["scheme"]].append(row)

    makespan: dict[tuple, dict[str, float]] = {}
    memory: dict[tuple, dict[str, float]] = {}
    for cell, by_scheme in grouped.items():
        mk = {s: _mean([r["makespan_s"] for r in rs]) for s, rs in by_scheme.items()}
        mem = {s: _mean([r["memory_units"] for r in rs]) for s, rs in by_scheme.items()}
        memr = {s: _mean([r["memory_ratio_fg"] for r in rs]) for s, rs in by_scheme.items()}
        makespan[cell] = {s: mk[s] / mk["sg"] for s in mk} if "sg" in mk else {}
        memory[cell] = {s: mem[s] / mem["fg"] for s in mem} if "fg" in mem else memr
    return {"makespan": makespan, "memory": memory}


def _cell_sort(cell: tuple) -> tuple:
    workers, z = cell
    return (workers, -1.0 if z is None else z)


def emit_report(rows: Sequence[dict[str, object]]) -> str:
    tables = comparison_tables(rows)
    present = [s for s in SCHEMES if any(r["scheme"] == s for r in rows)]
    titles = {"makespan": "Makespan normalized to SG", "memory": "Memory normalized to FG"}
    lines: list[str] = []
    for name in ("makespan", "memory"):
        table = tables[name]
        header = ["workers", "z", *present]
        body = []
        for cell in sorted(table, key=_cell_sort):
            workers, z = cell
            vals = table[cell]
            body.append(
                [str(workers), "-" if z is None else f"{z:g}", *(f"{vals[s]:.3f}" if s in vals else "n/a" for s in present)]
            )
        widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
        lines.append(titles[name])
        lines.append("  ".join(h.rjust(w) for h, w in zip(header, widths)))
        lines.extend("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in body)
        lines.append("")
    return "\n".join(lines)
