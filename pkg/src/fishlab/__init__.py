"""Stream grouping schemes and a discrete-event simulator for comparing them."""

from .assigner import Assigner, WorkerEstimate
from .classifier import HotKeyTable, compute_dmin
from .detector import FrequencySketch
from .errors import ConfigError, EmptySketchError, FishlabError, ParseError, StateError
from .grouping import SCHEMES, GroupingScheme, SchemeConfig, make_scheme
from .hashring import HashRing, ring_hash
from .simulator import MetricsReport, SimConfig, WorkerEvent, run, simulate
from .workload import TupleEvent, ZipfEvolvingConfig, generate_zipf_evolving, read_tuple_file

__version__ = "0.1.0"

__all__ = [
    "Assigner",
    "ConfigError",
    "EmptySketchError",
    "FishlabError",
    "FrequencySketch",
    "GroupingScheme",
    "HashRing",
    "HotKeyTable",
    "MetricsReport",
    "ParseError",
    "SCHEMES",
    "SchemeConfig",
    "SimConfig",
    "StateError",
    "TupleEvent",
    "WorkerEstimate",
    "WorkerEvent",
    "ZipfEvolvingConfig",
    "compute_dmin",
    "generate_zipf_evolving",
    "make_scheme",
    "read_tuple_file",
    "ring_hash",
    "run",
    "simulate",
]
