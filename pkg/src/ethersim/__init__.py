"""Discrete-event CSMA/CD simulator with R/S Hurst analysis of its traffic."""

from .engine import Engine, RunSummary, rng_stream, to_ticks
from .experiment import ExperimentConfig, load_config, run_sweep
from .mac import EthernetBus, EthernetParams, Frame, backoff_slots
from .selfsim import HurstEstimate, gen_fgn, gen_white_noise, hurst_estimate, pox_points, rs_statistic
from .simulation import NetworkSimulation
from .trace import DeliveryLog, TrafficTrace, aggregate, rescale
from .workload import Distribution, WorkloadConfig, segment_file

__version__ = "0.1.0"
