"""aidsim: microscopic traffic simulation of alternative intersection designs
under mixed human-driven / connected-automated traffic, with the experiment
statistics (bootstrap intervals, ANOVA, Tukey grouping) used to compare them.
"""

from .config import ConfigError, ScenarioConfig, load, preset
from .control import (SignalController, SignalState, default_cdi_plan,
                      default_ddi_plan, state_at)
from .dynamics import (CAV_PARAMS, HV_PARAMS, DriverParams, LeaderContext,
                       cah_accel, car_following_accel, confusion_speed_filter,
                       desired_gap, eidm_accel, equilibrium_gap, hv_accel,
                       idm_accel, lane_change_decision, signal_approach_accel)
from .engine import (CAV, HV, RunRecord, World, assign_class,
                     assign_confusion, delay_bin_means, detector_bins,
                     generate_arrivals, measure_delay, measure_throughput,
                     record_digest, run_experiment, run_replication, step)
from .netmodel import NetworkError, RoadNetwork
from .rng import RandomStream
from .scenarios import build_cdi, build_ddi, build_network, build_rcut
from .stats import SampleGroup, TukeyResult, anova_oneway, bootstrap_ci, tukey_hsd

__version__ = "0.1.0"

__all__ = [
    "CAV", "CAV_PARAMS", "ConfigError", "DriverParams", "HV", "HV_PARAMS",
    "LeaderContext", "NetworkError", "RandomStream", "RoadNetwork",
    "RunRecord", "SampleGroup", "ScenarioConfig", "SignalController",
    "SignalState", "TukeyResult", "World", "anova_oneway", "assign_class",
    "assign_confusion", "bootstrap_ci", "build_cdi", "build_ddi",
    "build_network", "build_rcut", "cah_accel", "car_following_accel",
    "confusion_speed_filter", "default_cdi_plan", "default_ddi_plan",
    "delay_bin_means", "desired_gap", "detector_bins", "eidm_accel",
    "equilibrium_gap", "generate_arrivals", "hv_accel", "idm_accel",
    "lane_change_decision", "load", "measure_delay", "measure_throughput",
    "preset", "record_digest", "run_experiment", "run_replication",
    "signal_approach_accel", "state_at", "step", "tukey_hsd",
]
