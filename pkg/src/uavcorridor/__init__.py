"""Coverage analysis of RF-powered receivers served by UAV base stations
hovering along an aerial corridor.

Energy, SINR and joint coverage are available analytically
(:mod:`uavcorridor.analysis`) and by simulation
(:mod:`uavcorridor.montecarlo`); parameter studies live in
:mod:`uavcorridor.experiments`.
"""

from .model import NetworkConfig, ConfigError, dbm_to_watt, watt_to_dbm
from .analysis import (CoverageResult, Method, energy_coverage_exact,
                       energy_coverage_approx, comm_coverage, joint_coverage)
from .montecarlo import McEstimate, simulate, simulate_conditioned

__version__ = "0.1.0"

__all__ = [
    "NetworkConfig", "ConfigError", "dbm_to_watt", "watt_to_dbm",
    "CoverageResult", "Method", "energy_coverage_exact",
    "energy_coverage_approx", "comm_coverage", "joint_coverage",
    "McEstimate", "simulate", "simulate_conditioned", "__version__",
]
