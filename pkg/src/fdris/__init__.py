"""Joint precoding and reflecting-surface phase design for full-duplex cells.

The package splits along the natural seams of the problem: scenario
configuration, channel generation, rate evaluation, the weighted-MSE
machinery, the two phase minimizers, the alternating solver, and an
experiment harness with a CLI on top.
"""

from .config import ScenarioConfig, default_config
from .channels import ChannelSet, generate_realization
from .network import PhaseState, PrecoderSet, RateBreakdown, sum_rate
from .solver import SolverConfig, SolverReport, solve
from .harness import ResultTable, Scheme, SweepSpec, run_scheme, run_sweep

__version__ = "0.1.0"

__all__ = [
    "ScenarioConfig", "default_config",
    "ChannelSet", "generate_realization",
    "PhaseState", "PrecoderSet", "RateBreakdown", "sum_rate",
    "SolverConfig", "SolverReport", "solve",
    "ResultTable", "Scheme", "SweepSpec", "run_scheme", "run_sweep",
    "__version__",
]
