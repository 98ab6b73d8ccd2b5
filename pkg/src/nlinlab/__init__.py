"""nlinlab: nonlinear interference noise workbench for flexible WDM networks.

A split-step simulation of multi-channel fiber transmission with a
coherent receiver chain that isolates cross- and multi-channel
interference, noise separation into phase and circular parts,
semi-analytical interference-PSD models, and a time-domain
pulse-collision analysis, tied together by scenario orchestration and
a command-line interface.
"""

from .signals import Signal, Spectrum, TransferFunction
from .transmitter import ChannelPlan, ChannelSpec, ModulationFormat, QPSK, QAM16, GAUSSIAN
from .fiber import FiberParams, PmdRealization, StepControl
from .link import LinkConfig
from .roadm import RoadmConfig
from .receiver import FdeCoefficients, SymbolFrame
from .metrics import NoiseReport, PhaseTrace
from .models import ModulationMoments, NliPsd
from .collisions import CollisionIndex, CollisionType, PulseSpec
from .scenario import ResultRow, Scenario

__version__ = "0.1.0"

__all__ = [
    "Signal", "Spectrum", "TransferFunction",
    "ChannelPlan", "ChannelSpec", "ModulationFormat", "QPSK", "QAM16", "GAUSSIAN",
    "FiberParams", "PmdRealization", "StepControl",
    "LinkConfig", "RoadmConfig",
    "FdeCoefficients", "SymbolFrame",
    "NoiseReport", "PhaseTrace",
    "ModulationMoments", "NliPsd",
    "CollisionIndex", "CollisionType", "PulseSpec",
    "ResultRow", "Scenario",
    "__version__",
]
