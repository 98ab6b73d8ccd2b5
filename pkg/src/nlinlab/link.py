"""Link description shared by propagation, receiver DSP and the models."""

from dataclasses import dataclass, replace

from .errors import ConfigError
from .fiber import FiberParams
from .roadm import RoadmConfig


@dataclass(frozen=True)
class LinkConfig:
    """A chain of identical amplified spans with optional add/drop."""

    span_count: int
    fiber: FiberParams
    roadm: RoadmConfig
    launch_power_per_channel: float  # W

    def __post_init__(self):
        if self.span_count < 0:
            raise ConfigError("span_count must be non-negative")
        if self.launch_power_per_channel <= 0:
            raise ConfigError("launch power must be positive")

    @property
    def span_length(self) -> float:
        return self.fiber.length

    @property
    def amplifier_gain_db(self) -> float:
        """Lumped gain exactly compensating the span loss."""
        return self.fiber.span_loss_db

    def truncated(self, span_count: int) -> "LinkConfig":
        return replace(self, span_count=span_count)

    def linearized(self) -> "LinkConfig":
        """Same link with the Kerr coefficient set to zero."""
        return replace(self, fiber=replace(self.fiber, gamma=0.0))
