"""
Domain models for the per-source UCB bandit.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

from ...shared.exceptions import ConfigurationError


@dataclass
class UcbArm:
    """Pull count and reward sum of one source."""
    pulls: int = 0
    reward_sum: float = 0.0

    @property
    def mean(self) -> float:
        return self.reward_sum / self.pulls if self.pulls else 0.0

    def to_dict(self) -> Dict[str, float]:
        return {"pulls": self.pulls, "reward_sum": self.reward_sum, "mean": self.mean}


@dataclass
class BanditState:
    """K arms plus the exploration coefficient and floor."""
    arms: List[UcbArm]
    exploration: float = 1.0
    probability_floor: float = 0.01
    clamp_warnings: int = 0
    pull_history: List[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.arms:
            raise ConfigurationError("a bandit needs at least one arm")
        if self.exploration < 0.0:
            raise ConfigurationError("exploration coefficient must be non-negative")

    @classmethod
    def create(
        cls, num_arms: int, exploration: float = 1.0, probability_floor: float = 0.01
    ) -> 'BanditState':
        if num_arms < 1:
            raise ConfigurationError(f"a bandit needs at least one arm, got {num_arms}")
        return cls([UcbArm() for _ in range(num_arms)], exploration, probability_floor)

    @property
    def num_arms(self) -> int:
        return len(self.arms)

    @property
    def total_pulls(self) -> int:
        return sum(arm.pulls for arm in self.arms)

    @property
    def epsilon(self) -> float:
        """Per-arm probability floor (floor / K)."""
        return self.probability_floor / self.num_arms

    def untried(self) -> List[int]:
        return [i for i, arm in enumerate(self.arms) if arm.pulls == 0]

    def to_dict(self) -> Dict[str, object]:
        return {
            "arms": [arm.to_dict() for arm in self.arms],
            "total_pulls": self.total_pulls,
            "exploration": self.exploration,
            "clamp_warnings": self.clamp_warnings,
        }


@dataclass(frozen=True)
class RegretTrace:
    """Cumulative pseudo-regret per pull plus the analytic upper bound."""
    cumulative: List[float]
    analytic_bound: Optional[float]

    @property
    def final(self) -> float:
        return self.cumulative[-1] if self.cumulative else 0.0
