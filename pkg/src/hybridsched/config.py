"""Run configuration: system constants and mechanism selection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class NoticeStrategy(str, Enum):
    N = "N"
    CUA = "CUA"
    CUP = "CUP"


class ArrivalStrategy(str, Enum):
    PAA = "PAA"
    SPAA = "SPAA"


BASELINE = "FCFS-EASY"

MECHANISM_NAMES = (
    "N&PAA",
    "N&SPAA",
    "CUA&PAA",
    "CUA&SPAA",
    "CUP&PAA",
    "CUP&SPAA",
)


@dataclass(frozen=True)
class MechanismConfig:
    """One of the six mechanisms, or the plain FCFS/EASY baseline (None axes)."""

    notice_strategy: Optional[NoticeStrategy]
    arrival_strategy: Optional[ArrivalStrategy]
    warning_duration: int = 120
    cup_checkpoint_aligned: bool = True

    @property
    def is_baseline(self) -> bool:
        return self.arrival_strategy is None

    @property
    def name(self) -> str:
        if self.is_baseline:
            return BASELINE
        return f"{self.notice_strategy.value}&{self.arrival_strategy.value}"

    @classmethod
    def parse(cls, name: str, warning_duration: int = 120) -> "MechanismConfig":
        name = name.strip()
        if name.upper() in (BASELINE, "BASELINE"):
            return cls(None, None, warning_duration)
        if name not in MECHANISM_NAMES:
            raise ValueError(
                f"unknown mechanism '{name}'; valid names: {', '.join(MECHANISM_NAMES)} or {BASELINE}"
            )
        notice, arrival = name.split("&")
        return cls(NoticeStrategy(notice), ArrivalStrategy(arrival), warning_duration)


@dataclass(frozen=True)
class SystemConfig:
    """Cluster-wide constants; defaults mirror the reference setup."""

    capacity: int = 4392
    mtbf: int = 86400
    checkpoint_cost_small: int = 600
    checkpoint_cost_large: int = 1200
    checkpoint_node_threshold: int = 1024
    checkpoint_scale: float = 1.0
    reservation_grace: int = 600
    on_demand_setup: int = 0

    def checkpoint_cost(self, nodes: int) -> int:
        if nodes < self.checkpoint_node_threshold:
            return self.checkpoint_cost_small
        return self.checkpoint_cost_large

    def checkpoint_interval(self, nodes: int) -> int:
        """Daly first-order optimal interval, scaled, in whole seconds."""
        delta = self.checkpoint_cost(nodes)
        tau = self.checkpoint_scale * math.sqrt(2.0 * delta * self.mtbf)
        return max(1, int(round(tau)))
