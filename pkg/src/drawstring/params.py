"""Input parameters and solved-constant records shared by both constructions."""
from dataclasses import asdict, dataclass, field

import numpy as np


class StageError(RuntimeError):
    """A construction stage failed; `stage` names the step."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class DrawstringSpec:
    """Inputs (k, eps, delta, r0) plus the construction method.

    r1_max optionally caps the outer radius; both constructions accept any
    smaller admissible radius, which is used to compare them at a common scale.
    """
    k: float = 0.0
    epsilon: float = 0.1
    delta: float = 0.1
    r0: float = 1e-3
    method: str = "B"
    r1_max: float = None

    def __post_init__(self):
        for name in ("epsilon", "delta", "r0"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")
        if not np.isfinite(self.k):
            raise ValueError("k must be finite")
        if self.delta >= 1.0:
            raise ValueError("delta must be < 1")
        if self.method not in ("A", "B"):
            raise ValueError("method must be 'A' or 'B'")
        if self.r1_max is not None and not self.r1_max > 0:
            raise ValueError("r1_max must be positive")


@dataclass
class SolvedParams:
    """Resolved constants of a construction with the checks they passed."""
    method: str
    values: dict
    checks: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)
