"""Model parameters shared by the microscopic and mesoscopic levels."""
from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import InvalidParameterError
from .grid import require_same_grid
from .kernels import Kernel


@dataclass(frozen=True)
class ModelParams:
    """Mortality m, dispersal kernel a+, competition kernel a-, and the
    interaction scaling epsilon (competition enters all rates as eps * a-).
    """

    mortality: float
    dispersal: Kernel
    competition: Kernel
    epsilon: float = 1.0

    def __post_init__(self):
        if self.mortality < 0:
            raise InvalidParameterError("mortality must be nonnegative")
        if not 0.0 <= self.epsilon <= 1.0:
            raise InvalidParameterError("epsilon must lie in [0, 1]")
        require_same_grid(self.dispersal.grid, self.competition.grid)

    @property
    def grid(self):
        return self.dispersal.grid

    def with_epsilon(self, eps: float) -> "ModelParams":
        return replace(self, epsilon=eps)
