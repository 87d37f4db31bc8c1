"""Vehicle constants shared by the simulator, planner and controllers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class VehicleParams:
    length: float = 4.8
    width: float = 2.0
    lf: float = 1.45  # centre of gravity to front axle
    lr: float = 1.45
    max_steer: float = 0.7
    a_throttle: float = 5.0  # acceleration at full throttle, m/s^2
    a_brake: float = 8.0  # deceleration at full brake, m/s^2
    drag: float = 0.0004  # quadratic resistance, 1/m

    @property
    def wheelbase(self) -> float:
        return self.lf + self.lr

    def as_array(self) -> np.ndarray:
        """Layout expected by the kernels."""
        return np.array(
            [self.lf, self.lr, self.max_steer, self.a_throttle, self.a_brake, self.drag]
        )


CAR = VehicleParams()
