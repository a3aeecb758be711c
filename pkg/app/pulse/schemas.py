import math
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

PULSE_SIGMA_MIN = 0.25
PULSE_SIGMA_MAX = 6.0


class EventPulse(BaseModel):
    """
    Gaussian burst of one event.

    `amplitude` is the pulse volume R_sg (traffic units x hours); the peak
    height is `amplitude / (sigma * sqrt(2 pi))`. `center` is in hours on
    whichever axis the pulse is placed on: hour-of-day of the event date when
    stored, hours since the series origin while fitting or predicting.
    """

    model_config = ConfigDict(frozen=True)

    amplitude: float = Field(ge=0.0, allow_inf_nan=False)
    center: float = Field(allow_inf_nan=False)
    sigma: float = Field(gt=0.0, allow_inf_nan=False)

    @property
    def peak(self) -> float:
        return self.amplitude / (self.sigma * math.sqrt(2.0 * math.pi))

    def shifted(self, hours: float) -> "EventPulse":
        return self.model_copy(update={"center": self.center + hours})


class PulseFitResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    pulse: EventPulse
    sse: float = Field(ge=0.0)
    converged: bool
    n_samples: int = 0
    iterations: int = 0
    r2: Optional[float] = None
