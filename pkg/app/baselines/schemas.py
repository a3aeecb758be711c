from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ArmaOrder(BaseModel):
    model_config = ConfigDict(frozen=True)

    p: int = Field(ge=0)
    d: int = Field(ge=0, le=1)
    q: int = Field(ge=0)

    @model_validator(mode="after")
    def check_order(self):
        if self.d == 0 and self.p + self.q < 1:
            raise ValueError("an ARMA model without differencing needs p + q >= 1")
        return self

    @property
    def label(self) -> str:
        if self.d:
            return f"ARIMA({self.p},{self.d},{self.q})"
        return f"ARMA({self.p},{self.q})"


class ArmaModel(BaseModel):
    """`y_t = c + sum(phi_i y_{t-i}) + e_t + sum(theta_j e_{t-j})` on the d-times differenced series."""

    model_config = ConfigDict(frozen=True)

    order: ArmaOrder
    ar_coeffs: Tuple[float, ...] = ()
    ma_coeffs: Tuple[float, ...] = ()
    intercept: float = 0.0
    noise_variance: float = Field(default=1.0, gt=0.0)
    sse: Optional[float] = None
    n_effective: Optional[int] = None
    stationary: bool = True
    invertible: bool = True

    @model_validator(mode="after")
    def check_lengths(self):
        if len(self.ar_coeffs) != self.order.p or len(self.ma_coeffs) != self.order.q:
            raise ValueError(
                f"{self.order.label} needs {self.order.p} AR and {self.order.q} MA coefficients "
                f"(got {len(self.ar_coeffs)} and {len(self.ma_coeffs)})"
            )
        return self

    @property
    def explosive(self) -> bool:
        return not (self.stationary and self.invertible)

    @property
    def process_mean(self) -> float:
        return self.intercept / (1.0 - sum(self.ar_coeffs))
