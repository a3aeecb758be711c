from pydantic import BaseModel, ConfigDict, Field


class AttendanceRegression(BaseModel):
    """Linear map from attendance to pulse volume: `R_sg = slope * attendance + intercept`."""

    model_config = ConfigDict(frozen=True)

    slope: float = Field(allow_inf_nan=False)
    intercept: float = Field(allow_inf_nan=False)
    pearson_r: float = Field(ge=-1.0, le=1.0)
    n_samples: int = Field(ge=2)

    def predict(self, attendance: float) -> float:
        return self.slope * attendance + self.intercept


class SigmaPrior(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean_sigma: float = Field(gt=0.0, allow_inf_nan=False)
    n_samples: int = Field(ge=1)
