from enum import Enum
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator


class ComponentLabel(str, Enum):
    MW = "mw"
    AW = "aw"
    EW = "ew"
    MSA = "msa"
    ASA = "asa"
    ESA = "esa"
    MSU = "msu"
    ASU = "asu"
    ESU = "esu"


class DayClass(str, Enum):
    WEEKDAY = "weekday"
    SATURDAY = "saturday"
    SUNDAY = "sunday"

    @property
    def labels(self) -> Tuple[ComponentLabel, ComponentLabel, ComponentLabel]:
        return DAY_CLASS_LABELS[self]

    @property
    def day_indices(self) -> Tuple[int, ...]:
        """Day-of-week indices (1=Monday) covered by this class."""
        return DAY_CLASS_DAYS[self]


DAY_CLASS_LABELS = {
    DayClass.WEEKDAY: (ComponentLabel.MW, ComponentLabel.AW, ComponentLabel.EW),
    DayClass.SATURDAY: (ComponentLabel.MSA, ComponentLabel.ASA, ComponentLabel.ESA),
    DayClass.SUNDAY: (ComponentLabel.MSU, ComponentLabel.ASU, ComponentLabel.ESU),
}

DAY_CLASS_DAYS = {
    DayClass.WEEKDAY: (1, 2, 3, 4, 5),
    DayClass.SATURDAY: (6,),
    DayClass.SUNDAY: (7,),
}

# morning / afternoon / evening bumps
ANCHOR_HOURS = (9.0, 15.0, 21.0)

SIGMA_MIN = 0.25
SIGMA_MAX = 12.0


def day_class_of(label: ComponentLabel) -> DayClass:
    for day_class, labels in DAY_CLASS_LABELS.items():
        if label in labels:
            return day_class
    raise KeyError(label)


class GaussianComponent(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: ComponentLabel
    peak: float = Field(ge=0.0, description="R_c, traffic units")
    center: float = Field(description="t_c, hours on the day axis (may exceed 24)")
    sigma: float = Field(gt=0.0, le=SIGMA_MAX, description="sigma_c, hours")


class WeeklyProfileModel(BaseModel):
    """Nine Gaussian bumps: morning/afternoon/evening for weekdays, Saturday and Sunday."""

    model_config = ConfigDict(frozen=True)

    components: Tuple[GaussianComponent, ...]

    @field_validator("components")
    @classmethod
    def validate_components(cls, components):
        labels = [c.label for c in components]
        if len(labels) != len(ComponentLabel) or set(labels) != set(ComponentLabel):
            missing = sorted(set(l.value for l in ComponentLabel) - set(l.value for l in labels))
            raise ValueError(
                f"Weekly profile needs each of the nine labels exactly once (missing={missing}, got {len(labels)})."
            )
        order = list(ComponentLabel)
        return tuple(sorted(components, key=lambda c: order.index(c.label)))

    def component(self, label: ComponentLabel) -> GaussianComponent:
        for c in self.components:
            if c.label == label:
                return c
        raise KeyError(label)

    @property
    def max_peak(self) -> float:
        return max(c.peak for c in self.components)

    def to_vector(self) -> List[float]:
        """Flat [R, t, sigma] * 9 in label order."""
        out: List[float] = []
        for c in self.components:
            out.extend((c.peak, c.center, c.sigma))
        return out

    @classmethod
    def from_vector(cls, vector) -> "WeeklyProfileModel":
        values = [float(v) for v in vector]
        if len(values) != 3 * len(ComponentLabel):
            raise ValueError(f"expected {3 * len(ComponentLabel)} parameters, got {len(values)}")
        return cls(
            components=tuple(
                GaussianComponent(label=label, peak=values[3 * i], center=values[3 * i + 1], sigma=values[3 * i + 2])
                for i, label in enumerate(ComponentLabel)
            )
        )


class FitConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    max_iterations: int = Field(default=50_000, gt=0)
    learning_rate: float = Field(default=0.5, gt=0.0)
    convergence_tol: float = Field(default=1e-8, gt=0.0)
    restarts: int = Field(default=3, gt=0)
    method: Literal["levenberg_marquardt", "gradient_descent"] = "levenberg_marquardt"
    damping: float = Field(default=1e-3, gt=0.0)
    seed: int = 0


class WeeklyFitResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    model: WeeklyProfileModel
    objective: float = Field(ge=0.0)
    converged: bool
    iterations: int
    n_samples: int
    history: Tuple[float, ...] = ()
    restart: int = 0

    @property
    def rmse(self) -> float:
        return (self.objective / self.n_samples) ** 0.5 if self.n_samples else 0.0


class WeeklyFitDiagnostics(BaseModel):
    """What the model document keeps from a weekly fit."""

    model_config = ConfigDict(frozen=True)

    objective: float
    converged: bool
    iterations: int
    n_samples: int
    restart: Optional[int] = None
