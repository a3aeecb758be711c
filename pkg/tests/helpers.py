from datetime import datetime, timedelta, timezone

import numpy as np

from app.daily.schemas import ANCHOR_HOURS, ComponentLabel, GaussianComponent, WeeklyProfileModel, day_class_of
from app.timeseries.schemas import EventInfo

CET = timezone(timedelta(hours=1))
TRAIN_END = datetime(2013, 12, 16, tzinfo=CET)
TEST_END = datetime(2013, 12, 23, tzinfo=CET)


def random_weekly(seed: int, peak=(95.0, 105.0), sigma=(1.1, 1.5), drift=0.75) -> WeeklyProfileModel:
    """Nine well-separated bumps scattered around the anchor hours."""
    rng = np.random.default_rng(seed)
    components = []
    for label in ComponentLabel:
        anchor = ANCHOR_HOURS[day_class_of(label).labels.index(label)]
        components.append(
            GaussianComponent(
                label=label,
                peak=float(rng.uniform(*peak)),
                center=float(anchor + rng.uniform(-drift, drift)),
                sigma=float(rng.uniform(*sigma)),
            )
        )
    return WeeklyProfileModel(components=tuple(components))


def flat_weekly(peak: float = 0.0, sigma: float = 2.0) -> WeeklyProfileModel:
    return WeeklyProfileModel(
        components=tuple(
            GaussianComponent(label=label, peak=peak, center=ANCHOR_HOURS[i % 3], sigma=sigma)
            for i, label in enumerate(ComponentLabel)
        )
    )


def event(when: datetime, attendance: int = 30000, hours: float = 2.25, kind: str = "serie_a") -> EventInfo:
    return EventInfo(commencement=when, duration_hours=hours, kind=kind, attendance=attendance)
