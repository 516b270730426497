"""Day-long forecast and realized series on a fixed interval grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .empc import Forecasts
from .errors import InputError

INTERVAL_MINUTES = 5
INTERVALS_PER_DAY = 24 * 60 // INTERVAL_MINUTES


@dataclass(frozen=True)
class DayProfile:
    """Per-interval series in pu.

    ``forecast`` feeds the optimizer, ``realized`` drives state integration.
    Horizons running past the last interval hold the final row.
    """
    forecast: Forecasts
    realized: Forecasts
    interval_minutes: int = INTERVAL_MINUTES

    def __post_init__(self):
        if self.forecast.steps != self.realized.steps:
            raise InputError("forecast and realized series differ in length")

    @property
    def n_intervals(self) -> int:
        return self.forecast.steps

    @property
    def dt(self) -> float:
        return self.interval_minutes / 60.0

    def window(self, start: int, steps: int) -> Forecasts:
        return self.forecast.window(start, steps)

    def head(self, n: int) -> "DayProfile":
        return DayProfile(self.forecast.window(0, n), self.realized.window(0, n), self.interval_minutes)

    def with_noise(self, rel_std: float, seed: int) -> "DayProfile":
        """Forecast = realized * (1 + noise) on demand and solar; zero std is a no-op."""
        if rel_std == 0:
            return self
        rng = np.random.default_rng(seed)
        r = self.realized

        def noisy(a):
            return np.maximum(a * (1.0 + rel_std * rng.standard_normal(a.shape)), 0.0)

        p_ds = noisy(r.p_ds)
        scale = np.where(r.p_ds > 0, p_ds / np.where(r.p_ds > 0, r.p_ds, 1.0), 1.0)
        fc = Forecasts(p_ds, r.q_ds * scale, noisy(r.p_gs), r.p_dc, r.q_dc, r.dc_a, r.dc_b, r.dc_c)
        return DayProfile(fc, r, self.interval_minutes)
