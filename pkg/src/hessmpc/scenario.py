"""Synthetic net-load scenarios and forecast-error injection.

The generator composes three 1-second component processes — Weibull-driven
wind with a fast turbulence band, a clear-sky photovoltaic envelope under a
slow cloud-transmission process, and a three-shift industrial load — and
returns their net load (load minus renewables). Four archetypes rescale the
components: renewable oversupply, an extreme calm with renewables forced to
zero inside a window, an approximately balanced month, and a sustained
deficit. Everything is deterministic in (config, seed).

Forecasts are built by aggregating the actuals to the layer granularity and
adding persistent (AR(1)) zero-mean noise scaled so that the normalized MAE
matches the requested accuracy exactly on the generated series.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtr

from .timeseries import TimeSeries, resample

ARCHETYPES = ("oversupply", "extreme_calm", "balanced", "deficit")

# Component scale factors per archetype: (wind, pv, load).
_ARCHETYPE_SCALES = {
    "oversupply": (1.15, 1.15, 0.60),
    "extreme_calm": (0.9, 0.9, 1.0),
    "balanced": (0.80, 0.90, 1.0),
    "deficit": (0.32, 0.45, 1.25),
}


@dataclass
class ScenarioConfig:
    seed: int = 0
    duration_days: float = 7.0
    wind_capacity: float = 425.0
    pv_capacity: float = 375.0
    load_peak: float = 200.0
    archetype: str = "balanced"
    forecast_accuracy: dict[str, float] = field(
        default_factory=lambda: {"L1": 0.9, "L2": 0.9, "L3": 0.9}
    )
    calm_window_days: tuple[float, float] | None = None
    # Mild surplus of the balanced archetype, MW. Storage round trips are
    # lossy, so an energy-balance window that the plant can actually hold
    # must fund those losses; zero starves the stores over a week.
    balanced_surplus_mw: float = 18.0

    def __post_init__(self):
        if self.archetype not in ARCHETYPES:
            raise ValueError(f"unknown archetype '{self.archetype}'")
        for layer, acc in self.forecast_accuracy.items():
            if not 0.0 < acc <= 1.0:
                raise ValueError(f"accuracy for {layer} must lie in (0, 1]")


def _ar1(rng: np.random.Generator, n: int, phi: float, sigma: float = 1.0) -> np.ndarray:
    white = rng.standard_normal(n) * sigma * np.sqrt(1.0 - phi * phi)
    return lfilter([1.0], [1.0, -phi], white)


def _interp_to_seconds(coarse: np.ndarray, step_s: float, n_seconds: int) -> np.ndarray:
    t_coarse = np.arange(coarse.size) * step_s
    t_fine = np.arange(n_seconds, dtype=np.float64)
    return np.interp(t_fine, t_coarse, coarse)


def _wind_power(rng: np.random.Generator, n_seconds: int, capacity: float) -> np.ndarray:
    n_hours = n_seconds // 3600 + 2
    z = _ar1(rng, n_hours, phi=0.92)
    quantile = ndtr(z)
    # Weibull speeds (shape 2, scale 8.5 m/s), persistent through the AR chain.
    speeds = 8.5 * np.sqrt(-np.log(np.clip(1.0 - quantile, 1e-12, 1.0)))
    v = _interp_to_seconds(speeds, 3600.0, n_seconds)
    v = v * (1.0 + 0.06 * _ar1(rng, n_seconds, phi=0.9))
    np.clip(v, 0.0, None, out=v)
    v_in, v_rated, v_out = 3.0, 12.0, 25.0
    frac = np.clip((v - v_in) / (v_rated - v_in), 0.0, 1.0) ** 3
    frac[v > v_out] = 0.0
    return capacity * frac


def _pv_power(rng: np.random.Generator, n_seconds: int, capacity: float) -> np.ndarray:
    t = np.arange(n_seconds, dtype=np.float64)
    day_frac = (t % 86400.0) / 86400.0
    daylight = np.clip(np.sin(np.pi * (day_frac - 0.25) / 0.5), 0.0, None)
    clear_sky = daylight**1.3
    n_coarse = n_seconds // 600 + 2
    cloud = _ar1(rng, n_coarse, phi=0.97)
    transmission = 0.25 + 0.75 / (1.0 + np.exp(-1.2 * cloud - 0.8))
    trans = _interp_to_seconds(transmission, 600.0, n_seconds)
    flicker = 1.0 + 0.04 * _ar1(rng, n_seconds, phi=0.7)
    return capacity * clear_sky * np.clip(trans * flicker, 0.0, 1.0)


def _load_power(rng: np.random.Generator, n_seconds: int, peak: float) -> np.ndarray:
    t = np.arange(n_seconds, dtype=np.float64)
    hour = (t % 86400.0) / 3600.0
    day = np.floor(t / 86400.0)
    shift = np.where(hour < 6.0, 0.72, np.where(hour < 14.0, 1.0, np.where(hour < 22.0, 0.9, 0.72)))
    weekly = np.where((day % 7) >= 5, 0.85, 1.0)
    slow = 1.0 + 0.05 * _interp_to_seconds(_ar1(rng, n_seconds // 3600 + 2, 0.9), 3600.0, n_seconds)
    fast = 1.0 + 0.01 * _ar1(rng, n_seconds, phi=0.8)
    return peak * 0.9 * shift * weekly * slow * fast


def synthesize(config: ScenarioConfig) -> TimeSeries:
    """Generate the 1-second net-load actuals for a scenario."""
    n_seconds = int(round(config.duration_days * 86400.0))
    rng = np.random.default_rng(config.seed)
    wind_scale, pv_scale, load_scale = _ARCHETYPE_SCALES[config.archetype]
    wind = _wind_power(rng, n_seconds, config.wind_capacity * wind_scale)
    pv = _pv_power(rng, n_seconds, config.pv_capacity * pv_scale)
    load = _load_power(rng, n_seconds, config.load_peak * load_scale)
    if config.archetype == "extreme_calm":
        window = config.calm_window_days or (
            config.duration_days * 0.25,
            config.duration_days * 0.65,
        )
        start = int(round(window[0] * 86400.0))
        stop = int(round(window[1] * 86400.0))
        wind[start:stop] = 0.0
        pv[start:stop] = 0.0
    net = load - wind - pv
    if config.archetype == "balanced":
        # An energy-balance window by construction: intra-day structure and
        # hourly swings stay, but multi-day energy trends (which no finite
        # store can absorb) are removed, and a small surplus funds the
        # storage round-trip losses.
        net = net - _centered_mean(net, 36 * 3600)
        net -= net.mean() + config.balanced_surplus_mw
    return TimeSeries(0.0, 1.0, net)


def _centered_mean(x: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average with edge clamping, O(n) via prefix sums."""
    n = x.size
    half = min(window, n) // 2
    c = np.concatenate([[0.0], np.cumsum(x)])
    left = np.clip(np.arange(n) - half, 0, n)
    right = np.clip(np.arange(n) + half + 1, 0, n)
    return (c[right] - c[left]) / (right - left)


def make_forecast(
    actuals: TimeSeries, granularity_s: float, accuracy: float, seed: int
) -> TimeSeries:
    """Forecast at ``granularity_s`` whose normalized MAE is 1 - accuracy.

    The error process is AR(1) with coefficient 0.8 at the forecast step
    (persistent errors stress the layered dispatch hardest), demeaned and
    scaled so that mean(|error|) / mean(|actual|) equals 1 - accuracy
    exactly on this series. An all-zero actual series is degenerate and
    returned unchanged.
    """
    if not 0.0 < accuracy <= 1.0:
        raise ValueError("accuracy must lie in (0, 1]")
    agg = resample(actuals, granularity_s)
    if accuracy == 1.0:
        return agg
    scale = float(np.abs(agg.values).mean())
    if scale == 0.0:
        return agg
    rng = np.random.default_rng(seed)
    noise = _ar1(rng, len(agg), phi=0.8)
    noise -= noise.mean()
    mae = float(np.abs(noise).mean())
    if mae == 0.0:
        return agg
    noise *= (1.0 - accuracy) * scale / mae
    return TimeSeries(agg.start_epoch, agg.dt, agg.values + noise)


def realized_accuracy(actuals: TimeSeries, forecast: TimeSeries) -> float:
    """1 - normalized MAE of a forecast against aggregated actuals."""
    agg = resample(actuals, forecast.dt)
    scale = float(np.abs(agg.values).mean())
    if scale == 0.0:
        return float("nan")
    return 1.0 - float(np.abs(forecast.values - agg.values).mean()) / scale
