"""Uniformly sampled power trajectories and the resampling rules used everywhere.

A ``TimeSeries`` is the single carrier for net-load actuals and layer
forecasts: a start epoch, a fixed step, and a float64 value array in MW.
Downsampling is an energy-preserving block mean; upsampling is a zero-order
hold, so a down/up round trip of a constant series is the identity and the
energy integral is preserved exactly up to float rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, GapError, ParseError

CSV_HEADER = "epoch_s,power_mw"


@dataclass
class TimeSeries:
    """Uniform power series in MW.

    Parameters
    ----------
    start_epoch : float
        Epoch of the first sample, seconds.
    dt : float
        Sample step in seconds, > 0.
    values : ndarray
        Power samples in MW; stored as a contiguous float64 array.
    """

    start_epoch: float
    dt: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.values.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if self.values.size and not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")

    def __len__(self) -> int:
        return self.values.size

    @property
    def duration_s(self) -> float:
        return self.values.size * self.dt

    def energy_mwh(self) -> float:
        """Signed energy integral of the series in MWh."""
        return float(self.values.sum()) * self.dt / 3600.0

    def slice(self, start_idx: int, n: int) -> np.ndarray:
        """View of ``n`` samples starting at ``start_idx`` (no copy)."""
        if start_idx < 0 or start_idx + n > self.values.size:
            raise AlignmentError(
                f"slice [{start_idx}, {start_idx + n}) outside series of "
                f"length {self.values.size}"
            )
        return self.values[start_idx : start_idx + n]


def resample(ts: TimeSeries, new_dt: float) -> TimeSeries:
    """Resample to ``new_dt`` seconds.

    Downsampling requires ``new_dt`` to be an integer multiple of ``ts.dt``
    and the length to divide evenly; values are block means, which preserves
    the energy integral. Upsampling requires ``ts.dt`` to be an integer
    multiple of ``new_dt`` and repeats samples (zero-order hold).
    """
    if new_dt <= 0:
        raise ValueError("new_dt must be positive")
    if new_dt == ts.dt:
        return TimeSeries(ts.start_epoch, ts.dt, ts.values.copy())

    if new_dt > ts.dt:
        ratio = new_dt / ts.dt
        factor = int(round(ratio))
        if abs(ratio - factor) > 1e-9:
            raise AlignmentError(
                f"new_dt {new_dt} is not an integer multiple of dt {ts.dt}"
            )
        if ts.values.size % factor:
            raise AlignmentError(
                f"series length {ts.values.size} not divisible by {factor}"
            )
        vals = ts.values.reshape(-1, factor).mean(axis=1)
        return TimeSeries(ts.start_epoch, new_dt, vals)

    ratio = ts.dt / new_dt
    factor = int(round(ratio))
    if abs(ratio - factor) > 1e-9:
        raise AlignmentError(
            f"dt {ts.dt} is not an integer multiple of new_dt {new_dt}"
        )
    vals = np.repeat(ts.values, factor)
    return TimeSeries(ts.start_epoch, new_dt, vals)


def ingest_csv(path) -> TimeSeries:
    """Load a ``epoch_s,power_mw`` CSV into a TimeSeries.

    The contract is strict: UTF-8, LF endings, the exact header, uniform dt
    inferred from the first two rows, strictly monotone timestamps. A step
    mismatch raises :class:`GapError` with the offending timestamp; malformed
    rows raise :class:`ParseError` with the line number.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\n")
        if header.rstrip("\r") != CSV_HEADER:
            raise ParseError(f"expected header '{CSV_HEADER}', got '{header}'", line=1)
        epochs: list[float] = []
        powers: list[float] = []
        for lineno, raw in enumerate(fh, start=2):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ParseError(f"expected 2 fields, got {len(parts)}", line=lineno)
            try:
                epochs.append(float(parts[0]))
                powers.append(float(parts[1]))
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc

    if not epochs:
        raise ParseError("file contains a header but no samples", line=1)
    if len(epochs) == 1:
        return TimeSeries(epochs[0], 1.0, np.array(powers))

    ep = np.asarray(epochs)
    dt = ep[1] - ep[0]
    if dt <= 0:
        raise GapError("timestamps not strictly increasing", epoch_s=ep[1])
    steps = np.diff(ep)
    bad = np.nonzero(np.abs(steps - dt) > 1e-6 * max(dt, 1.0))[0]
    if bad.size:
        raise GapError(
            f"step {steps[bad[0]]:g}s differs from inferred dt {dt:g}s",
            epoch_s=ep[bad[0] + 1],
        )
    return TimeSeries(ep[0], float(dt), np.array(powers))


def write_csv(path, ts: TimeSeries) -> None:
    """Write a TimeSeries using the same contract :func:`ingest_csv` reads."""
    epochs = ts.start_epoch + ts.dt * np.arange(ts.values.size)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for e, v in zip(epochs.tolist(), ts.values.tolist()):
            fh.write(f"{e:.0f},{v!r}\n")
