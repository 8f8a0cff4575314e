"""Ambient RF source models: what power is available at the antenna, when.

Three source shapes cover the measurement campaigns this simulator mirrors:
a constant level (bench signal generator, or the quiet broadcast floor seen
by a small monopole), a bounded random fluctuation (broadcast-band pickup on
a larger antenna, which wanders inside a fixed dB window), and playback of a
recorded trace.

Fluctuation sampling is counter-based: the level inside dwell window k is a
pure function of (seed, k), so sampling at arbitrary times in any order is
reproducible bit for bit.  There is no hidden RNG stream to advance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from .errors import QuantityError, TraceError
from .quantities import PowerDbm, PowerWatts, dbm_to_watts

__all__ = [
    "ConstantSource",
    "FluctuatingSource",
    "TraceSource",
    "RfSourceModel",
    "AntennaPreset",
    "antenna_presets",
    "sample_power",
    "sample_window",
    "mean_power_watts",
    "load_trace_csv",
]

# Default dwell for fluctuating sources. The underlying field measurements
# report a range, not a correlation time; one minute per level is the
# documented modeling choice and is configurable everywhere it appears.
DEFAULT_DWELL_S = 60.0

_MASK64 = (1 << 64) - 1


def _u01(seed: int, index: int) -> float:
    """Uniform double in [0, 1) from a splitmix64 hash of (seed, index)."""
    z = (seed * 0x9E3779B97F4A7C15 + index * 0xBF58476D1CE4E5B9 + 0x94D049BB133111EB) & _MASK64
    # splitmix64 finalizer, applied twice to decorrelate similar keys
    for _ in range(2):
        z ^= z >> 30
        z = (z * 0xBF58476D1CE4E5B9) & _MASK64
        z ^= z >> 27
        z = (z * 0x94D049BB133111EB) & _MASK64
        z ^= z >> 31
    return (z >> 11) * (1.0 / (1 << 53))


@dataclass(frozen=True)
class ConstantSource:
    """Fixed available power, forever."""

    level_dbm: float

    def __post_init__(self):
        PowerDbm(self.level_dbm)


@dataclass(frozen=True)
class FluctuatingSource:
    """Power uniform in dBm over [lo, hi], redrawn every dwell seconds.

    The draw for window k = floor(t / dwell) depends only on (seed, k).
    """

    lo_dbm: float
    hi_dbm: float
    dwell_s: float = DEFAULT_DWELL_S
    seed: int = 0

    def __post_init__(self):
        PowerDbm(self.lo_dbm)
        PowerDbm(self.hi_dbm)
        if not self.hi_dbm >= self.lo_dbm:
            raise QuantityError(
                f"fluctuation bounds inverted: lo={self.lo_dbm} hi={self.hi_dbm}"
            )
        if not self.dwell_s > 0:
            raise QuantityError(f"dwell must be positive, got {self.dwell_s}")


@dataclass(frozen=True)
class TraceSource:
    """Playback of (time_s, power_dbm) samples with step-hold semantics.

    The level at time t is the sample at the greatest timestamp <= t.
    Sampling past the last timestamp raises unless hold_last is set.
    """

    samples: tuple[tuple[float, float], ...]
    hold_last: bool = False
    # end of the recording; defaults to the last timestamp
    t_end_s: float = field(default=-1.0)

    def __post_init__(self):
        if not self.samples:
            raise TraceError("trace must contain at least one sample")
        prev = None
        for t, p in self.samples:
            if math.isnan(t) or math.isinf(t):
                raise TraceError(f"trace timestamp must be finite, got {t!r}")
            PowerDbm(p)
            if prev is not None and not t > prev:
                raise TraceError(
                    f"trace timestamps must be strictly increasing at t={t!r}"
                )
            prev = t
        if self.samples[0][0] != 0.0:
            raise TraceError(
                f"trace must start at t=0, got t={self.samples[0][0]!r}"
            )
        if self.t_end_s < 0.0:
            object.__setattr__(self, "t_end_s", self.samples[-1][0])
        elif self.t_end_s < self.samples[-1][0]:
            raise TraceError("trace t_end precedes the last sample")


RfSourceModel = Union[ConstantSource, FluctuatingSource, TraceSource]


@dataclass(frozen=True)
class AntennaPreset:
    """A named antenna plus the ambient environment it was characterized in."""

    name: str
    model: RfSourceModel


def antenna_presets(seed: int = 0, dwell_s: float = DEFAULT_DWELL_S) -> dict[str, AntennaPreset]:
    """The two built-in antenna environments.

    "monopole": small whip, roughly constant -50 dBm broadcast pickup.
    "ribbon_dipole": half-wave ribbon dipole, -43 to -33 dBm fluctuation.
    """
    return {
        "monopole": AntennaPreset("monopole", ConstantSource(-50.0)),
        "ribbon_dipole": AntennaPreset(
            "ribbon_dipole",
            FluctuatingSource(-43.0, -33.0, dwell_s=dwell_s, seed=seed),
        ),
    }


def sample_window(model: RfSourceModel, t: float) -> tuple[float, float]:
    """Return (level_dbm, valid_until_s) for the window containing time t.

    valid_until is the first instant the level may change; it is +inf for a
    constant source.  The engine uses it to avoid resampling every step.
    """
    if t < 0 or math.isnan(t) or math.isinf(t):
        raise QuantityError(f"sample time must be finite and >= 0, got {t!r}")
    if isinstance(model, ConstantSource):
        return model.level_dbm, math.inf
    if isinstance(model, FluctuatingSource):
        k = int(t // model.dwell_s)
        u = _u01(model.seed & _MASK64, k)
        level = model.lo_dbm + (model.hi_dbm - model.lo_dbm) * u
        return level, (k + 1) * model.dwell_s
    if isinstance(model, TraceSource):
        samples = model.samples
        if t > model.t_end_s and not model.hold_last:
            raise TraceError(
                f"sample time {t!r} is past the end of the trace "
                f"({model.t_end_s!r}) and hold_last is off"
            )
        # binary search for greatest timestamp <= t
        lo, hi = 0, len(samples) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if samples[mid][0] <= t:
                lo = mid
            else:
                hi = mid - 1
        if lo + 1 < len(samples):
            until = samples[lo + 1][0]
        elif model.hold_last:
            until = math.inf
        else:
            until = model.t_end_s
        return samples[lo][1], until
    raise TypeError(f"unknown source model {model!r}")


def sample_power(model: RfSourceModel, t: float) -> PowerDbm:
    """Available power at the antenna at time t, in dBm."""
    level, _ = sample_window(model, t)
    return PowerDbm(level)


def mean_power_watts(model: RfSourceModel, horizon_s: float, dt_s: float) -> PowerWatts:
    """Arithmetic mean of the available power in watts over [0, horizon).

    Sampled on a regular grid of spacing dt; the mean is taken in watts,
    not dBm, because energy adds in watts.
    """
    if not horizon_s > 0 or not dt_s > 0:
        raise QuantityError("horizon and dt must be positive")
    n = max(1, math.ceil(horizon_s / dt_s))
    total = 0.0
    for k in range(n):
        total += dbm_to_watts(sample_power(model, k * dt_s))
    return PowerWatts(total / n)


def load_trace_csv(path: str | Path, hold_last: bool = False) -> TraceSource:
    """Load a trace from CSV with the exact header ``time_s,power_dbm``."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceError(f"{path}: empty trace file") from None
        if [h.strip() for h in header] != ["time_s", "power_dbm"]:
            raise TraceError(
                f"{path}: expected header 'time_s,power_dbm', got {','.join(header)!r}"
            )
        samples: list[tuple[float, float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise TraceError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                t, p = float(row[0]), float(row[1])
            except ValueError:
                raise TraceError(f"{path}:{lineno}: non-numeric value") from None
            samples.append((t, p))
    try:
        return TraceSource(tuple(samples), hold_last=hold_last)
    except TraceError as exc:
        raise TraceError(f"{path}: {exc}") from None
