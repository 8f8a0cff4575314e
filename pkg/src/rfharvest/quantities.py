"""Unit-tagged scalar quantities and the handful of conversions everything
else is built on.

Each quantity is a float subclass, so arithmetic costs nothing and existing
math works, but construction validates the domain and annotations make unit
mistakes visible in signatures and tests.  Results of mixed arithmetic
degrade to plain float; re-wrap at API boundaries where the tag matters.

Conventions: power in dBm is referenced to 1 mW, energy follows the
capacitor relation E = C * V^2 / 2, and all values are double precision.
"""

from __future__ import annotations

import math

from .errors import QuantityError

__all__ = [
    "PowerDbm",
    "PowerWatts",
    "Voltage",
    "Current",
    "Capacitance",
    "Energy",
    "Duration",
    "Frequency",
    "Resistance",
    "dbm_to_watts",
    "watts_to_dbm",
    "cap_energy",
    "usable_energy",
]


class _Scalar(float):
    """Validated float. Subclasses narrow the domain via class attributes."""

    __slots__ = ()
    _lo: float | None = None  # lower bound, None means unbounded
    _lo_open: bool = False  # True: value must be strictly above _lo
    _allow_inf: bool = False  # +inf permitted (e.g. leak resistance)

    def __new__(cls, value: float):
        v = float(value)
        if math.isnan(v):
            raise QuantityError(f"{cls.__name__} must be a number, got nan")
        if math.isinf(v) and not (cls._allow_inf and v > 0):
            raise QuantityError(f"{cls.__name__} must be finite, got {v!r}")
        if cls._lo is not None:
            if cls._lo_open:
                if not v > cls._lo:
                    raise QuantityError(
                        f"{cls.__name__} must be > {cls._lo}, got {v!r}"
                    )
            elif v < cls._lo:
                raise QuantityError(
                    f"{cls.__name__} must be >= {cls._lo}, got {v!r}"
                )
        return float.__new__(cls, v)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({float.__repr__(self)})"


class PowerDbm(_Scalar):
    """RF power level in dBm (10 * log10(P / 1 mW))."""


class PowerWatts(_Scalar):
    """Power in watts; never negative."""

    _lo = 0.0


class Voltage(_Scalar):
    """Potential in volts."""


class Current(_Scalar):
    """Current in amperes; sign follows the caller's reference direction."""


class Capacitance(_Scalar):
    """Capacitance in farads; strictly positive."""

    _lo = 0.0
    _lo_open = True


class Energy(_Scalar):
    """Energy in joules. Deltas may be negative; stored energy never is."""


class Duration(_Scalar):
    """Time span in seconds; never negative."""

    _lo = 0.0


class Frequency(_Scalar):
    """Frequency in hertz; strictly positive."""

    _lo = 0.0
    _lo_open = True


class Resistance(_Scalar):
    """Resistance in ohms; strictly positive, +inf allowed (open circuit)."""

    _lo = 0.0
    _lo_open = True
    _allow_inf = True


def dbm_to_watts(p_dbm: float) -> PowerWatts:
    """Convert a dBm level to watts: P_W = 1e-3 * 10^(p/10)."""
    p = float(p_dbm)
    if math.isnan(p) or math.isinf(p):
        raise QuantityError(f"dBm level must be finite, got {p!r}")
    return PowerWatts(10.0 ** (p / 10.0) * 1e-3)


def watts_to_dbm(p_watts: float) -> PowerDbm:
    """Convert watts to dBm. Undefined for p <= 0."""
    p = float(p_watts)
    if math.isnan(p) or math.isinf(p):
        raise QuantityError(f"power must be finite, got {p!r}")
    if p <= 0.0:
        raise QuantityError(f"dBm is undefined for non-positive power {p!r}")
    return PowerDbm(10.0 * math.log10(p / 1e-3))


def cap_energy(c: float, v: float) -> Energy:
    """Energy stored on a capacitor: E = C * V^2 / 2."""
    c = float(c)
    if not c > 0.0 or math.isnan(c) or math.isinf(c):
        raise QuantityError(f"capacitance must be positive and finite, got {c!r}")
    v = float(v)
    if math.isnan(v) or math.isinf(v):
        raise QuantityError(f"voltage must be finite, got {v!r}")
    return Energy(0.5 * c * v * v)


def usable_energy(c: float, v_hi: float, v_lo: float) -> Energy:
    """Energy released by discharging C from v_hi down to v_lo.

    This is what a converter with some minimum input voltage can actually
    extract from a supercapacitor, as opposed to the total stored energy.
    """
    c = float(c)
    if not c > 0.0 or math.isnan(c) or math.isinf(c):
        raise QuantityError(f"capacitance must be positive and finite, got {c!r}")
    hi = float(v_hi)
    lo = float(v_lo)
    if math.isnan(hi) or math.isinf(hi) or math.isnan(lo) or math.isinf(lo):
        raise QuantityError("voltages must be finite")
    if hi < lo:
        raise QuantityError(
            f"voltage interval is inverted: v_hi={hi!r} < v_lo={lo!r}"
        )
    return Energy(0.5 * c * (hi * hi - lo * lo))
