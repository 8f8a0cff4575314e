"""Storage tier: supercapacitors, DC-DC converters, and the charge pump
between them.

Capacitors integrate current with explicit fixed steps; leakage is a
parallel resistance.  Converters are behavioral: a startup threshold, a
minimum operating voltage with hysteresis between the two, a fixed
efficiency, and an output setpoint.  The stage-one converter is modeled as
a constant-current pump that moves charge from the harvest cap into the
reservoir cap whenever it is running.

Every step function also returns the energy bookkeeping for that step, and
the terms are chosen so they close exactly against the capacitor energy
change: charge energy is current times midpoint voltage, leak energy is
start voltage times midpoint voltage over the leak resistance.  Both are
second-order accurate; using the exact decomposition keeps the global
conservation check meaningful over millions of steps instead of drowning
it in integrator drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConverterOffError, QuantityError
from .quantities import Capacitance, Current, Duration, Resistance, Voltage, cap_energy

__all__ = [
    "Supercap",
    "DcDcConverter",
    "TransferPolicy",
    "cap_euler",
    "cap_step",
    "dcdc_update_running",
    "dcdc_input_current",
    "transfer_step",
]

# Reservoir caps in this class survive to 4.5 V; the pump stops there.
CAP2_V_MAX_DEFAULT = 4.5


@dataclass(frozen=True)
class Supercap:
    """A supercapacitor: capacitance, present voltage, leak resistance."""

    c: float
    v: float
    r_leak: float = math.inf
    name: str = "cap"

    def __post_init__(self):
        Capacitance(self.c)
        Resistance(self.r_leak)
        v = float(self.v)
        if math.isnan(v) or math.isinf(v) or v < 0:
            raise QuantityError(f"{self.name}: voltage must be finite and >= 0, got {v!r}")

    @property
    def energy(self) -> float:
        return float(cap_energy(self.c, self.v))


@dataclass(frozen=True)
class DcDcConverter:
    """Behavioral boost converter with startup/operate hysteresis.

    Starting needs v_in >= v_startup; once running it keeps going down to
    v_min_operate.  enabled is the external control line; running is the
    converter's own state.

    The default cutoff sits below the 0.3 V floor the energy budget plans
    around: the converter holds up slightly past the usable minimum, so a
    cycle sized to land exactly at the floor finishes instead of dropping
    out on its last few milliseconds.
    """

    v_startup: float = 0.5
    v_min_operate: float = 0.25
    v_out_setpoint: float = 2.45
    efficiency: float = 0.9
    enabled: bool = False
    running: bool = False

    def __post_init__(self):
        Voltage(self.v_startup)
        Voltage(self.v_min_operate)
        Voltage(self.v_out_setpoint)
        if self.v_startup < self.v_min_operate:
            raise QuantityError(
                f"v_startup {self.v_startup!r} below v_min_operate {self.v_min_operate!r}"
            )
        e = self.efficiency
        if math.isnan(e) or not 0.0 < e <= 0.9:
            raise QuantityError(f"efficiency must be in (0, 0.9], got {e!r}")


@dataclass(frozen=True)
class TransferPolicy:
    """Hysteretic harvest-cap to reservoir-cap transfer rule.

    Pumping starts once the harvest cap reaches start_v, draws pump_current
    from it, and pauses below stop_v until start_v is reached again.
    pump_current sets transfer duration, not transferred energy.
    """

    start_v: float = 0.5
    stop_v: float = 0.3
    pump_current: float = 1e-3

    def __post_init__(self):
        Voltage(self.start_v)
        Voltage(self.stop_v)
        if self.start_v < self.stop_v:
            raise QuantityError(
                f"start_v {self.start_v!r} below stop_v {self.stop_v!r}"
            )
        i = float(self.pump_current)
        if math.isnan(i) or math.isinf(i) or not i > 0:
            raise QuantityError(f"pump_current must be positive, got {i!r}")


def cap_euler(v: float, c: float, r_leak: float, i_in: float, dt: float) -> tuple[float, float]:
    """Plain-float capacitor update kernel shared by cap_step and the
    simulation engine's inner loop.

    Explicit update dv = (i_in - v / r_leak) * dt / c, clamped at zero.
    Returns (v_new, leaked) with leaked chosen so that
    i_in * v_mid * dt - leaked equals the stored energy change exactly
    (v_mid is the step's midpoint voltage).
    """
    i_leak = v / r_leak  # r_leak = inf gives 0.0, no branch needed
    v2 = v + (i_in - i_leak) * dt / c
    if v2 < 0.0:
        v2 = 0.0
    v_mid = 0.5 * (v + v2)
    leaked = i_leak * v_mid * dt
    if v2 == 0.0:
        # Clamped: the cap gave up exactly its stored energy plus whatever
        # came in; attribute the remainder of the demanded outflow nowhere.
        leaked = min(leaked, 0.5 * c * v * v + (i_in if i_in > 0.0 else 0.0) * v_mid * dt)
    return v2, leaked


def cap_step(cap: Supercap, i_in: float, dt: float) -> tuple[Supercap, float]:
    """Advance a capacitor one step under net terminal current i_in.

    Validating wrapper over cap_euler; returns the updated cap and the
    energy lost to leakage this step.
    """
    Duration(dt)
    i = float(i_in)
    if math.isnan(i) or math.isinf(i):
        raise QuantityError(f"current must be finite, got {i!r}")
    v2, leaked = cap_euler(cap.v, cap.c, cap.r_leak, i, dt)
    return replace(cap, v=v2), leaked


def dcdc_update_running(conv: DcDcConverter, v_in: float) -> DcDcConverter:
    """Apply the startup/operate hysteresis for the present input voltage."""
    v = float(v_in)
    running = conv.enabled and (conv.running or v >= conv.v_startup) and v >= conv.v_min_operate
    if running == conv.running:
        return conv
    return replace(conv, running=running)


def dcdc_input_current(conv: DcDcConverter, v_in: float, i_load: float) -> Current:
    """Input current drawn to supply i_load at the output setpoint.

    Power balance with fixed efficiency: v_in * i_in * eff = v_out * i_load.
    """
    if not conv.running:
        raise ConverterOffError("converter is not running; no load can be supplied")
    v = float(v_in)
    if not v > 0 or math.isnan(v) or math.isinf(v):
        raise QuantityError(f"v_in must be positive, got {v!r}")
    i = float(i_load)
    if i < 0 or math.isnan(i) or math.isinf(i):
        raise QuantityError(f"i_load must be finite and >= 0, got {i!r}")
    return Current(conv.v_out_setpoint * i / (conv.efficiency * v))


def transfer_step(
    cap1: Supercap,
    cap2: Supercap,
    conv1: DcDcConverter,
    pol: TransferPolicy,
    dt: float,
    cap2_v_max: float = CAP2_V_MAX_DEFAULT,
) -> tuple[Supercap, Supercap, DcDcConverter, float, float]:
    """Move one step's worth of charge from cap1 into cap2 through conv1.

    Returns (cap1, cap2, conv1, moved, lost): moved is the energy deposited
    into cap2, lost the converter's conversion loss.  The pump draws
    pol.pump_current from cap1, never below pol.stop_v in one step, and
    pauses while cap2 sits at its ceiling.  Leakage is not applied here;
    step the caps separately for that.
    """
    Duration(dt)
    conv1 = dcdc_update_running(conv1, cap1.v)
    if conv1.running and cap1.v <= pol.stop_v:
        # Drained to the floor: the converter drops out and must see
        # start_v again before pumping resumes.
        conv1 = replace(conv1, running=False)
    if not conv1.running or dt == 0.0 or cap2.v >= cap2_v_max:
        return cap1, cap2, conv1, 0.0, 0.0
    # Charge leaving cap1, limited so v1 stops at the converter floor.
    q = min(pol.pump_current * dt, cap1.c * (cap1.v - pol.stop_v))
    v1_new = cap1.v - q / cap1.c
    v1_mid = 0.5 * (cap1.v + v1_new)
    e_extracted = q * v1_mid  # equals cap1's stored-energy drop exactly
    moved = conv1.efficiency * e_extracted
    lost = e_extracted - moved
    v2_new = math.sqrt(cap2.v * cap2.v + 2.0 * moved / cap2.c)
    if v1_new <= pol.stop_v:
        conv1 = replace(conv1, running=False)
    return (
        replace(cap1, v=v1_new),
        replace(cap2, v=v2_new),
        conv1,
        moved,
        lost,
    )
