"""Digital power management: the voltage monitor, the measure/transmit
cycle, and the published load budget.

Two cooperating supervisors share one converter enable line (wired-OR): a
nanopower voltage monitor that sleeps on the reservoir cap, wakes on a slow
schedule to compare the voltage against a go threshold, and raises enable
when there is enough energy; and the main controller, which once booted
asserts its own enable, takes over (the handoff), runs the sensor and the
radio, and kills the converter on the way out so the node returns to
near-zero drain.

The monitor is supplied directly by the reservoir cap and is dead below its
minimum operating voltage: below that the node draws nothing at all.  The
controller and its peripherals are supplied through the second converter
and are gated by MOSFET load switches whose conduction loss is charged to
the cycle.

States: Cold, Sleep, Check, Boot, Handoff, Measure, Transmit, Shutdown.
Monitor brown-out resets the monitor's own schedule but does not tear down
a running cycle; the cycle lives and dies with the converter.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from .errors import QuantityError, ScenarioError, TransitionError
from .quantities import Voltage
from .storage import DcDcConverter, Supercap, cap_step, dcdc_input_current, dcdc_update_running

__all__ = [
    "NodeState",
    "LoadProfile",
    "MonitorConfig",
    "LoadSwitch",
    "NodeStateMachine",
    "CycleReport",
    "table1_profiles",
    "cycle_energy",
    "required_go_voltage",
    "resolve_go_threshold",
    "monitor_step",
    "run_cycle",
    "CyclePlan",
    "build_cycle_plan",
]


class NodeState(enum.Enum):
    COLD = "Cold"
    SLEEP = "Sleep"
    CHECK = "Check"
    BOOT = "Boot"
    HANDOFF = "Handoff"
    MEASURE = "Measure"
    TRANSMIT = "Transmit"
    SHUTDOWN = "Shutdown"


#: States in which the node is doing something on the fine timescale.
ACTIVE_STATES = frozenset(
    {
        NodeState.CHECK,
        NodeState.BOOT,
        NodeState.HANDOFF,
        NodeState.MEASURE,
        NodeState.TRANSMIT,
        NodeState.SHUTDOWN,
    }
)

#: States belonging to a controller-owned cycle.
CYCLE_STATES = frozenset(
    {
        NodeState.BOOT,
        NodeState.HANDOFF,
        NodeState.MEASURE,
        NodeState.TRANSMIT,
        NodeState.SHUTDOWN,
    }
)


@dataclass(frozen=True)
class LoadProfile:
    """One row of the measured load budget: rail voltage, current, on-time."""

    name: str
    v: float
    i: float
    t: float

    def __post_init__(self):
        Voltage(self.v)
        if not self.v > 0:
            raise QuantityError(f"{self.name}: rail voltage must be positive")
        i = float(self.i)
        if math.isnan(i) or math.isinf(i) or not i > 0:
            raise QuantityError(f"{self.name}: current must be positive, got {i!r}")
        t = float(self.t)
        if math.isnan(t) or math.isinf(t) or not t > 0:
            raise QuantityError(f"{self.name}: on-time must be positive, got {t!r}")

    @property
    def energy(self) -> float:
        """Energy consumed at the rail: V * I * T."""
        return self.v * self.i * self.t


def table1_profiles() -> tuple[LoadProfile, ...]:
    """The measured per-activity load budget of the reference node.

    The monitor row covers the periodic voltage check; the controller row
    covers the whole supervised cycle; sensor and radio rows cover one
    measurement and one transmission.
    """
    return (
        LoadProfile("monitor_active", 1.8, 0.01e-3, 10.0),
        LoadProfile("controller_active", 1.8, 0.01e-3, 8.0),
        LoadProfile("sensor", 3.3, 0.55e-3, 5.0),
        LoadProfile("zigbee", 3.3, 35e-3, 2.7),
    )


def cycle_energy(profiles: tuple[LoadProfile, ...]) -> float:
    """Total load-side energy of one full wake/measure/transmit cycle."""
    return sum(p.energy for p in profiles)


def required_go_voltage(e_cycle: float, c: float, v_floor: float, efficiency: float) -> Voltage:
    """Minimum reservoir voltage from which a cycle can be supplied.

    Inverts the usable-energy relation: drawing e_cycle / efficiency from a
    cap of size c must leave it no lower than v_floor.
    """
    if not c > 0 or math.isnan(c) or math.isinf(c):
        raise QuantityError(f"capacitance must be positive, got {c!r}")
    if math.isnan(efficiency) or not 0.0 < efficiency <= 1.0:
        raise QuantityError(f"efficiency must be in (0, 1], got {efficiency!r}")
    e = float(e_cycle)
    if e < 0 or math.isnan(e) or math.isinf(e):
        raise QuantityError(f"cycle energy must be finite and >= 0, got {e!r}")
    vf = float(v_floor)
    if vf < 0 or math.isnan(vf) or math.isinf(vf):
        raise QuantityError(f"v_floor must be finite and >= 0, got {vf!r}")
    return Voltage(math.sqrt(vf * vf + 2.0 * e / (c * efficiency)))


@dataclass(frozen=True)
class MonitorConfig:
    """Nanopower voltage monitor: schedule, draws, and thresholds."""

    wake_period: float = 604800.0  # one week
    i_sleep: float = 0.6e-6
    i_active: float = 10e-6
    v_min_operate: float = 1.8
    check_duration: float = 10.0
    go_threshold: float | None = None  # None: derived from the cycle budget

    def __post_init__(self):
        if not self.wake_period > 0:
            raise QuantityError(f"wake_period must be positive, got {self.wake_period!r}")
        if not self.check_duration > 0:
            raise QuantityError(f"check_duration must be positive, got {self.check_duration!r}")
        for label, value in (("i_sleep", self.i_sleep), ("i_active", self.i_active)):
            v = float(value)
            if math.isnan(v) or math.isinf(v) or v < 0:
                raise QuantityError(f"{label} must be finite and >= 0, got {v!r}")
        Voltage(self.v_min_operate)
        if self.go_threshold is not None:
            Voltage(self.go_threshold)
            if self.go_threshold < self.v_min_operate:
                raise QuantityError(
                    f"go_threshold {self.go_threshold!r} below the monitor's "
                    f"minimum operating voltage {self.v_min_operate!r}"
                )


def resolve_go_threshold(
    cfg: MonitorConfig,
    profiles: tuple[LoadProfile, ...],
    cap2_c: float,
    conv_v_floor: float,
    conv_efficiency: float,
) -> Voltage:
    """The go threshold actually used: explicit override, or the energy
    requirement of one cycle, but never below the monitor's own minimum."""
    if cfg.go_threshold is not None:
        return Voltage(cfg.go_threshold)
    need = required_go_voltage(cycle_energy(profiles), cap2_c, conv_v_floor, conv_efficiency)
    return Voltage(max(float(need), cfg.v_min_operate))


@dataclass(frozen=True)
class LoadSwitch:
    """MOSFET load switch in series with one gated rail."""

    name: str
    r_on: float = 0.045
    closed: bool = False

    def __post_init__(self):
        r = float(self.r_on)
        if math.isnan(r) or math.isinf(r) or not r > 0:
            raise QuantityError(f"{self.name}: r_on must be positive, got {r!r}")


@dataclass
class NodeStateMachine:
    """Mutable supervisor state shared by the monitor and the controller."""

    state: NodeState = NodeState.COLD
    enable_monitor: bool = False
    enable_controller: bool = False
    next_wake: float = math.inf
    phase_steps_left: int = 0

    @property
    def enable_line(self) -> bool:
        """Converter 2 enable: wired-OR of the two supervisors."""
        return self.enable_monitor or self.enable_controller


@dataclass
class CycleReport:
    """Outcome and accounting of one supervised cycle."""

    success: bool
    aborted_in: NodeState | None
    duration_s: float
    v_before: float
    v_after: float
    e_by_load: dict[str, float]
    e_from_cap: float
    e_converter_loss: float

    @property
    def e_loads_total(self) -> float:
        return sum(self.e_by_load.values())


@dataclass(frozen=True)
class CyclePlan:
    """Phase durations and rail-side draws derived from the load budget."""

    handoff_s: float
    measure_s: float
    transmit_s: float
    p_controller: float
    p_sensor: float
    p_zigbee: float
    p_switch_sensor: float
    p_switch_zigbee: float


def build_cycle_plan(
    profiles: tuple[LoadProfile, ...],
    sw_sensor: LoadSwitch,
    sw_zigbee: LoadSwitch,
) -> CyclePlan:
    """Derive the cycle timing from the budget rows.

    The controller row spans the whole cycle, so the handoff phase is what
    remains of its on-time after the measure and transmit phases.  Switch
    conduction loss (i^2 r_on while conducting) rides on the same rail and
    is charged alongside the load it serves.
    """
    rows = {p.name: p for p in profiles}
    try:
        ctrl = rows["controller_active"]
        sensor = rows["sensor"]
        zigbee = rows["zigbee"]
    except KeyError as exc:
        raise ScenarioError(f"load budget is missing the {exc.args[0]!r} row") from None
    handoff = max(0.0, ctrl.t - sensor.t - zigbee.t)
    return CyclePlan(
        handoff_s=handoff,
        measure_s=sensor.t,
        transmit_s=zigbee.t,
        p_controller=ctrl.v * ctrl.i,
        p_sensor=sensor.v * sensor.i,
        p_zigbee=zigbee.v * zigbee.i,
        p_switch_sensor=sensor.i * sensor.i * sw_sensor.r_on,
        p_switch_zigbee=zigbee.i * zigbee.i * sw_zigbee.r_on,
    )


def monitor_step(
    cfg: MonitorConfig,
    sm: NodeStateMachine,
    v_cap2: float,
    clock: float,
    dt: float,
    go_threshold: float,
    check_steps: int,
) -> tuple[float, str]:
    """Advance the monitor by one step.

    Returns (draw_current, ledger_component): the monitor's supply current
    for this step and which bucket it belongs to ("monitor_sleep" or
    "monitor_check"; "" when unpowered).

    The monitor lives directly on the reservoir cap.  Below v_min_operate
    it is unpowered: zero draw, schedule lost.  While a cycle runs the
    monitor only contributes its sleep draw; cycle progress is handled by
    the cycle stepper, not here.
    """
    alive = v_cap2 >= cfg.v_min_operate
    if sm.state in CYCLE_STATES:
        if not alive:
            sm.enable_monitor = False
            return 0.0, ""
        return cfg.i_sleep, "monitor_sleep"
    if not alive:
        if sm.state is not NodeState.COLD:
            sm.state = NodeState.COLD
            sm.enable_monitor = False
            sm.next_wake = math.inf
        return 0.0, ""
    if sm.state is NodeState.COLD:
        # Power-on reset: schedule the first check one full period out.
        sm.state = NodeState.SLEEP
        sm.next_wake = clock + cfg.wake_period
        return cfg.i_sleep, "monitor_sleep"
    if sm.state is NodeState.SLEEP:
        if clock >= sm.next_wake:
            sm.state = NodeState.CHECK
            sm.phase_steps_left = check_steps
            sm.next_wake += cfg.wake_period
            return cfg.i_active, "monitor_check"
        return cfg.i_sleep, "monitor_sleep"
    if sm.state is NodeState.CHECK:
        sm.phase_steps_left -= 1
        if sm.phase_steps_left <= 0:
            if v_cap2 >= go_threshold:
                sm.state = NodeState.BOOT
                sm.enable_monitor = True
            else:
                sm.state = NodeState.SLEEP
        return cfg.i_active, "monitor_check"
    raise TransitionError(f"monitor cannot step from state {sm.state!r}")


def _steps(duration_s: float, dt: float) -> int:
    if duration_s <= 0:
        return 0
    return max(1, round(duration_s / dt))


def cycle_substep(
    sm: NodeStateMachine,
    plan: CyclePlan,
    conv2: DcDcConverter,
    sw_sensor: LoadSwitch,
    sw_zigbee: LoadSwitch,
    v_cap2: float,
    dt: float,
) -> tuple[list[tuple[str, float]], DcDcConverter, LoadSwitch, LoadSwitch, str]:
    """One fine step of a controller cycle.

    Returns (draws, conv2, sw_sensor, sw_zigbee, event) where draws is a
    list of (component, rail_power_w) supplied through conv2 this step and
    event is "" while the cycle runs, "done" after a clean shutdown, or
    "abort" when the converter dropped out mid-cycle.
    """
    if sm.state not in CYCLE_STATES:
        raise TransitionError(f"cycle_substep called in state {sm.state!r}")

    conv2 = replace(conv2, enabled=sm.enable_line) if conv2.enabled != sm.enable_line else conv2
    conv2 = dcdc_update_running(conv2, v_cap2)

    if sm.state is NodeState.SHUTDOWN:
        # Teardown instant: drop the enables, kill the converter.  The
        # monitor resumes its own schedule (or browns out) from Sleep.
        sm.enable_controller = False
        sm.enable_monitor = False
        sm.state = NodeState.SLEEP
        conv2 = replace(conv2, enabled=False, running=False)
        return [], conv2, replace(sw_sensor, closed=False), replace(sw_zigbee, closed=False), "done"

    if not conv2.running:
        # Mid-cycle brown-out (or enable lost before boot finished).
        sm.enable_controller = False
        sm.enable_monitor = False
        sm.state = NodeState.SLEEP
        conv2 = replace(conv2, enabled=False, running=False)
        return [], conv2, replace(sw_sensor, closed=False), replace(sw_zigbee, closed=False), "abort"

    if sm.state is NodeState.BOOT:
        # Converter is up; hand the controller its first phase.
        sm.state = NodeState.HANDOFF
        sm.enable_controller = True
        sm.phase_steps_left = _steps(plan.handoff_s, dt)
        return [], conv2, sw_sensor, sw_zigbee, ""

    draws: list[tuple[str, float]] = [("controller", plan.p_controller)]
    if sm.state is NodeState.MEASURE:
        draws.append(("sensor", plan.p_sensor))
        draws.append(("switch_sensor", plan.p_switch_sensor))
    elif sm.state is NodeState.TRANSMIT:
        draws.append(("zigbee", plan.p_zigbee))
        draws.append(("switch_zigbee", plan.p_switch_zigbee))

    sm.phase_steps_left -= 1
    if sm.phase_steps_left <= 0:
        if sm.state is NodeState.HANDOFF:
            # Controller owns the enable line now; the monitor lets go.
            sm.enable_monitor = False
            sm.state = NodeState.MEASURE
            sm.phase_steps_left = _steps(plan.measure_s, dt)
            sw_sensor = replace(sw_sensor, closed=True)
        elif sm.state is NodeState.MEASURE:
            sw_sensor = replace(sw_sensor, closed=False)
            sm.state = NodeState.TRANSMIT
            sm.phase_steps_left = _steps(plan.transmit_s, dt)
            sw_zigbee = replace(sw_zigbee, closed=True)
        elif sm.state is NodeState.TRANSMIT:
            sw_zigbee = replace(sw_zigbee, closed=False)
            sm.state = NodeState.SHUTDOWN
            sm.phase_steps_left = 0
    return draws, conv2, sw_sensor, sw_zigbee, ""


def run_cycle(
    sm: NodeStateMachine,
    profiles: tuple[LoadProfile, ...],
    switches: tuple[LoadSwitch, LoadSwitch],
    conv2: DcDcConverter,
    cap2: Supercap,
    dt: float = 1e-3,
) -> tuple[CycleReport, DcDcConverter, Supercap]:
    """Run one supervised cycle to completion or abort, standalone.

    Precondition: the machine is in Boot with the enable line raised and
    conv2 enabled.  Harvest input and the monitor's own draw are outside
    this op's scope; the engine overlays those during integrated runs.
    Returns the report plus the post-cycle converter and reservoir cap.
    """
    if sm.state is not NodeState.BOOT:
        raise TransitionError(f"run_cycle requires state Boot, got {sm.state.value}")
    if not (conv2.enabled and sm.enable_line):
        raise TransitionError("run_cycle requires conv2 enabled via the enable line")
    conv2 = dcdc_update_running(conv2, cap2.v)
    if not conv2.running:
        raise TransitionError(
            f"conv2 cannot start from v_cap2 = {cap2.v!r} (needs {conv2.v_startup!r})"
        )
    sw_sensor, sw_zigbee = switches
    plan = build_cycle_plan(profiles, sw_sensor, sw_zigbee)
    v_before = cap2.v
    e_by_load: dict[str, float] = {}
    e_from_cap = 0.0
    e_conv_loss = 0.0
    t = 0.0
    success = False
    aborted_in: NodeState | None = None
    # Hard cap on runaway loops: the whole cycle is seconds long.
    max_steps = 10 * (_steps(plan.handoff_s + plan.measure_s + plan.transmit_s, dt) + 2)
    for _ in range(max_steps):
        state_before = sm.state
        draws, conv2, sw_sensor, sw_zigbee, event = cycle_substep(
            sm, plan, conv2, sw_sensor, sw_zigbee, cap2.v, dt
        )
        if event == "done":
            success = True
            break
        if event == "abort":
            aborted_in = state_before
            break
        t += dt
        if draws:
            p_out = sum(p for _, p in draws)
            i_in = dcdc_input_current(conv2, cap2.v, p_out / conv2.v_out_setpoint)
            v_prev = cap2.v
            cap2, _leaked = cap_step(cap2, -float(i_in), dt)
            v_mid = 0.5 * (v_prev + cap2.v)
            e_step = float(i_in) * v_mid * dt
            e_from_cap += e_step
            for name, p in draws:
                e_by_load[name] = e_by_load.get(name, 0.0) + p * dt
            e_conv_loss += e_step - p_out * dt
        else:
            cap2, _leaked = cap_step(cap2, 0.0, dt)
    else:
        raise TransitionError("cycle failed to terminate; inconsistent plan")
    return (
        CycleReport(
            success=success,
            aborted_in=aborted_in,
            duration_s=t,
            v_before=v_before,
            v_after=cap2.v,
            e_by_load=e_by_load,
            e_from_cap=e_from_cap,
            e_converter_loss=e_conv_loss,
        ),
        conv2,
        cap2,
    )
