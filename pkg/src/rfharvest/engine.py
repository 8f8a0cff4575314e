"""Two-rate fixed-step simulation engine.

Wires the pipeline together: ambient source -> reflection -> resonant
tank -> rectifier -> harvest cap -> charge pump -> reservoir cap ->
monitor / controller loads, advancing with a coarse step while the node
is Cold or Sleep and a fine step during checks and cycles.

Every joule is attributed exactly once to one of: harvested, leaked,
converter loss, a named load, or the change in stored energy.  The
attribution terms are constructed from capacitor energy differences, so
the ledger residual is zero up to float summation noise; a residual above
tolerance aborts the run, because conservation is the only global oracle
this simulation has.

Ledger boundary: in the default thevenin coupling, e_harvested is the
energy entering the harvest cap's terminals; the rectifier's internal
dissipation upstream of that boundary is not tracked.  In the ideal
coupling (used for lossless-chain studies), e_harvested is the delivered
power itself and any coupling inefficiency shows up as converter loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, is_dataclass, replace

from .analog_frontend import (
    RectifierParams,
    ReflectionModel,
    ResonantTank,
    chain_open_circuit,
    delivered_power,
)
from .errors import LedgerError, QuantityError, ScenarioError
from .power_mgmt import (
    ACTIVE_STATES,
    CYCLE_STATES,
    LoadProfile,
    LoadSwitch,
    MonitorConfig,
    NodeState,
    NodeStateMachine,
    build_cycle_plan,
    cycle_substep,
    monitor_step,
    resolve_go_threshold,
    table1_profiles,
)
from .quantities import dbm_to_watts
from .rf_environment import FluctuatingSource, RfSourceModel, sample_window
from .storage import (
    CAP2_V_MAX_DEFAULT,
    DcDcConverter,
    Supercap,
    TransferPolicy,
    cap_euler,
    transfer_step,
)

__all__ = [
    "FrontendConfig",
    "StorageConfig",
    "ManagementConfig",
    "EngineConfig",
    "Scenario",
    "EnergyLedger",
    "SimResult",
    "Engine",
    "run_scenario",
    "with_override",
    "sweep",
    "TRACE_HEADER",
]

TRACE_HEADER = "t_s,p_avail_dbm,v_cap1,v_cap2,state,e_harvested_j,e_consumed_j,e_leaked_j"

#: Relative ledger tolerance; the absolute floor keeps short, nearly
#: powerless runs from tripping on float noise.
LEDGER_REL_TOL = 1e-6
LEDGER_ABS_FLOOR = 1e-12

COUPLING_THEVENIN = "thevenin"
COUPLING_IDEAL = "ideal"


@dataclass(frozen=True)
class FrontendConfig:
    """Analog chain wiring: reflection, tank, rectifier, and how the
    rectifier couples into the harvest cap.

    coupling "thevenin" charges the cap through the rectifier's output
    resistance; "ideal" deposits delivered power scaled by
    ideal_efficiency, for lossless-chain baselines.
    """

    reflection: ReflectionModel
    tank: ResonantTank
    rectifier: RectifierParams
    carrier_hz: float
    coupling: str = COUPLING_THEVENIN
    ideal_efficiency: float = 1.0

    def __post_init__(self):
        if self.coupling not in (COUPLING_THEVENIN, COUPLING_IDEAL):
            raise ScenarioError(f"unknown coupling {self.coupling!r}")
        f = float(self.carrier_hz)
        if math.isnan(f) or math.isinf(f) or not f > 0:
            raise QuantityError(f"carrier_hz must be positive, got {f!r}")
        e = float(self.ideal_efficiency)
        if math.isnan(e) or not 0.0 < e <= 1.0:
            raise QuantityError(f"ideal_efficiency must be in (0, 1], got {e!r}")


@dataclass(frozen=True)
class StorageConfig:
    cap1: Supercap
    cap2: Supercap
    conv1: DcDcConverter
    conv2: DcDcConverter
    transfer: TransferPolicy
    cap2_v_max: float = CAP2_V_MAX_DEFAULT

    def __post_init__(self):
        v = float(self.cap2_v_max)
        if math.isnan(v) or math.isinf(v) or not v > 0:
            raise QuantityError(f"cap2_v_max must be positive, got {v!r}")


@dataclass(frozen=True)
class ManagementConfig:
    monitor: MonitorConfig = field(default_factory=MonitorConfig)
    profiles: tuple[LoadProfile, ...] = field(default_factory=table1_profiles)
    switch_sensor: LoadSwitch = field(default_factory=lambda: LoadSwitch("sensor"))
    switch_zigbee: LoadSwitch = field(default_factory=lambda: LoadSwitch("zigbee"))
    loads_enabled: bool = True


@dataclass(frozen=True)
class EngineConfig:
    dt_coarse: float = 1.0
    dt_fine: float = 1e-3
    t_end: float = 45 * 86400.0
    max_transmissions: int | None = None
    stop_stored_j: float | None = None
    seed: int | None = None

    def __post_init__(self):
        for label, value in (("dt_coarse", self.dt_coarse), ("dt_fine", self.dt_fine)):
            v = float(value)
            if math.isnan(v) or math.isinf(v) or not v > 0:
                raise QuantityError(f"{label} must be positive, got {v!r}")
        if self.dt_fine > self.dt_coarse:
            raise QuantityError(
                f"dt_fine {self.dt_fine!r} must not exceed dt_coarse {self.dt_coarse!r}"
            )
        t = float(self.t_end)
        if math.isnan(t) or math.isinf(t) or not t > 0:
            raise QuantityError(f"t_end must be positive, got {t!r}")
        if self.max_transmissions is not None and self.max_transmissions < 1:
            raise QuantityError("max_transmissions must be >= 1 when set")
        if self.stop_stored_j is not None and not self.stop_stored_j > 0:
            raise QuantityError("stop_stored_j must be positive when set")


@dataclass(frozen=True)
class Scenario:
    """Complete, immutable description of one simulation run."""

    source: RfSourceModel
    frontend: FrontendConfig
    storage: StorageConfig
    management: ManagementConfig
    engine: EngineConfig = field(default_factory=EngineConfig)
    notes: str = ""


@dataclass
class EnergyLedger:
    """Per-run energy attribution; residual is the conservation check."""

    e_harvested: float = 0.0
    e_reflected: float = 0.0  # informational, outside the balance
    e_leaked: float = 0.0
    e_converter_loss: float = 0.0
    e_load_by_component: dict[str, float] = field(default_factory=dict)
    e_stored_delta: float = 0.0

    @property
    def e_load_total(self) -> float:
        return sum(self.e_load_by_component.values())

    def residual(self) -> float:
        return (
            self.e_harvested
            - self.e_leaked
            - self.e_converter_loss
            - self.e_load_total
            - self.e_stored_delta
        )

    def tolerance(self) -> float:
        return max(LEDGER_REL_TOL * self.e_harvested, LEDGER_ABS_FLOOR)

    def check(self) -> None:
        r = self.residual()
        if abs(r) > self.tolerance():
            raise LedgerError(
                f"energy ledger residual {r!r} exceeds tolerance {self.tolerance()!r} "
                f"(harvested {self.e_harvested!r})"
            )


@dataclass
class SimResult:
    time_to_first_transmission: float | None
    transmissions: int
    aborted_cycles: int
    t_final: float
    state_final: str
    v_cap1: float
    v_cap2: float
    go_threshold: float | None
    ledger: EnergyLedger
    trace_path: str | None
    stop_reason: str


class Engine:
    """One simulation run: single-use, strictly sequential.

    Construct with a scenario, then call run() once; step(dt) advances a
    single step for fine-grained inspection.  State lives in plain float
    attributes; element records are rebuilt only where unit operations
    (transfer_step, cycle_substep) take over.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        src = scenario.source
        if scenario.engine.seed is not None and isinstance(src, FluctuatingSource):
            src = replace(src, seed=scenario.engine.seed)
        self.source = src
        st = scenario.storage
        mg = scenario.management

        self.t = 0.0
        self.v1 = st.cap1.v
        self.v2 = st.cap2.v
        self.c1 = st.cap1.c
        self.c2 = st.cap2.c
        self.r1 = st.cap1.r_leak
        self.r2 = st.cap2.r_leak
        self.conv1 = st.conv1
        self.conv2 = st.conv2
        self.sm = NodeStateMachine()
        self.sw_sensor = mg.switch_sensor
        self.sw_zigbee = mg.switch_zigbee
        self.plan = build_cycle_plan(mg.profiles, mg.switch_sensor, mg.switch_zigbee)
        if mg.loads_enabled:
            self.go_threshold = float(
                resolve_go_threshold(
                    mg.monitor, mg.profiles, st.cap2.c, st.conv2.v_min_operate, st.conv2.efficiency
                )
            )
        else:
            self.go_threshold = None
        self.check_steps = max(1, round(mg.monitor.check_duration / scenario.engine.dt_fine))

        self.ledger = EnergyLedger()
        self._e_load_total = 0.0
        self._e0 = 0.5 * (self.c1 * self.v1 * self.v1 + self.c2 * self.v2 * self.v2)

        # Source window cache: frontend output is constant within a window.
        self._window_until = -1.0
        self._window_dbm = 0.0
        self._p_avail = 0.0
        self._p_del = 0.0
        self._v_oc = 0.0
        self._r_out = math.inf
        self._p_ideal = 0.0

        self.transmissions = 0
        self.aborted_cycles = 0
        self.time_to_first_tx: float | None = None
        self._steps = 0

    def _refresh_window(self) -> None:
        dbm, until = sample_window(self.source, self.t)
        self._window_dbm = float(dbm)
        self._window_until = float(until)
        fe = self.scenario.frontend
        p_avail = float(dbm_to_watts(dbm))
        p_del = float(delivered_power(p_avail, fe.reflection))
        self._p_avail = p_avail
        self._p_del = p_del
        if fe.coupling == COUPLING_THEVENIN:
            out = chain_open_circuit(fe.rectifier, fe.tank, fe.carrier_hz, p_del)
            self._v_oc = float(out.v_oc)
            self._r_out = float(out.r_out)
        else:
            self._p_ideal = fe.ideal_efficiency * p_del

    def _pick_dt(self) -> float:
        eng = self.scenario.engine
        if self.sm.state in ACTIVE_STATES:
            dt = eng.dt_fine
        else:
            dt = eng.dt_coarse
            if self.sm.state is NodeState.SLEEP:
                until_wake = self.sm.next_wake - self.t
                if until_wake < dt:
                    dt = max(eng.dt_fine, until_wake)
            if self._window_until > self.t:
                until_window = self._window_until - self.t
                if until_window < dt:
                    dt = max(eng.dt_fine, until_window)
        remaining = eng.t_end - self.t
        if remaining < dt:
            dt = remaining
        return dt

    def step(self, dt: float) -> None:
        """Advance the whole pipeline exactly one step of size dt."""
        if not dt > 0:
            raise QuantityError(f"dt must be positive, got {dt!r}")
        led = self.ledger
        sc = self.scenario
        thevenin = sc.frontend.coupling == COUPLING_THEVENIN
        t = self.t
        if t >= self._window_until:
            self._refresh_window()

        # Harvest into cap1.  Attributions come from energy differences so
        # the ledger closes exactly.
        c1 = self.c1
        v1 = self.v1
        e1_before = 0.5 * c1 * v1 * v1
        if thevenin:
            head = self._v_oc - v1
            i_chg = head / self._r_out if head > 0.0 else 0.0
            v1, leaked1 = cap_euler(v1, c1, self.r1, i_chg, dt)
            e_front_loss = 0.0
        else:
            e_in = self._p_ideal * dt
            if e_in > 0.0:
                v1 = math.sqrt(v1 * v1 + 2.0 * e_in / c1)
            v1, leaked1 = cap_euler(v1, c1, self.r1, 0.0, dt)
            e_front_loss = self._p_del * dt - e_in
        e1_after = 0.5 * c1 * v1 * v1
        led.e_harvested += (e1_after - e1_before) + leaked1 + e_front_loss
        led.e_converter_loss += e_front_loss
        led.e_leaked += leaked1
        led.e_reflected += (self._p_avail - self._p_del) * dt
        self.v1 = v1

        # Charge pump cap1 -> cap2.  Skip cheaply while the pump cannot
        # possibly act; hand real work to the unit operation.
        st = sc.storage
        if st.conv1.enabled and (self.conv1.running or v1 >= st.transfer.start_v):
            cap1 = replace(st.cap1, v=v1)
            cap2 = replace(st.cap2, v=self.v2)
            e1_pre = 0.5 * c1 * v1 * v1
            e2_pre = 0.5 * self.c2 * self.v2 * self.v2
            cap1, cap2, self.conv1, _moved, _lost = transfer_step(
                cap1, cap2, self.conv1, st.transfer, dt, st.cap2_v_max
            )
            self.v1 = cap1.v
            self.v2 = cap2.v
            e_extracted = e1_pre - 0.5 * c1 * cap1.v * cap1.v
            e_deposited = 0.5 * self.c2 * cap2.v * cap2.v - e2_pre
            led.e_converter_loss += e_extracted - e_deposited

        # Management: monitor draw and, during cycles, converter-2 loads.
        v2 = self.v2
        c2 = self.c2
        e2_before = 0.5 * c2 * v2 * v2
        if sc.management.loads_enabled:
            sm = self.sm
            mon = sc.management.monitor
            i_mon, mon_kind = monitor_step(
                mon, sm, v2, t, dt, self.go_threshold, self.check_steps
            )
            draws: list[tuple[str, float]] = []
            if sm.state in CYCLE_STATES:
                draws, self.conv2, self.sw_sensor, self.sw_zigbee, event = cycle_substep(
                    sm, self.plan, self.conv2, self.sw_sensor, self.sw_zigbee, v2, dt
                )
                if event == "done":
                    self.transmissions += 1
                    if self.time_to_first_tx is None:
                        self.time_to_first_tx = t + dt
                elif event == "abort":
                    self.aborted_cycles += 1
            i_draw = i_mon
            p_out = 0.0
            if draws:
                p_out = sum(p for _, p in draws)
                # Power balance through converter 2 at its fixed efficiency.
                i_draw += p_out / (self.conv2.efficiency * v2)
            v2, leaked2 = cap_euler(v2, c2, self.r2, -i_draw, dt)
            e2_after = 0.5 * c2 * v2 * v2
            e_drawn = e2_before - e2_after - leaked2
            by = led.e_load_by_component
            if i_draw > 0.0:
                mon_share = i_mon * 0.5 * (self.v2 + v2) * dt
                if mon_share > 0.0:
                    by[mon_kind] = by.get(mon_kind, 0.0) + mon_share
                    self._e_load_total += mon_share
                if draws:
                    e_loads = 0.0
                    for name, p in draws:
                        e = p * dt
                        by[name] = by.get(name, 0.0) + e
                        e_loads += e
                    self._e_load_total += e_loads
                    led.e_converter_loss += (e_drawn - mon_share) - e_loads
                else:
                    # No converter path active: the whole non-monitor part
                    # (float noise at most) folds into the monitor share.
                    extra = e_drawn - mon_share
                    if extra != 0.0 and mon_share > 0.0:
                        by[mon_kind] += extra
                        self._e_load_total += extra
            led.e_leaked += leaked2
        else:
            v2, leaked2 = cap_euler(v2, c2, self.r2, 0.0, dt)
            led.e_leaked += leaked2
        self.v2 = v2

        self.t = t + dt
        self._steps += 1
        led.e_stored_delta = (
            0.5 * (self.c1 * self.v1 * self.v1 + self.c2 * v2 * v2) - self._e0
        )
        # Fast conservation guard with a running load total; check() is the
        # authoritative (dict-summed) verdict when the guard trips.
        res = (
            led.e_harvested
            - led.e_leaked
            - led.e_converter_loss
            - self._e_load_total
            - led.e_stored_delta
        )
        if res < 0.0:
            res = -res
        if res > led.tolerance():
            led.check()

    def run(self, trace_path: str | None = None) -> SimResult:
        eng = self.scenario.engine
        t_end = eng.t_end
        stop_reason = "t_end"
        trace = None
        try:
            if trace_path is not None:
                trace = open(trace_path, "w", encoding="utf-8")
                trace.write(TRACE_HEADER + "\n")
            while self.t < t_end - 1e-12:
                if self.t >= self._window_until:
                    self._refresh_window()
                dt = self._pick_dt()
                if dt <= 0.0:
                    break
                self.step(dt)
                if trace is not None:
                    led = self.ledger
                    trace.write(
                        f"{self.t:.6f},{self._window_dbm:.6g},{self.v1:.10g},"
                        f"{self.v2:.10g},{self.sm.state.value},"
                        f"{led.e_harvested:.10g},"
                        f"{led.e_converter_loss + self._e_load_total:.10g},"
                        f"{led.e_leaked:.10g}\n"
                    )
                if (
                    eng.max_transmissions is not None
                    and self.transmissions >= eng.max_transmissions
                ):
                    stop_reason = "transmissions"
                    break
                if (
                    eng.stop_stored_j is not None
                    and self.ledger.e_stored_delta >= eng.stop_stored_j
                ):
                    stop_reason = "stored"
                    break
        finally:
            if trace is not None:
                trace.close()
        self.ledger.check()
        return SimResult(
            time_to_first_transmission=self.time_to_first_tx,
            transmissions=self.transmissions,
            aborted_cycles=self.aborted_cycles,
            t_final=self.t,
            state_final=self.sm.state.value,
            v_cap1=self.v1,
            v_cap2=self.v2,
            go_threshold=self.go_threshold,
            ledger=self.ledger,
            trace_path=trace_path,
            stop_reason=stop_reason,
        )


def run_scenario(scenario: Scenario, trace_path: str | None = None) -> SimResult:
    """Run one scenario to completion with a fresh engine."""
    return Engine(scenario).run(trace_path)


def with_override(scenario: Scenario, path: str, value) -> Scenario:
    """Return a copy of the scenario with one dotted field replaced.

    The path walks dataclass fields, e.g. "source.level_dbm",
    "frontend.rectifier.stages", "storage.cap1.c".  Validation of the new
    value happens through the target record's own constructor.
    """
    parts = path.split(".")

    def rebuild(obj, idx: int):
        name = parts[idx]
        if not is_dataclass(obj) or not any(f.name == name for f in fields(obj)):
            raise ScenarioError(f"unknown parameter path {path!r} (no field {name!r})")
        if idx == len(parts) - 1:
            new_leaf = value
            current = getattr(obj, name)
            if is_dataclass(current) and not is_dataclass(new_leaf):
                raise ScenarioError(f"parameter path {path!r} names a record, not a scalar")
            return replace(obj, **{name: new_leaf})
        return replace(obj, **{name: rebuild(getattr(obj, name), idx + 1)})

    return rebuild(scenario, 0)


def sweep(scenario: Scenario, path: str, values) -> list[SimResult]:
    """Run one independent simulation per value of the dotted parameter.

    Results are ordered like the inputs; every run uses the template's
    seed unless the path itself overrides it.
    """
    return [run_scenario(with_override(scenario, path, v)) for v in values]
