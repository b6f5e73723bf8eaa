"""Scheduling scenario: horizon, weights, comfort and voltage parameters.

All switches are taken to be open at t = 0, so the first scheduled step pays
a switching action for every switch it closes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import datetime

from .errors import ScenarioError
from .profiles import PreferenceSchedule, PreferenceWindow

MODE_FLEXIBLE = "flexible"
MODE_LEGACY = "legacy"


@dataclass(frozen=True)
class SolverParams:
    rel_gap: float = 0.01
    time_limit_s: float | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    horizon_steps: int = 48
    step_minutes: int = 30
    start_time: datetime = datetime(2021, 7, 15, 0, 0)
    mode: str = MODE_FLEXIBLE
    switch_penalty: float = 1.0          # weight on total switching actions
    msd_hours: float = 2.0               # minimum service duration
    v_min_pu: float = 0.95
    v_max_pu: float = 1.05
    v_rate_pu: float = 1.0               # root-anchored voltage
    reserve_fraction: float = 0.15       # spinning reserve vs served load
    big_m_voltage: float = 2.0           # p.u.^2 release for open elements
    big_m_flow_kva: float | None = None  # None: per-element capacity
    windows: tuple[PreferenceWindow, ...] = ()
    node_windows: dict[str, tuple[PreferenceWindow, ...]] = field(default_factory=dict)
    solver: SolverParams = field(default_factory=SolverParams)

    def __post_init__(self):
        if self.horizon_steps < 1 or self.step_minutes < 1:
            raise ScenarioError("horizon_steps and step_minutes must be >= 1")
        if self.mode not in (MODE_FLEXIBLE, MODE_LEGACY):
            raise ScenarioError(f"unknown mode {self.mode!r}")
        if not 0 < self.v_min_pu < self.v_rate_pu < self.v_max_pu:
            raise ScenarioError("need 0 < v_min < v_rate < v_max")
        steps = self.msd_hours / self.dt_hours
        if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
            raise ScenarioError(
                f"msd_hours={self.msd_hours} is not a whole number (>= 1) of steps"
            )
        self.schedule_for("").validate(self.horizon_steps)
        for nid in self.node_windows:
            self.schedule_for(nid).validate(self.horizon_steps)

    @property
    def dt_hours(self) -> float:
        return self.step_minutes / 60.0

    @property
    def msd_steps(self) -> int:
        return int(round(self.msd_hours / self.dt_hours))

    def schedule_for(self, node_id: str) -> PreferenceSchedule:
        return PreferenceSchedule(self.node_windows.get(node_id, self.windows))


def _clock_to_step_window(start_clock: str, end_clock: str, weight: float,
                          scenario_start: datetime, step_minutes: int,
                          horizon_steps: int) -> PreferenceWindow:
    """Map a same-day clock range onto 1-indexed steps (both ends inclusive).

    A step t covers [(t-1)*dt, t*dt) after the scenario start; the window
    keeps every step fully inside the clock range.
    """
    def minutes_of(clock: str) -> int:
        hh, mm = clock.split(":")
        return int(hh) * 60 + int(mm)

    day_anchor = scenario_start.hour * 60 + scenario_start.minute
    start_min = minutes_of(start_clock) - day_anchor
    end_min = minutes_of(end_clock) - day_anchor
    if end_min <= start_min:
        raise ScenarioError(f"window {start_clock}-{end_clock} is empty or wraps midnight")
    start_step = -(-start_min // step_minutes) + 1  # first step at or after start
    end_step = end_min // step_minutes              # last step ending by end
    if start_step > end_step:
        raise ScenarioError(f"window {start_clock}-{end_clock} covers no whole step")
    if start_step < 1 or end_step > horizon_steps:
        raise ScenarioError(f"window {start_clock}-{end_clock} falls outside the horizon")
    return PreferenceWindow(start_step=start_step, end_step=end_step, weight=weight)


def build_scenario(raw: dict) -> ScenarioConfig:
    known = {
        "horizon_steps", "step_minutes", "start_time", "mode", "switch_penalty",
        "msd_hours", "voltage_min_pu", "voltage_max_pu", "voltage_rate_pu",
        "reserve_fraction", "big_m_voltage", "big_m_flow_kva",
        "preferred_windows", "node_preferred_windows", "solver",
    }
    unknown = set(raw) - known
    if unknown:
        raise ScenarioError(f"unknown scenario field(s) {sorted(unknown)}")

    horizon = int(raw.get("horizon_steps", 48))
    step_minutes = int(raw.get("step_minutes", 30))
    start_time = datetime.fromisoformat(raw.get("start_time", "2021-07-15T00:00:00"))

    def parse_windows(items) -> tuple[PreferenceWindow, ...]:
        out = []
        for w in items:
            if "start_clock" in w:
                out.append(_clock_to_step_window(
                    w["start_clock"], w["end_clock"], float(w.get("weight", 1.0)),
                    start_time, step_minutes, horizon,
                ))
            else:
                out.append(PreferenceWindow(
                    start_step=int(w["start_step"]), end_step=int(w["end_step"]),
                    weight=float(w.get("weight", 1.0)),
                ))
        return tuple(out)

    solver_raw = raw.get("solver", {})
    solver = SolverParams(
        rel_gap=float(solver_raw.get("rel_gap", 0.01)),
        time_limit_s=(
            float(solver_raw["time_limit_s"]) if solver_raw.get("time_limit_s") is not None
            else None
        ),
    )
    return ScenarioConfig(
        horizon_steps=horizon,
        step_minutes=step_minutes,
        start_time=start_time,
        mode=raw.get("mode", MODE_FLEXIBLE),
        switch_penalty=float(raw.get("switch_penalty", 1.0)),
        msd_hours=float(raw.get("msd_hours", 2.0)),
        v_min_pu=float(raw.get("voltage_min_pu", 0.95)),
        v_max_pu=float(raw.get("voltage_max_pu", 1.05)),
        v_rate_pu=float(raw.get("voltage_rate_pu", 1.0)),
        reserve_fraction=float(raw.get("reserve_fraction", 0.15)),
        big_m_voltage=float(raw.get("big_m_voltage", 2.0)),
        big_m_flow_kva=(
            float(raw["big_m_flow_kva"]) if raw.get("big_m_flow_kva") is not None else None
        ),
        windows=parse_windows(raw.get("preferred_windows", [])),
        node_windows={
            nid: parse_windows(items)
            for nid, items in raw.get("node_preferred_windows", {}).items()
        },
        solver=solver,
    )


def load_scenario(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return build_scenario(json.load(fh))


def truncated(scenario: ScenarioConfig, horizon_steps: int) -> ScenarioConfig:
    """Copy of the scenario cut to a shorter horizon; windows are clipped."""
    def clip(ws):
        return tuple(
            replace(w, end_step=min(w.end_step, horizon_steps))
            for w in ws if w.start_step <= horizon_steps
        )

    return replace(
        scenario,
        horizon_steps=horizon_steps,
        windows=clip(scenario.windows),
        node_windows={nid: clip(ws) for nid, ws in scenario.node_windows.items()},
    )
