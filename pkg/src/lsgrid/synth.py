"""Seeded synthetic load and PV profiles.

Stand-ins for metered data: each load node gets a daily double-peak shape
(morning and evening) scaled so its maximum clears 110% of the node's
nameplate peak, except critical nodes which keep their stated peak exactly.
PV farms get a clear-sky bell with mild cloud dips. Identical seeds give
identical profiles.
"""

from __future__ import annotations

import math

import numpy as np

from .feeder import DER_PV, FeederModel
from .profiles import Profile
from .scenario import ScenarioConfig


def _daily_shape(hours: np.ndarray) -> np.ndarray:
    base = 0.42
    morning = 0.22 * np.exp(-(((hours - 8.0) / 2.0) ** 2))
    evening = 0.58 * np.exp(-(((hours - 19.0) / 2.8) ** 2))
    shape = base + morning + evening
    return shape / shape.max()


def _pv_shape(hours: np.ndarray) -> np.ndarray:
    rise, fall = 6.25, 19.25
    arg = np.clip((hours - rise) / (fall - rise), 0.0, 1.0)
    return np.sin(math.pi * arg) ** 1.3


def generate_profiles(feeder: FeederModel, scenario: ScenarioConfig,
                      seed: int = 0) -> dict[str, Profile]:
    rng = np.random.default_rng(seed)
    T = scenario.horizon_steps
    dt_h = scenario.dt_hours
    start_h = scenario.start_time.hour + scenario.start_time.minute / 60.0
    hours = start_h + (np.arange(T) + 0.5) * dt_h
    day_hours = np.mod(hours, 24.0)
    shape = _daily_shape(day_hours)

    profiles: dict[str, Profile] = {}
    for node in feeder.nodes:
        if node.peak_kw <= 0:
            values = np.zeros(T)
        else:
            jitter = 1.0 + 0.05 * rng.standard_normal(T)
            jitter = np.clip(jitter, 0.82, 1.18)
            series = shape * jitter
            series = series / series.max()
            scale = 1.0 if node.is_critical else 1.1 * rng.uniform(1.0, 1.08)
            values = node.peak_kw * scale * series
        profiles[node.id] = Profile(
            subject_id=node.id, start_time=scenario.start_time,
            step_minutes=scenario.step_minutes,
            values_kw=tuple(round(float(v), 3) for v in values),
        )

    pv_curve = _pv_shape(day_hours)
    for der in feeder.ders:
        if der.kind != DER_PV:
            continue
        clouds = np.ones(T)
        for _ in range(3):
            center = rng.uniform(9.0, 17.0)
            width = rng.uniform(0.4, 1.2)
            depth = rng.uniform(0.05, 0.22)
            clouds *= 1.0 - depth * np.exp(-(((day_hours - center) / width) ** 2))
        values = der.rated_kw * pv_curve * clouds
        profiles[der.id] = Profile(
            subject_id=der.id, start_time=scenario.start_time,
            step_minutes=scenario.step_minutes,
            values_kw=tuple(round(float(v), 3) for v in values),
        )
    return profiles
