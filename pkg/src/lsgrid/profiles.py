"""Load and PV time series: CSV ingestion, resampling, preference weights."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import datetime, timedelta

from .errors import ProfileDataError

CSV_HEADER = ["subject_id", "timestamp_iso8601", "kw"]


@dataclass(frozen=True)
class Profile:
    subject_id: str
    start_time: datetime
    step_minutes: int
    values_kw: tuple[float, ...]

    def energy_kwh(self) -> float:
        return sum(self.values_kw) * self.step_minutes / 60.0


@dataclass(frozen=True)
class PreferenceWindow:
    start_step: int  # 1-indexed, inclusive
    end_step: int    # inclusive
    weight: float


@dataclass(frozen=True)
class PreferenceSchedule:
    windows: tuple[PreferenceWindow, ...]
    default_weight: float = 1.0

    def validate(self, horizon_steps: int) -> None:
        occupied: set[int] = set()
        for w in self.windows:
            if w.weight < 1.0:
                raise ProfileDataError(f"preference weight {w.weight} < 1")
            if not 1 <= w.start_step <= w.end_step <= horizon_steps:
                raise ProfileDataError(
                    f"window steps {w.start_step}..{w.end_step} outside horizon 1..{horizon_steps}"
                )
            span = set(range(w.start_step, w.end_step + 1))
            if span & occupied:
                raise ProfileDataError("preference windows overlap")
            occupied |= span


def preference_weight(schedule: PreferenceSchedule, t: int) -> float:
    """Weight applied to step t (1-indexed); window bounds are inclusive."""
    for w in schedule.windows:
        if w.start_step <= t <= w.end_step:
            return w.weight
    return schedule.default_weight


def resample(profile: Profile, target_step_minutes: int) -> Profile:
    """Downsample by averaging; conserves energy since values are powers."""
    if target_step_minutes == profile.step_minutes:
        return profile
    if target_step_minutes % profile.step_minutes != 0:
        raise ProfileDataError(
            f"target step {target_step_minutes} min is not a multiple of "
            f"source step {profile.step_minutes} min"
        )
    ratio = target_step_minutes // profile.step_minutes
    if len(profile.values_kw) % ratio != 0:
        raise ProfileDataError(
            f"profile {profile.subject_id}: {len(profile.values_kw)} values do not "
            f"divide into blocks of {ratio}"
        )
    values = tuple(
        sum(profile.values_kw[i: i + ratio]) / ratio
        for i in range(0, len(profile.values_kw), ratio)
    )
    return Profile(profile.subject_id, profile.start_time, target_step_minutes, values)


def _parse_rows(csv_source):
    if hasattr(csv_source, "read"):
        text = csv_source.read()
    else:
        with open(csv_source, "r", encoding="utf-8") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != CSV_HEADER:
        raise ProfileDataError(f"profile CSV header must be {','.join(CSV_HEADER)}")
    by_subject: dict[str, list[tuple[datetime, float]]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ProfileDataError(f"line {lineno}: expected 3 fields")
        sid, ts_raw, kw_raw = row
        try:
            ts = datetime.fromisoformat(ts_raw)
            kw = float(kw_raw)
        except ValueError as exc:
            raise ProfileDataError(f"line {lineno}: {exc}") from exc
        if kw < 0:
            raise ProfileDataError(f"line {lineno}: negative power {kw} for {sid!r}")
        by_subject.setdefault(sid, []).append((ts, kw))
    return by_subject


def load_profiles(csv_source, scenario) -> dict[str, Profile]:
    """Read a long-format CSV and align every subject to the scenario grid.

    Each subject must start at the scenario start, be gap-free at a uniform
    step, and cover the whole horizon; finer series are averaged down to the
    scenario step.
    """
    by_subject = _parse_rows(csv_source)
    out: dict[str, Profile] = {}
    horizon = timedelta(minutes=scenario.step_minutes * scenario.horizon_steps)
    for sid in sorted(by_subject):
        rows = sorted(by_subject[sid], key=lambda r: r[0])
        if rows[0][0] != scenario.start_time:
            raise ProfileDataError(
                f"{sid!r}: series starts {rows[0][0].isoformat()}, scenario starts "
                f"{scenario.start_time.isoformat()}"
            )
        if len(rows) < 2:
            raise ProfileDataError(f"{sid!r}: need at least two rows to infer the step")
        step = rows[1][0] - rows[0][0]
        step_minutes = step.total_seconds() / 60.0
        if step_minutes <= 0 or step_minutes != int(step_minutes):
            raise ProfileDataError(f"{sid!r}: non-positive or fractional step {step}")
        step_minutes = int(step_minutes)
        for k in range(1, len(rows)):
            if rows[k][0] - rows[k - 1][0] != step:
                raise ProfileDataError(
                    f"{sid!r}: gap at step {k + 1} "
                    f"({rows[k - 1][0].isoformat()} -> {rows[k][0].isoformat()})"
                )
        if scenario.step_minutes % step_minutes != 0:
            raise ProfileDataError(
                f"{sid!r}: source step {step_minutes} min does not divide "
                f"scenario step {scenario.step_minutes} min"
            )
        needed = int(horizon.total_seconds() // 60) // step_minutes
        if len(rows) < needed:
            raise ProfileDataError(
                f"{sid!r}: {len(rows)} rows cover less than the horizon ({needed} needed)"
            )
        prof = Profile(
            subject_id=sid,
            start_time=rows[0][0],
            step_minutes=step_minutes,
            values_kw=tuple(kw for _, kw in rows[:needed]),
        )
        out[sid] = resample(prof, scenario.step_minutes)
    return out


def write_profiles_csv(profiles: dict[str, Profile], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for sid in sorted(profiles):
            p = profiles[sid]
            for k, kw in enumerate(p.values_kw):
                ts = p.start_time + timedelta(minutes=k * p.step_minutes)
                writer.writerow([sid, ts.isoformat(), f"{kw:.3f}"])
