"""Telemetry data model: run records, mission profiles, features, CSV I/O.

All series are stored as read-only float64 arrays.  A run holds uniformly
sampled timesteps; a mission profile holds the piecewise-constant command
sequence that drove (or will drive) a run.  Feature extraction turns a run
into the four-column network input described by ``FeatureRow``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateCorpusError,
    EmptyRunError,
    MalformedProfileError,
    MalformedRunError,
)

RUN_CSV_HEADER = ("t", "cmd_speed", "actual_speed", "utilization")
PROFILE_CSV_HEADER = ("t", "cmd_speed")

_TIME_RTOL = 1e-7


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _fmt(x: float) -> str:
    # repr round-trips float64 exactly, which keeps CSV output byte-stable
    return repr(float(x))


@dataclass(frozen=True)
class Sample:
    """One telemetry timestep."""

    t: float
    cmd_speed: float
    actual_speed: float
    utilization: float


@dataclass(frozen=True, eq=False)
class RunRecord:
    """Uniformly sampled telemetry for a single run.

    Invariants (see :meth:`validate`): times strictly increasing and spaced
    by ``dt``; commanded speed and utilization in [0, 1]; utilization
    non-decreasing and starting at 0; all values finite.  Measured speed may
    slightly exceed the commanded range (overshoot, noise) and is only
    required to be finite and non-negative.
    """

    run_id: str
    t: np.ndarray
    cmd_speed: np.ndarray
    actual_speed: np.ndarray
    utilization: np.ndarray
    dt: float

    def __post_init__(self):
        for name in ("t", "cmd_speed", "actual_speed", "utilization"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        n = self.t.shape[0]
        for name in ("cmd_speed", "actual_speed", "utilization"):
            if getattr(self, name).shape != (n,):
                raise MalformedRunError(
                    f"run {self.run_id!r}: column {name} has wrong length"
                )
        object.__setattr__(self, "dt", float(self.dt))

    def __len__(self) -> int:
        return self.t.shape[0]

    @classmethod
    def from_samples(cls, run_id: str, samples: Sequence[Sample], dt: float) -> "RunRecord":
        return cls(
            run_id=run_id,
            t=[s.t for s in samples],
            cmd_speed=[s.cmd_speed for s in samples],
            actual_speed=[s.actual_speed for s in samples],
            utilization=[s.utilization for s in samples],
            dt=dt,
        )

    @cached_property
    def samples(self) -> tuple[Sample, ...]:
        return tuple(
            Sample(float(t), float(c), float(a), float(u))
            for t, c, a, u in zip(self.t, self.cmd_speed, self.actual_speed, self.utilization)
        )

    def validate(self, normalized: bool = False) -> None:
        """Raise if the record violates the run invariants.

        With ``normalized=True`` additionally require commanded speeds <= 1.
        """
        rid = self.run_id
        if len(self) == 0:
            raise EmptyRunError(f"run {rid!r} has no samples")
        for name in ("t", "cmd_speed", "actual_speed", "utilization"):
            if not np.isfinite(getattr(self, name)).all():
                raise MalformedRunError(f"run {rid!r}: non-finite values in {name}")
        if self.dt <= 0:
            raise MalformedRunError(f"run {rid!r}: dt must be positive")
        if len(self) > 1:
            diffs = np.diff(self.t)
            if not (diffs > 0).all():
                raise MalformedRunError(f"run {rid!r}: times not strictly increasing")
            if not np.allclose(diffs, self.dt, rtol=_TIME_RTOL, atol=self.dt * _TIME_RTOL):
                raise MalformedRunError(f"run {rid!r}: times not uniformly spaced by dt")
        if (self.cmd_speed < 0).any():
            raise MalformedRunError(f"run {rid!r}: negative commanded speed")
        if normalized and (self.cmd_speed > 1 + 1e-9).any():
            raise MalformedRunError(f"run {rid!r}: commanded speed above 1 after scaling")
        if (self.actual_speed < 0).any():
            raise MalformedRunError(f"run {rid!r}: negative measured speed")
        util = self.utilization
        if (util < 0).any() or (util > 1).any():
            raise MalformedRunError(f"run {rid!r}: utilization outside [0, 1]")
        if abs(util[0]) > 1e-12:
            raise MalformedRunError(f"run {rid!r}: utilization must start at 0")
        if len(self) > 1 and (np.diff(util) < -1e-12).any():
            raise MalformedRunError(f"run {rid!r}: utilization must be non-decreasing")


@dataclass(frozen=True, eq=False)
class MissionProfile:
    """Piecewise-constant command schedule: (start_time, cmd_speed) segments."""

    segments: tuple[tuple[float, float], ...]
    duration: float

    def __post_init__(self):
        segs = tuple((float(t), float(c)) for t, c in self.segments)
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "duration", float(self.duration))
        if not segs:
            raise MalformedProfileError("profile has no segments")
        if abs(segs[0][0]) > 1e-12:
            raise MalformedProfileError("first segment must start at t=0")
        starts = [t for t, _ in segs]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise MalformedProfileError("segment start times must strictly increase")
        if self.duration <= starts[-1]:
            raise MalformedProfileError("duration must exceed the last segment start")

    def n_steps(self, dt: float) -> int:
        return int(round(self.duration / dt))

    def step_commands(self, dt: float) -> np.ndarray:
        """Expand to one command per uniform timestep of width ``dt``."""
        n = self.n_steps(dt)
        if n < 1:
            raise MalformedProfileError("profile shorter than one timestep")
        starts = np.array([t for t, _ in self.segments])
        cmds = np.array([c for _, c in self.segments])
        edges = np.rint(np.append(starts, self.duration) / dt).astype(int)
        edges[0] = 0
        edges[-1] = n
        edges = np.maximum.accumulate(np.clip(edges, 0, n))
        return np.repeat(cmds, np.diff(edges))

    def change_times(self) -> np.ndarray:
        return np.array([t for t, _ in self.segments])

    @classmethod
    def from_run(cls, run: RunRecord) -> "MissionProfile":
        """Profile implied by a run's recorded command sequence."""
        if len(run) == 0:
            raise EmptyRunError(f"run {run.run_id!r} has no samples")
        cmd = run.cmd_speed
        rel_t = run.t - run.t[0]
        change = np.ones(len(run), dtype=bool)
        change[1:] = cmd[1:] != cmd[:-1]
        idx = np.flatnonzero(change)
        segments = tuple((float(rel_t[i]), float(cmd[i])) for i in idx)
        return cls(segments=segments, duration=float(len(run) * run.dt))


@dataclass(frozen=True)
class FeatureRow:
    """One network input row plus its target.

    Columns: current commanded speed, previous commanded speed (0 at run
    start), time since the last command change, current utilization.
    ``time_since_change`` is kept in raw time units here; training divides
    it by the dwell scale.
    """

    cur_cmd: float
    prev_cmd: float
    time_since_change: float
    utilization: float
    target: float


def _segment_arrays(cmd: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample previous command and time since the active command began."""
    n = cmd.shape[0]
    change = np.empty(n, dtype=bool)
    change[0] = True
    np.not_equal(cmd[1:], cmd[:-1], out=change[1:])
    seg_id = np.cumsum(change) - 1
    starts = np.flatnonzero(change)
    seg_prev = np.empty(starts.shape[0])
    seg_prev[0] = 0.0
    seg_prev[1:] = cmd[starts[1:] - 1]
    return seg_prev[seg_id], t - t[starts][seg_id]


def feature_arrays(run: RunRecord) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(cur_cmd, prev_cmd, time_since_change, utilization, target) for a run."""
    if len(run) == 0:
        raise EmptyRunError(f"run {run.run_id!r} has no samples")
    if len(run) > 1 and not (np.diff(run.t) > 0).all():
        raise MalformedRunError(f"run {run.run_id!r}: times not strictly increasing")
    prev, tsc = _segment_arrays(run.cmd_speed, run.t)
    return run.cmd_speed.copy(), prev, tsc, run.utilization.copy(), run.actual_speed.copy()


def extract_features(run: RunRecord) -> list[FeatureRow]:
    """One FeatureRow per sample, in time order."""
    cur, prev, tsc, util, target = feature_arrays(run)
    return [
        FeatureRow(float(c), float(p), float(s), float(u), float(y))
        for c, p, s, u, y in zip(cur, prev, tsc, util, target)
    ]


def feature_matrix(run: RunRecord, dwell_scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Network input matrix (N x 4) and target column (N x 1) for a run."""
    cur, prev, tsc, util, target = feature_arrays(run)
    x = np.column_stack([cur, prev, tsc / dwell_scale, util])
    return x, target.reshape(-1, 1)


@dataclass(frozen=True)
class NormalizationMeta:
    """Scale factors mapping raw units to the normalized space.

    ``speed_scale`` divides all speeds (max commanded speed of the corpus);
    ``time_scale`` divides all times (total corpus duration, so the corpus
    spans one time unit end to end).  ``dwell_scale`` divides the
    time-since-change feature; ``dt`` records the common normalized timestep
    when the corpus has one.
    """

    speed_scale: float
    time_scale: float
    dwell_scale: float = 1.0
    dt: float | None = None


def normalize(runs: Iterable[RunRecord]) -> tuple[list[RunRecord], NormalizationMeta]:
    """Scale a corpus so speeds and total time land in [0, 1].

    Speeds are divided by the maximum commanded speed across the corpus;
    times by the summed run durations.  Returns the scaled runs plus the
    metadata needed to invert the mapping.
    """
    runs = list(runs)
    if not runs:
        raise DegenerateCorpusError("cannot normalize an empty corpus")
    for run in runs:
        if len(run) == 0:
            raise EmptyRunError(f"run {run.run_id!r} has no samples")
        if (run.cmd_speed < 0).any() or (run.actual_speed < 0).any():
            raise MalformedRunError(f"run {run.run_id!r}: negative raw speeds")
        if len(run) > 1 and not (np.diff(run.t) > 0).all():
            raise MalformedRunError(f"run {run.run_id!r}: times not strictly increasing")
    speed_scale = max(float(run.cmd_speed.max()) for run in runs)
    if speed_scale <= 0:
        raise DegenerateCorpusError("corpus max commanded speed is zero")
    time_scale = sum(len(run) * run.dt for run in runs)
    scaled = [
        RunRecord(
            run_id=run.run_id,
            t=run.t / time_scale,
            cmd_speed=run.cmd_speed / speed_scale,
            actual_speed=run.actual_speed / speed_scale,
            utilization=run.utilization,
            dt=run.dt / time_scale,
        )
        for run in runs
    ]
    dts = [run.dt for run in scaled]
    common_dt = dts[0] if np.allclose(dts, dts[0], rtol=_TIME_RTOL) else None
    meta = NormalizationMeta(speed_scale=speed_scale, time_scale=time_scale, dt=common_dt)
    return scaled, meta


def denormalize(runs: Iterable[RunRecord], meta: NormalizationMeta) -> list[RunRecord]:
    """Invert :func:`normalize`."""
    return [
        RunRecord(
            run_id=run.run_id,
            t=run.t * meta.time_scale,
            cmd_speed=run.cmd_speed * meta.speed_scale,
            actual_speed=run.actual_speed * meta.speed_scale,
            utilization=run.utilization,
            dt=run.dt * meta.time_scale,
        )
        for run in runs
    ]


def write_run_csv(run: RunRecord, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUN_CSV_HEADER)
        for t, c, a, u in zip(run.t, run.cmd_speed, run.actual_speed, run.utilization):
            writer.writerow([_fmt(t), _fmt(c), _fmt(a), _fmt(u)])


def read_run_csv(path, run_id: str | None = None, dt: float | None = None) -> RunRecord:
    path = Path(path)
    rid = run_id if run_id is not None else path.stem
    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != RUN_CSV_HEADER:
            raise MalformedRunError(f"{path}:1: expected header {','.join(RUN_CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise MalformedRunError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise MalformedRunError(f"{path}:{lineno}: bad number: {exc}") from exc
    if not rows:
        raise EmptyRunError(f"{path}: no data rows")
    data = np.array(rows)
    if dt is None:
        if len(rows) < 2:
            raise MalformedRunError(f"{path}: cannot infer dt from a single row")
        dt = float((data[-1, 0] - data[0, 0]) / (len(rows) - 1))
    return RunRecord(
        run_id=rid,
        t=data[:, 0],
        cmd_speed=data[:, 1],
        actual_speed=data[:, 2],
        utilization=data[:, 3],
        dt=dt,
    )


def write_profile_csv(profile: MissionProfile, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# duration={_fmt(profile.duration)}\n")
        writer = csv.writer(fh)
        writer.writerow(PROFILE_CSV_HEADER)
        for t, c in profile.segments:
            writer.writerow([_fmt(t), _fmt(c)])


def read_profile_csv(path) -> MissionProfile:
    path = Path(path)
    duration = None
    segments: list[tuple[float, float]] = []
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body: list[tuple[int, str]] = []
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if stripped.startswith("#"):
            meta = stripped.lstrip("#").strip()
            if meta.startswith("duration"):
                _, _, value = meta.partition("=")
                try:
                    duration = float(value.strip())
                except ValueError as exc:
                    raise MalformedProfileError(f"{path}:{lineno}: bad duration") from exc
            continue
        if stripped:
            body.append((lineno, stripped))
    if not body:
        raise MalformedProfileError(f"{path}: no header row")
    header_line, header = body[0]
    if tuple(h.strip() for h in header.split(",")) != PROFILE_CSV_HEADER:
        raise MalformedProfileError(
            f"{path}:{header_line}: expected header {','.join(PROFILE_CSV_HEADER)}"
        )
    for lineno, line in body[1:]:
        parts = line.split(",")
        if len(parts) != 2:
            raise MalformedProfileError(f"{path}:{lineno}: expected 2 fields")
        try:
            segments.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise MalformedProfileError(f"{path}:{lineno}: bad number: {exc}") from exc
    if duration is None:
        raise MalformedProfileError(f"{path}: missing '# duration=...' line")
    return MissionProfile(segments=tuple(segments), duration=duration)
