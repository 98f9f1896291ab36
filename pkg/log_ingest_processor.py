"""
Demonstration Log Ingest Processor
==================================

Purpose: Parse raw human-embodiment logs (device-pose and hand-position CSVs
from an egocentric perception service) and robot teleoperation logs into
validated TimedSeries grouped into Episodes at their native rates.

Key Features:
- Line-accurate validation (MalformedRow / ArityMismatch carry the line number)
- Device and hand CSVs joined on a shared clock (1 ms tolerance)
- Rows with missing hand detections dropped, never imputed
- Gaps longer than 3 nominal periods split a log into separate episodes
- Timestamps re-based to seconds from episode start
- Writers that serialize episodes back to the same CSV formats
"""

import csv
import io
import re
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from pipeline_errors import (
    ArityMismatch,
    ClockMismatch,
    DimensionMismatch,
    IndexOutOfRange,
    InsufficientOverlap,
    MalformedRow,
)
from se3_geometry import ORTHONORMAL_TOL, reorthonormalize_rows

HUMAN = "human"
ROBOT = "robot"
EMBODIMENTS = (HUMAN, ROBOT)

DEVICE_POSE_WORLD = "device_pose_world"
HAND_POS_DEVICE = "hand_pos_device"
EEF_POSE_BASE = "eef_pose_base"
JOINT_POS = "joint_pos"
JOINT_ACTION = "joint_action"
SCENE_WORLD = "scene_world"

# Width of one unit (arm, hand or device) of each series kind
KIND_UNIT_WIDTH = {
    DEVICE_POSE_WORLD: 12,
    HAND_POS_DEVICE: 3,
    EEF_POSE_BASE: 12,
    JOINT_POS: 7,
    JOINT_ACTION: 7,
    SCENE_WORLD: 8,
}
POSE_KINDS = {DEVICE_POSE_WORLD, EEF_POSE_BASE}

REQUIRED_KINDS = {
    HUMAN: (DEVICE_POSE_WORLD, HAND_POS_DEVICE),
    ROBOT: (EEF_POSE_BASE, JOINT_POS, JOINT_ACTION),
}
PRIMARY_KIND = {HUMAN: DEVICE_POSE_WORLD, ROBOT: EEF_POSE_BASE}

POSE_COLUMNS = ['r00', 'r01', 'r02', 'r10', 'r11', 'r12', 'r20', 'r21', 'r22', 'tx', 'ty', 'tz']
DEVICE_COLUMNS = ['t_s'] + POSE_COLUMNS
HAND_COLUMNS = ['t_s', 'lx', 'ly', 'lz', 'rx', 'ry', 'rz', 'valid_l', 'valid_r']
SCENE_COLUMNS = ['t_s', 'obj_x', 'obj_y', 'obj_z', 'bowl_x', 'bowl_y', 'bowl_z', 'held', 'in_bowl']
ARM_PREFIXES = ('left_', 'right_')
HANDS = ('left', 'right')

_ROBOT_COLUMN = re.compile(r'^(?P<prefix>(?:left_|right_)?)(?P<base>r[0-2][0-2]|t[xyz]|q\d+|a\d+)$')


# -----------------------------------------------------------------------------
# Domain types
# -----------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class TimedSeries:
    """
    Timestamped stream of poses or vectors at a fixed nominal rate

    Attributes:
        timestamps: strictly increasing seconds, shape (N,)
        values: shape (N, D); D is a multiple of the kind's unit width
        nominal_rate: Hz
        kind: one of KIND_UNIT_WIDTH
    """

    timestamps: np.ndarray
    values: np.ndarray
    nominal_rate: float
    kind: str

    def __post_init__(self):
        timestamps = np.array(self.timestamps, dtype=np.float64)
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if self.kind not in KIND_UNIT_WIDTH:
            raise DimensionMismatch(f"unknown series kind '{self.kind}'")
        if timestamps.ndim != 1 or values.shape[0] != timestamps.shape[0]:
            raise DimensionMismatch("timestamps and values must have the same length")
        if values.shape[1] == 0 or values.shape[1] % KIND_UNIT_WIDTH[self.kind] != 0:
            raise DimensionMismatch(
                f"{self.kind} needs a multiple of {KIND_UNIT_WIDTH[self.kind]} columns, "
                f"got {values.shape[1]}")
        if self.nominal_rate <= 0:
            raise DimensionMismatch("nominal_rate must be positive")
        if timestamps.size > 1:
            steps = np.diff(timestamps)
            if np.any(steps <= 0):
                raise MalformedRow("timestamps must be strictly increasing")
            if np.max(steps) > 3.0 / self.nominal_rate + 1e-6:
                raise MalformedRow(
                    f"gap of {np.max(steps):.4f}s exceeds 3 periods; split the series first")
        timestamps.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.timestamps.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def units(self) -> int:
        return self.width // KIND_UNIT_WIDTH[self.kind]

    @property
    def start(self) -> float:
        return float(self.timestamps[0])

    @property
    def end(self) -> float:
        return float(self.timestamps[-1])

    def at(self, times: Sequence[float]) -> np.ndarray:
        """
        Linearly interpolate values at `times`

        Pose kinds interpolate the rotation matrices elementwise and project
        the result back onto SO(3). Sample times reproduce stored values
        exactly.

        Raises:
            IndexOutOfRange: a requested time lies outside the series extent
        """
        times = np.asarray(times, dtype=np.float64)
        ts = self.timestamps
        if times.size and (times.min() < ts[0] - 1e-9 or times.max() > ts[-1] + 1e-9):
            raise IndexOutOfRange(
                f"requested time outside [{ts[0]:.6f}, {ts[-1]:.6f}] for {self.kind}")
        if len(self) == 1:
            return np.repeat(self.values, times.size, axis=0)
        idx = np.clip(np.searchsorted(ts, times, side='right') - 1, 0, len(self) - 2)
        weight = np.clip((times - ts[idx]) / (ts[idx + 1] - ts[idx]), 0.0, 1.0)[:, None]
        out = self.values[idx] * (1.0 - weight) + self.values[idx + 1] * weight
        if self.kind in POSE_KINDS:
            out = _reorthonormalize_blocks(out)
        return out

    def shifted(self, offset: float) -> "TimedSeries":
        return TimedSeries(self.timestamps - offset, self.values, self.nominal_rate, self.kind)


@dataclass(frozen=True, eq=False)
class Episode:
    """
    One continuous demonstration from a single embodiment

    Attributes:
        embodiment: 'human' or 'robot'
        series: kind -> TimedSeries, all on one clock
        arms: 1 or 2
        source_id: stable identifier (file stem plus split suffix)
        meta: free-form generator metadata (seed, placements, expert score)
    """

    embodiment: str
    series: Mapping[str, TimedSeries]
    arms: int
    source_id: str
    meta: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.embodiment not in EMBODIMENTS:
            raise DimensionMismatch(f"unknown embodiment '{self.embodiment}'")
        if self.arms not in (1, 2):
            raise DimensionMismatch("arms must be 1 or 2")
        for kind in REQUIRED_KINDS[self.embodiment]:
            if kind not in self.series:
                raise DimensionMismatch(f"{self.embodiment} episode is missing '{kind}'")
        expected_rate = NOMINAL_RATE[self.embodiment]
        for kind, series in self.series.items():
            if series.kind != kind:
                raise DimensionMismatch(f"series stored under '{kind}' has kind '{series.kind}'")
            if series.nominal_rate != expected_rate:
                raise DimensionMismatch(
                    f"{self.embodiment} series must be {expected_rate} Hz, got {series.nominal_rate}")
            units = 1 if kind in (DEVICE_POSE_WORLD, SCENE_WORLD) else self.arms
            if series.width != KIND_UNIT_WIDTH[kind] * units:
                raise DimensionMismatch(
                    f"{kind} expects {KIND_UNIT_WIDTH[kind] * units} columns, got {series.width}")

    @property
    def primary(self) -> TimedSeries:
        return self.series[PRIMARY_KIND[self.embodiment]]

    @property
    def timestamps(self) -> np.ndarray:
        return self.primary.timestamps

    @property
    def nominal_rate(self) -> float:
        return NOMINAL_RATE[self.embodiment]

    @property
    def start(self) -> float:
        return max(s.start for s in self.series.values())

    @property
    def end(self) -> float:
        return min(s.end for s in self.series.values())

    @property
    def duration(self) -> float:
        return self.end - self.start

    def __len__(self) -> int:
        return len(self.primary)


NOMINAL_RATE = {HUMAN: 30.0, ROBOT: 50.0}


def _reorthonormalize_blocks(values: np.ndarray) -> np.ndarray:
    """Re-project every 12-value pose block in each row onto SO(3)"""
    out = np.array(values, dtype=np.float64)
    for start in range(0, out.shape[1], 12):
        out[:, start:start + 12] = reorthonormalize_rows(out[:, start:start + 12])
    return out


def _fmt(value: float) -> str:
    """Shortest text that parses back to the identical float"""
    if np.isnan(value):
        return ''
    return repr(float(value))


# -----------------------------------------------------------------------------
# Processor
# -----------------------------------------------------------------------------
class IngestProcessor:
    """
    Parses raw demonstration logs into Episodes
    """

    HUMAN_RATE_HZ = NOMINAL_RATE[HUMAN]
    ROBOT_RATE_HZ = NOMINAL_RATE[ROBOT]

    # Gap threshold for splitting human episodes (3 missed frames at 30 Hz)
    HUMAN_GAP_S = 0.1
    CLOCK_TOLERANCE_S = 1e-3
    MIN_SHARED_FRACTION = 0.5
    MIN_ALIGN_OVERLAP_S = 1.0

    # Text logs carry ~17 significant digits; accept small rotation drift and re-project
    LOG_ROTATION_TOL = 1e-6

    def __init__(self, verbose: bool = False):
        """
        Initialize the ingest processor

        Args:
            verbose: Print a line per parsed log
        """
        self.verbose = verbose

    # -------------------------------------------------------------------------
    # Table reading
    # -------------------------------------------------------------------------
    def _read_rows(self, text: str) -> Tuple[List[str], List[Tuple[int, List[str]]]]:
        """Split CSV text into a header and (line_number, fields) rows"""
        rows = []
        header = None
        for line_no, fields in enumerate(csv.reader(io.StringIO(text)), start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            fields = [f.strip() for f in fields]
            if header is None:
                header = fields
                continue
            rows.append((line_no, fields))
        if header is None:
            raise MalformedRow("missing header row", line=1)
        return header, rows

    def _parse_float(self, token: str, line_no: int, allow_blank: bool = False) -> float:
        if token == '' and allow_blank:
            return float('nan')
        try:
            value = float(token)
        except ValueError:
            raise MalformedRow(f"cannot parse '{token}' as a number", line=line_no)
        if not np.isfinite(value):
            raise MalformedRow(f"non-finite value '{token}'", line=line_no)
        return value

    def _read_table(self, text: str, expected_header: List[str],
                    blank_ok_columns: Sequence[int] = (),
                    arity_error: type = MalformedRow) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Read a fixed-layout numeric CSV

        Returns:
            (timestamps (N,), values (N, len(header) - 1), source line numbers (N,));
            blanks become NaN
        """
        header, rows = self._read_rows(text)
        if header != expected_header:
            raise MalformedRow(f"unexpected header {header}", line=1)

        width = len(expected_header)
        table = np.empty((len(rows), width))
        blank_ok = set(blank_ok_columns)
        previous_t = -np.inf
        for i, (line_no, fields) in enumerate(rows):
            if len(fields) != width:
                raise arity_error(f"expected {width} fields, got {len(fields)}", line=line_no)
            for j, token in enumerate(fields):
                table[i, j] = self._parse_float(token, line_no, allow_blank=j in blank_ok)
            if table[i, 0] <= previous_t:
                raise MalformedRow("timestamps must be strictly increasing", line=line_no)
            previous_t = table[i, 0]
        lines = np.array([line_no for line_no, _ in rows], dtype=np.int64)
        return table[:, 0], table[:, 1:], lines

    def _check_rotations(self, pose_rows: np.ndarray, label: str, lines: np.ndarray) -> np.ndarray:
        """Validate 12-value pose blocks and re-project them onto SO(3)"""
        for start in range(0, pose_rows.shape[1], 12):
            rotations = pose_rows[:, start:start + 9].reshape(-1, 3, 3)
            gram = np.einsum('nji,njk->nik', rotations, rotations)
            error = np.max(np.abs(gram - np.eye(3)), axis=(1, 2))
            bad = np.nonzero((error > self.LOG_ROTATION_TOL) | (np.linalg.det(rotations) <= 0))[0]
            if bad.size:
                raise MalformedRow(f"{label} rotation is not orthonormal", line=int(lines[bad[0]]))
        return _reorthonormalize_blocks(pose_rows)

    # -------------------------------------------------------------------------
    # Clock handling
    # -------------------------------------------------------------------------
    def _match_clock(self, reference: np.ndarray, other: np.ndarray) -> np.ndarray:
        """
        For each reference timestamp, the index of the `other` row within
        CLOCK_TOLERANCE_S, or -1
        """
        if other.size == 0:
            return np.full(reference.shape, -1)
        pos = np.clip(np.searchsorted(other, reference), 1, max(other.size - 1, 1))
        left = np.clip(pos - 1, 0, other.size - 1)
        right = np.clip(pos, 0, other.size - 1)
        use_right = np.abs(other[right] - reference) < np.abs(other[left] - reference)
        nearest = np.where(use_right, right, left)
        close = np.abs(other[nearest] - reference) <= self.CLOCK_TOLERANCE_S
        return np.where(close, nearest, -1)

    def _split_on_gaps(self, timestamps: np.ndarray, max_gap: float) -> List[slice]:
        """Contiguous index ranges separated by gaps larger than `max_gap`"""
        if timestamps.size == 0:
            return []
        breaks = np.nonzero(np.diff(timestamps) > max_gap + 1e-6)[0] + 1
        edges = [0] + breaks.tolist() + [timestamps.size]
        return [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]

    def _episode_id(self, source_id: str, k: int, total: int) -> str:
        return source_id if total == 1 else f"{source_id}#{k}"

    # -------------------------------------------------------------------------
    # Human logs
    # -------------------------------------------------------------------------
    def parse_human_log(self, device_pose_csv: str, hand_pos_csv: str,
                        scene_csv: Optional[str] = None, source_id: str = 'human',
                        arms: int = 1, hand: str = 'right') -> List[Episode]:
        """
        Parse a device-pose CSV and a hand-position CSV into human episodes

        Args:
            device_pose_csv: `t_s, r00..r22, tx, ty, tz` (world frame)
            hand_pos_csv: `t_s, lx, ly, lz, rx, ry, rz, valid_l, valid_r` (device frame)
            scene_csv: optional `t_s, obj_*, bowl_*, held, in_bowl` (world frame)
            source_id: identifier of the recording
            arms: 1 (single hand, see `hand`) or 2 (both hands, left first)
            hand: which hand to keep when arms == 1

        Returns:
            Episodes produced by gap splitting (one in the common case)

        Raises:
            MalformedRow: unparsable line or non-increasing timestamps
            ClockMismatch: the CSVs share < 50% of timestamps within 1 ms
        """
        if arms not in (1, 2) or hand not in HANDS:
            raise DimensionMismatch("arms must be 1 or 2 and hand 'left' or 'right'")

        dev_t, dev_v, dev_lines = self._read_table(device_pose_csv, DEVICE_COLUMNS)
        dev_v = self._check_rotations(dev_v, 'device pose', dev_lines)
        hand_t, hand_v, hand_lines = self._read_table(hand_pos_csv, HAND_COLUMNS, blank_ok_columns=range(1, 7))

        valid = hand_v[:, 6:8]
        if np.any((valid != 0) & (valid != 1)):
            bad = int(np.nonzero(np.any((valid != 0) & (valid != 1), axis=1))[0][0])
            raise MalformedRow("valid flags must be 0 or 1", line=int(hand_lines[bad]))

        match = self._match_clock(dev_t, hand_t)
        shared = int(np.sum(match >= 0))
        if shared < self.MIN_SHARED_FRACTION * max(dev_t.size, hand_t.size, 1):
            raise ClockMismatch(
                f"device and hand logs share {shared} of {max(dev_t.size, hand_t.size)} timestamps")

        hand_cols = [0, 1] if arms == 2 else [HANDS.index(hand)]
        keep = match >= 0
        matched = np.where(keep, match, 0)
        for h in hand_cols:
            xyz = hand_v[matched, 3 * h:3 * h + 3]
            keep &= (valid[matched, h] == 1) & np.all(np.isfinite(xyz), axis=1)

        scene_rows = None
        if scene_csv is not None:
            scene_t, scene_v, _ = self._read_table(scene_csv, SCENE_COLUMNS)
            scene_match = self._match_clock(dev_t, scene_t)
            keep &= scene_match >= 0
            scene_rows = scene_v[np.where(scene_match >= 0, scene_match, 0)]

        idx = np.nonzero(keep)[0]
        times = dev_t[idx]
        hand_xyz = np.concatenate([hand_v[match[idx], 3 * h:3 * h + 3] for h in hand_cols], axis=1)

        episodes = []
        segments = [s for s in self._split_on_gaps(times, self.HUMAN_GAP_S) if s.stop - s.start >= 2]
        for k, seg in enumerate(segments):
            t = times[seg] - times[seg][0]
            series = {
                DEVICE_POSE_WORLD: TimedSeries(t, dev_v[idx[seg]], self.HUMAN_RATE_HZ, DEVICE_POSE_WORLD),
                HAND_POS_DEVICE: TimedSeries(t, hand_xyz[seg], self.HUMAN_RATE_HZ, HAND_POS_DEVICE),
            }
            if scene_rows is not None:
                series[SCENE_WORLD] = TimedSeries(t, scene_rows[idx[seg]], self.HUMAN_RATE_HZ, SCENE_WORLD)
            episodes.append(Episode(HUMAN, series, arms, self._episode_id(source_id, k, len(segments)),
                                    meta={'hand': 'both' if arms == 2 else hand,
                                          'start_time': float(times[seg][0])}))

        if self.verbose:
            dropped = dev_t.size - idx.size
            print(f"    ✓ {source_id}: {idx.size} human samples in {len(episodes)} episode(s), "
                  f"{dropped} row(s) dropped")
        return episodes

    # -------------------------------------------------------------------------
    # Robot logs
    # -------------------------------------------------------------------------
    def _robot_layout(self, header: List[str]) -> List[str]:
        """Validate the robot header and return the arm prefixes in order"""
        if not header or header[0] != 't_s':
            raise MalformedRow("robot log must start with t_s", line=1)
        prefixes: List[str] = []
        for name in header[1:]:
            m = _ROBOT_COLUMN.match(name)
            if m is None:
                raise MalformedRow(f"unknown robot column '{name}'", line=1)
            if m.group('prefix') not in prefixes:
                prefixes.append(m.group('prefix'))
        if len(prefixes) > 2 or (len(prefixes) == 2 and set(prefixes) != set(ARM_PREFIXES)):
            raise MalformedRow("robot log must describe one arm or a left_/right_ pair", line=1)

        expected = ['t_s']
        for prefix in prefixes:
            names = [c for c in header[1:] if _ROBOT_COLUMN.match(c).group('prefix') == prefix]
            q_count = sum(1 for c in names if re.fullmatch(rf'{prefix}q\d+', c))
            a_count = sum(1 for c in names if re.fullmatch(rf'{prefix}a\d+', c))
            if q_count != 7 or a_count != 7:
                raise ArityMismatch(
                    f"arm '{prefix or 'single'}' has {q_count} joint and {a_count} action columns, "
                    "expected 7 each", line=1)
            expected += [prefix + c for c in POSE_COLUMNS]
            expected += [f"{prefix}q{i}" for i in range(1, 8)]
            expected += [f"{prefix}a{i}" for i in range(1, 8)]
        if header != expected:
            raise MalformedRow("robot columns are out of order", line=1)
        return prefixes

    def parse_robot_log(self, log: str, scene_csv: Optional[str] = None,
                        source_id: str = 'robot') -> List[Episode]:
        """
        Parse a robot teleoperation log

        Args:
            log: `t_s, [per arm: r00..r22, tx, ty, tz, q1..q7, a1..a7]` (base frame)
            scene_csv: optional scene log on the same clock
            source_id: identifier of the recording

        Returns:
            Episodes produced by gap splitting (one in the common case)

        Raises:
            MalformedRow: unparsable line or non-increasing timestamps
            ArityMismatch: joint vector length != 7 per arm
        """
        header, _ = self._read_rows(log)
        prefixes = self._robot_layout(header)
        arms = len(prefixes)
        times, values, lines = self._read_table(log, header, arity_error=ArityMismatch)

        blocks = [values[:, 26 * a:26 * (a + 1)] for a in range(arms)]
        eef = self._check_rotations(np.concatenate([b[:, :12] for b in blocks], axis=1), 'eef pose', lines)
        joints = np.concatenate([b[:, 12:19] for b in blocks], axis=1)
        actions = np.concatenate([b[:, 19:26] for b in blocks], axis=1)

        keep = np.ones(times.size, dtype=bool)
        scene_rows = None
        if scene_csv is not None:
            scene_t, scene_v, _ = self._read_table(scene_csv, SCENE_COLUMNS)
            scene_match = self._match_clock(times, scene_t)
            keep &= scene_match >= 0
            scene_rows = scene_v[np.where(scene_match >= 0, scene_match, 0)]

        idx = np.nonzero(keep)[0]
        segments = [s for s in self._split_on_gaps(times[idx], 3.0 / self.ROBOT_RATE_HZ)
                    if s.stop - s.start >= 2]
        episodes = []
        for k, seg in enumerate(segments):
            rows = idx[seg]
            t = times[rows] - times[rows][0]
            series = {
                EEF_POSE_BASE: TimedSeries(t, eef[rows], self.ROBOT_RATE_HZ, EEF_POSE_BASE),
                JOINT_POS: TimedSeries(t, joints[rows], self.ROBOT_RATE_HZ, JOINT_POS),
                JOINT_ACTION: TimedSeries(t, actions[rows], self.ROBOT_RATE_HZ, JOINT_ACTION),
            }
            if scene_rows is not None:
                series[SCENE_WORLD] = TimedSeries(t, scene_rows[rows], self.ROBOT_RATE_HZ, SCENE_WORLD)
            episodes.append(Episode(ROBOT, series, arms, self._episode_id(source_id, k, len(segments)),
                                    meta={'arm_prefixes': prefixes, 'start_time': float(times[rows][0])}))

        if self.verbose:
            print(f"    ✓ {source_id}: {idx.size} robot samples, {arms} arm(s), "
                  f"{len(episodes)} episode(s)")
        return episodes

    # -------------------------------------------------------------------------
    # Resampling
    # -------------------------------------------------------------------------
    def time_align(self, ep: Episode) -> Episode:
        """
        Resample every series of an episode onto one nominal-rate grid

        The grid starts at the latest series start and spans the intersection
        of all series extents; grid times are computed as start + k / rate.

        Raises:
            InsufficientOverlap: series overlap for less than 1 s
        """
        start = max(s.start for s in ep.series.values())
        end = min(s.end for s in ep.series.values())
        if end - start < self.MIN_ALIGN_OVERLAP_S - 1e-9:
            raise InsufficientOverlap(
                f"series of {ep.source_id} overlap for {max(end - start, 0.0):.3f}s, need 1s")
        rate = ep.nominal_rate
        count = int(np.floor((end - start) * rate + 1e-6)) + 1
        grid = start + np.arange(count) / rate
        grid = grid[grid <= end + 1e-9]
        series = {kind: TimedSeries(grid, s.at(grid), s.nominal_rate, kind)
                  for kind, s in ep.series.items()}
        return Episode(ep.embodiment, series, ep.arms, ep.source_id, dict(ep.meta))


# -----------------------------------------------------------------------------
# Writers
# -----------------------------------------------------------------------------
def _table_text(header: List[str], columns: List[np.ndarray]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(header)
    table = np.column_stack(columns) if columns else np.zeros((0, len(header)))
    for row in table:
        writer.writerow([_fmt(v) for v in row])
    return out.getvalue()


def format_device_csv(timestamps: np.ndarray, device_rows: np.ndarray) -> str:
    return _table_text(DEVICE_COLUMNS, [timestamps, device_rows])


def format_hand_csv(timestamps: np.ndarray, hand_xyz: np.ndarray, valid: np.ndarray) -> str:
    """
    Args:
        timestamps: (N,)
        hand_xyz: (N, 2, 3) left then right hand, NaN where not tracked
        valid: (N, 2) 0/1 flags
    """
    hand_xyz = np.where(valid[:, :, None] > 0, hand_xyz, np.nan)
    return _table_text(HAND_COLUMNS, [timestamps, hand_xyz.reshape(-1, 6), valid.astype(np.float64)])


def format_scene_csv(timestamps: np.ndarray, scene_rows: np.ndarray) -> str:
    return _table_text(SCENE_COLUMNS, [timestamps, scene_rows])


def robot_header(arms: int) -> List[str]:
    prefixes = [''] if arms == 1 else list(ARM_PREFIXES)
    header = ['t_s']
    for prefix in prefixes:
        header += [prefix + c for c in POSE_COLUMNS]
        header += [f"{prefix}q{i}" for i in range(1, 8)]
        header += [f"{prefix}a{i}" for i in range(1, 8)]
    return header


def format_robot_csv(timestamps: np.ndarray, eef_rows: np.ndarray, joints: np.ndarray,
                     actions: np.ndarray, arms: int = 1) -> str:
    columns = [timestamps]
    for a in range(arms):
        columns += [eef_rows[:, 12 * a:12 * (a + 1)], joints[:, 7 * a:7 * (a + 1)],
                    actions[:, 7 * a:7 * (a + 1)]]
    return _table_text(robot_header(arms), columns)


def write_human_log(ep: Episode) -> Tuple[str, str]:
    """Serialize a human episode back to (device_pose_csv, hand_pos_csv)"""
    t = ep.series[DEVICE_POSE_WORLD].timestamps
    hands = ep.series[HAND_POS_DEVICE].values
    xyz = np.full((t.size, 2, 3), np.nan)
    valid = np.zeros((t.size, 2))
    hand = ep.meta.get('hand', 'right')
    slots = [0, 1] if ep.arms == 2 else [HANDS.index(hand if hand in HANDS else 'right')]
    for k, slot in enumerate(slots):
        xyz[:, slot] = hands[:, 3 * k:3 * k + 3]
        valid[:, slot] = 1.0
    return (format_device_csv(t, ep.series[DEVICE_POSE_WORLD].values),
            format_hand_csv(t, xyz, valid))


def write_robot_log(ep: Episode) -> str:
    """Serialize a robot episode back to the robot log format"""
    return format_robot_csv(ep.series[EEF_POSE_BASE].timestamps, ep.series[EEF_POSE_BASE].values,
                            ep.series[JOINT_POS].values, ep.series[JOINT_ACTION].values, ep.arms)


def write_scene_log(ep: Episode) -> str:
    scene = ep.series[SCENE_WORLD]
    return format_scene_csv(scene.timestamps, scene.values)


# -----------------------------------------------------------------------------
# Module-level shortcuts
# -----------------------------------------------------------------------------
_default_processor = IngestProcessor()


def parse_human_log(device_pose_csv: str, hand_pos_csv: str, **kwargs) -> List[Episode]:
    return _default_processor.parse_human_log(device_pose_csv, hand_pos_csv, **kwargs)


def parse_robot_log(log: str, **kwargs) -> List[Episode]:
    return _default_processor.parse_robot_log(log, **kwargs)


def time_align(ep: Episode) -> Episode:
    return _default_processor.time_align(ep)
