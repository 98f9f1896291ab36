import numpy as np
import pytest

from log_ingest_processor import (
    DEVICE_POSE_WORLD,
    EEF_POSE_BASE,
    HAND_POS_DEVICE,
    HUMAN,
    JOINT_ACTION,
    JOINT_POS,
    ROBOT,
    Episode,
    IngestProcessor,
    TimedSeries,
    format_device_csv,
    format_hand_csv,
    format_robot_csv,
    parse_human_log,
    parse_robot_log,
    time_align,
    write_human_log,
    write_robot_log,
)
from pipeline_errors import ArityMismatch, ClockMismatch, InsufficientOverlap, MalformedRow
from se3_geometry import Pose3


def identity_rows(n):
    return np.tile(Pose3.identity().to_row(), (n, 1))


def human_csvs(times, hand=None):
    n = times.size
    device = identity_rows(n)
    device[:, 9] = np.linspace(0.0, 0.1, n)
    xyz = np.full((n, 2, 3), np.nan)
    xyz[:, 1] = hand if hand is not None else np.column_stack([np.sin(times), np.cos(times), times])
    valid = np.zeros((n, 2))
    valid[:, 1] = 1.0
    return format_device_csv(times, device), format_hand_csv(times, xyz, valid)


def robot_csv(times):
    n = times.size
    joints = np.outer(times, np.arange(1, 8))
    actions = joints + 0.01
    return format_robot_csv(times, identity_rows(n), joints, actions)


def test_minimal_human_pair():
    device, hand = human_csvs(np.array([0.0, 1.0 / 30]))
    episodes = parse_human_log(device, hand)
    assert len(episodes) == 1
    ep = episodes[0]
    assert ep.embodiment == HUMAN
    assert len(ep) == 2
    assert ep.series[HAND_POS_DEVICE].width == 3


def test_non_increasing_device_timestamp():
    device, hand = human_csvs(np.array([0.0, 1.0 / 30, 2.0 / 30]))
    lines = device.splitlines()
    lines[3] = lines[3].replace(repr(2.0 / 30), repr(0.5 / 30), 1)
    with pytest.raises(MalformedRow) as info:
        parse_human_log("\n".join(lines) + "\n", hand)
    assert info.value.line == 4


def test_sixty_seconds_at_thirty_hz():
    times = np.arange(1800) / 30.0
    episodes = parse_human_log(*human_csvs(times))
    assert len(episodes) == 1
    assert len(episodes[0]) == 1800
    assert episodes[0].nominal_rate == 30.0


def test_unparsable_line_reports_line_number():
    device, hand = human_csvs(np.arange(5) / 30.0)
    lines = hand.splitlines()
    fields = lines[2].split(',')
    fields[4] = 'abc'
    lines[2] = ','.join(fields)
    with pytest.raises(MalformedRow) as info:
        parse_human_log(device, "\n".join(lines) + "\n")
    assert info.value.line == 3


def with_blank_line_and_bad_field(csv_text, row, column, token):
    lines = csv_text.splitlines()
    fields = lines[row].split(',')
    fields[column] = token
    lines[row] = ','.join(fields)
    lines.insert(1, '')
    return "\n".join(lines) + "\n"


def test_bad_device_rotation_reports_file_line():
    device, hand = human_csvs(np.arange(5) / 30.0)
    with pytest.raises(MalformedRow) as info:
        parse_human_log(with_blank_line_and_bad_field(device, 2, 1, '2.0'), hand)
    assert info.value.line == 4


def test_bad_eef_rotation_reports_file_line():
    log = with_blank_line_and_bad_field(robot_csv(np.arange(6) / 50.0), 3, 1, '-1.0')
    with pytest.raises(MalformedRow) as info:
        parse_robot_log(log)
    assert info.value.line == 5


def test_bad_valid_flag_reports_file_line():
    device, hand = human_csvs(np.arange(5) / 30.0)
    with pytest.raises(MalformedRow) as info:
        parse_human_log(device, with_blank_line_and_bad_field(hand, 1, 7, '0.5'))
    assert info.value.line == 3


def test_missing_hand_rows_are_dropped():
    times = np.arange(30) / 30.0
    device, _ = human_csvs(times)
    xyz = np.zeros((30, 2, 3))
    valid = np.zeros((30, 2))
    valid[:, 1] = 1.0
    valid[10, 1] = 0.0
    episodes = parse_human_log(device, format_hand_csv(times, xyz, valid))
    assert sum(len(e) for e in episodes) == 29


def test_half_second_gap_splits_into_two_episodes():
    times = np.concatenate([np.arange(30) / 30.0, 1.5 + np.arange(30) / 30.0])
    episodes = parse_human_log(*human_csvs(times), source_id='gap')
    assert len(episodes) == 2
    assert [len(e) for e in episodes] == [30, 30]
    assert episodes[1].timestamps[0] == 0.0
    assert episodes[0].source_id != episodes[1].source_id


def test_clock_mismatch():
    times = np.arange(30) / 30.0
    device, _ = human_csvs(times)
    _, hand = human_csvs(times + 10.0)
    with pytest.raises(ClockMismatch):
        parse_human_log(device, hand)


def test_minimal_robot_log():
    episodes = parse_robot_log(robot_csv(np.array([0.0, 0.02])))
    assert len(episodes) == 1
    assert episodes[0].embodiment == ROBOT
    assert episodes[0].arms == 1


def test_robot_row_with_six_joint_values():
    text = robot_csv(np.array([0.0, 0.02, 0.04]))
    lines = text.splitlines()
    fields = lines[2].split(',')
    lines[2] = ",".join(fields[:13] + fields[14:])
    with pytest.raises(ArityMismatch):
        parse_robot_log("\n".join(lines) + "\n")


def test_robot_header_with_six_joints():
    text = robot_csv(np.array([0.0, 0.02]))
    header, *rest = text.splitlines()
    names = header.split(',')
    drop = names.index('q7')
    trimmed = [",".join(row.split(',')[:drop] + row.split(',')[drop + 1:]) for row in [header, *rest]]
    with pytest.raises(ArityMismatch):
        parse_robot_log("\n".join(trimmed) + "\n")


def test_ten_seconds_at_fifty_hz():
    episodes = parse_robot_log(robot_csv(np.arange(500) / 50.0))
    assert len(episodes[0]) == 500


def test_bimanual_robot_log():
    times = np.arange(10) / 50.0
    eef = np.hstack([identity_rows(10), identity_rows(10)])
    joints = np.zeros((10, 14))
    text = format_robot_csv(times, eef, joints, joints, arms=2)
    ep = parse_robot_log(text)[0]
    assert ep.arms == 2
    assert ep.series[JOINT_POS].width == 14


def test_timestamps_rebased_to_episode_start():
    ep = parse_robot_log(robot_csv(100.0 + np.arange(20) / 50.0))[0]
    assert ep.timestamps[0] == 0.0
    assert ep.meta['start_time'] == 100.0


def test_human_round_trip():
    times = np.arange(90) / 30.0
    ep = parse_human_log(*human_csvs(times))[0]
    again = parse_human_log(*write_human_log(ep))[0]
    for kind in (DEVICE_POSE_WORLD, HAND_POS_DEVICE):
        assert np.allclose(again.series[kind].values, ep.series[kind].values, atol=1e-9)
        assert np.allclose(again.series[kind].timestamps, ep.series[kind].timestamps, atol=1e-9)


def test_robot_round_trip():
    ep = parse_robot_log(robot_csv(np.arange(50) / 50.0))[0]
    again = parse_robot_log(write_robot_log(ep))[0]
    for kind in (EEF_POSE_BASE, JOINT_POS, JOINT_ACTION):
        assert np.allclose(again.series[kind].values, ep.series[kind].values, atol=1e-9)


def robot_episode(eef_times, joint_times):
    eef = identity_rows(eef_times.size)
    eef[:, 9] = eef_times
    joints = np.outer(joint_times, np.arange(1, 8))
    return Episode(ROBOT, {
        EEF_POSE_BASE: TimedSeries(eef_times, eef, 50.0, EEF_POSE_BASE),
        JOINT_POS: TimedSeries(joint_times, joints, 50.0, JOINT_POS),
        JOINT_ACTION: TimedSeries(joint_times, joints, 50.0, JOINT_ACTION),
    }, 1, 'offset')


def test_time_align_on_shared_grid_is_unchanged():
    ep = parse_robot_log(robot_csv(np.arange(100) / 50.0))[0]
    aligned = time_align(ep)
    for kind, series in ep.series.items():
        assert np.allclose(aligned.series[kind].values, series.values, atol=1e-12)
        assert np.allclose(aligned.series[kind].timestamps, series.timestamps, atol=1e-12)


def test_time_align_half_period_offset():
    eef_t = np.arange(101) / 50.0
    joint_t = 0.01 + np.arange(101) / 50.0
    aligned = time_align(robot_episode(eef_t, joint_t))
    grid = aligned.series[EEF_POSE_BASE].timestamps
    assert grid[0] == pytest.approx(0.01)
    assert grid[-1] <= 2.0 + 1e-9
    # linear midpoints between the original eef samples
    assert np.allclose(aligned.series[EEF_POSE_BASE].values[:, 9], grid, atol=1e-12)
    assert np.allclose(aligned.series[JOINT_POS].values, np.outer(grid, np.arange(1, 8)), atol=1e-12)


def test_time_align_is_idempotent():
    aligned = time_align(robot_episode(np.arange(101) / 50.0, 0.01 + np.arange(101) / 50.0))
    twice = time_align(aligned)
    for kind, series in aligned.series.items():
        assert np.allclose(twice.series[kind].values, series.values, atol=1e-12)


def test_time_align_disjoint_ranges():
    with pytest.raises(InsufficientOverlap):
        IngestProcessor().time_align(robot_episode(np.arange(50) / 50.0, 5.0 + np.arange(50) / 50.0))
