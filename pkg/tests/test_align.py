import numpy as np
import pytest

from action_alignment_module import (
    JOINT,
    ActionChunk,
    AlignConfig,
    EmbodimentSplit,
    UnifiedSample,
    build_chunk,
    build_dataset,
    denormalize,
    fit_stats,
    normalize,
    normalize_split,
    normalized_overlap_report,
    reref_to_obs_frame,
)
from log_ingest_processor import (
    DEVICE_POSE_WORLD,
    EEF_POSE_BASE,
    HAND_POS_DEVICE,
    HUMAN,
    JOINT_ACTION,
    JOINT_POS,
    ROBOT,
    Episode,
    TimedSeries,
)
from pipeline_errors import DimensionMismatch, EmptySplit, HorizonExceedsEpisode, IndexOutOfRange
from se3_geometry import Pose3, compose


def robot_episode(duration, source_id='robot'):
    t = np.arange(int(round(duration * 50))) / 50.0
    eef = np.tile(Pose3.identity().to_row(), (t.size, 1))
    eef[:, 9:12] = np.column_stack([0.4 + 0.1 * np.sin(t), 0.1 * np.cos(t), 0.2 + 0.01 * t])
    joints = np.outer(np.sin(t), np.linspace(0.1, 0.7, 7))
    return Episode(ROBOT, {
        EEF_POSE_BASE: TimedSeries(t, eef, 50.0, EEF_POSE_BASE),
        JOINT_POS: TimedSeries(t, joints, 50.0, JOINT_POS),
        JOINT_ACTION: TimedSeries(t, joints + 0.05, 50.0, JOINT_ACTION),
    }, 1, source_id)


def human_episode(duration, gauge=None, source_id='human', static=False):
    t = np.arange(int(round(duration * 30))) / 30.0
    poses = []
    for ti in t:
        pose = Pose3.identity() if static else Pose3.from_axis_angle(
            [0.2, 0.1, 1.0], 0.3 * np.sin(ti), [0.1 * ti, 0.05 * np.cos(ti), 1.5])
        poses.append(compose(gauge, pose) if gauge is not None else pose)
    hand = np.column_stack([0.3 * np.sin(2 * t), 0.1 * t, 0.5 + 0.1 * np.cos(t)])
    return Episode(HUMAN, {
        DEVICE_POSE_WORLD: TimedSeries(t, np.stack([p.to_row() for p in poses]), 30.0, DEVICE_POSE_WORLD),
        HAND_POS_DEVICE: TimedSeries(t, hand, 30.0, HAND_POS_DEVICE),
    }, 1, source_id)


def test_reref_static_camera_is_identity():
    points = np.random.default_rng(0).normal(size=(5, 3))
    out = reref_to_obs_frame([Pose3.from_translation(0.3, 0.1, 1.0)] * 5, points, 0)
    assert np.allclose(out, points, atol=1e-12)


def test_reref_translation_example():
    out = reref_to_obs_frame([Pose3.from_translation(1, 0, 0), Pose3.from_translation(2, 0, 0)],
                             np.array([[0, 0, 1.0], [0, 0, 1.0]]), 0)
    assert np.allclose(out, [[0, 0, 1], [1, 0, 1]])


def test_reref_gauge_invariance():
    rng = np.random.default_rng(1)
    poses = [Pose3.from_axis_angle(rng.normal(size=3), rng.uniform(-np.pi, np.pi), rng.normal(size=3))
             for _ in range(10)]
    points = rng.normal(size=(10, 3))
    g = Pose3.from_axis_angle([1, -2, 0.5], 1.1, [3.0, -1.0, 0.2])
    plain = reref_to_obs_frame(poses, points, 3)
    moved = reref_to_obs_frame([compose(g, p) for p in poses], points, 3)
    assert plain.shape == (7, 3)
    assert np.allclose(plain, moved, atol=1e-10)


def test_reref_index_out_of_range():
    with pytest.raises(IndexOutOfRange):
        reref_to_obs_frame([Pose3.identity()] * 3, np.zeros((3, 3)), 3)
    with pytest.raises(IndexOutOfRange):
        reref_to_obs_frame([Pose3.identity()] * 3, np.zeros((2, 3)), 0)


def test_robot_chunk_hits_every_second_sample():
    ep = robot_episode(10.0)
    chunk = build_chunk(ep, 1.0, AlignConfig())
    assert chunk.chunk_size == 100
    assert chunk.spacing == pytest.approx(0.04)
    raw = ep.series[EEF_POSE_BASE].values[:, 9:12]
    assert np.allclose(chunk.targets, raw[52:252:2], atol=1e-12)


def test_robot_joint_chunk():
    ep = robot_episode(10.0)
    chunk = build_chunk(ep, 0.0, AlignConfig(), space=JOINT)
    assert chunk.targets.shape == (100, 7)
    assert np.allclose(chunk.targets, ep.series[JOINT_ACTION].values[2:202:2], atol=1e-12)


def test_human_chunk_interpolates_at_hundredth_seconds():
    ep = human_episode(3.0, static=True)
    chunk = build_chunk(ep, 0.5, AlignConfig())
    assert chunk.spacing == pytest.approx(0.01)
    times = 0.5 + np.arange(1, 101) / 100.0
    assert np.array_equal(chunk.target_times, times)
    knots = ep.series[HAND_POS_DEVICE]
    expected = np.column_stack([np.interp(times, knots.timestamps, knots.values[:, d]) for d in range(3)])
    assert np.allclose(chunk.targets, expected, atol=1e-12)


def test_target_times_are_computed_not_accumulated():
    chunk = build_chunk(robot_episode(10.0), 2.34, AlignConfig())
    k = np.arange(1, 101)
    assert np.max(np.abs(chunk.target_times - (2.34 + k * 4.0 / 100))) == 0.0


def test_chunk_past_episode_end():
    ep = robot_episode(10.0)
    with pytest.raises(HorizonExceedsEpisode):
        build_chunk(ep, ep.end - 0.5, AlignConfig())


def test_human_chunks_are_gauge_invariant():
    g = Pose3.from_axis_angle([0.3, -1.0, 0.4], 2.0, [5.0, -3.0, 0.7])
    cfg = AlignConfig()
    for obs in (0.0, 0.7, 1.9):
        plain = build_chunk(human_episode(3.0), obs, cfg)
        moved = build_chunk(human_episode(3.0, gauge=g), obs, cfg)
        assert np.allclose(plain.targets, moved.targets, atol=1e-10)


def test_human_sample_rejects_joint_chunk():
    pose = ActionChunk(0.0, np.zeros((4, 3)), 1.0, HUMAN, 'pose')
    joint = ActionChunk(0.0, np.zeros((4, 7)), 1.0, HUMAN, JOINT)
    with pytest.raises(DimensionMismatch):
        UnifiedSample(np.zeros(3), pose, joint, HUMAN)


def make_samples(values, embodiment=ROBOT):
    out = []
    for i, v in enumerate(values):
        pose = ActionChunk(float(i), np.full((2, 3), v), 4.0, embodiment, 'pose')
        joint = ActionChunk(float(i), np.full((2, 7), v), 4.0, embodiment, JOINT) if embodiment == ROBOT else None
        out.append(UnifiedSample(np.full(4, v), pose, joint, embodiment, 'ep'))
    return out


def test_fit_stats_constant_dataset():
    stats = fit_stats(make_samples([3.0, 3.0, 3.0]), ROBOT)
    assert np.allclose(stats.proprio_mean, 3.0)
    assert np.all(stats.proprio_std == 1e-6)
    assert np.all(stats.action_std == 1e-6)


def test_fit_stats_population_convention():
    stats = fit_stats(make_samples([0.0, 2.0]), ROBOT)
    assert np.allclose(stats.proprio_mean, 1.0)
    assert np.allclose(stats.proprio_std, 1.0)
    assert np.allclose(stats.joint_mean, 1.0)
    assert stats.sample_count == 2


def test_fit_stats_needs_two_samples():
    with pytest.raises(EmptySplit):
        fit_stats(make_samples([1.0]), ROBOT)
    with pytest.raises(EmptySplit):
        fit_stats(make_samples([1.0, 2.0], HUMAN), ROBOT)


def test_human_stats_have_no_joint_fields():
    stats = fit_stats(make_samples([0.0, 1.0, 5.0], HUMAN), HUMAN)
    assert stats.joint_mean is None


def test_refit_on_normalized_split_is_standard():
    rng = np.random.default_rng(7)
    split = EmbodimentSplit(ROBOT, 4.0, np.arange(50) / 50.0, np.zeros(50, dtype=int),
                            rng.normal(3.0, 2.0, size=(50, 19)), rng.normal(-1.0, 0.5, size=(50, 6, 3)),
                            rng.normal(0.2, 0.1, size=(50, 6, 7)), ['ep'])
    stats = fit_stats(split, ROBOT)
    refit = fit_stats(normalize_split(split, stats, 'x'), ROBOT)
    for mean, std in ((refit.proprio_mean, refit.proprio_std), (refit.action_mean, refit.action_std),
                      (refit.joint_mean, refit.joint_std)):
        assert np.all(np.abs(mean) < 1e-9)
        assert np.all(np.abs(std - 1.0) < 1e-6)


def test_normalize_examples():
    stats = fit_stats(make_samples([0.0, 2.0, 7.0]), ROBOT)
    mu, sigma = stats.proprio_mean, stats.proprio_std
    assert np.allclose(normalize(mu, stats), 0.0)
    assert np.allclose(normalize(mu + sigma, stats), 1.0)
    x = np.random.default_rng(3).normal(size=(20, 4)) * 10
    assert np.allclose(denormalize(normalize(x, stats), stats), x, atol=1e-10)


def test_normalize_dimension_mismatch():
    stats = fit_stats(make_samples([0.0, 2.0]), ROBOT)
    with pytest.raises(DimensionMismatch):
        normalize(np.zeros(5), stats)
    with pytest.raises(DimensionMismatch):
        denormalize(np.zeros(2), stats, 'joint')


def test_robot_sample_count_closed_form():
    dataset = build_dataset([robot_episode(10.0)], AlignConfig())
    split = dataset.train[ROBOT]
    assert len(split) == 300
    assert split.joint_targets.shape == (300, 100, 7)


def test_human_sample_count_closed_form():
    dataset = build_dataset([human_episode(5.0)], AlignConfig())
    split = dataset.train[HUMAN]
    assert len(split) == 120
    assert split.joint_targets is None
    assert split.pose_targets.shape == (120, 100, 3)


def test_stride_thins_observation_grid():
    dataset = build_dataset([robot_episode(10.0)], AlignConfig(stride=10))
    assert len(dataset.train[ROBOT]) == 30


def test_empty_episode_set():
    with pytest.raises(EmptySplit):
        build_dataset([], AlignConfig())


def test_episode_shorter_than_horizon():
    with pytest.raises(EmptySplit):
        build_dataset([robot_episode(3.0)], AlignConfig())


def test_samples_ordered_by_source_then_time():
    dataset = build_dataset([robot_episode(6.0, 'b'), robot_episode(5.0, 'a')], AlignConfig(stride=5))
    split = dataset.train[ROBOT]
    assert split.source_ids == ['a', 'b']
    keys = list(zip(split.episode_index.tolist(), split.obs_times.tolist()))
    assert keys == sorted(keys)


def test_validation_split_holds_out_last_episodes():
    eps = [robot_episode(5.0, f"r{i}") for i in range(4)]
    dataset = build_dataset(eps, AlignConfig(stride=10, val_fraction=0.25))
    assert dataset.splits['val'][ROBOT].source_ids == ['r3']
    assert dataset.train[ROBOT].source_ids == ['r0', 'r1', 'r2']


def test_identity_stats_without_action_norm():
    dataset = build_dataset([robot_episode(6.0)], AlignConfig(stride=5, action_norm=False))
    stats = dataset.stats[ROBOT]
    assert np.all(stats.action_mean == 0.0)
    assert np.all(stats.action_std == 1.0)


def test_normalized_embodiments_overlap():
    dataset = build_dataset([robot_episode(8.0), human_episode(4.0)], AlignConfig(stride=2))
    report = normalized_overlap_report(dataset)
    assert report['available']
    assert report['normalized']['max_gap'] < 0.1
    assert report['raw']['max_gap'] > report['normalized']['max_gap']


def test_stats_hash_is_stable():
    a = build_dataset([robot_episode(6.0)], AlignConfig(stride=5))
    b = build_dataset([robot_episode(6.0)], AlignConfig(stride=5))
    assert a.stats_hash == b.stats_hash
    assert a.train[ROBOT].stats_digest == a.stats_hash
