import math

import numpy as np
import pytest

from action_alignment_module import AlignConfig, build_dataset, denormalize
from benchmark_env import (
    BenchConfig,
    BenchmarkEnv,
    EmbodimentSpec,
    ExpertChunkPolicy,
    GripperAction,
    WorldState,
    evaluate,
    expert_scores,
    replay_robot_log,
    scripted_expert,
    step_env,
)
from log_ingest_processor import DEVICE_POSE_WORLD, HUMAN, ROBOT, SCENE_WORLD, Episode, TimedSeries, time_align
from pipeline_errors import EnvFault
from se3_geometry import Pose3, apply, compose


@pytest.fixture(scope='module')
def robot_demo():
    return scripted_expert(EmbodimentSpec.robot(), seed=7)


@pytest.fixture(scope='module')
def human_demo():
    return scripted_expert(EmbodimentSpec.human(), seed=7)


def table(obj, bowl, gripper=None, **kwargs):
    obj, bowl = np.array(obj, dtype=float), np.array(bowl, dtype=float)
    gripper = obj.copy() if gripper is None else np.array(gripper, dtype=float)
    return WorldState(obj, bowl, gripper, **kwargs)


SPEED = BenchConfig().robot_speed_mps
DT = 0.02


def drive(world, target, grasp, max_steps=1000):
    target = BenchmarkEnv.clamp(np.asarray(target, dtype=float))
    for _ in range(max_steps):
        if np.array_equal(world.gripper_pos, target):
            break
        world = step_env(world, GripperAction(target, grasp), DT, SPEED)
    return world


def test_reset_is_seeded_and_separated():
    env = BenchmarkEnv()
    a, b = env.reset(3), env.reset(3)
    assert np.array_equal(a.object_pos, b.object_pos) and np.array_equal(a.bowl_pos, b.bowl_pos)
    for seed in range(50):
        world = env.reset(seed)
        assert np.linalg.norm(world.object_pos - world.bowl_pos) >= BenchmarkEnv.MIN_SEPARATION_M
        for p in (world.object_pos, world.bowl_pos):
            assert BenchmarkEnv.WORKSPACE_X[0] <= p[0] <= BenchmarkEnv.WORKSPACE_X[1]
            assert BenchmarkEnv.WORKSPACE_Y[0] <= p[1] <= BenchmarkEnv.WORKSPACE_Y[1]


def test_grasp_outside_radius_fails():
    world = table([0.5, 0.0, 0.0], [0.4, 0.2, 0.0], gripper=[0.55, 0.0, 0.0])
    after = step_env(world, GripperAction(world.gripper_pos, True), DT, SPEED)
    assert not after.held
    assert np.array_equal(after.object_pos, world.object_pos)


def test_grasp_carry_release_scores():
    world = table([0.5, 0.0, 0.0], [0.4, 0.2, 0.0])
    world = step_env(world, GripperAction(world.object_pos, True), DT, SPEED)
    assert world.held
    world = drive(world, world.bowl_pos, True)
    assert np.array_equal(world.object_pos, world.bowl_pos)
    world = step_env(world, GripperAction(world.bowl_pos, False), DT, SPEED)
    assert world.in_bowl and not world.held
    assert world.score == 1
    world = step_env(world, GripperAction(world.bowl_pos, True), DT, SPEED)
    assert world.score == 2
    assert not world.in_bowl
    assert world.dumps == 1
    assert np.linalg.norm(world.object_pos - world.bowl_pos) >= BenchmarkEnv.MIN_SEPARATION_M


def test_noop_never_scores():
    world = table([0.5, 0.0, 0.0], [0.4, 0.2, 0.0], gripper=[0.35, -0.2, 0.0])
    for _ in range(200):
        world = step_env(world, GripperAction(world.gripper_pos, False), DT, SPEED)
    assert world.score == 0
    assert world.steps == 200


def test_targets_are_clamped_to_workspace():
    world = table([0.5, 0.0, 0.0], [0.4, 0.2, 0.0])
    world = drive(world, [2.0, -1.0, 0.5], False)
    assert np.allclose(world.gripper_pos, [0.75, -0.30, 0.0])


def test_speed_limit():
    world = table([0.5, 0.0, 0.0], [0.4, 0.2, 0.0], gripper=[0.4, 0.0, 0.0])
    after = step_env(world, GripperAction(np.array([0.7, 0.0, 0.0]), False), DT, SPEED)
    assert after.gripper_pos[0] == pytest.approx(0.4 + SPEED * DT)


def test_far_target_takes_distance_over_step_length_steps():
    spec = EmbodimentSpec.robot()
    speed = spec.max_speed(BenchConfig())
    world = table([0.5, 0.1, 0.0], [0.4, 0.2, 0.0], gripper=[0.4, -0.2, 0.0])
    target = np.array([0.71, -0.2, 0.0])
    needed = math.ceil(0.31 / (speed * DT))
    for _ in range(needed - 1):
        world = step_env(world, GripperAction(target, False), DT, speed)
    assert not np.allclose(world.gripper_pos, target)
    world = step_env(world, GripperAction(target, False), DT, speed)
    assert np.array_equal(world.gripper_pos, target)


def test_human_moves_four_times_faster():
    bench = BenchConfig()
    robot, human = EmbodimentSpec.robot(bench), EmbodimentSpec.human(bench)
    assert human.max_speed(bench) == pytest.approx(4 * robot.max_speed(bench))
    assert BenchmarkEnv(bench, embodiment=HUMAN).max_speed == pytest.approx(4 * bench.robot_speed_mps)


def test_speed_limit_is_required():
    world = table([0.5, 0.0, 0.0], [0.4, 0.2, 0.0])
    for speed in (np.inf, 0.0):
        with pytest.raises(EnvFault):
            step_env(world, GripperAction(world.gripper_pos, False), DT, speed)


def test_joint_step_respects_gripper_speed():
    env = BenchmarkEnv(BenchConfig(episode_s=1.0))
    world = env.reset(0)
    command = world.joints.copy()
    command[0] += 1.0
    after = env.step_joints(world, command, DT)
    travel = np.linalg.norm(after.gripper_pos - world.gripper_pos)
    assert 0.0 < travel <= env.max_speed * DT + 1e-12
    assert np.allclose(after.gripper_pos, env.gripper_point(after.joints), atol=1e-6)


def test_non_positive_dt():
    world = table([0.5, 0.0, 0.0], [0.4, 0.2, 0.0])
    with pytest.raises(EnvFault):
        step_env(world, GripperAction(world.gripper_pos, False), 0.0, SPEED)


def test_joint_step_rejects_bad_target():
    env = BenchmarkEnv(BenchConfig(episode_s=1.0))
    world = env.reset(0)
    with pytest.raises(EnvFault):
        env.step_joints(world, np.full(7, np.nan), 0.02)
    with pytest.raises(EnvFault):
        env.step_joints(world, np.zeros(6), 0.02)


def test_robot_expert_scores_well(robot_demo):
    assert robot_demo.score >= 4
    assert robot_demo.meta['steps'] == 2000
    assert len(robot_demo.episode) == 2000


def test_expert_demo_stays_in_workspace(robot_demo, human_demo):
    for demo in (robot_demo, human_demo):
        scene = demo.episode.series[SCENE_WORLD].values
        for cols in (slice(0, 3), slice(3, 6)):
            xy = scene[:, cols]
            assert np.all((xy[:, 0] >= 0.30 - 1e-12) & (xy[:, 0] <= 0.75 + 1e-12))
            assert np.all((xy[:, 1] >= -0.30 - 1e-12) & (xy[:, 1] <= 0.30 + 1e-12))


def test_human_expert_completes_more_cycles(robot_demo, human_demo):
    assert human_demo.score > robot_demo.score
    ratio = human_demo.score / robot_demo.score
    assert 2.5 <= ratio <= 6.0


def test_replay_reproduces_expert_score(robot_demo):
    assert replay_robot_log(robot_demo.logs['robot'], robot_demo.meta) == robot_demo.score


def test_demo_files(robot_demo, tmp_path):
    paths = robot_demo.write(str(tmp_path), 'robot_00007')
    assert sorted(paths) == ['meta', 'robot', 'scene']
    with open(paths['robot']) as f:
        assert f.read() == robot_demo.logs['robot']


@pytest.mark.slow
def test_expert_passthrough_matches_demonstrations():
    seeds = [10_000, 10_001]
    result = evaluate(ExpertChunkPolicy(), seeds=seeds)
    assert result.scores == expert_scores(seeds)
    assert all(score >= 4 for score in result.scores.values())


def test_expert_passthrough_short_episode():
    bench = BenchConfig(episode_s=8.0)
    result = evaluate(ExpertChunkPolicy(), seeds=[3], bench=bench)
    demo = scripted_expert(EmbodimentSpec.robot(bench), seed=3, bench=bench)
    assert result.scores == {3: demo.score}
    assert result.std == 0.0


def test_evaluation_table_keeps_seed_order():
    bench = BenchConfig(episode_s=2.0)
    result = evaluate(ExpertChunkPolicy(), seeds=[5, 2, 9], bench=bench, workers=3)
    assert result.table()['seed'].tolist() == [5, 2, 9]


def test_demos_flow_into_dataset(robot_demo, human_demo):
    episodes = [time_align(ep) for ep in robot_demo.episodes + human_demo.episodes]
    dataset = build_dataset(episodes, AlignConfig(stride=10))
    assert len(dataset.train[ROBOT]) > 0 and len(dataset.train[HUMAN]) > 0
    assert dataset.train[ROBOT].features.shape[1] == 27
    assert dataset.train[HUMAN].features.shape[1] == 11


def regauged(ep: Episode, g: Pose3) -> Episode:
    series = dict(ep.series)
    device = series[DEVICE_POSE_WORLD]
    rows = np.stack([compose(g, Pose3.from_row(r)).to_row() for r in device.values])
    series[DEVICE_POSE_WORLD] = TimedSeries(device.timestamps, rows, device.nominal_rate, DEVICE_POSE_WORLD)
    scene = series[SCENE_WORLD]
    values = scene.values.copy()
    values[:, 0:3] = apply(g, values[:, 0:3])
    values[:, 3:6] = apply(g, values[:, 3:6])
    series[SCENE_WORLD] = TimedSeries(scene.timestamps, values, scene.nominal_rate, SCENE_WORLD)
    return Episode(ep.embodiment, series, ep.arms, ep.source_id, dict(ep.meta))


def test_world_frame_change_leaves_human_dataset_unchanged(human_demo):
    g = Pose3.from_axis_angle([0.2, -0.5, 1.0], 0.9, [1.5, -0.7, 0.3])
    cfg = AlignConfig(stride=15)
    plain = build_dataset([time_align(human_demo.episode)], cfg)
    moved = build_dataset([time_align(regauged(human_demo.episode, g))], cfg)
    a, b = plain.train[HUMAN], moved.train[HUMAN]
    sa, sb = plain.stats[HUMAN], moved.stats[HUMAN]
    assert np.allclose(denormalize(a.pose_targets, sa, 'action'), denormalize(b.pose_targets, sb, 'action'),
                       atol=1e-10)
    assert np.allclose(denormalize(a.features, sa, 'proprio'), denormalize(b.features, sb, 'proprio'),
                       atol=1e-10)
