"""
Benchmark Environment
=====================

Purpose: Synthetic continuous object-in-bowl task with two embodiments.

A point gripper (robot: the arm's gripper keypoint; human: the hand) picks
an object on a 0.45 m x 0.60 m table, drops it in a bowl (+1), then closes
over the bowl to dump it (+1), after which the object reappears at a seeded
random spot. Episodes last 40 s.

Embodiment gaps injected into the human recordings:
- 4x faster motion (shorter dwell too)
- constant spatial offset and Gaussian noise on tracked hand positions
- head-mounted camera following a smooth random walk

Logs are emitted in the exact ingest CSV formats.
"""

import copy
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from action_alignment_module import EmbodimentStats, scene_features
from kinematics_module import ArmModel, fk
from log_ingest_processor import (
    HUMAN,
    NOMINAL_RATE,
    ROBOT,
    Episode,
    IngestProcessor,
    format_device_csv,
    format_hand_csv,
    format_robot_csv,
    format_scene_csv,
)
from pipeline_errors import EnvFault
from policy_rollout_module import (
    ChunkPolicy,
    LearnedChunkPolicy,
    RobotObservation,
    RolloutController,
)
from se3_geometry import CameraModel, look_at


# -----------------------------------------------------------------------------
# Configuration and state
# -----------------------------------------------------------------------------
@dataclass(frozen=True)
class BenchConfig:
    """
    Benchmark parameters ([bench] and [camera] run-config sections)

    Camera: robot camera is fixed; the human head camera shares intrinsics.
    """

    episode_s: float = 40.0
    robot_speed_mps: float = 0.12
    dwell_s: float = 0.5
    human_speed_factor: float = 4.0
    human_offset_m: Tuple[float, float, float] = (0.02, -0.015, 0.04)
    human_noise_m: float = 0.003
    robot_noise_m: float = 0.0
    head_walk_m: float = 0.03
    head_walk_tau_s: float = 2.0
    hand_dropout: float = 0.0
    eval_episodes: int = 5
    eval_seed: int = 10_000
    fx: float = 500.0
    fy: float = 500.0
    cx: float = 320.0
    cy: float = 240.0
    width: int = 640
    height: int = 480
    camera_eye: Tuple[float, float, float] = (0.525, 0.0, 0.9)
    camera_target: Tuple[float, float, float] = (0.525, 0.0, 0.0)
    camera_up: Tuple[float, float, float] = (1.0, 0.0, 0.0)
    head_eye: Tuple[float, float, float] = (0.10, 0.0, 0.60)

    def robot_camera(self) -> CameraModel:
        return CameraModel.from_params(self.fx, self.fy, self.cx, self.cy, self.width, self.height,
                                       look_at(self.camera_eye, self.camera_target, self.camera_up))

    def to_dict(self) -> Dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class EmbodimentSpec:
    """
    How one embodiment moves and how its recordings are distorted

    Attributes:
        kind: 'human' or 'robot'
        speed_factor: multiple of the robot's cartesian speed (human 4x)
        noise_std: Gaussian std (m) on recorded positions
        offset: constant bias (m) on recorded positions
        moving_camera: head-mounted random-walk camera (human) vs fixed camera
    """

    kind: str
    speed_factor: float = 1.0
    noise_std: float = 0.0
    offset: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    moving_camera: bool = False

    def __post_init__(self):
        if self.kind not in (HUMAN, ROBOT):
            raise EnvFault(f"unknown embodiment {self.kind!r}")
        if self.speed_factor <= 0 or self.noise_std < 0:
            raise EnvFault("speed_factor must be > 0 and noise_std >= 0")

    @property
    def rate_hz(self) -> float:
        return NOMINAL_RATE[self.kind]

    def max_speed(self, bench: BenchConfig) -> float:
        """Gripper speed limit (m/s) for this embodiment"""
        return bench.robot_speed_mps * self.speed_factor

    @classmethod
    def robot(cls, bench: BenchConfig = BenchConfig()) -> "EmbodimentSpec":
        return cls(ROBOT, 1.0, bench.robot_noise_m)

    @classmethod
    def human(cls, bench: BenchConfig = BenchConfig()) -> "EmbodimentSpec":
        return cls(HUMAN, bench.human_speed_factor, bench.human_noise_m,
                   tuple(bench.human_offset_m), True)


@dataclass(frozen=True, eq=False)
class WorldState:
    """
    Table state; all positions on the z = 0 plane of the base/world frame
    """

    object_pos: np.ndarray
    bowl_pos: np.ndarray
    gripper_pos: np.ndarray
    held: bool = False
    in_bowl: bool = False
    closed: bool = False
    score: int = 0
    time: float = 0.0
    steps: int = 0
    dumps: int = 0
    seed: int = 0
    joints: Optional[np.ndarray] = None

    def scene_row(self) -> np.ndarray:
        return np.concatenate([self.object_pos, self.bowl_pos,
                               [float(self.held), float(self.in_bowl)]])

    def to_dict(self) -> Dict:
        return {'object_pos': self.object_pos.tolist(), 'bowl_pos': self.bowl_pos.tolist(),
                'gripper_pos': self.gripper_pos.tolist(), 'seed': self.seed,
                'joints': None if self.joints is None else self.joints.tolist()}


@dataclass(frozen=True)
class GripperAction:
    target: np.ndarray
    grasp: bool


# -----------------------------------------------------------------------------
# Environment
# -----------------------------------------------------------------------------
class BenchmarkEnv:
    """
    Kinematic point-gripper world plus the arm that drives it
    """

    WORKSPACE_X = (0.30, 0.75)
    WORKSPACE_Y = (-0.30, 0.30)
    PLACEMENT_MARGIN_M = 0.03
    MIN_SEPARATION_M = 0.12
    GRASP_RADIUS_M = 0.015
    BOWL_RADIUS_M = 0.03
    HOME_POS = (0.45, 0.0, 0.0)
    JOINT_SPEED_RAD_S = 3.0
    GRIPPER_CLOSED_ABOVE = 0.5
    ARRIVAL_TOL_M = 1e-6

    def __init__(self, bench: Optional[BenchConfig] = None, arm: Optional[ArmModel] = None,
                 embodiment: str = ROBOT):
        self.bench = bench or BenchConfig()
        self.arm = arm or ArmModel.default()
        self.spec = EmbodimentSpec.robot(self.bench) if embodiment == ROBOT else EmbodimentSpec.human(self.bench)
        self.camera = self.bench.robot_camera()
        self.max_speed = self.spec.max_speed(self.bench)
        self._planar = _PlanarSolver(self.arm)

    @property
    def embodiment(self) -> str:
        return self.spec.kind

    # -------------------------------------------------------------------------
    # World geometry
    # -------------------------------------------------------------------------
    @classmethod
    def clamp(cls, p: np.ndarray) -> np.ndarray:
        return np.array([np.clip(p[0], *cls.WORKSPACE_X), np.clip(p[1], *cls.WORKSPACE_Y), 0.0])

    @classmethod
    def _sample_point(cls, rng: np.random.Generator, away_from: Optional[np.ndarray] = None) -> np.ndarray:
        m = cls.PLACEMENT_MARGIN_M
        point = None
        for _ in range(1000):
            point = np.array([rng.uniform(cls.WORKSPACE_X[0] + m, cls.WORKSPACE_X[1] - m),
                              rng.uniform(cls.WORKSPACE_Y[0] + m, cls.WORKSPACE_Y[1] - m), 0.0])
            if away_from is None or np.linalg.norm(point - away_from) >= cls.MIN_SEPARATION_M:
                return point
        return point

    def reset(self, seed: int) -> WorldState:
        """Seeded object/bowl placement; gripper (and arm) at home"""
        rng = np.random.default_rng([seed, 0])
        bowl = self._sample_point(rng)
        obj = self._sample_point(rng, away_from=bowl)
        home = np.array(self.HOME_POS, dtype=np.float64)
        joints = None
        if self.embodiment == ROBOT:
            joints = self._planar.solve(home, 0.0)
            home = self.gripper_point(joints)
        return WorldState(obj, bowl, home, seed=int(seed), joints=joints)

    def gripper_point(self, q: np.ndarray) -> np.ndarray:
        return self.clamp(fk(self.arm, q)['gripper'])

    # -------------------------------------------------------------------------
    # Dynamics
    # -------------------------------------------------------------------------
    def step_joints(self, world: WorldState, q_target: np.ndarray, dt: float) -> WorldState:
        """
        Robot step: joint targets -> rate-limited joints -> fk -> gripper point

        Arm joints are scaled back along their step so the gripper point
        moves at most max_speed * dt.

        Raises:
            EnvFault: non-finite or wrongly sized joint targets
        """
        q_target = np.asarray(q_target, dtype=np.float64)
        if q_target.shape != (self.arm.dof,) or not np.all(np.isfinite(q_target)):
            raise EnvFault(f"joint target must be {self.arm.dof} finite values, got {q_target}")
        if world.joints is None:
            raise EnvFault("world has no arm state")
        q = world.joints
        limit = self.JOINT_SPEED_RAD_S * dt
        q_next = np.empty_like(q)
        q_next[:-1] = q[:-1] + np.clip(q_target[:-1] - q[:-1], -limit, limit)
        q_next[-1] = q_target[-1]
        q_next = self.arm.clip(q_next)
        max_step = self.max_speed * dt
        travel = float(np.linalg.norm(self.gripper_point(q_next) - world.gripper_pos))
        if travel > max_step:
            q_next[:-1] = q[:-1] + (q_next[:-1] - q[:-1]) * (max_step / travel)
            q_next = self.arm.clip(q_next)
        action = GripperAction(self.gripper_point(q_next), bool(q_next[-1] > self.GRIPPER_CLOSED_ABOVE))
        return replace(step_env(world, action, dt, self.max_speed), joints=q_next)

    def expert_joint_command(self, world: WorldState, action: GripperAction, dt: float) -> np.ndarray:
        """Cartesian expert action -> joint target (robot speed limit applied here)"""
        desired = move_toward(world.gripper_pos, action.target, self.bench.robot_speed_mps * dt)
        return self._planar.solve(desired, 1.0 if action.grasp else 0.0)

    # -------------------------------------------------------------------------
    # Observations
    # -------------------------------------------------------------------------
    def robot_features(self, world: WorldState) -> np.ndarray:
        """Same layout the dataset builder produces: eef row, q, scene in camera frame"""
        if world.joints is None:
            raise EnvFault("robot features need arm state")
        eef = self.arm.eef_pose(world.joints).to_row()
        cam_to_base = self.camera.extrinsics.inverse()
        scene = scene_features(world.scene_row()[None, :], cam_to_base.rotation[None], cam_to_base.translation[None])
        return np.concatenate([eef, world.joints, scene[0]])


def move_toward(current: np.ndarray, target: np.ndarray, max_step: float) -> np.ndarray:
    delta = np.asarray(target, dtype=np.float64) - current
    dist = float(np.linalg.norm(delta))
    if dist <= max_step or dist == 0.0:
        return np.array(target, dtype=np.float64)
    return current + delta * (max_step / dist)


def _default_relocate(world: WorldState) -> np.ndarray:
    rng = np.random.default_rng([world.seed, 1 + world.dumps])
    return BenchmarkEnv._sample_point(rng, away_from=world.bowl_pos)


def step_env(world: WorldState, action: GripperAction, dt: float, max_speed: float,
             relocate=_default_relocate) -> WorldState:
    """
    Advance the table by dt

    The gripper moves toward the (clamped) target at most max_speed * dt
    (EmbodimentSpec.max_speed).
    Closing within the grasp radius of a free object grasps it; closing
    within the grasp radius of the bowl while the object is in it dumps the
    bowl (+1, object relocated). Opening while holding releases the object;
    landing within the bowl radius scores +1.

    Raises:
        EnvFault: dt <= 0 or a non-positive / non-finite max_speed
    """
    if not dt > 0:
        raise EnvFault(f"dt must be positive, got {dt}")
    if not (np.isfinite(max_speed) and max_speed > 0):
        raise EnvFault(f"max_speed must be positive and finite, got {max_speed}")
    target = BenchmarkEnv.clamp(np.asarray(action.target, dtype=np.float64))
    gripper = move_toward(world.gripper_pos, target, max_speed * dt)
    closing = action.grasp and not world.closed
    opening = world.closed and not action.grasp

    obj, held, in_bowl = world.object_pos, world.held, world.in_bowl
    score, dumps = world.score, world.dumps
    if closing:
        if in_bowl and np.linalg.norm(gripper - world.bowl_pos) <= BenchmarkEnv.GRASP_RADIUS_M:
            score += 1
            obj = relocate(world)
            in_bowl = False
            dumps += 1
        elif not held and not in_bowl and np.linalg.norm(gripper - obj) <= BenchmarkEnv.GRASP_RADIUS_M:
            held = True
    elif opening and held:
        held = False
        obj = gripper.copy()
        if np.linalg.norm(obj - world.bowl_pos) <= BenchmarkEnv.BOWL_RADIUS_M:
            in_bowl = True
            score += 1
    if held:
        obj = gripper.copy()

    steps = world.steps + 1
    return WorldState(obj, world.bowl_pos, gripper, held, in_bowl, bool(action.grasp), score,
                      steps * dt, steps, dumps, world.seed, world.joints)


class _PlanarSolver:
    """
    Closed-form planar solution for the expert (shoulder, elbow, wrist yaw;
    the last link points radially). Not part of the public surface.
    """

    def __init__(self, arm: ArmModel):
        self.arm = arm
        self.l1 = float(np.linalg.norm(arm.joints[1].offset.translation))
        self.l2 = float(np.linalg.norm(arm.joints[2].offset.translation))
        self.lf = float(sum(np.linalg.norm(j.offset.translation) for j in arm.joints[3:])
                        + np.linalg.norm(arm.tool.translation))

    def solve(self, p: np.ndarray, gripper: float) -> np.ndarray:
        phi = float(np.arctan2(p[1], p[0]))
        r = float(np.hypot(p[0], p[1]))
        d = max(r - self.lf, 1e-6)
        wx, wy = d * np.cos(phi), d * np.sin(phi)
        c2 = np.clip((d * d - self.l1 ** 2 - self.l2 ** 2) / (2 * self.l1 * self.l2), -1.0, 1.0)
        q2 = -float(np.arccos(c2))
        q1 = float(np.arctan2(wy, wx) - np.arctan2(self.l2 * np.sin(q2), self.l1 + self.l2 * np.cos(q2)))
        q3 = float(np.arctan2(np.sin(phi - q1 - q2), np.cos(phi - q1 - q2)))
        return self.arm.clip([q1, q2, q3, 0.0, 0.0, 0.0, gripper])


# -----------------------------------------------------------------------------
# Scripted expert
# -----------------------------------------------------------------------------
class ExpertController:
    """
    Reach -> grasp -> carry -> release -> dump -> reopen, repeated

    Dwells are counted in control steps so the script is exactly
    reproducible at a given rate.
    """

    PHASES = ('reach', 'grasp', 'carry', 'release', 'dump', 'reopen')

    def __init__(self, spec: EmbodimentSpec, bench: BenchConfig, rate_hz: float):
        self.spec = spec
        self.bench = bench
        self.dwell_steps = max(int(round(bench.dwell_s / spec.speed_factor * rate_hz)), 1)
        self.phase = 'reach'
        self.counter = 0

    def _advance(self, phase: str) -> None:
        self.phase = phase
        self.counter = 0

    def act(self, world: WorldState) -> GripperAction:
        tol = BenchmarkEnv.ARRIVAL_TOL_M
        if self.phase == 'reach' and np.linalg.norm(world.gripper_pos - world.object_pos) <= tol:
            self._advance('grasp')
        elif self.phase == 'carry' and np.linalg.norm(world.gripper_pos - world.bowl_pos) <= tol:
            self._advance('release')
        elif self.phase in ('grasp', 'release', 'dump', 'reopen') and self.counter >= self.dwell_steps:
            following = {'grasp': 'carry' if world.held else 'reach', 'release': 'dump',
                         'dump': 'reopen', 'reopen': 'reach'}
            self._advance(following[self.phase])
        self.counter += 1

        if self.phase == 'reach':
            return GripperAction(world.object_pos.copy(), False)
        if self.phase == 'grasp':
            return GripperAction(world.object_pos.copy(), True)
        if self.phase == 'carry':
            return GripperAction(world.bowl_pos.copy(), True)
        if self.phase == 'dump':
            return GripperAction(world.bowl_pos.copy(), True)
        return GripperAction(world.bowl_pos.copy(), False)


@dataclass
class ExpertDemo:
    """One generated demonstration: CSV logs, parsed episodes, expert score"""

    embodiment: str
    logs: Dict[str, str]
    episodes: List[Episode]
    score: int
    meta: Dict = field(default_factory=dict)

    @property
    def episode(self) -> Episode:
        return self.episodes[0]

    def write(self, out_dir: str, stem: str) -> Dict[str, str]:
        """Write `<stem>_<log>.csv` files plus `<stem>_meta.json`"""
        os.makedirs(out_dir, exist_ok=True)
        paths = {}
        for name, text in self.logs.items():
            paths[name] = os.path.join(out_dir, f"{stem}_{name}.csv")
            with open(paths[name], 'w') as f:
                f.write(text)
        paths['meta'] = os.path.join(out_dir, f"{stem}_meta.json")
        with open(paths['meta'], 'w') as f:
            json.dump(self.meta, f, indent=2)
        return paths


def _head_walk(rng: np.random.Generator, n: int, dt: float, scale: float, tau: float) -> np.ndarray:
    """Smooth (n, 3) Ornstein-Uhlenbeck offsets with stationary std `scale`"""
    out = np.zeros((n, 3))
    sigma = scale * np.sqrt(2.0 / tau)
    noise = rng.standard_normal((n, 3))
    for i in range(1, n):
        out[i] = out[i - 1] - out[i - 1] / tau * dt + sigma * np.sqrt(dt) * noise[i]
    return out


def scripted_expert(spec: EmbodimentSpec, world: Optional[WorldState] = None, seed: int = 0,
                    bench: Optional[BenchConfig] = None, arm: Optional[ArmModel] = None,
                    source_id: Optional[str] = None) -> ExpertDemo:
    """
    Generate one 40 s demonstration in the ingest log formats

    Args:
        spec: embodiment being demonstrated
        world: initial state (default: seeded reset)
        seed: drives placements, relocations, noise and head motion
        bench: benchmark configuration
        arm: arm chain (robot)
        source_id: identifier written into the parsed episodes

    Returns:
        ExpertDemo with CSV texts, parsed episodes and the expert's score
    """
    bench = bench or BenchConfig()
    env = BenchmarkEnv(bench, arm, spec.kind)
    env.spec = spec
    world = world or env.reset(seed)
    rate = spec.rate_hz
    dt = 1.0 / rate
    n = int(round(bench.episode_s * rate))
    controller = ExpertController(spec, bench, rate)
    noise_rng = np.random.default_rng([seed, 2])
    source_id = source_id or f"{spec.kind}_{seed:05d}"
    initial = world.to_dict()

    times = np.arange(n) / rate
    scene = np.empty((n, 8))
    if spec.kind == ROBOT:
        eef = np.empty((n, 12))
        joints = np.empty((n, 7))
        actions = np.empty((n, 7))
        for i in range(n):
            scene[i] = world.scene_row()
            eef[i] = env.arm.eef_pose(world.joints).to_row()
            joints[i] = world.joints
            command = env.expert_joint_command(world, controller.act(world), dt)
            actions[i] = command
            world = env.step_joints(world, command, dt)
        if spec.noise_std > 0:
            eef[:, 9:11] += noise_rng.normal(0.0, spec.noise_std, size=(n, 2))
        logs = {'robot': format_robot_csv(times, eef, joints, actions),
                'scene': format_scene_csv(times, scene)}
        episodes = IngestProcessor().parse_robot_log(logs['robot'], logs['scene'], source_id)
    else:
        hand_world = np.empty((n, 3))
        for i in range(n):
            scene[i] = world.scene_row()
            hand_world[i] = world.gripper_pos
            world = step_env(world, controller.act(world), dt, spec.max_speed(bench))
        walk = _head_walk(noise_rng, n, dt, bench.head_walk_m, bench.head_walk_tau_s)
        walk_target = _head_walk(noise_rng, n, dt, bench.head_walk_m, bench.head_walk_tau_s)
        device = np.empty((n, 12))
        hand_device = np.empty((n, 3))
        recorded = hand_world + np.asarray(spec.offset) + noise_rng.normal(0.0, spec.noise_std, (n, 3))
        for i in range(n):
            eye = np.asarray(bench.head_eye) + (walk[i] if spec.moving_camera else 0.0)
            target = np.asarray(bench.camera_target) + (walk_target[i] if spec.moving_camera else 0.0)
            device_to_world = look_at(eye, target, bench.camera_up).inverse()
            device[i] = device_to_world.to_row()
            hand_device[i] = device_to_world.inverse().apply(recorded[i])
        valid = np.ones((n, 2))
        valid[:, 0] = 0.0
        if bench.hand_dropout > 0:
            valid[:, 1] = (noise_rng.random(n) >= bench.hand_dropout).astype(np.float64)
        xyz = np.full((n, 2, 3), np.nan)
        xyz[:, 1] = hand_device
        logs = {'device': format_device_csv(times, device),
                'hand': format_hand_csv(times, xyz, valid),
                'scene': format_scene_csv(times, scene)}
        episodes = IngestProcessor().parse_human_log(logs['device'], logs['hand'], logs['scene'],
                                                     source_id=source_id)

    meta = {'embodiment': spec.kind, 'seed': int(seed), 'source_id': source_id,
            'initial_world': initial, 'score': int(world.score), 'rate_hz': rate,
            'steps': n, 'bench': bench.to_dict()}
    for ep in episodes:
        ep.meta.update({'seed': int(seed), 'expert_score': int(world.score)})
    return ExpertDemo(spec.kind, logs, episodes, int(world.score), meta)


def world_from_meta(meta: Dict) -> WorldState:
    initial = meta['initial_world']
    joints = initial.get('joints')
    return WorldState(np.asarray(initial['object_pos'], dtype=np.float64),
                      np.asarray(initial['bowl_pos'], dtype=np.float64),
                      np.asarray(initial['gripper_pos'], dtype=np.float64),
                      seed=int(initial['seed']),
                      joints=None if joints is None else np.asarray(joints, dtype=np.float64))


def replay_robot_log(robot_csv: str, meta: Dict, bench: Optional[BenchConfig] = None,
                     arm: Optional[ArmModel] = None) -> int:
    """
    Re-simulate a robot log's commanded joints from its initial world

    Returns:
        score reached by the replay (equals meta['score'] for expert logs)
    """
    env = BenchmarkEnv(bench, arm, ROBOT)
    episodes = IngestProcessor().parse_robot_log(robot_csv, source_id=meta.get('source_id', 'robot'))
    world = world_from_meta(meta)
    dt = 1.0 / NOMINAL_RATE[ROBOT]
    for ep in episodes:
        for command in ep.series['joint_action'].values:
            world = env.step_joints(world, command, dt)
    return int(world.score)


# -----------------------------------------------------------------------------
# Closed-loop evaluation
# -----------------------------------------------------------------------------
class ExpertChunkPolicy(ChunkPolicy):
    """
    Scripted expert exposed as a chunk policy (evaluation passthrough)

    Runs at the robot log rate and plans each chunk by stepping the same
    dynamics ahead, so its closed-loop score equals its demonstration score.
    """

    CONTROL_RATE_HZ = NOMINAL_RATE[ROBOT]

    def __init__(self):
        self.env = None
        self.controller = None

    def reset(self, env, world) -> None:
        self.env = env
        self.controller = ExpertController(env.spec, env.bench, self.control_rate_hz)

    def predict(self, obs: RobotObservation) -> Tuple[np.ndarray, np.ndarray]:
        rate = self.control_rate_hz
        dt = 1.0 / rate
        n = int(round(RolloutController.INFERENCE_PERIOD_S * rate))
        world = obs.world
        times, targets = np.empty(n), np.empty((n, self.env.arm.dof))
        for j in range(n):
            command = self.env.expert_joint_command(world, self.controller.act(world), dt)
            world = self.env.step_joints(world, command, dt)
            times[j] = (obs.step + j + 1) / rate
            targets[j] = command
        return times, targets


@dataclass
class EvalResult:
    mean: float
    std: float
    scores: Dict[int, int]

    @property
    def stderr(self) -> float:
        n = len(self.scores)
        return self.std / np.sqrt(n) if n > 0 else float('nan')

    def table(self) -> pd.DataFrame:
        return pd.DataFrame({'seed': list(self.scores), 'score': list(self.scores.values())})


def evaluate(policy, n_episodes: Optional[int] = None, seeds: Optional[Sequence[int]] = None,
             bench: Optional[BenchConfig] = None, arm: Optional[ArmModel] = None,
             stats: Optional[EmbodimentStats] = None, horizon_s: float = 4.0, workers: int = 1,
             verbose: bool = False) -> EvalResult:
    """
    Closed-loop evaluation over seeded object/bowl placements

    Args:
        policy: PolicyParams (needs robot `stats`) or a ChunkPolicy
        n_episodes: episode count (default bench.eval_episodes)
        seeds: explicit placement seeds (default bench.eval_seed + i)
        horizon_s: time span of a predicted chunk (the dataset's robot horizon)
        workers: threads; scores keep seed order

    Returns:
        EvalResult with mean, sample std and per-seed scores
    """
    bench = bench or BenchConfig()
    arm = arm or ArmModel.default()
    if seeds is None:
        count = bench.eval_episodes if n_episodes is None else n_episodes
        seeds = [bench.eval_seed + i for i in range(count)]
    seeds = [int(s) for s in seeds]

    def run(seed: int) -> int:
        env = BenchmarkEnv(bench, arm, ROBOT)
        if isinstance(policy, ChunkPolicy):
            episode_policy = copy.copy(policy)
        else:
            episode_policy = LearnedChunkPolicy(policy, stats, horizon_s)
        return RolloutController(verbose).run(episode_policy, env, seed).score

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(run, seeds))
    else:
        scores = [run(s) for s in seeds]
    values = np.asarray(scores, dtype=np.float64)
    std = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return EvalResult(float(values.mean()) if values.size else float('nan'), std, dict(zip(seeds, scores)))


def expert_scores(seeds: Sequence[int], bench: Optional[BenchConfig] = None,
                  arm: Optional[ArmModel] = None) -> Dict[int, int]:
    """Demonstration scores of the robot expert for the given placement seeds"""
    bench = bench or BenchConfig()
    spec = EmbodimentSpec.robot(bench)
    return {int(s): scripted_expert(spec, seed=int(s), bench=bench, arm=arm).score for s in seeds}
