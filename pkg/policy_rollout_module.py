"""
Policy Rollout Module
=====================

Receding-horizon execution of chunked joint-space policies:

- inference once per second of simulated time
- each inference predicts a full chunk (4 s for the learned policy)
- only the first second is executed, at the policy's control rate
  (25 Hz for learned policies), by linear interpolation of chunk targets
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from action_alignment_module import EmbodimentStats, denormalize, normalize
from cotrain_policy_model import PolicyParams, forward_batch
from log_ingest_processor import ROBOT
from pipeline_errors import EnvFault, StatsMismatch


@dataclass(frozen=True, eq=False)
class RobotObservation:
    """What a policy sees at an inference step (features are unnormalized)"""

    features: np.ndarray
    joints: np.ndarray
    world: object
    step: int
    rate_hz: float

    @property
    def time(self) -> float:
        return self.step / self.rate_hz


class ChunkPolicy:
    """Base class: predict() returns (target times, joint targets) for one chunk"""

    CONTROL_RATE_HZ = 25.0

    @property
    def control_rate_hz(self) -> float:
        return self.CONTROL_RATE_HZ

    def reset(self, env, world) -> None:
        pass

    def predict(self, obs: RobotObservation) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


class LearnedChunkPolicy(ChunkPolicy):
    """
    Trained co-training policy driven through its joint head

    Features are normalized with the robot stats; predicted chunks are
    denormalized with the same stats before execution.
    """

    def __init__(self, params: PolicyParams, stats: EmbodimentStats, horizon_s: float = 4.0):
        if stats.embodiment != ROBOT or stats.joint_mean is None:
            raise StatsMismatch("rollout needs robot statistics with joint entries")
        self.params = params
        self.stats = stats
        self.horizon_s = horizon_s

    def normalized_chunk(self, features: np.ndarray) -> np.ndarray:
        x = normalize(np.asarray(features, dtype=np.float64), self.stats, 'proprio')
        _, joint, _ = forward_batch(self.params, ROBOT, x[None, :], with_joint=True)
        return joint[0]

    def predict(self, obs: RobotObservation) -> Tuple[np.ndarray, np.ndarray]:
        chunk = denormalize(self.normalized_chunk(obs.features), self.stats, 'joint')
        k = chunk.shape[0]
        times = obs.time + np.arange(1, k + 1) * self.horizon_s / k
        return times, chunk


class HoldPolicy(ChunkPolicy):
    """Always commands the current joint configuration"""

    def predict(self, obs: RobotObservation) -> Tuple[np.ndarray, np.ndarray]:
        return np.array([obs.time, obs.time + 1.0]), np.stack([obs.joints, obs.joints])


@dataclass
class RolloutResult:
    score: int
    trajectory: pd.DataFrame
    seed: int = 0


class RolloutController:
    """
    Runs one closed-loop episode of a ChunkPolicy in a robot environment
    """

    INFERENCE_PERIOD_S = 1.0

    def __init__(self, verbose: bool = False):
        self.verbose = verbose

    def run(self, policy: ChunkPolicy, env, seed: int = 0, world=None) -> RolloutResult:
        """
        Args:
            policy: chunk policy
            env: BenchmarkEnv with robot embodiment
            seed: placement seed (ignored when `world` is given)
            world: optional initial WorldState

        Raises:
            EnvFault: env is not a robot environment or a target is invalid
        """
        if getattr(env, 'embodiment', None) != ROBOT:
            raise EnvFault("rollout needs a robot-embodiment environment")
        world = world if world is not None else env.reset(seed)
        policy.reset(env, world)

        rate = float(policy.control_rate_hz)
        dt = 1.0 / rate
        total_steps = int(round(env.bench.episode_s * rate))
        per_inference = int(round(self.INFERENCE_PERIOD_S * rate))
        rows = []
        step = 0
        while step < total_steps:
            obs = RobotObservation(env.robot_features(world), world.joints.copy(), world, step, rate)
            times, targets = policy.predict(obs)
            times = np.asarray(times, dtype=np.float64)
            targets = np.asarray(targets, dtype=np.float64)
            if targets.ndim != 2 or targets.shape[0] != times.size:
                raise EnvFault(f"policy returned {targets.shape} targets for {times.size} times")
            for j in range(1, per_inference + 1):
                if step >= total_steps:
                    break
                t = (obs.step + j) / rate
                command = np.array([np.interp(t, times, targets[:, c]) for c in range(targets.shape[1])])
                world = env.step_joints(world, command, dt)
                step += 1
                rows.append((t, world.score, world.held, world.gripper_pos[0], world.gripper_pos[1]))

        if self.verbose:
            print(f"    ✓ rollout seed {world.seed}: score {world.score}")
        trajectory = pd.DataFrame(rows, columns=['time_s', 'score', 'held', 'gripper_x', 'gripper_y'])
        return RolloutResult(int(world.score), trajectory, int(world.seed))


def rollout(params, env, stats: Optional[EmbodimentStats] = None, seed: int = 0,
            horizon_s: float = 4.0, verbose: bool = False) -> RolloutResult:
    """
    Closed-loop episode of trained params (or any ChunkPolicy)

    Returns:
        RolloutResult with the final score and a per-control-step trajectory
    """
    policy = params if isinstance(params, ChunkPolicy) else LearnedChunkPolicy(params, stats, horizon_s)
    return RolloutController(verbose).run(policy, env, seed)
