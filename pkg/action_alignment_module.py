"""
Action Alignment Module
=======================

Purpose: Turn time-aligned human and robot episodes into one normalized
demonstration dataset the co-training policy can consume.

Key Features:
- Re-references every future hand/gripper position into the camera frame
  at observation time (world-frame head motion cancels out)
- Builds fixed-size action chunks evenly spaced over an embodiment-specific
  horizon (4 s robot, 1 s human: the 4x human slowdown)
- Fits z-score statistics per embodiment on the training split only
- Emits samples in a deterministic order (source_id, then obs_time)
"""

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Union

import numpy as np

from log_ingest_processor import (
    DEVICE_POSE_WORLD,
    EEF_POSE_BASE,
    EMBODIMENTS,
    HAND_POS_DEVICE,
    HUMAN,
    JOINT_ACTION,
    JOINT_POS,
    ROBOT,
    SCENE_WORLD,
    Episode,
)
from pipeline_errors import (
    DimensionMismatch,
    EmptySplit,
    HorizonExceedsEpisode,
    IndexOutOfRange,
)
from se3_geometry import Pose3, rows_to_arrays, stack_poses

STD_FLOOR = 1e-6
TIME_TOL = 1e-9
POSE = "pose"
JOINT = "joint"


# -----------------------------------------------------------------------------
# Configuration
# -----------------------------------------------------------------------------
@dataclass(frozen=True)
class AlignConfig:
    """
    Alignment parameters

    Attributes:
        chunk_size: K targets per chunk
        robot_horizon_s / human_horizon_s: chunk horizons (4x human slowdown)
        stride: observation grid stride in raw samples
        pose_rotation: add the 9 rotation entries to robot pose targets
        action_norm: z-score normalization (False = identity stats, ablation)
        val_fraction: fraction of episodes per embodiment held out
        robot_extrinsics: 12-value base->camera pose row of the fixed robot camera
    """

    chunk_size: int = 100
    robot_horizon_s: float = 4.0
    human_horizon_s: float = 1.0
    stride: int = 1
    pose_rotation: bool = False
    action_norm: bool = True
    val_fraction: float = 0.0
    robot_extrinsics: tuple = tuple(Pose3.identity().to_row().tolist())

    def horizon(self, embodiment: str) -> float:
        return self.robot_horizon_s if embodiment == ROBOT else self.human_horizon_s

    @property
    def robot_camera(self) -> Pose3:
        return Pose3.from_row(np.asarray(self.robot_extrinsics))

    def to_dict(self) -> Dict:
        out = asdict(self)
        out['robot_extrinsics'] = list(self.robot_extrinsics)
        return out


# -----------------------------------------------------------------------------
# Domain types
# -----------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class ActionChunk:
    """
    K future targets evenly spaced over a horizon after obs_time

    Pose targets are in the observation camera frame (meters); joint targets
    in radians (gripper last).
    """

    obs_time: float
    targets: np.ndarray
    horizon: float
    embodiment: str
    space: str

    def __post_init__(self):
        targets = np.array(self.targets, dtype=np.float64)
        if targets.ndim != 2:
            raise DimensionMismatch("chunk targets must be K x D")
        targets.setflags(write=False)
        object.__setattr__(self, "targets", targets)

    @property
    def chunk_size(self) -> int:
        return self.targets.shape[0]

    @property
    def spacing(self) -> float:
        return self.horizon / self.chunk_size

    @property
    def target_times(self) -> np.ndarray:
        return target_times(self.obs_time, self.horizon, self.chunk_size)


@dataclass(frozen=True, eq=False)
class EmbodimentStats:
    """
    Per-embodiment z-score statistics (population std, floored at 1e-6)

    `proprio_*` covers the full observation feature vector (proprioception
    plus scene features); `action_*` the pose chunk dimensions; `joint_*`
    the joint chunk dimensions (robot only).
    """

    embodiment: str
    proprio_mean: np.ndarray
    proprio_std: np.ndarray
    action_mean: np.ndarray
    action_std: np.ndarray
    sample_count: int
    joint_mean: Optional[np.ndarray] = None
    joint_std: Optional[np.ndarray] = None

    def field(self, name: str):
        return {
            'proprio': (self.proprio_mean, self.proprio_std),
            'action': (self.action_mean, self.action_std),
            'joint': (self.joint_mean, self.joint_std),
        }[name]

    def to_dict(self) -> Dict:
        def listed(a):
            return None if a is None else [float(v) for v in a]
        return {
            'embodiment': self.embodiment,
            'sample_count': int(self.sample_count),
            'proprio_mean': listed(self.proprio_mean),
            'proprio_std': listed(self.proprio_std),
            'action_mean': listed(self.action_mean),
            'action_std': listed(self.action_std),
            'joint_mean': listed(self.joint_mean),
            'joint_std': listed(self.joint_std),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "EmbodimentStats":
        def arr(key):
            return None if data.get(key) is None else np.asarray(data[key], dtype=np.float64)
        return cls(data['embodiment'], arr('proprio_mean'), arr('proprio_std'),
                   arr('action_mean'), arr('action_std'), int(data['sample_count']),
                   arr('joint_mean'), arr('joint_std'))

    def digest(self) -> str:
        return _digest(self.to_dict())


def _digest(payload) -> str:
    text = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def stats_digest(stats: Dict[str, EmbodimentStats]) -> str:
    """Single hash identifying a set of per-embodiment statistics"""
    return _digest({emb: stats[emb].to_dict() for emb in sorted(stats)})


@dataclass(frozen=True, eq=False)
class UnifiedSample:
    """
    One supervision example: observation features plus action chunk(s)

    Human samples never carry a joint chunk; grasping is supervised only
    through robot joint targets.
    """

    features: np.ndarray
    pose_chunk: ActionChunk
    joint_chunk: Optional[ActionChunk]
    embodiment: str
    source_id: str = ''
    stats_digest: Optional[str] = None

    def __post_init__(self):
        if self.embodiment == HUMAN and self.joint_chunk is not None:
            raise DimensionMismatch("human samples cannot carry joint targets")
        features = np.array(self.features, dtype=np.float64)
        features.setflags(write=False)
        object.__setattr__(self, "features", features)

    @property
    def obs_time(self) -> float:
        return self.pose_chunk.obs_time


# -----------------------------------------------------------------------------
# Frame re-referencing
# -----------------------------------------------------------------------------
def reref_to_obs_frame(world_device: Sequence[Pose3], points_device: np.ndarray,
                       obs_index: int) -> np.ndarray:
    """
    Express trajectory points in the camera frame at observation index t

    a_i = inverse(T_t) . T_i . p_i for every i >= t, where T_i maps the
    device frame at step i into the world frame.

    Args:
        world_device: device poses T_i in the world frame
        points_device: (N, 3) points, each in its own device frame
        obs_index: observation index t

    Returns:
        (N - t, 3) points in frame F_t

    Raises:
        IndexOutOfRange: obs_index outside the trajectory or length mismatch
    """
    points = np.asarray(points_device, dtype=np.float64)
    rotations, translations = stack_poses(world_device)
    if points.ndim != 2 or points.shape[1] != 3 or points.shape[0] != rotations.shape[0]:
        raise IndexOutOfRange("poses and points must be equal-length sequences of 3-vectors")
    if not 0 <= obs_index < points.shape[0]:
        raise IndexOutOfRange(f"obs_index {obs_index} outside [0, {points.shape[0]})")
    world = np.einsum('nij,nj->ni', rotations[obs_index:], points[obs_index:]) + translations[obs_index:]
    return (world - translations[obs_index]) @ rotations[obs_index]


def target_times(obs_time: float, horizon: float, chunk_size: int) -> np.ndarray:
    """obs_time + k * horizon / K for k = 1..K, computed (never accumulated)"""
    return obs_time + np.arange(1, chunk_size + 1) * horizon / chunk_size


def pose_position_columns(arms: int, with_rotation: bool) -> np.ndarray:
    """Indices of the xyz position entries inside a pose-chunk row"""
    block = 12 if with_rotation else 3
    return np.concatenate([a * block + np.arange(3) for a in range(arms)])


# -----------------------------------------------------------------------------
# Per-episode chunk construction
# -----------------------------------------------------------------------------
class EpisodeAligner:
    """
    Precomputes the world-frame trajectory of one episode so chunks for many
    observation times can be built with a few vectorized operations
    """

    def __init__(self, ep: Episode, cfg: AlignConfig):
        self.ep = ep
        self.cfg = cfg
        self.horizon = cfg.horizon(ep.embodiment)
        self.arms = ep.arms
        self.camera = cfg.robot_camera

    # observation frame F_t as (R, t) mapping frame -> world
    def _obs_frames(self, times: np.ndarray):
        if self.ep.embodiment == HUMAN:
            return rows_to_arrays(self.ep.series[DEVICE_POSE_WORLD].at(times))
        inv = self.camera.inverse()
        n = times.size
        return (np.broadcast_to(inv.rotation, (n, 3, 3)), np.broadcast_to(inv.translation, (n, 3)))

    def _world_points(self, times: np.ndarray) -> np.ndarray:
        """(T, arms, 3) positions in the world/base frame at `times`"""
        if self.ep.embodiment == HUMAN:
            # lerp of world points == re-referenced lerp because F_t is affine
            knots = self.ep.series[HAND_POS_DEVICE]
            rotations, translations = rows_to_arrays(self.ep.series[DEVICE_POSE_WORLD].values)
            hands = knots.values.reshape(-1, self.arms, 3)
            world = np.einsum('nij,naj->nai', rotations, hands) + translations[:, None, :]
            return _lerp(knots.timestamps, world.reshape(len(knots), -1), times).reshape(-1, self.arms, 3)
        eef = self.ep.series[EEF_POSE_BASE].values.reshape(-1, self.arms, 12)[:, :, 9:12]
        knots = self.ep.series[EEF_POSE_BASE].timestamps
        return _lerp(knots, eef.reshape(len(knots), -1), times).reshape(-1, self.arms, 3)

    def check_obs_time(self, obs_time: float) -> None:
        if obs_time < self.ep.start - TIME_TOL:
            raise IndexOutOfRange(f"obs_time {obs_time:.4f} precedes episode start")
        if obs_time + self.horizon > self.ep.end + TIME_TOL:
            raise HorizonExceedsEpisode(
                f"obs_time {obs_time:.4f} + horizon {self.horizon}s runs past episode end "
                f"{self.ep.end:.4f}s")

    def valid_obs_times(self) -> np.ndarray:
        grid = self.ep.timestamps[::max(int(self.cfg.stride), 1)]
        return grid[grid + self.horizon <= self.ep.end + TIME_TOL]

    def pose_chunks(self, obs_times: np.ndarray) -> np.ndarray:
        """(M, K, P) pose targets in each observation camera frame"""
        k = self.cfg.chunk_size
        times = (obs_times[:, None] + np.arange(1, k + 1)[None, :] * self.horizon / k).reshape(-1)
        world = self._world_points(times).reshape(obs_times.size, k, self.arms, 3)
        rot, trans = self._obs_frames(obs_times)
        local = np.einsum('mji,mkaj->mkai', rot, world - trans[:, None, None, :])
        if self.ep.embodiment == ROBOT and self.cfg.pose_rotation:
            eef = self.ep.series[EEF_POSE_BASE].at(times).reshape(obs_times.size, k, self.arms, 12)
            base_rot = eef[..., :9].reshape(obs_times.size, k, self.arms, 3, 3)
            cam_rot = np.einsum('ij,mkajl->mkail', self.camera.rotation, base_rot)
            local = np.concatenate([local, cam_rot.reshape(obs_times.size, k, self.arms, 9)], axis=-1)
        return local.reshape(obs_times.size, k, -1)

    def joint_chunks(self, obs_times: np.ndarray) -> np.ndarray:
        k = self.cfg.chunk_size
        times = (obs_times[:, None] + np.arange(1, k + 1)[None, :] * self.horizon / k).reshape(-1)
        return self.ep.series[JOINT_ACTION].at(times).reshape(obs_times.size, k, -1)

    def features(self, obs_times: np.ndarray) -> np.ndarray:
        """
        Observation vectors: proprioception plus scene features in frame F_t

        Human proprio is the hand position in the device frame at t (already
        frame F_t); robot proprio is eef pose rows plus joint positions.
        """
        if self.ep.embodiment == HUMAN:
            parts = [self.ep.series[HAND_POS_DEVICE].at(obs_times)]
        else:
            parts = [self.ep.series[EEF_POSE_BASE].at(obs_times),
                     self.ep.series[JOINT_POS].at(obs_times)]
        if SCENE_WORLD in self.ep.series:
            rot, trans = self._obs_frames(obs_times)
            parts.append(scene_features(self.ep.series[SCENE_WORLD].at(obs_times), rot, trans))
        return np.concatenate(parts, axis=1)


def scene_features(scene_rows: np.ndarray, rotations: np.ndarray, translations: np.ndarray) -> np.ndarray:
    """
    Object and bowl positions in the observation frame plus held/in_bowl flags

    Args:
        scene_rows: (M, 8) world-frame scene rows
        rotations, translations: (M, 3, 3) / (M, 3) observation frame -> world
    """
    scene_rows = np.asarray(scene_rows, dtype=np.float64)
    objects = np.einsum('mji,mj->mi', rotations, scene_rows[:, 0:3] - translations)
    bowls = np.einsum('mji,mj->mi', rotations, scene_rows[:, 3:6] - translations)
    return np.concatenate([objects, bowls, scene_rows[:, 6:8]], axis=1)


def _lerp(knots: np.ndarray, values: np.ndarray, times: np.ndarray) -> np.ndarray:
    if times.size and (times.min() < knots[0] - TIME_TOL or times.max() > knots[-1] + TIME_TOL):
        raise HorizonExceedsEpisode("target times run past the recorded trajectory")
    idx = np.clip(np.searchsorted(knots, times, side='right') - 1, 0, knots.size - 2)
    weight = np.clip((times - knots[idx]) / (knots[idx + 1] - knots[idx]), 0.0, 1.0)[:, None]
    return values[idx] * (1.0 - weight) + values[idx + 1] * weight


def build_chunk(ep: Episode, obs_time: float, cfg: AlignConfig, space: str = POSE) -> ActionChunk:
    """
    Build the action chunk observed at `obs_time`

    Args:
        ep: time-aligned episode
        obs_time: observation time in episode seconds
        cfg: chunk size and horizons
        space: 'pose' (camera-frame positions) or 'joint' (robot only)

    Raises:
        HorizonExceedsEpisode: obs_time + horizon runs past the episode end
    """
    aligner = EpisodeAligner(ep, cfg)
    aligner.check_obs_time(obs_time)
    obs = np.array([obs_time], dtype=np.float64)
    if space == JOINT:
        if ep.embodiment != ROBOT:
            raise DimensionMismatch("joint chunks exist only for robot episodes")
        targets = aligner.joint_chunks(obs)[0]
    else:
        targets = aligner.pose_chunks(obs)[0]
    return ActionChunk(float(obs_time), targets, aligner.horizon, ep.embodiment, space)


# -----------------------------------------------------------------------------
# Dataset containers
# -----------------------------------------------------------------------------
@dataclass
class EmbodimentSplit:
    """
    Column-oriented samples of one embodiment in one split

    Rows are ordered by (source_id, obs_time).
    """

    embodiment: str
    horizon: float
    obs_times: np.ndarray
    episode_index: np.ndarray
    features: np.ndarray
    pose_targets: np.ndarray
    joint_targets: Optional[np.ndarray] = None
    source_ids: List[str] = field(default_factory=list)
    stats_digest: Optional[str] = None

    def __len__(self) -> int:
        return self.obs_times.shape[0]

    @property
    def chunk_size(self) -> int:
        return self.pose_targets.shape[1]

    def sample(self, i: int) -> UnifiedSample:
        joint = None
        if self.joint_targets is not None:
            joint = ActionChunk(float(self.obs_times[i]), self.joint_targets[i], self.horizon,
                                self.embodiment, JOINT)
        pose = ActionChunk(float(self.obs_times[i]), self.pose_targets[i], self.horizon,
                           self.embodiment, POSE)
        source = self.source_ids[int(self.episode_index[i])] if self.source_ids else ''
        return UnifiedSample(self.features[i], pose, joint, self.embodiment, source, self.stats_digest)

    def samples(self) -> Iterator[UnifiedSample]:
        for i in range(len(self)):
            yield self.sample(i)

    def take(self, rows: np.ndarray) -> "EmbodimentSplit":
        return EmbodimentSplit(
            self.embodiment, self.horizon, self.obs_times[rows], self.episode_index[rows],
            self.features[rows], self.pose_targets[rows],
            None if self.joint_targets is None else self.joint_targets[rows],
            list(self.source_ids), self.stats_digest)

    @classmethod
    def from_samples(cls, samples: Sequence[UnifiedSample]) -> "EmbodimentSplit":
        if not samples:
            raise EmptySplit("no samples to collect")
        first = samples[0]
        sources = sorted({s.source_id for s in samples})
        lookup = {sid: i for i, sid in enumerate(sources)}
        joints = None
        if first.joint_chunk is not None:
            joints = np.stack([s.joint_chunk.targets for s in samples])
        return cls(first.embodiment, first.pose_chunk.horizon,
                   np.array([s.obs_time for s in samples]),
                   np.array([lookup[s.source_id] for s in samples]),
                   np.stack([s.features for s in samples]),
                   np.stack([s.pose_chunk.targets for s in samples]),
                   joints, sources, first.stats_digest)


@dataclass
class AlignedDataset:
    """Normalized splits, per-embodiment stats, and the manifest describing them"""

    splits: Dict[str, Dict[str, EmbodimentSplit]]
    stats: Dict[str, EmbodimentStats]
    config: AlignConfig
    episodes: List[Dict]
    manifest: Dict = field(default_factory=dict)

    @property
    def train(self) -> Dict[str, EmbodimentSplit]:
        return self.splits.get('train', {})

    @property
    def stats_hash(self) -> str:
        return stats_digest(self.stats)


# -----------------------------------------------------------------------------
# Statistics and normalization
# -----------------------------------------------------------------------------
def _population_stats(rows: np.ndarray):
    mean = np.mean(rows, axis=0)
    std = np.maximum(np.sqrt(np.mean((rows - mean) ** 2, axis=0)), STD_FLOOR)
    return mean, std


def fit_stats(samples: Union[EmbodimentSplit, Sequence[UnifiedSample]],
              embodiment: str) -> EmbodimentStats:
    """
    Fit z-score statistics for one embodiment

    Args:
        samples: training split (column container or sample list)
        embodiment: 'human' or 'robot'

    Returns:
        EmbodimentStats over features, pose targets and (robot) joint targets

    Raises:
        EmptySplit: fewer than 2 samples of that embodiment
    """
    if not isinstance(samples, EmbodimentSplit):
        picked = [s for s in samples if s.embodiment == embodiment]
        if len(picked) < 2:
            raise EmptySplit(f"need at least 2 {embodiment} samples, got {len(picked)}")
        samples = EmbodimentSplit.from_samples(picked)
    elif samples.embodiment != embodiment:
        raise EmptySplit(f"split holds {samples.embodiment} samples, not {embodiment}")
    if len(samples) < 2:
        raise EmptySplit(f"need at least 2 {embodiment} samples, got {len(samples)}")

    proprio_mean, proprio_std = _population_stats(samples.features)
    pose = samples.pose_targets.reshape(-1, samples.pose_targets.shape[-1])
    action_mean, action_std = _population_stats(pose)
    joint_mean = joint_std = None
    if samples.joint_targets is not None:
        joint = samples.joint_targets.reshape(-1, samples.joint_targets.shape[-1])
        joint_mean, joint_std = _population_stats(joint)
    return EmbodimentStats(embodiment, proprio_mean, proprio_std, action_mean, action_std,
                           len(samples), joint_mean, joint_std)


def identity_stats(reference: EmbodimentStats) -> EmbodimentStats:
    """Stats that leave data unchanged (the no-normalization ablation)"""
    def zeros(a):
        return None if a is None else np.zeros_like(a)

    def ones(a):
        return None if a is None else np.ones_like(a)
    return EmbodimentStats(reference.embodiment, zeros(reference.proprio_mean),
                           ones(reference.proprio_std), zeros(reference.action_mean),
                           ones(reference.action_std), reference.sample_count,
                           zeros(reference.joint_mean), ones(reference.joint_std))


def normalize(x: np.ndarray, stats: EmbodimentStats, field_name: str = 'proprio') -> np.ndarray:
    """(x - mu) / sigma along the last axis"""
    mean, std = stats.field(field_name)
    x = np.asarray(x, dtype=np.float64)
    if mean is None or x.shape[-1] != mean.shape[0]:
        raise DimensionMismatch(
            f"{field_name} vector has {x.shape[-1]} dims, stats have "
            f"{None if mean is None else mean.shape[0]}")
    return (x - mean) / std


def denormalize(x: np.ndarray, stats: EmbodimentStats, field_name: str = 'proprio') -> np.ndarray:
    """x * sigma + mu along the last axis"""
    mean, std = stats.field(field_name)
    x = np.asarray(x, dtype=np.float64)
    if mean is None or x.shape[-1] != mean.shape[0]:
        raise DimensionMismatch(
            f"{field_name} vector has {x.shape[-1]} dims, stats have "
            f"{None if mean is None else mean.shape[0]}")
    return x * std + mean


def normalize_split(split: EmbodimentSplit, stats: EmbodimentStats, digest: str) -> EmbodimentSplit:
    joints = None
    if split.joint_targets is not None:
        joints = normalize(split.joint_targets, stats, 'joint')
    return EmbodimentSplit(split.embodiment, split.horizon, split.obs_times, split.episode_index,
                           normalize(split.features, stats, 'proprio'),
                           normalize(split.pose_targets, stats, 'action'),
                           joints, list(split.source_ids), digest)


# -----------------------------------------------------------------------------
# Dataset construction
# -----------------------------------------------------------------------------
def _episode_columns(ep: Episode, cfg: AlignConfig) -> Dict[str, np.ndarray]:
    aligner = EpisodeAligner(ep, cfg)
    obs = aligner.valid_obs_times()
    if obs.size == 0:
        return {'obs_times': obs}
    columns = {
        'obs_times': obs,
        'features': aligner.features(obs),
        'pose_targets': aligner.pose_chunks(obs),
    }
    if ep.embodiment == ROBOT:
        columns['joint_targets'] = aligner.joint_chunks(obs)
    return columns


def _collect(episodes: List[Episode], cfg: AlignConfig, workers: int) -> Optional[EmbodimentSplit]:
    if not episodes:
        return None
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda e: _episode_columns(e, cfg), episodes))
    else:
        parts = [_episode_columns(e, cfg) for e in episodes]
    keep = [(i, p) for i, p in enumerate(parts) if p['obs_times'].size]
    if not keep:
        return None
    embodiment = episodes[0].embodiment
    joints = None
    if embodiment == ROBOT:
        joints = np.concatenate([p['joint_targets'] for _, p in keep])
    return EmbodimentSplit(
        embodiment, cfg.horizon(embodiment),
        np.concatenate([p['obs_times'] for _, p in keep]),
        np.concatenate([np.full(p['obs_times'].size, i) for i, p in keep]),
        np.concatenate([p['features'] for _, p in keep]),
        np.concatenate([p['pose_targets'] for _, p in keep]),
        joints, [e.source_id for e in episodes])


def _split_episodes(episodes: List[Episode], val_fraction: float):
    n_val = int(np.floor(val_fraction * len(episodes)))
    if n_val >= len(episodes):
        n_val = len(episodes) - 1
    if n_val <= 0:
        return episodes, []
    return episodes[:-n_val], episodes[-n_val:]


def build_dataset(episodes: Sequence[Episode], cfg: AlignConfig, out_dir: Optional[str] = None,
                  workers: int = 1, verbose: bool = False) -> AlignedDataset:
    """
    Build the unified, normalized dataset from time-aligned episodes

    Args:
        episodes: human and/or robot episodes
        cfg: alignment configuration
        out_dir: when given, the dataset is also written to disk
        workers: threads used for per-episode chunk construction
        verbose: print progress lines

    Returns:
        AlignedDataset with 'train' (and 'val' when val_fraction > 0) splits

    Raises:
        EmptySplit: no episodes, or an embodiment yields no samples
    """
    episodes = list(episodes)
    if not episodes:
        raise EmptySplit("episode set is empty")

    by_embodiment = {emb: sorted((e for e in episodes if e.embodiment == emb),
                                 key=lambda e: e.source_id) for emb in EMBODIMENTS}
    raw: Dict[str, Dict[str, EmbodimentSplit]] = {'train': {}, 'val': {}}
    for emb, eps in by_embodiment.items():
        if not eps:
            continue
        train_eps, val_eps = _split_episodes(eps, cfg.val_fraction)
        train = _collect(train_eps, cfg, workers)
        if train is None:
            raise EmptySplit(f"{emb} episodes are all shorter than the {cfg.horizon(emb)}s horizon")
        raw['train'][emb] = train
        val = _collect(val_eps, cfg, workers)
        if val is not None:
            raw['val'][emb] = val
        if verbose:
            print(f"    ✓ {emb}: {len(train)} train samples from {len(train_eps)} episode(s)"
                  + (f", {len(val)} val" if val is not None else ""))

    stats = {}
    for emb, split in raw['train'].items():
        fitted = fit_stats(split, emb)
        stats[emb] = fitted if cfg.action_norm else identity_stats(fitted)
    digest = stats_digest(stats)

    splits = {name: {emb: normalize_split(split, stats[emb], digest) for emb, split in part.items()}
              for name, part in raw.items() if part}
    episode_table = [{'source_id': e.source_id, 'embodiment': e.embodiment, 'arms': e.arms,
                      'samples': len(e), 'duration_s': e.duration}
                     for emb in EMBODIMENTS for e in by_embodiment[emb]]
    dataset = AlignedDataset(splits, stats, cfg, episode_table)

    if out_dir is not None:
        from dataset_store import write_dataset
        write_dataset(dataset, out_dir)
    return dataset


def normalized_overlap_report(dataset: AlignedDataset, split: str = 'train') -> Dict:
    """
    Per-dimension pose-action means of each embodiment before and after
    normalization, and the inter-embodiment gap (raw vs normalized)
    """
    part = dataset.splits.get(split, {})
    if HUMAN not in part or ROBOT not in part:
        return {'available': False}
    arms = {emb: int(part[emb].pose_targets.shape[-1] // (12 if emb == ROBOT and dataset.config.pose_rotation else 3))
            for emb in part}
    cols = {HUMAN: pose_position_columns(arms[HUMAN], False),
            ROBOT: pose_position_columns(arms[ROBOT], dataset.config.pose_rotation)}
    report = {'available': True}
    for label, transform in (('normalized', lambda e, x: x),
                             ('raw', lambda e, x: denormalize(x, dataset.stats[e], 'action'))):
        means = {}
        for emb in (HUMAN, ROBOT):
            targets = transform(emb, part[emb].pose_targets)
            flat = targets.reshape(-1, targets.shape[-1])[:, cols[emb]]
            means[emb] = flat.mean(axis=0)
        width = min(means[HUMAN].size, means[ROBOT].size)
        gap = np.abs(means[HUMAN][:width] - means[ROBOT][:width])
        report[label] = {'human_mean': means[HUMAN].tolist(), 'robot_mean': means[ROBOT].tolist(),
                         'gap': gap.tolist(), 'max_gap': float(gap.max())}
    return report
