"""
Co-Training Policy Model
========================

Purpose: One policy trained on human and robot demonstrations at once.

Architecture:
    features --(per-embodiment affine adapter)--> shared width
             --(shared tanh MLP trunk)--> h
             h --(affine pose head)--> K x P   camera-frame positions (both embodiments)
             h --(affine joint head)--> K x J  joint targets (robot only)

Training (one human batch AND one robot batch per iteration, one update):
    L = w_hp * MSE(human pose) + w_rp * MSE(robot pose) + w_rq * MSE(robot joint)

Gradients are hand-derived backpropagation, all weights float64.
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from action_alignment_module import AlignedDataset, EmbodimentSplit, UnifiedSample, pose_position_columns
from log_ingest_processor import HUMAN, ROBOT
from pipeline_errors import CheckpointMismatch, DimensionMismatch, EmptyBatch, StatsMismatch

CHECKPOINT_VERSION = 1
LOSS_TERMS = ('human_pose', 'robot_pose', 'robot_joint')


# -----------------------------------------------------------------------------
# Parameters
# -----------------------------------------------------------------------------
@dataclass(frozen=True)
class Architecture:
    """Dimensions that fix the parameter shapes"""

    feature_dims: Dict[str, int]
    chunk_size: int
    pose_dim: int
    joint_dim: int
    shared_width: int = 64
    trunk_widths: Tuple[int, ...] = (64, 64)
    human_pose_columns: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'trunk_widths', tuple(int(w) for w in self.trunk_widths))
        columns = tuple(int(c) for c in self.human_pose_columns) or tuple(range(self.pose_dim))
        object.__setattr__(self, 'human_pose_columns', columns)
        object.__setattr__(self, 'feature_dims', {k: int(v) for k, v in sorted(self.feature_dims.items())})

    @property
    def embodiments(self) -> List[str]:
        return list(self.feature_dims)

    @property
    def trunk_out(self) -> int:
        return self.trunk_widths[-1] if self.trunk_widths else self.shared_width

    def shapes(self) -> List[Tuple[str, Tuple[int, ...]]]:
        """Parameter names and shapes in storage order"""
        out = []
        for emb, dim in self.feature_dims.items():
            out += [(f'adapter.{emb}.W', (dim, self.shared_width)), (f'adapter.{emb}.b', (self.shared_width,))]
        width = self.shared_width
        for i, next_width in enumerate(self.trunk_widths):
            out += [(f'trunk.{i}.W', (width, next_width)), (f'trunk.{i}.b', (next_width,))]
            width = next_width
        out += [('pose_head.W', (width, self.chunk_size * self.pose_dim)),
                ('pose_head.b', (self.chunk_size * self.pose_dim,)),
                ('joint_head.W', (width, self.chunk_size * self.joint_dim)),
                ('joint_head.b', (self.chunk_size * self.joint_dim,))]
        return out

    def to_dict(self) -> Dict:
        out = asdict(self)
        out['trunk_widths'] = list(self.trunk_widths)
        out['human_pose_columns'] = list(self.human_pose_columns)
        return out

    @classmethod
    def from_dict(cls, data: Dict) -> "Architecture":
        return cls(dict(data['feature_dims']), int(data['chunk_size']), int(data['pose_dim']),
                   int(data['joint_dim']), int(data['shared_width']), tuple(data['trunk_widths']),
                   tuple(data['human_pose_columns']))

    @classmethod
    def for_dataset(cls, dataset: AlignedDataset, shared_width: int = 64,
                    trunk_widths: Sequence[int] = (64, 64)) -> "Architecture":
        train = dataset.train
        if not train:
            raise EmptyBatch("dataset has no training split")
        any_split = next(iter(train.values()))
        robot = train.get(ROBOT)
        rotation = dataset.config.pose_rotation
        if robot is not None:
            pose_dim = robot.pose_targets.shape[2]
            joint_dim = robot.joint_targets.shape[2]
            arms = pose_dim // (12 if rotation else 3)
        else:
            pose_dim = train[HUMAN].pose_targets.shape[2]
            arms = pose_dim // 3
            joint_dim = 7 * arms
            rotation = False
        columns = ()
        if HUMAN in train:
            columns = tuple(pose_position_columns(arms, rotation).tolist())
            if len(columns) != train[HUMAN].pose_targets.shape[2]:
                raise DimensionMismatch("human and robot episodes have different arm counts")
        return cls({emb: split.features.shape[1] for emb, split in train.items()},
                   any_split.chunk_size, int(pose_dim), int(joint_dim), shared_width,
                   tuple(trunk_widths), columns)


@dataclass(frozen=True, eq=False)
class PolicyParams:
    """
    Immutable weights plus the architecture and the stats hash they were
    trained against. Exactly one trunk serves both embodiments.
    """

    arch: Architecture
    weights: Dict[str, np.ndarray]
    stats_hash: Optional[str] = None
    seed: int = 0
    iteration: int = 0

    def __post_init__(self):
        frozen = {}
        for name, shape in self.arch.shapes():
            if name not in self.weights:
                raise DimensionMismatch(f"missing parameter {name}")
            array = np.array(self.weights[name], dtype=np.float64)
            if array.shape != shape:
                raise DimensionMismatch(f"{name} has shape {array.shape}, expected {shape}")
            array.setflags(write=False)
            frozen[name] = array
        object.__setattr__(self, 'weights', frozen)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.weights[name]

    @property
    def names(self) -> List[str]:
        return [name for name, _ in self.arch.shapes()]

    def replace(self, weights: Dict[str, np.ndarray], iteration: Optional[int] = None) -> "PolicyParams":
        return PolicyParams(self.arch, weights, self.stats_hash, self.seed,
                            self.iteration if iteration is None else iteration)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.weights[name].ravel() for name in self.names])

    @classmethod
    def from_flat(cls, arch: Architecture, flat: np.ndarray, **kwargs) -> "PolicyParams":
        weights, offset = {}, 0
        for name, shape in arch.shapes():
            size = int(np.prod(shape))
            weights[name] = flat[offset:offset + size].reshape(shape)
            offset += size
        if offset != flat.size:
            raise CheckpointMismatch(f"weight blob has {flat.size} values, architecture needs {offset}")
        return cls(arch, weights, **kwargs)

    @classmethod
    def init(cls, arch: Architecture, seed: int = 0, stats_hash: Optional[str] = None,
             zero_heads: bool = False) -> "PolicyParams":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases, seeded"""
        rng = np.random.default_rng(seed)
        weights = {}
        fan_in = {}
        for name, shape in arch.shapes():
            if name.endswith('.W'):
                fan_in[name[:-2]] = shape[0]
            bound = 1.0 / np.sqrt(fan_in[name[:-2]])
            weights[name] = rng.uniform(-bound, bound, size=shape)
            if zero_heads and name.split('.')[0] in ('pose_head', 'joint_head'):
                weights[name] = np.zeros(shape)
        return cls(arch, weights, stats_hash, seed, 0)


# -----------------------------------------------------------------------------
# Forward pass
# -----------------------------------------------------------------------------
def _check_stats(params: PolicyParams, digest: Optional[str]) -> None:
    if params.stats_hash and digest and digest != params.stats_hash:
        raise StatsMismatch(f"sample normalized with stats {digest[:12]}, "
                            f"policy trained with {params.stats_hash[:12]}")


def forward_batch(params: PolicyParams, embodiment: str, features: np.ndarray,
                  with_joint: Optional[bool] = None):
    """
    Batched forward pass

    Returns:
        (pose (B, K, P), joint (B, K, J) or None, activations for backprop)
    """
    arch = params.arch
    if embodiment not in arch.feature_dims:
        raise DimensionMismatch(f"policy has no input adapter for {embodiment}")
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != arch.feature_dims[embodiment]:
        raise DimensionMismatch(f"{embodiment} features must be (B, {arch.feature_dims[embodiment]}), "
                                f"got {x.shape}")
    hidden = [x @ params[f'adapter.{embodiment}.W'] + params[f'adapter.{embodiment}.b']]
    for i in range(len(arch.trunk_widths)):
        hidden.append(np.tanh(hidden[-1] @ params[f'trunk.{i}.W'] + params[f'trunk.{i}.b']))
    top = hidden[-1]
    batch = x.shape[0]
    pose = (top @ params['pose_head.W'] + params['pose_head.b']).reshape(batch, arch.chunk_size, arch.pose_dim)
    if with_joint is None:
        with_joint = embodiment == ROBOT
    joint = None
    if with_joint:
        joint = (top @ params['joint_head.W'] + params['joint_head.b']).reshape(
            batch, arch.chunk_size, arch.joint_dim)
    return pose, joint, (x, hidden)


def forward(params: PolicyParams, sample: UnifiedSample) -> Dict[str, np.ndarray]:
    """
    Predict chunks for one normalized sample

    Returns:
        {'pose_pred': K x P} plus 'joint_pred': K x J for robot samples

    Raises:
        StatsMismatch: sample normalized under different statistics
    """
    _check_stats(params, sample.stats_digest)
    pose, joint, _ = forward_batch(params, sample.embodiment, sample.features[None, :])
    out = {'pose_pred': pose[0]}
    if joint is not None:
        out['joint_pred'] = joint[0]
    return out


# -----------------------------------------------------------------------------
# Loss and gradient
# -----------------------------------------------------------------------------
def _present(batch: Optional[EmbodimentSplit]) -> bool:
    return batch is not None and len(batch) > 0


def _loss_and_grad(params: PolicyParams, human_batch: Optional[EmbodimentSplit],
                   robot_batch: Optional[EmbodimentSplit], weights: Sequence[float],
                   need_grad: bool):
    if not _present(human_batch) and not _present(robot_batch):
        raise EmptyBatch("both human and robot batches are empty")
    arch = params.arch
    w_hp, w_rp, w_rq = (float(w) for w in weights)
    terms = {name: 0.0 for name in LOSS_TERMS}
    grads = {name: np.zeros_like(params[name]) for name in params.names} if need_grad else None

    for embodiment, batch in ((HUMAN, human_batch), (ROBOT, robot_batch)):
        if not _present(batch):
            continue
        _check_stats(params, batch.stats_digest)
        pose, joint, (x, hidden) = forward_batch(params, embodiment, batch.features)
        b, k = pose.shape[:2]
        d_pose = np.zeros_like(pose)
        d_joint = None

        if embodiment == HUMAN:
            cols = np.asarray(arch.human_pose_columns)
            if batch.pose_targets.shape[2] != cols.size:
                raise DimensionMismatch(f"human pose targets have {batch.pose_targets.shape[2]} dims, "
                                        f"policy expects {cols.size}")
            err = pose[:, :, cols] - batch.pose_targets
            terms['human_pose'] = float(np.mean(err ** 2))
            d_pose[:, :, cols] = w_hp * 2.0 * err / err.size
        else:
            err = pose - batch.pose_targets
            terms['robot_pose'] = float(np.mean(err ** 2))
            d_pose = w_rp * 2.0 * err / err.size
            if batch.joint_targets is None:
                raise DimensionMismatch("robot batch is missing joint targets")
            jerr = joint - batch.joint_targets
            terms['robot_joint'] = float(np.mean(jerr ** 2))
            d_joint = w_rq * 2.0 * jerr / jerr.size

        if not need_grad:
            continue
        top = hidden[-1]
        d_pose = d_pose.reshape(b, -1)
        grads['pose_head.W'] += top.T @ d_pose
        grads['pose_head.b'] += d_pose.sum(axis=0)
        d_top = d_pose @ params['pose_head.W'].T
        if d_joint is not None:
            d_joint = d_joint.reshape(b, -1)
            grads['joint_head.W'] += top.T @ d_joint
            grads['joint_head.b'] += d_joint.sum(axis=0)
            d_top = d_top + d_joint @ params['joint_head.W'].T

        d_h = d_top
        for i in reversed(range(len(arch.trunk_widths))):
            d_a = d_h * (1.0 - hidden[i + 1] ** 2)
            grads[f'trunk.{i}.W'] += hidden[i].T @ d_a
            grads[f'trunk.{i}.b'] += d_a.sum(axis=0)
            d_h = d_a @ params[f'trunk.{i}.W'].T
        grads[f'adapter.{embodiment}.W'] += x.T @ d_h
        grads[f'adapter.{embodiment}.b'] += d_h.sum(axis=0)

    total = w_hp * terms['human_pose'] + w_rp * terms['robot_pose'] + w_rq * terms['robot_joint']
    return total, terms, grads


def loss(params: PolicyParams, human_batch: Optional[EmbodimentSplit],
         robot_batch: Optional[EmbodimentSplit],
         weights: Sequence[float] = (1.0, 1.0, 1.0)) -> Tuple[float, Dict[str, float]]:
    """
    Weighted sum of the three MSE terms

    Each term averages over batch, chunk and dimension. Either batch may be
    None (robot-only training, human-only evaluation).

    Raises:
        EmptyBatch: both batches empty
    """
    total, terms, _ = _loss_and_grad(params, human_batch, robot_batch, weights, need_grad=False)
    return total, terms


def grad(params: PolicyParams, human_batch: Optional[EmbodimentSplit],
         robot_batch: Optional[EmbodimentSplit],
         weights: Sequence[float] = (1.0, 1.0, 1.0)) -> Dict[str, np.ndarray]:
    """Analytic gradient of loss() keyed like params.weights"""
    _, _, grads = _loss_and_grad(params, human_batch, robot_batch, weights, need_grad=True)
    return grads


# -----------------------------------------------------------------------------
# Training
# -----------------------------------------------------------------------------
@dataclass(frozen=True)
class TrainConfig:
    """
    Training hyperparameters

    batch_size is per embodiment; loss_weights = (human pose, robot pose,
    robot joint). optimizer is 'momentum' or 'adamw'; lr_schedule 'constant'
    or 'linear' (decays to lr * final_lr_factor).
    """

    batch_size: int = 32
    iterations: int = 2000
    learning_rate: float = 0.01
    seed: int = 0
    loss_weights: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    optimizer: str = 'momentum'
    momentum: float = 0.9
    betas: Tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 1e-4
    adam_eps: float = 1e-8
    lr_schedule: str = 'constant'
    final_lr_factor: float = 1.0
    shared_width: int = 64
    trunk_widths: Tuple[int, ...] = (64, 64)
    use_human: bool = True
    eval_every: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise DimensionMismatch("batch_size must be at least 1")
        if self.optimizer not in ('momentum', 'adamw'):
            raise DimensionMismatch(f"unknown optimizer {self.optimizer!r}")
        if self.lr_schedule not in ('constant', 'linear'):
            raise DimensionMismatch(f"unknown lr schedule {self.lr_schedule!r}")

    def lr_at(self, iteration: int) -> float:
        if self.lr_schedule == 'constant' or self.iterations <= 1:
            return self.learning_rate
        progress = iteration / (self.iterations - 1)
        return self.learning_rate * (1.0 - (1.0 - self.final_lr_factor) * progress)


@dataclass
class TrainResult:
    params: PolicyParams
    trace: pd.DataFrame = field(default_factory=pd.DataFrame)

    @property
    def final_loss(self) -> float:
        return float(self.trace['total'].iloc[-1]) if len(self.trace) else float('nan')


class BatchSampler:
    """Seeded per-embodiment index sampler (without replacement inside a batch)"""

    def __init__(self, sizes: Dict[str, int], batch_size: int, seed: int):
        self.sizes = dict(sizes)
        self.batch_size = batch_size
        self.rng = np.random.default_rng(seed)

    def draw(self) -> Dict[str, np.ndarray]:
        out = {}
        for emb in sorted(self.sizes):
            n = self.sizes[emb]
            out[emb] = np.sort(self.rng.choice(n, size=min(self.batch_size, n), replace=False))
        return out


class CoTrainer:
    """
    Deterministic training loop: one human and one robot batch per step,
    losses summed, one optimizer update
    """

    def __init__(self, cfg: TrainConfig, verbose: bool = False):
        self.cfg = cfg
        self.verbose = verbose

    def _step(self, params, grads, state, iteration):
        cfg = self.cfg
        lr = cfg.lr_at(iteration)
        new = {}
        for name in params.names:
            p, g = params[name], grads[name]
            if cfg.optimizer == 'momentum':
                v = cfg.momentum * state.setdefault(name, np.zeros_like(p)) + g
                state[name] = v
                new[name] = p - lr * v
            else:
                b1, b2 = cfg.betas
                m = b1 * state.setdefault(name + '.m', np.zeros_like(p)) + (1.0 - b1) * g
                v = b2 * state.setdefault(name + '.v', np.zeros_like(p)) + (1.0 - b2) * g * g
                state[name + '.m'], state[name + '.v'] = m, v
                m_hat = m / (1.0 - b1 ** (iteration + 1))
                v_hat = v / (1.0 - b2 ** (iteration + 1))
                new[name] = p - lr * (m_hat / (np.sqrt(v_hat) + cfg.adam_eps) + cfg.weight_decay * p)
        return params.replace(new, iteration + 1), lr

    def train(self, datasets: Dict[str, EmbodimentSplit], init: Optional[PolicyParams] = None,
              arch: Optional[Architecture] = None, stats_hash: Optional[str] = None,
              val: Optional[Dict[str, EmbodimentSplit]] = None) -> TrainResult:
        """
        Train on per-embodiment training splits

        Args:
            datasets: {'human': split, 'robot': split} (normalized)
            init: starting parameters (default: seeded init for `arch`)
            arch: architecture used when `init` is not given
            stats_hash: normalization stats hash recorded on the params
            val: optional held-out splits for the eval-loss column

        Returns:
            TrainResult with final params and a per-iteration loss trace
        """
        cfg = self.cfg
        splits = {emb: s for emb, s in datasets.items()
                  if _present(s) and (emb == ROBOT or cfg.use_human)}
        if not splits:
            raise EmptyBatch("no non-empty training split")
        if init is None:
            if arch is None:
                raise DimensionMismatch("either init params or an architecture is required")
            init = PolicyParams.init(arch, cfg.seed, stats_hash)
        params = init

        sampler = BatchSampler({emb: len(s) for emb, s in splits.items()}, cfg.batch_size, cfg.seed)
        state: Dict[str, np.ndarray] = {}
        rows = []
        report_every = max(cfg.iterations // 10, 1)
        for it in range(cfg.iterations):
            picks = sampler.draw()
            human = splits[HUMAN].take(picks[HUMAN]) if HUMAN in picks else None
            robot = splits[ROBOT].take(picks[ROBOT]) if ROBOT in picks else None
            total, terms, grads = _loss_and_grad(params, human, robot, cfg.loss_weights, need_grad=True)
            params, lr = self._step(params, grads, state, it)
            row = {'iteration': it, 'total': total, **terms, 'lr': lr}
            if val and cfg.eval_every and (it + 1) % cfg.eval_every == 0:
                row['val_total'] = eval_loss(params, val, cfg.loss_weights)
            rows.append(row)
            if self.verbose and (it % report_every == 0 or it == cfg.iterations - 1):
                print(f"    iter {it:>6d}  loss {total:.6f}  "
                      f"(human {terms['human_pose']:.5f}, robot pose {terms['robot_pose']:.5f}, "
                      f"joint {terms['robot_joint']:.5f})")

        trace = pd.DataFrame(rows, columns=['iteration', 'total', *LOSS_TERMS, 'lr'] +
                             (['val_total'] if any('val_total' in r for r in rows) else []))
        return TrainResult(params, trace)


def train(datasets: Dict[str, EmbodimentSplit], cfg: TrainConfig, arch: Optional[Architecture] = None,
          stats_hash: Optional[str] = None, init: Optional[PolicyParams] = None,
          val: Optional[Dict[str, EmbodimentSplit]] = None, verbose: bool = False) -> TrainResult:
    """Module-level shortcut for CoTrainer(cfg).train(...)"""
    return CoTrainer(cfg, verbose).train(datasets, init=init, arch=arch, stats_hash=stats_hash, val=val)


def train_on_dataset(dataset: AlignedDataset, cfg: TrainConfig, verbose: bool = False) -> TrainResult:
    arch = Architecture.for_dataset(dataset, cfg.shared_width, cfg.trunk_widths)
    return train(dataset.train, cfg, arch, dataset.stats_hash,
                 val=dataset.splits.get('val'), verbose=verbose)


def eval_loss(params: PolicyParams, splits: Dict[str, EmbodimentSplit],
              weights: Sequence[float] = (1.0, 1.0, 1.0)) -> float:
    """Loss over whole (held-out) splits"""
    total, _ = loss(params, splits.get(HUMAN), splits.get(ROBOT), weights)
    return total


# -----------------------------------------------------------------------------
# Checkpoints
# -----------------------------------------------------------------------------
def _checkpoint_paths(path: str) -> Tuple[str, str]:
    stem = path[:-5] if path.endswith('.json') else path
    return stem + '.json', stem + '.f64'


def save_checkpoint(params: PolicyParams, path: str) -> str:
    """
    Write `<path>.json` (architecture, seed, iteration, stats hash) and
    `<path>.f64` (little-endian float64 weights in architecture order)
    """
    manifest_path, blob_path = _checkpoint_paths(path)
    os.makedirs(os.path.dirname(os.path.abspath(manifest_path)), exist_ok=True)
    data = params.flat().astype('<f8').tobytes()
    with open(blob_path, 'wb') as f:
        f.write(data)
    manifest = {
        'version': CHECKPOINT_VERSION,
        'architecture': params.arch.to_dict(),
        'parameters': [{'name': n, 'shape': list(s)} for n, s in params.arch.shapes()],
        'seed': params.seed,
        'iteration': params.iteration,
        'stats_hash': params.stats_hash,
        'weights_file': os.path.basename(blob_path),
        'weights_sha256': hashlib.sha256(data).hexdigest(),
    }
    with open(manifest_path, 'w') as f:
        json.dump(manifest, f, indent=2)
    return manifest_path


def load_checkpoint(path: str, expect_stats_hash: Optional[str] = None,
                    expect_arch: Optional[Architecture] = None) -> PolicyParams:
    """
    Load a checkpoint written by save_checkpoint

    Raises:
        CheckpointMismatch: missing files, corrupted weights, or dims / stats
            hash differing from the expected ones
    """
    manifest_path, blob_path = _checkpoint_paths(path)
    try:
        with open(manifest_path) as f:
            manifest = json.load(f)
        with open(blob_path, 'rb') as f:
            data = f.read()
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointMismatch(f"cannot read checkpoint: {e}", file=manifest_path)
    if hashlib.sha256(data).hexdigest() != manifest.get('weights_sha256'):
        raise CheckpointMismatch("weight blob does not match its recorded hash", file=blob_path)
    arch = Architecture.from_dict(manifest['architecture'])
    if expect_arch is not None and arch.to_dict() != expect_arch.to_dict():
        raise CheckpointMismatch("checkpoint architecture differs from the expected one",
                                 file=manifest_path)
    if expect_stats_hash is not None and manifest.get('stats_hash') != expect_stats_hash:
        raise CheckpointMismatch("checkpoint was trained with different normalization stats",
                                 file=manifest_path)
    flat = np.frombuffer(data, dtype='<f8').astype(np.float64)
    return PolicyParams.from_flat(arch, flat, stats_hash=manifest.get('stats_hash'),
                                  seed=int(manifest.get('seed', 0)),
                                  iteration=int(manifest.get('iteration', 0)))
