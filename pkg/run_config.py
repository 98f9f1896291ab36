"""
Run Configuration
=================

One INI file (`key = value`, sections [paths] [align] [train] [bench]
[sweep] [camera]) plus command-line overrides. Unknown keys and
unparsable values raise ConfigError with file and line.

Defaults mirror the shipped config/run_default.ini.
"""

import configparser
import dataclasses
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from action_alignment_module import AlignConfig
from benchmark_env import BenchConfig
from cotrain_policy_model import TrainConfig
from pipeline_errors import ConfigError, ini_key_line

PACKAGE_DIR = os.path.dirname(os.path.abspath(__file__))
DEFAULT_RUN_INI = os.path.join(PACKAGE_DIR, 'config', 'run_default.ini')
DEFAULT_ARM_INI = os.path.join(PACKAGE_DIR, 'config', 'arm_default.ini')

_TRUE = {'1', 'true', 'yes', 'on'}
_FALSE = {'0', 'false', 'no', 'off'}


@dataclass(frozen=True)
class PathsConfig:
    raw_dir: str = 'runs/raw'
    dataset_dir: str = 'runs/dataset'
    checkpoint_dir: str = 'runs/checkpoints'
    results_dir: str = 'runs/results'
    arm_config: str = DEFAULT_ARM_INI

    def under(self, root: str) -> "PathsConfig":
        return PathsConfig(os.path.join(root, 'raw'), os.path.join(root, 'dataset'),
                           os.path.join(root, 'checkpoints'), os.path.join(root, 'results'),
                           self.arm_config)

    @property
    def arm_path(self) -> str:
        """arm_config, with relative paths falling back to the package directory"""
        if os.path.isabs(self.arm_config) or os.path.exists(self.arm_config):
            return self.arm_config
        return os.path.join(PACKAGE_DIR, self.arm_config)


@dataclass(frozen=True)
class GenConfig:
    """Demonstration budgets for gen-bench, in simulated minutes"""

    robot_minutes: float = 10.0
    human_minutes: float = 40.0
    data_seed: int = 0

    def episodes(self, minutes: float, episode_s: float) -> int:
        return int(round(minutes * 60.0 / episode_s))


@dataclass(frozen=True)
class SweepConfig:
    """Scale sweep grid ({robot minutes} x {human minutes}) and its per-cell settings"""

    robot_minutes: Tuple[float, ...] = (4.0, 8.0, 12.0)
    human_minutes: Tuple[float, ...] = (0.0, 4.0, 8.0)
    seeds: int = 5
    stride: int = 10
    workers: int = 1


# [camera] keys live on BenchConfig; gen-bench budgets are read from [bench]
_CAMERA_KEYS = {'fx', 'fy', 'cx', 'cy', 'width', 'height', 'camera_eye', 'camera_target',
                'camera_up', 'head_eye'}
_GEN_KEYS = {f.name for f in dataclasses.fields(GenConfig)}


@dataclass(frozen=True)
class RunConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    align: AlignConfig = field(default_factory=AlignConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    gen: GenConfig = field(default_factory=GenConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    source: Optional[str] = None

    # -------------------------------------------------------------------------
    # Loading
    # -------------------------------------------------------------------------
    @classmethod
    def load(cls, path: Optional[str] = None, **overrides: Any) -> "RunConfig":
        """
        Read `path` (defaults only when None) and apply flag overrides

        Args:
            path: INI file
            overrides: seed, out, robot_min, human_min, iterations, episodes

        Raises:
            ConfigError: missing file, unknown section/key, bad value
        """
        cfg = cls()
        if path is not None:
            cfg = cls._from_file(path)
        return cfg.with_overrides(**overrides)

    @classmethod
    def _from_file(cls, path: str) -> "RunConfig":
        try:
            with open(path) as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e.strerror}", file=path)
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text, source=path)
        except configparser.Error as e:
            raise ConfigError(f"cannot parse config: {e.message.splitlines()[0]}", file=path,
                              line=getattr(e, 'lineno', None))

        values: Dict[str, Dict[str, Any]] = {'paths': {}, 'align': {}, 'train': {}, 'bench': {},
                                             'gen': {}, 'sweep': {}}
        targets = {'paths': PathsConfig, 'align': AlignConfig, 'train': TrainConfig,
                   'bench': BenchConfig, 'gen': GenConfig, 'sweep': SweepConfig}
        for section in parser.sections():
            if section not in ('paths', 'align', 'train', 'bench', 'sweep', 'camera'):
                raise ConfigError(f"unknown section [{section}]", file=path,
                                  line=ini_key_line(text, section))
            for key, raw in parser.items(section):
                line = ini_key_line(text, section, key)
                if section == 'camera':
                    if key not in _CAMERA_KEYS:
                        raise ConfigError(f"unknown key '{key}' in [camera]", file=path, line=line)
                    owner = 'bench'
                elif section == 'bench' and key in _GEN_KEYS:
                    owner = 'gen'
                elif section == 'bench' and key in _CAMERA_KEYS:
                    raise ConfigError(f"'{key}' belongs in [camera]", file=path, line=line)
                else:
                    owner = section
                kinds = {f.name: f for f in dataclasses.fields(targets[owner])}
                if key not in kinds:
                    raise ConfigError(f"unknown key '{key}' in [{section}]", file=path, line=line)
                default = getattr(targets[owner](), key)
                values[owner][key] = _coerce(raw, default, path, line, key)

        try:
            built = {name: targets[name](**vals) for name, vals in values.items()}
        except Exception as e:
            raise ConfigError(f"invalid configuration: {e}", file=path)
        bench = built['bench']
        align = dataclasses.replace(built['align'],
                                    robot_extrinsics=tuple(bench.robot_camera().extrinsics.to_row().tolist()))
        return cls(built['paths'], align, built['train'], bench, built['gen'], built['sweep'], path)

    def with_overrides(self, seed: Optional[int] = None, out: Optional[str] = None,
                       robot_min: Optional[float] = None, human_min: Optional[float] = None,
                       iterations: Optional[int] = None, episodes: Optional[int] = None) -> "RunConfig":
        cfg = self
        if cfg.align.robot_extrinsics == AlignConfig().robot_extrinsics:
            cfg = dataclasses.replace(cfg, align=dataclasses.replace(
                cfg.align, robot_extrinsics=tuple(cfg.bench.robot_camera().extrinsics.to_row().tolist())))
        if seed is not None:
            cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, seed=int(seed)),
                                      gen=dataclasses.replace(cfg.gen, data_seed=int(seed)))
        if out is not None:
            cfg = dataclasses.replace(cfg, paths=cfg.paths.under(out))
        if robot_min is not None:
            cfg = dataclasses.replace(cfg, gen=dataclasses.replace(cfg.gen, robot_minutes=float(robot_min)))
        if human_min is not None:
            cfg = dataclasses.replace(cfg, gen=dataclasses.replace(cfg.gen, human_minutes=float(human_min)))
        if iterations is not None:
            cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, iterations=int(iterations)))
        if episodes is not None:
            cfg = dataclasses.replace(cfg, bench=dataclasses.replace(cfg.bench, eval_episodes=int(episodes)))
        return cfg

    def to_dict(self) -> Dict:
        """Config echo written into every artifact"""
        def plain(obj):
            out = {}
            for f in dataclasses.fields(obj):
                value = getattr(obj, f.name)
                out[f.name] = list(value) if isinstance(value, tuple) else value
            return out
        return {'source': self.source, 'paths': plain(self.paths), 'align': plain(self.align),
                'train': plain(self.train), 'bench': plain(self.bench), 'gen': plain(self.gen),
                'sweep': plain(self.sweep)}


def _coerce(raw: str, default: Any, path: str, line: Optional[int], key: str) -> Any:
    text = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            items = text.replace(',', ' ').split()
            kind = type(default[0]) if default else float
            return tuple(kind(v) for v in items)
        return text
    except ValueError:
        raise ConfigError(f"cannot parse {key} = {raw!r} as {type(default).__name__}",
                          file=path, line=line)
