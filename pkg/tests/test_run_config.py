import pytest

from action_alignment_module import AlignConfig
from pipeline_errors import ConfigError
from run_config import DEFAULT_RUN_INI, RunConfig


def write(tmp_path, text):
    path = tmp_path / 'run.ini'
    path.write_text(text)
    return str(path)


def test_shipped_defaults_match_dataclasses():
    cfg = RunConfig.load(DEFAULT_RUN_INI)
    assert cfg.align.chunk_size == 100
    assert cfg.align.robot_horizon_s == 4.0 and cfg.align.human_horizon_s == 1.0
    assert cfg.train.trunk_widths == (64, 64)
    assert cfg.train.loss_weights == (1.0, 1.0, 1.0)
    assert cfg.bench.human_offset_m == (0.02, -0.015, 0.04)
    assert cfg.gen.robot_minutes == 10.0 and cfg.gen.human_minutes == 40.0
    assert cfg.sweep.robot_minutes == (4.0, 8.0, 12.0)
    assert cfg.source == DEFAULT_RUN_INI


def test_robot_extrinsics_follow_camera():
    cfg = RunConfig.load(None)
    assert cfg.align.robot_extrinsics != AlignConfig().robot_extrinsics
    assert cfg.align.robot_extrinsics == tuple(cfg.bench.robot_camera().extrinsics.to_row().tolist())


def test_unknown_key_reports_line(tmp_path):
    path = write(tmp_path, "[align]\nchunk_size = 50\nchunk_sise = 60\n")
    with pytest.raises(ConfigError) as info:
        RunConfig.load(path)
    assert info.value.context == {'file': path, 'line': 3}
    assert 'chunk_sise' in info.value.message


def test_unknown_section(tmp_path):
    path = write(tmp_path, "[align]\nstride = 2\n\n[optimizer]\nlr = 1\n")
    with pytest.raises(ConfigError) as info:
        RunConfig.load(path)
    assert info.value.context['line'] == 4


def test_unparsable_value(tmp_path):
    path = write(tmp_path, "[train]\niterations = many\n")
    with pytest.raises(ConfigError) as info:
        RunConfig.load(path)
    assert info.value.context['line'] == 2


def test_camera_keys_belong_in_camera_section(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(write(tmp_path, "[bench]\nfx = 400\n"))
    cfg = RunConfig.load(write(tmp_path, "[camera]\nfx = 400\n"))
    assert cfg.bench.fx == 400.0


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError) as info:
        RunConfig.load(str(tmp_path / 'absent.ini'))
    assert info.value.context['file'].endswith('absent.ini')


def test_booleans_and_tuples(tmp_path):
    cfg = RunConfig.load(write(tmp_path, "[align]\naction_norm = off\n\n[train]\ntrunk_widths = 16, 8\n"))
    assert cfg.align.action_norm is False
    assert cfg.train.trunk_widths == (16, 8)


def test_flag_overrides(tmp_path):
    cfg = RunConfig.load(None, seed=4, out=str(tmp_path), robot_min=2, human_min=3, iterations=7, episodes=1)
    assert cfg.train.seed == 4 and cfg.gen.data_seed == 4
    assert cfg.paths.raw_dir == str(tmp_path / 'raw')
    assert cfg.paths.results_dir == str(tmp_path / 'results')
    assert cfg.gen.robot_minutes == 2.0 and cfg.gen.human_minutes == 3.0
    assert cfg.train.iterations == 7
    assert cfg.bench.eval_episodes == 1


def test_episode_budget():
    cfg = RunConfig()
    assert cfg.gen.episodes(10.0, 40.0) == 15
    assert cfg.gen.episodes(0.0, 40.0) == 0


def test_config_echo_is_plain():
    echo = RunConfig.load(None).to_dict()
    assert set(echo) == {'source', 'paths', 'align', 'train', 'bench', 'gen', 'sweep'}
    assert isinstance(echo['train']['trunk_widths'], list)
