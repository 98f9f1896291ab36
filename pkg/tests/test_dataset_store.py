import json

import numpy as np
import pytest

from action_alignment_module import AlignConfig, build_dataset
from dataset_store import MANIFEST_NAME, load_dataset, read_manifest, write_dataset
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
from pipeline_errors import DatasetCorrupt
from se3_geometry import Pose3


@pytest.fixture
def dataset():
    rng = np.random.default_rng(11)
    t_r = np.arange(300) / 50.0
    eef = np.tile(Pose3.identity().to_row(), (t_r.size, 1))
    eef[:, 9:12] = np.cumsum(rng.normal(scale=0.002, size=(t_r.size, 3)), axis=0)
    joints = np.cumsum(rng.normal(scale=0.01, size=(t_r.size, 7)), axis=0)
    robot = Episode(ROBOT, {
        EEF_POSE_BASE: TimedSeries(t_r, eef, 50.0, EEF_POSE_BASE),
        JOINT_POS: TimedSeries(t_r, joints, 50.0, JOINT_POS),
        JOINT_ACTION: TimedSeries(t_r, joints, 50.0, JOINT_ACTION),
    }, 1, 'robot_0')

    t_h = np.arange(90) / 30.0
    device = np.tile(Pose3.from_translation(0.0, 0.0, 1.5).to_row(), (t_h.size, 1))
    device[:, 9] = 0.1 * t_h
    human = Episode(HUMAN, {
        DEVICE_POSE_WORLD: TimedSeries(t_h, device, 30.0, DEVICE_POSE_WORLD),
        HAND_POS_DEVICE: TimedSeries(t_h, rng.normal(size=(t_h.size, 3)), 30.0, HAND_POS_DEVICE),
    }, 1, 'human_0')
    return build_dataset([robot, human], AlignConfig(stride=5))


def test_round_trip_is_bit_exact(dataset, tmp_path):
    write_dataset(dataset, str(tmp_path))
    loaded = load_dataset(str(tmp_path))
    assert loaded.stats_hash == dataset.stats_hash
    assert loaded.config == dataset.config
    for emb in (HUMAN, ROBOT):
        a, b = dataset.train[emb], loaded.train[emb]
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.pose_targets, b.pose_targets)
        assert np.array_equal(a.obs_times, b.obs_times)
        assert a.source_ids == b.source_ids
        assert np.array_equal(a.episode_index, b.episode_index)
        assert np.array_equal(dataset.stats[emb].action_std, loaded.stats[emb].action_std)
    assert loaded.train[HUMAN].joint_targets is None
    assert np.array_equal(dataset.train[ROBOT].joint_targets, loaded.train[ROBOT].joint_targets)


def test_manifest_describes_splits(dataset, tmp_path):
    write_dataset(dataset, str(tmp_path))
    manifest = read_manifest(str(tmp_path))
    robot = manifest['splits']['train'][ROBOT]
    assert robot['count'] == len(dataset.train[ROBOT])
    assert robot['chunk_size'] == 100
    assert robot['joint_dim'] == 7
    assert manifest['splits']['train'][HUMAN]['joint_dim'] is None
    assert manifest['stats_hash'] == dataset.stats_hash


def test_writing_twice_gives_identical_bytes(dataset, tmp_path):
    write_dataset(dataset, str(tmp_path / 'a'))
    write_dataset(dataset, str(tmp_path / 'b'))
    for path in sorted((tmp_path / 'a').iterdir()):
        assert path.read_bytes() == (tmp_path / 'b' / path.name).read_bytes()


def test_tampered_blob_is_rejected(dataset, tmp_path):
    manifest = write_dataset(dataset, str(tmp_path))
    blob = tmp_path / manifest['splits']['train'][ROBOT]['blobs']['features']['file']
    data = bytearray(blob.read_bytes())
    data[0] ^= 0xFF
    blob.write_bytes(bytes(data))
    with pytest.raises(DatasetCorrupt):
        load_dataset(str(tmp_path))


def test_tampered_stats_are_rejected(dataset, tmp_path):
    write_dataset(dataset, str(tmp_path))
    path = tmp_path / MANIFEST_NAME
    manifest = json.loads(path.read_text())
    manifest['stats'][ROBOT]['action_mean'][0] += 1.0
    path.write_text(json.dumps(manifest))
    with pytest.raises(DatasetCorrupt):
        load_dataset(str(tmp_path))


def test_missing_directory(tmp_path):
    with pytest.raises(DatasetCorrupt):
        load_dataset(str(tmp_path / 'nowhere'))
