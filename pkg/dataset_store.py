"""
Dataset Store
=============

Writes and reads the aligned dataset directory:

    manifest.json                      splits, dims, counts, stats, config echo, hashes
    <split>_<embodiment>_<field>.f64   little-endian float64, row-major sample order

Floats in the manifest use JSON's shortest round-trip repr, so stats reload
bit-exact. Blobs are checked against their sha256 on load.
"""

import hashlib
import json
import os
from typing import Dict

import numpy as np

from action_alignment_module import (
    AlignConfig,
    AlignedDataset,
    EmbodimentSplit,
    EmbodimentStats,
    stats_digest,
)
from pipeline_errors import DatasetCorrupt

MANIFEST_NAME = "manifest.json"
BLOB_DTYPE = "<f8"
FORMAT_VERSION = 1
FIELDS = ('obs_times', 'episode_index', 'features', 'pose_targets', 'joint_targets')


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _blob_name(split: str, embodiment: str, field: str) -> str:
    return f"{split}_{embodiment}_{field}.f64"


def write_dataset(dataset: AlignedDataset, out_dir: str) -> Dict:
    """
    Write `dataset` into `out_dir` and return the manifest written

    Args:
        dataset: result of build_dataset
        out_dir: target directory (created if missing)

    Returns:
        manifest dict (also stored on dataset.manifest)
    """
    os.makedirs(out_dir, exist_ok=True)
    splits = {}
    for split_name, part in dataset.splits.items():
        splits[split_name] = {}
        for emb, split in part.items():
            blobs = {}
            for field in FIELDS:
                array = getattr(split, field)
                if array is None:
                    continue
                data = np.ascontiguousarray(array, dtype=BLOB_DTYPE).tobytes(order='C')
                name = _blob_name(split_name, emb, field)
                with open(os.path.join(out_dir, name), 'wb') as f:
                    f.write(data)
                blobs[field] = {'file': name, 'shape': list(array.shape),
                                'dtype': BLOB_DTYPE, 'sha256': _sha256(data)}
            splits[split_name][emb] = {
                'count': len(split),
                'horizon_s': split.horizon,
                'chunk_size': split.chunk_size,
                'feature_dim': int(split.features.shape[1]),
                'pose_dim': int(split.pose_targets.shape[2]),
                'joint_dim': None if split.joint_targets is None else int(split.joint_targets.shape[2]),
                'source_ids': list(split.source_ids),
                'blobs': blobs,
            }

    manifest = {
        'format_version': FORMAT_VERSION,
        'layout': 'row-major float64 little-endian; rows ordered by (source_id, obs_time)',
        'embodiments': sorted(dataset.stats),
        'splits': splits,
        'stats': {emb: dataset.stats[emb].to_dict() for emb in sorted(dataset.stats)},
        'stats_hash': dataset.stats_hash,
        'config': dataset.config.to_dict(),
        'episodes': dataset.episodes,
    }
    with open(os.path.join(out_dir, MANIFEST_NAME), 'w') as f:
        json.dump(manifest, f, indent=2)
    dataset.manifest = manifest
    return manifest


def read_manifest(path: str) -> Dict:
    manifest_path = os.path.join(path, MANIFEST_NAME) if os.path.isdir(path) else path
    try:
        with open(manifest_path) as f:
            return json.load(f)
    except FileNotFoundError:
        raise DatasetCorrupt(f"no manifest at {manifest_path}", file=manifest_path)
    except json.JSONDecodeError as e:
        raise DatasetCorrupt(f"manifest is not valid JSON: {e.msg}", file=manifest_path, line=e.lineno)


def _read_blob(directory: str, spec: Dict) -> np.ndarray:
    path = os.path.join(directory, spec['file'])
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except FileNotFoundError:
        raise DatasetCorrupt(f"missing blob {spec['file']}", file=path)
    if _sha256(data) != spec['sha256']:
        raise DatasetCorrupt(f"hash mismatch for {spec['file']}", file=path)
    array = np.frombuffer(data, dtype=spec.get('dtype', BLOB_DTYPE)).astype(np.float64)
    expected = int(np.prod(spec['shape']))
    if array.size != expected:
        raise DatasetCorrupt(f"{spec['file']} holds {array.size} values, manifest says {expected}",
                             file=path)
    return array.reshape(spec['shape'])


def load_dataset(directory: str) -> AlignedDataset:
    """
    Load a dataset directory written by write_dataset

    Raises:
        DatasetCorrupt: missing/garbled manifest, missing blob, or hash mismatch
    """
    manifest = read_manifest(directory)
    try:
        stats = {emb: EmbodimentStats.from_dict(d) for emb, d in manifest['stats'].items()}
        config_dict = dict(manifest['config'])
        config_dict['robot_extrinsics'] = tuple(config_dict['robot_extrinsics'])
        config = AlignConfig(**config_dict)
        split_specs = manifest['splits']
    except (KeyError, TypeError) as e:
        raise DatasetCorrupt(f"manifest is missing required entries: {e}", file=directory)

    digest = stats_digest(stats)
    if digest != manifest.get('stats_hash'):
        raise DatasetCorrupt("stats do not match the recorded stats hash", file=directory)

    splits = {}
    for split_name, part in split_specs.items():
        splits[split_name] = {}
        for emb, entry in part.items():
            arrays = {field: _read_blob(directory, spec) for field, spec in entry['blobs'].items()}
            splits[split_name][emb] = EmbodimentSplit(
                emb, float(entry['horizon_s']), arrays['obs_times'],
                arrays['episode_index'].astype(np.int64), arrays['features'],
                arrays['pose_targets'], arrays.get('joint_targets'),
                list(entry['source_ids']), digest)
    return AlignedDataset(splits, stats, config, list(manifest.get('episodes', [])), manifest)
