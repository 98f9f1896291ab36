"""
Helpers that write command results to JSON with the run configuration echo

Every artifact carries the full config so a run can be repeated exactly.
Keys are sorted and no wall-clock time is recorded, so unchanged inputs
give byte-identical files.
"""

import json
from pathlib import Path
from typing import Dict, Optional

import numpy as np


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def save_results(name: str, results: Dict, config: Optional[Dict] = None,
                 output_dir: Optional[str] = None, verbose: bool = True) -> Path:
    """
    Save one command's results to `<output_dir>/<name>.json`

    Args:
        name: artifact stem (e.g. 'eval', 'scale_sweep')
        results: result payload
        config: RunConfig.to_dict() echo
        output_dir: output directory (default: results/ at the project root)
    """
    if output_dir is None:
        output_dir = Path(__file__).parent.parent / 'results'
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    output = {
        'name': name,
        'config': _plain(config or {}),
        'results': _plain(results),
    }
    output_file = output_dir / f"{name}.json"
    with open(output_file, 'w') as f:
        json.dump(output, f, indent=2, sort_keys=True)

    if verbose:
        print(f"✓ Saved results to: {output_file}")
    return output_file


def format_eval_result(label: str, eval_result, robot_minutes: float = float('nan'),
                       human_minutes: float = float('nan'), seed: int = 0,
                       stats_hash: Optional[str] = None) -> Dict:
    """
    Flatten an EvalResult into the row shape used by tables and the ledger
    """
    return {
        'label': label,
        'robot_minutes': float(robot_minutes),
        'human_minutes': float(human_minutes),
        'seed': int(seed),
        'mean_score': float(eval_result.mean),
        'std_score': float(eval_result.std),
        'episodes': len(eval_result.scores),
        'scores': {str(k): int(v) for k, v in eval_result.scores.items()},
        'stats_hash': stats_hash or '',
    }
