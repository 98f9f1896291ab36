"""
SVG plots for the scale sweep and the ablation table

Both plots read the per-seed score tables the CLI writes. Output is
deterministic: fixed SVG id salt and no creation date.
"""

from pathlib import Path
from typing import Union

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

FIGSIZE = (6.0, 4.2)
LINE_WIDTH = 2.0
CAPSIZE = 3


def _finish(fig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context({'svg.hashsalt': 'cotrain-plots', 'svg.fonttype': 'none'}):
        fig.savefig(path, format='svg', metadata={'Date': None}, bbox_inches='tight')
    plt.close(fig)
    return path


def _cell_stats(table: pd.DataFrame, keys):
    grouped = table.groupby(keys, sort=True)['mean_score']
    out = grouped.agg(['mean', 'count'])
    out['stderr'] = grouped.std(ddof=1).fillna(0.0) / np.sqrt(out['count'])
    return out.reset_index()


def plot_scale_sweep(table: pd.DataFrame, path: Union[str, Path]) -> Path:
    """
    Mean score vs robot minutes, one line per human budget (error bars: stderr)
    """
    cells = _cell_stats(table, ['human_minutes', 'robot_minutes'])
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for human, rows in cells.groupby('human_minutes', sort=True):
        label = 'robot only' if human == 0 else f"+{human:g} min human"
        ax.errorbar(rows['robot_minutes'], rows['mean'], yerr=rows['stderr'],
                    marker='o', lw=LINE_WIDTH, capsize=CAPSIZE, label=label)
    ax.set_xlabel('robot demonstration minutes')
    ax.set_ylabel('mean score (points / episode)')
    ax.set_title('Scaling robot vs. human data')
    ax.grid(alpha=0.3)
    ax.legend(loc='best')
    return _finish(fig, path)


def plot_ablation(table: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Bar chart of mean score per ablation label"""
    cells = _cell_stats(table, ['label'])
    fig, ax = plt.subplots(figsize=FIGSIZE)
    positions = np.arange(len(cells))
    ax.bar(positions, cells['mean'], yerr=cells['stderr'], capsize=CAPSIZE, color='#4c72b0')
    ax.set_xticks(positions)
    ax.set_xticklabels(cells['label'])
    ax.set_ylabel('mean score (points / episode)')
    ax.set_title('Ablations')
    ax.grid(axis='y', alpha=0.3)
    return _finish(fig, path)
