"""
Co-training Trend Analyzer
==========================

Reads per-seed evaluation tables (scale sweep or ablation) and checks the
trends co-training should reproduce on the benchmark:

- co-training benefit: robot budget + human data beats the same robot
  budget alone by a relative margin (default 30%)
- scaling: 2 units of robot data + 1 unit of human data beats 3 units of
  robot data alone
- adding human data never lowers the mean score of a robot budget by more
  than one pooled standard error

Purely observational: nothing here feeds back into training.

Usage:
    from model_performance.trend_analyzer import TrendAnalyzer

    analyzer = TrendAnalyzer.from_csv('runs/results/scale_sweep.csv')
    print(analyzer.report())
"""

from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import pandas as pd


class TrendAnalyzer:
    """Cell-level aggregation and trend checks over per-seed score tables"""

    REQUIRED_COLUMNS = ('robot_minutes', 'human_minutes', 'seed', 'mean_score')

    MIN_RELATIVE_IMPROVEMENT = 0.30
    MIN_SEEDS = 2
    UNIT_MINUTES = 4.0

    def __init__(self, table: pd.DataFrame):
        """
        Args:
            table: one row per (cell, training seed) with mean_score

        Raises:
            ValueError: required columns missing
        """
        missing = [c for c in self.REQUIRED_COLUMNS if c not in table.columns]
        if missing:
            raise ValueError(f"score table is missing columns: {', '.join(missing)}")
        self.table = table.copy()
        if 'label' not in self.table.columns:
            self.table['label'] = np.where(self.table['human_minutes'] > 0, 'cotrain', 'robot_only')
        self.cells = self._summarize()

    @classmethod
    def from_csv(cls, csv_path: Union[str, Path]) -> "TrendAnalyzer":
        return cls(pd.read_csv(csv_path))

    def _summarize(self) -> pd.DataFrame:
        grouped = self.table.groupby(['label', 'robot_minutes', 'human_minutes'], sort=True)['mean_score']
        cells = grouped.agg(['mean', 'count']).rename(columns={'mean': 'score', 'count': 'n_seeds'})
        std = grouped.std(ddof=1).fillna(0.0)
        cells['std'] = std
        cells['stderr'] = std / np.sqrt(cells['n_seeds'])
        return cells.reset_index()

    def cell(self, robot_minutes: float, human_minutes: float, label: Optional[str] = None) -> Optional[Dict]:
        rows = self.cells[np.isclose(self.cells['robot_minutes'], robot_minutes)
                          & np.isclose(self.cells['human_minutes'], human_minutes)]
        if label is not None:
            rows = rows[rows['label'] == label]
        if rows.empty:
            return None
        return rows.iloc[0].to_dict()

    @staticmethod
    def relative_improvement(treated: float, baseline: float) -> float:
        if baseline == 0:
            return float('inf') if treated > 0 else 0.0
        return (treated - baseline) / baseline

    @staticmethod
    def pooled_stderr(a: Dict, b: Dict) -> float:
        return float(np.sqrt(a['stderr'] ** 2 + b['stderr'] ** 2))

    # -------------------------------------------------------------------------
    # Trend checks
    # -------------------------------------------------------------------------
    def evaluate_cotrain_benefit(self, robot_minutes: float, human_minutes: float,
                                 cotrain_label: Optional[str] = None,
                                 baseline_label: Optional[str] = None) -> Dict:
        """
        Co-training at (robot_minutes, human_minutes) vs robot-only at robot_minutes

        Returns:
            Dict with passed, reason, both means and the relative improvement
        """
        treated = self.cell(robot_minutes, human_minutes, cotrain_label)
        baseline = self.cell(robot_minutes, 0.0, baseline_label)
        if treated is None or baseline is None:
            return {'passed': False, 'reason': 'cell missing from table', 'improvement': None}
        if min(treated['n_seeds'], baseline['n_seeds']) < self.MIN_SEEDS:
            return {'passed': False, 'reason': 'insufficient seeds', 'improvement': None}

        improvement = self.relative_improvement(treated['score'], baseline['score'])
        passed = improvement >= self.MIN_RELATIVE_IMPROVEMENT
        return {
            'passed': bool(passed),
            'reason': (f"co-train {treated['score']:.2f} vs robot-only {baseline['score']:.2f} "
                       f"({improvement:+.0%}, need {self.MIN_RELATIVE_IMPROVEMENT:+.0%})"),
            'cotrain_score': treated['score'],
            'robot_only_score': baseline['score'],
            'improvement': improvement,
        }

    def evaluate_scaling(self, unit_minutes: Optional[float] = None) -> Dict:
        """2 units robot + 1 unit human vs 3 units robot-only"""
        unit = self.UNIT_MINUTES if unit_minutes is None else unit_minutes
        mixed = self.cell(2 * unit, unit)
        robot = self.cell(3 * unit, 0.0)
        if mixed is None or robot is None:
            return {'passed': False, 'reason': 'cell missing from table'}
        passed = mixed['score'] > robot['score']
        return {
            'passed': bool(passed),
            'reason': f"2R+1H {mixed['score']:.2f} vs 3R {robot['score']:.2f}",
            'mixed_score': mixed['score'],
            'robot_score': robot['score'],
        }

    def human_data_never_hurts(self) -> Dict:
        """Every (r, h > 0) cell scores at least (r, 0) minus one pooled standard error"""
        violations = []
        checked = 0
        mixed = self.cells[(self.cells['human_minutes'] > 0) & (self.cells['label'] == 'cotrain')]
        for _, row in mixed.iterrows():
            base = self.cell(row['robot_minutes'], 0.0)
            if base is None:
                continue
            checked += 1
            margin = self.pooled_stderr(row.to_dict(), base)
            if row['score'] < base['score'] - margin:
                violations.append({'robot_minutes': row['robot_minutes'],
                                   'human_minutes': row['human_minutes'],
                                   'score': row['score'], 'robot_only': base['score'],
                                   'pooled_stderr': margin})
        return {'passed': checked > 0 and not violations, 'checked': checked, 'violations': violations}

    def report(self, unit_minutes: Optional[float] = None) -> str:
        lines = ["=" * 60, "TREND REPORT", "=" * 60]
        for _, row in self.cells.iterrows():
            lines.append(f"  {row['label']:<14} R={row['robot_minutes']:>5.1f}m  H={row['human_minutes']:>5.1f}m  "
                         f"score {row['score']:6.2f} ± {row['stderr']:.2f}  (n={int(row['n_seeds'])})")
        scaling = self.evaluate_scaling(unit_minutes)
        hurts = self.human_data_never_hurts()
        lines.append(f"{'✓' if scaling['passed'] else '⚠'} scaling: {scaling['reason']}")
        lines.append(f"{'✓' if hurts['passed'] else '⚠'} human data never hurts: "
                     f"{hurts['checked']} cell(s) checked, {len(hurts['violations'])} violation(s)")
        return "\n".join(lines)
