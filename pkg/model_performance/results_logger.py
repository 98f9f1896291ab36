"""
Evaluation Results Logger
=========================

Append-only ledger of closed-loop evaluation results. Every `eval`,
`scale-sweep` and `ablate` cell adds one row; rows are never rewritten.

Usage:
    from model_performance.results_logger import log_eval_result

    log_eval_result({
        "command": "eval",
        "label": "cotrain",
        "robot_minutes": 10,
        "human_minutes": 40,
        "seed": 0,
        "mean_score": 5.2,
        "std_score": 1.1,
        "episodes": 5,
        "stats_hash": "3f2a...",
        "notes": "default config"
    })
"""

import csv
import math
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, Optional


class ResultsLogger:
    """Logs evaluation scores per (command, label, budget, seed)"""

    VALID_COMMANDS = {'eval', 'scale-sweep', 'ablate'}

    CSV_HEADER = [
        'command',
        'label',
        'robot_minutes',
        'human_minutes',
        'seed',
        'mean_score',
        'std_score',
        'episodes',
        'stats_hash',
        'notes'
    ]

    def __init__(self, csv_path: Optional[str] = None, verbose: bool = True):
        """
        Args:
            csv_path: ledger path (default: model_performance/results_log.csv)
            verbose: print a line per logged row
        """
        if csv_path is None:
            csv_path = Path(__file__).parent / 'results_log.csv'
        self.csv_path = Path(csv_path)
        self.verbose = verbose
        self._ensure_csv_exists()

    def _ensure_csv_exists(self):
        """Create the ledger with its header (never overwrite)"""
        if not self.csv_path.exists():
            self.csv_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.csv_path, 'w', newline='') as f:
                csv.writer(f).writerow(self.CSV_HEADER)
            if self.verbose:
                print(f"✓ Created results log: {self.csv_path}")

    def _validate_row(self, row_dict: Dict[str, Any]) -> None:
        """
        Raises:
            ValueError: missing field, unknown command, non-numeric score
        """
        required_fields = ['command', 'label', 'robot_minutes', 'human_minutes',
                           'seed', 'mean_score', 'episodes']
        for name in required_fields:
            if name not in row_dict:
                raise ValueError(f"Missing required field: {name}")

        if row_dict['command'] not in self.VALID_COMMANDS:
            raise ValueError(
                f"Invalid command: {row_dict['command']}. "
                f"Must be one of: {', '.join(sorted(self.VALID_COMMANDS))}"
            )

        try:
            for name in ('robot_minutes', 'human_minutes', 'mean_score'):
                float(row_dict[name])
            int(row_dict['seed'])
            episodes = int(row_dict['episodes'])
        except (ValueError, TypeError):
            raise ValueError("robot_minutes, human_minutes, mean_score, seed and episodes must be numeric")
        if episodes < 1:
            raise ValueError("episodes must be at least 1")
        if math.isnan(float(row_dict['mean_score'])):
            raise ValueError("mean_score is NaN")

    def log_result(self, row_dict: Dict[str, Any]) -> None:
        """
        Append one evaluation result

        Raises:
            ValueError: if validation fails
        """
        self._validate_row(row_dict)
        self._ensure_csv_exists()
        csv_row = [
            row_dict['command'],
            row_dict['label'],
            float(row_dict['robot_minutes']),
            float(row_dict['human_minutes']),
            int(row_dict['seed']),
            round(float(row_dict['mean_score']), 4),
            round(float(row_dict.get('std_score', 0.0)), 4),
            int(row_dict['episodes']),
            row_dict.get('stats_hash', ''),
            row_dict.get('notes', '')
        ]
        with open(self.csv_path, 'a', newline='') as f:
            csv.writer(f).writerow(csv_row)

        if self.verbose:
            print(f"✓ Logged result: {row_dict['command']} {row_dict['label']} "
                  f"(R={row_dict['robot_minutes']}m, H={row_dict['human_minutes']}m, "
                  f"seed {row_dict['seed']}) -> {float(row_dict['mean_score']):.2f}")


MAX_LOGGERS = 16
_loggers: "OrderedDict[str, ResultsLogger]" = OrderedDict()


def get_logger(csv_path: Optional[str] = None, verbose: bool = True) -> ResultsLogger:
    """Get or create the logger for `csv_path` (least recently used ones are dropped)"""
    key = str(Path(csv_path).resolve()) if csv_path is not None else ''
    logger = _loggers.pop(key, None)
    if logger is None:
        logger = ResultsLogger(csv_path, verbose=verbose)
    logger.verbose = verbose
    _loggers[key] = logger
    while len(_loggers) > MAX_LOGGERS:
        _loggers.popitem(last=False)
    return logger


def log_eval_result(row_dict: Dict[str, Any], csv_path: Optional[str] = None, verbose: bool = True) -> None:
    """Public API: see ResultsLogger.log_result"""
    get_logger(csv_path, verbose).log_result(row_dict)
