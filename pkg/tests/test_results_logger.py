import pandas as pd
import pytest

from model_performance import results_logger
from model_performance.results_logger import ResultsLogger, get_logger, log_eval_result


def row(**changes):
    base = {'command': 'eval', 'label': 'cotrain', 'robot_minutes': 10, 'human_minutes': 40,
            'seed': 0, 'mean_score': 5.2, 'std_score': 1.1, 'episodes': 5, 'stats_hash': 'ab'}
    base.update(changes)
    return base


def test_quiet_logging_prints_nothing(tmp_path, capsys):
    log_eval_result(row(), str(tmp_path / 'log.csv'), verbose=False)
    assert capsys.readouterr().out == ''
    log_eval_result(row(seed=1), str(tmp_path / 'log.csv'))
    assert 'Logged result' in capsys.readouterr().out


def test_rows_are_appended(tmp_path):
    path = str(tmp_path / 'log.csv')
    log_eval_result(row(), path, verbose=False)
    log_eval_result(row(seed=1, mean_score=4.0), path, verbose=False)
    table = pd.read_csv(path)
    assert list(table.columns) == ResultsLogger.CSV_HEADER
    assert table['seed'].tolist() == [0, 1]


def test_header_restored_after_deletion(tmp_path):
    path = tmp_path / 'log.csv'
    log_eval_result(row(), str(path), verbose=False)
    path.unlink()
    log_eval_result(row(seed=3), str(path), verbose=False)
    table = pd.read_csv(path)
    assert list(table.columns) == ResultsLogger.CSV_HEADER
    assert table['seed'].tolist() == [3]


def test_registry_is_bounded(tmp_path):
    for i in range(results_logger.MAX_LOGGERS + 5):
        get_logger(str(tmp_path / f'log_{i}.csv'), verbose=False)
    assert len(results_logger._loggers) <= results_logger.MAX_LOGGERS
    assert get_logger(str(tmp_path / 'log_0.csv'), verbose=False) is not None


def test_invalid_rows(tmp_path):
    logger = ResultsLogger(str(tmp_path / 'log.csv'), verbose=False)
    with pytest.raises(ValueError):
        logger.log_result(row(command='train'))
    with pytest.raises(ValueError):
        logger.log_result(row(episodes=0))
    with pytest.raises(ValueError):
        logger.log_result(row(mean_score=float('nan')))
