"""
Evaluation: offline-epoch clock, metrics and reports.
"""
from .clock import OFFLINE_EPOCHS, OfflineEpochClock, steps_per_epoch
from .metrics import (ReturnSummary, average_ranks, evaluate, evaluate_configs, evaluation_seeds, final_performance,
                      normalize_return, percentage_gain, rank_values)
from .report import CellResult, EvalReport

__all__ = [
    'OFFLINE_EPOCHS', 'OfflineEpochClock', 'steps_per_epoch',
    'ReturnSummary', 'evaluate', 'evaluate_configs', 'evaluation_seeds', 'normalize_return', 'rank_values', 'average_ranks',
    'percentage_gain', 'final_performance',
    'CellResult', 'EvalReport',
]
