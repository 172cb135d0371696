"""
Offline datasets: behavioral policies, collection, the behavioral
distributions, statistics, the on-disk format and minibatch sampling.
"""
from .errors import (CalibrationError, ChecksumError, ConfigMismatchError, ConsistencyError, DataError,
                     DatasetFormatError, EmptyDatasetError, MissingDatasetError, SamplingError, TruncatedError,
                     VersionError)
from .policies import AnnealedPolicy, BehavioralPolicy
from .dataset import (FORMAT_VERSION, LABELS, STATS_COLUMNS, Dataset, DatasetHeader, EpisodeRecord, ReturnStats,
                      concat, empty_like, return_stats, stats, stats_table)
from .storage import load, save
from .collect import (DistributionSettings, calibrate_medium, collect, distraction_mixture, make_distribution,
                      mean_return, rerender)
from .sampling import SequenceBatch, TransitionBatch, frame_stack, sample_batch, sample_sequences
from .store import DatasetStore, DistractionMix

__all__ = [
    'DataError', 'CalibrationError', 'EmptyDatasetError', 'ConfigMismatchError', 'SamplingError',
    'MissingDatasetError', 'DatasetFormatError', 'ChecksumError', 'VersionError', 'TruncatedError',
    'ConsistencyError',
    'BehavioralPolicy', 'AnnealedPolicy',
    'FORMAT_VERSION', 'LABELS', 'STATS_COLUMNS', 'EpisodeRecord', 'ReturnStats', 'DatasetHeader', 'Dataset',
    'stats', 'return_stats', 'concat', 'empty_like', 'stats_table',
    'save', 'load',
    'DistributionSettings', 'collect', 'mean_return', 'calibrate_medium', 'make_distribution',
    'rerender', 'distraction_mixture',
    'TransitionBatch', 'SequenceBatch', 'frame_stack', 'sample_batch', 'sample_sequences',
    'DatasetStore', 'DistractionMix',
]
