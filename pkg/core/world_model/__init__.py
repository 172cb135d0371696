"""
Latent world model: RSSM with an ensemble of categorical prior heads, KL
balancing, imagination and the ensemble-disagreement penalty.
"""
from .errors import SequenceTooShortError, WorldModelError
from .rssm import (Imagination, LatentState, ObserveResult, RSSMConfig, RSSMEnsemble, categorical_kl,
                   ensemble_disagreement, imagine, kl_balance, reconstruct, tie_prior_heads)
from .penalty import (PENALTY_STATES, disagreement_penalty, penalized_reward, penalty_stats, penalty_table,
                      posterior_states)
from .training import FitReport, fit, load_model, model_step, save_model
from .inspection import reconstruct_episode

__all__ = [
    'WorldModelError', 'SequenceTooShortError',
    'RSSMConfig', 'RSSMEnsemble', 'LatentState', 'ObserveResult', 'Imagination',
    'categorical_kl', 'kl_balance', 'imagine', 'ensemble_disagreement', 'reconstruct', 'tie_prior_heads',
    'PENALTY_STATES', 'disagreement_penalty', 'penalized_reward', 'penalty_stats', 'penalty_table',
    'posterior_states',
    'FitReport', 'fit', 'model_step', 'save_model', 'load_model',
    'reconstruct_episode',
]
