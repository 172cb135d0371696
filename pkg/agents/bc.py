"""
Behavioral cloning: encoder and actor trained by MSE on dataset actions.
"""
from typing import Dict, List, Tuple

from core.data import Dataset
from core.nn import Adam, StepReport

from .drqbc import bc_term
from .model_free import FrameStackAgent


class BCAgent(FrameStackAgent):
    name = "bc"

    def __init__(self, cfg, env_config, seed: int = 0):
        super().__init__(cfg, env_config, seed)
        params = {**self.encoder.named_parameters("encoder."), **self.actor.named_parameters("actor.")}
        self.actor_opt = Adam(params, cfg.mf_lr)

    def loss(self, obs, actions):
        return bc_term(self.actor(self.encoder(obs)), actions)

    def train_step(self, phase: str, dataset: Dataset, step: int) -> Tuple[Dict[str, float], List[StepReport]]:
        batch = self.sample(dataset)
        self.actor_opt.zero_grad()
        loss = self.loss(self.augment(batch.obs), batch.action)
        loss.backward()
        report = self.actor_opt.step()
        return {"bc_loss": float(loss.data)}, [report]
