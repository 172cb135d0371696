"""
Recurrent state-space model with an ensemble of categorical prior heads.

Latent state: deterministic h (GRU, width D_h) and stochastic z (G groups of
C classes, one-hot per group when sampled). The K prior heads read h only;
the action enters through the recurrent update. During training each
timestep fits one randomly chosen prior head to the posterior, so the heads
stay distinct and their disagreement measures model uncertainty.
"""
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from core.nn import (Conv2d, Dense, GRUCell, Module, ShapeError, Tensor, as_tensor, concat, conv_output_size,
                     maximum, spec_digest, stack, straight_through_from_probs, straight_through_onehot)

from .errors import SequenceTooShortError, WorldModelError


@dataclass(frozen=True)
class RSSMConfig:
    image_size: int = 32
    action_dim: int = 2
    deter: int = 128
    hidden: int = 128
    embed: int = 128
    groups: int = 8
    classes: int = 8
    conv_depth: int = 16
    ensemble_size: int = 7
    kl_balance: float = 0.8
    kl_free: float = 1.0

    def __post_init__(self):
        if self.ensemble_size < 2:
            raise WorldModelError(f"ensemble_size must be >= 2, got {self.ensemble_size}")
        if not 0.0 <= self.kl_balance <= 1.0:
            raise WorldModelError(f"kl_balance must be in [0, 1], got {self.kl_balance}")

    @property
    def stoch(self) -> int:
        return self.groups * self.classes

    @property
    def feature_size(self) -> int:
        return self.deter + self.stoch

    @classmethod
    def from_run_config(cls, cfg, action_dim: int) -> "RSSMConfig":
        return cls(image_size=cfg.render_size, action_dim=action_dim, deter=cfg.wm_deter, hidden=cfg.wm_hidden,
                   embed=cfg.wm_embed, groups=cfg.wm_groups, classes=cfg.wm_classes,
                   conv_depth=cfg.wm_conv_depth, ensemble_size=cfg.ensemble_size,
                   kl_balance=cfg.kl_balance, kl_free=cfg.kl_free)

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)

    def spec_hash(self) -> str:
        return spec_digest({"kind": "rssm-ensemble", **self.to_dict()})


@dataclass
class LatentState:
    """h: (..., D_h); z: (..., G*C) sample; probs: distribution z was drawn from."""
    h: Tensor
    z: Tensor
    probs: Optional[Tensor] = None

    @property
    def feature(self) -> Tensor:
        return concat([self.h, self.z], axis=-1)

    @property
    def batch_shape(self):
        return self.h.shape[:-1]

    def detach(self) -> "LatentState":
        return LatentState(self.h.detach(), self.z.detach(), self.probs.detach() if self.probs is not None else None)

    def flatten(self) -> "LatentState":
        """Merge all leading axes into one batch axis."""
        def merge(t: Optional[Tensor]) -> Optional[Tensor]:
            return None if t is None else t.reshape(-1, t.shape[-1])
        return LatentState(merge(self.h), merge(self.z), merge(self.probs))

    def take(self, index: np.ndarray) -> "LatentState":
        """Rows of a flat (N, .) state."""
        return LatentState(self.h[index], self.z[index], None if self.probs is None else self.probs[index])


@dataclass
class ObserveResult:
    posterior: LatentState              # (B, L, .)
    post_logits: Tensor                 # (B, L, G*C)
    prior_logits: Tensor                # (B, L, G*C), the head fitted at each step
    loss: Tensor
    metrics: Dict[str, float] = field(default_factory=dict)


@dataclass
class Imagination:
    features: Tensor        # (H + 1, B, F), start state first
    actions: Tensor         # (H, B, d)
    rewards: Tensor         # (H, B) reward head on the state reached
    penalties: np.ndarray   # (H, B) ensemble disagreement of that transition
    states: List[LatentState]

    @property
    def horizon(self) -> int:
        return self.actions.shape[0]


class MLPHead(Module):
    """Dense(elu) -> Dense(linear)."""

    def __init__(self, in_features: int, hidden: int, out_features: int, rng: np.random.Generator):
        super().__init__()
        self.hidden = self.add_module("hidden", Dense(in_features, hidden, "elu", rng=rng))
        self.out = self.add_module("out", Dense(hidden, out_features, rng=rng))

    def forward(self, x: Tensor) -> Tensor:
        return self.out(self.hidden(x))


def categorical_kl(p_logits: Tensor, q_logits: Tensor, groups: int, classes: int) -> Tensor:
    """KL(p || q) summed over groups; shape = leading axes of the logits."""
    lead = p_logits.shape[:-1]
    log_p = p_logits.reshape(*lead, groups, classes).log_softmax(axis=-1)
    log_q = q_logits.reshape(*lead, groups, classes).log_softmax(axis=-1)
    return (log_p.exp() * (log_p - log_q)).sum(axis=-1).sum(axis=-1)


def kl_balance(post_logits: Tensor, prior_logits: Tensor, groups: int, classes: int,
               balance: float = 0.8, free: float = 1.0):
    """
    balance * max(KL(sg(post) || prior), free) + (1 - balance) * max(KL(post || sg(prior)), free)

    Returns:
        (loss Tensor, mean KL value as float)
    """
    prior_term = categorical_kl(post_logits.detach(), prior_logits, groups, classes).mean()
    post_term = categorical_kl(post_logits, prior_logits.detach(), groups, classes).mean()
    loss = balance * maximum(prior_term, free) + (1.0 - balance) * maximum(post_term, free)
    return loss, float(prior_term.data)


class RSSMEnsemble(Module):
    def __init__(self, config: RSSMConfig, seed: int = 0):
        super().__init__()
        c = config
        self.config = c
        rng = np.random.default_rng(seed)
        self.rng = np.random.default_rng(seed + 1)

        size = conv_output_size(conv_output_size(c.image_size, 4, 2, 0), 3, 2, 0)
        if size < 1:
            raise ShapeError(f"image size {c.image_size} too small for the world model encoder")
        self.conv1 = self.add_module("conv1", Conv2d(3, c.conv_depth, 4, stride=2, activation="elu", rng=rng))
        self.conv2 = self.add_module("conv2", Conv2d(c.conv_depth, 2 * c.conv_depth, 3, stride=2,
                                                     activation="elu", rng=rng))
        self.embed_layer = self.add_module("embed", Dense(size * size * 2 * c.conv_depth, c.embed, "elu", rng=rng))
        self.img_in = self.add_module("img_in", Dense(c.stoch + c.action_dim, c.hidden, "elu", rng=rng))
        self.cell = self.add_module("cell", GRUCell(c.hidden, c.deter, rng=rng))
        self.priors = [self.add_module(f"prior{k}", MLPHead(c.deter, c.hidden, c.stoch, rng))
                       for k in range(c.ensemble_size)]
        self.posterior = self.add_module("posterior", MLPHead(c.deter + c.embed, c.hidden, c.stoch, rng))
        self.decoder = self.add_module("decoder", MLPHead(c.feature_size, c.hidden,
                                                          c.image_size * c.image_size * 3, rng))
        self.reward_head = self.add_module("reward", MLPHead(c.feature_size, c.hidden, 1, rng))

    @property
    def spec_hash(self) -> str:
        return self.config.spec_hash()

    # ------------------------------------------------------------------
    # building blocks
    # ------------------------------------------------------------------
    def encode(self, frames) -> Tensor:
        """(N, S, S, 3) frames in [0, 1] -> (N, embed)."""
        x = as_tensor(frames) - 0.5
        x = self.conv2(self.conv1(x))
        return self.embed_layer(x.reshape(x.shape[0], -1))

    def initial(self, batch: int) -> LatentState:
        return LatentState(self.cell.initial_state(batch), Tensor(np.zeros((batch, self.config.stoch))))

    def advance(self, state: LatentState, action) -> Tensor:
        """Recurrent update h' = f(h, z, a)."""
        return self.cell(self.img_in(concat([state.z, as_tensor(action)], axis=-1)), state.h)

    def prior_probs(self, h: Tensor) -> List[Tensor]:
        """Per-head probability vectors over all G*C entries."""
        c = self.config
        lead = h.shape[:-1]
        return [head(h).reshape(*lead, c.groups, c.classes).softmax(axis=-1).reshape(*lead, c.stoch)
                for head in self.priors]

    def decode(self, feature: Tensor) -> Tensor:
        return self.decoder(feature)

    def predict_reward(self, feature: Tensor) -> Tensor:
        out = self.reward_head(feature)
        return out.reshape(*out.shape[:-1])

    # ------------------------------------------------------------------
    # filtering
    # ------------------------------------------------------------------
    def observe(self, frames: np.ndarray, actions: np.ndarray, rewards: Optional[np.ndarray] = None,
                rng: Optional[np.random.Generator] = None) -> ObserveResult:
        """
        Posterior pass over (B, L) sequences and the training loss.

        actions[:, 0] is the zero placeholder; rewards[:, 0] is ignored.
        Loss = image NLL + reward NLL + balanced KL.

        Raises:
            SequenceTooShortError: L < 2
        """
        c = self.config
        rng = rng if rng is not None else self.rng
        frames = np.asarray(frames, dtype=np.float64)
        actions = np.asarray(actions, dtype=np.float64)
        if frames.ndim != 5 or frames.shape[1] < 2:
            raise SequenceTooShortError(f"observe needs (B, L >= 2, H, W, 3) frames, got {frames.shape}")
        b, length = frames.shape[:2]
        if frames.shape[2:] != (c.image_size, c.image_size, 3):
            raise ShapeError(f"frames {frames.shape[2:]} != ({c.image_size}, {c.image_size}, 3)")
        embeds = self.encode(frames.reshape(b * length, *frames.shape[2:])).reshape(b, length, c.embed)

        state = self.initial(b)
        hs, zs, probs, post_logits, prior_logits = [], [], [], [], []
        heads = rng.integers(0, c.ensemble_size, size=length)
        for t in range(length):
            h = self.advance(state, actions[:, t])
            logits = self.posterior(concat([h, embeds[:, t]], axis=-1))
            z, p = straight_through_onehot(logits, c.groups, c.classes, rng)
            prior_logits.append(self.priors[int(heads[t])](h))
            post_logits.append(logits)
            hs.append(h)
            zs.append(z)
            probs.append(p)
            state = LatentState(h, z)

        posterior = LatentState(stack(hs, axis=1), stack(zs, axis=1), stack(probs, axis=1))
        post_all = stack(post_logits, axis=1)
        prior_all = stack(prior_logits, axis=1)
        feature = posterior.feature

        target = frames.reshape(b, length, -1)
        image_nll = (((self.decode(feature) - target) ** 2).sum(axis=-1) * 0.5).mean()
        loss_terms = {"image": image_nll}
        if rewards is not None:
            rewards = np.asarray(rewards, dtype=np.float64)
            error = self.predict_reward(feature)[:, 1:] - rewards[:, 1:]
            loss_terms["reward"] = (error ** 2).mean() * 0.5
        kl_loss, kl_value = kl_balance(post_all, prior_all, c.groups, c.classes, c.kl_balance, c.kl_free)
        loss_terms["kl"] = kl_loss

        total = sum(loss_terms.values(), Tensor(0.0))
        metrics = {name: float(term.data) for name, term in loss_terms.items()}
        metrics["kl_value"] = kl_value
        metrics["total"] = float(total.data)
        return ObserveResult(posterior=posterior, post_logits=post_all, prior_logits=prior_all,
                             loss=total, metrics=metrics)

    def filter_step(self, state: LatentState, action, frame, rng: Optional[np.random.Generator] = None
                    ) -> LatentState:
        """
        Posterior update for one new frame (B, S, S, 3).

        Without rng, z is the per-group argmax so acting stays deterministic.
        """
        c = self.config
        h = self.advance(state, action)
        logits = self.posterior(concat([h, self.encode(frame)], axis=-1))
        if rng is not None:
            z, probs = straight_through_onehot(logits, c.groups, c.classes, rng)
            return LatentState(h, z, probs)
        lead = logits.shape[:-1]
        probs = logits.reshape(*lead, c.groups, c.classes).softmax(axis=-1)
        onehot = np.zeros(probs.shape)
        np.put_along_axis(onehot, probs.data.argmax(axis=-1)[..., None], 1.0, axis=-1)
        return LatentState(h, Tensor(onehot.reshape(*lead, c.stoch)), probs.reshape(*lead, c.stoch))

    # ------------------------------------------------------------------
    # imagination
    # ------------------------------------------------------------------
    def img_step(self, state: LatentState, action, rng: np.random.Generator):
        """One prior step through the ensemble-mean distribution; returns (next state, per-head probs)."""
        c = self.config
        h = self.advance(state, action)
        heads = self.prior_probs(h)
        mean = sum(heads[1:], heads[0]) * (1.0 / len(heads))
        z = straight_through_from_probs(mean, c.groups, c.classes, rng)
        return LatentState(h, z, mean), heads


def imagine(model: RSSMEnsemble, actor: Callable[[Tensor], Tensor], start: LatentState, horizon: int,
            rng: Optional[np.random.Generator] = None) -> Imagination:
    """
    Roll the prior forward H steps from detached start states.

    The actor sees stop-gradient features; its actions carry gradients
    through the dynamics into later states, rewards and features.
    """
    if horizon < 1:
        raise WorldModelError(f"horizon must be >= 1, got {horizon}")
    rng = rng if rng is not None else model.rng
    state = start.detach()
    features, actions, rewards, penalties = [state.feature], [], [], []
    states = [state]
    for _ in range(horizon):
        action = actor(state.feature.detach())
        state, heads = model.img_step(state, action, rng)
        feature = state.feature
        features.append(feature)
        actions.append(action)
        rewards.append(model.predict_reward(feature))
        penalties.append(ensemble_disagreement(np.stack([p.data for p in heads])))
        states.append(state)
    return Imagination(features=stack(features), actions=stack(actions), rewards=stack(rewards),
                       penalties=np.stack(penalties), states=states)


def ensemble_disagreement(probs: np.ndarray) -> np.ndarray:
    """
    sum_k ||mu_k - mean_k mu_k||^2 over (K, ..., N) head probability vectors.
    """
    probs = np.asarray(probs, dtype=np.float64)
    centre = probs.mean(axis=0, keepdims=True)
    return ((probs - centre) ** 2).sum(axis=-1).sum(axis=0)


def reconstruct(model: RSSMEnsemble, latent: LatentState) -> np.ndarray:
    """Decoder mean as (..., S, S, 3) frames clipped to [0, 1]."""
    size = model.config.image_size
    out = model.decode(latent.feature).data
    return np.clip(out.reshape(*out.shape[:-1], size, size, 3), 0.0, 1.0)


def tie_prior_heads(model: RSSMEnsemble) -> None:
    """Copy head 0 into every prior head."""
    for head in model.priors[1:]:
        head.copy_from(model.priors[0])
