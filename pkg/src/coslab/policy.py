"""Collaborator-conditioned actor and per-intersection action-value critic.

The actor consumes the concatenation of an intersection's own embedding and
its mean-pooled team embedding, runs it through a dense layer, a GRU cell
(hidden state carried across control steps within an episode), another dense
layer, and a softmax head over the 8 phases.

The critic maps the raw flattened observation (8 movements x 7 features,
scaled by fixed constants) to one Q-value per phase. A frozen copy serves as
the bootstrap target and changes only on explicit sync.
"""

from __future__ import annotations

import numpy as np

from .config import NetworkConfig
from .nn import (
    Dense,
    GRUCell,
    LayerNorm,
    ParamStore,
    Tensor,
    log_softmax,
    no_grad,
)

__all__ = ["ActorNet", "CriticNet", "td_target", "critic_loss", "actor_loss"]


class ActorNet:
    def __init__(self, store: ParamStore, cfg: NetworkConfig, rng: np.random.Generator):
        self.cfg = cfg
        in_dim = 2 * cfg.embed_dim
        # Input normalization conditions the embedding features; without it
        # the policy head trains an order of magnitude slower.
        self.ln_in = LayerNorm(store, "actor.ln_in", in_dim)
        self.fc_in = Dense(store, "actor.fc_in", in_dim, cfg.actor_hidden, rng,
                           activation="relu")
        self.gru = GRUCell(store, "actor.gru", cfg.actor_hidden, cfg.actor_gru, rng)
        self.fc_out = Dense(store, "actor.fc_out", cfg.actor_gru, cfg.actor_out_hidden,
                            rng, activation="relu")
        self.head = Dense(store, "actor.head", cfg.actor_out_hidden, cfg.n_actions, rng,
                          w_scale=0.05)

    def __call__(self, x: Tensor, hidden: Tensor):
        """(B, N, 2D), (B, N, H) -> (logits (B, N, A), next hidden)."""
        h = self.gru(self.fc_in(self.ln_in(x)), hidden)
        return self.head(self.fc_out(h)), h

    def zero_hidden(self, n: int) -> np.ndarray:
        return np.zeros((n, self.cfg.actor_gru))


class CriticNet:
    def __init__(self, store: ParamStore, cfg: NetworkConfig, rng: np.random.Generator,
                 feature_scale: np.ndarray):
        self.cfg = cfg
        self.in_dim = 8 * cfg.movement_features
        self.scale = np.tile(feature_scale, 8)
        self.fc = Dense(store, "critic.fc", self.in_dim, cfg.critic_hidden, rng,
                        activation="relu")
        self.head = Dense(store, "critic.head", cfg.critic_hidden, cfg.n_actions, rng)

    def __call__(self, obs: Tensor) -> Tensor:
        """(B, N, 8, 7) raw observations -> (B, N, 8) Q-values."""
        b, n = obs.shape[0], obs.shape[1]
        flat = obs.reshape(b, n, self.in_dim) * self.scale
        return self.head(self.fc(flat))

    def q_np(self, obs: np.ndarray) -> np.ndarray:
        with no_grad():
            return self(Tensor(obs)).numpy()


def td_target(rewards: np.ndarray, next_q_target: np.ndarray, done: np.ndarray,
              gamma: float) -> np.ndarray:
    """y = r + gamma * max_a' Q_target(o', a'), with the bootstrap masked at episode end.

    ``rewards`` is (B, N); ``next_q_target`` is (B, N, A); ``done`` is (B,).
    """
    boot = next_q_target.max(axis=-1)
    return rewards + gamma * (1.0 - done[:, None]) * boot


def critic_loss(critic: CriticNet, obs: np.ndarray, actions: np.ndarray,
                y: np.ndarray) -> Tensor:
    """Mean squared TD error of the online critic at the taken actions."""
    if obs.shape[0] == 0:
        raise ValueError("empty batch")
    q = critic(Tensor(obs))
    onehot = np.eye(critic.cfg.n_actions)[actions.astype(np.int64)]
    q_a = (q * onehot).sum(axis=-1)
    err = Tensor(y) - q_a
    return (err * err).mean()


def action_logprobs(logits: Tensor, actions: np.ndarray) -> Tensor:
    """Log-probability of the stored actions under the current policy."""
    logp = log_softmax(logits, axis=-1)
    onehot = np.eye(logits.shape[-1])[actions.astype(np.int64)]
    return (logp * onehot).sum(axis=-1)


def actor_loss(logp: Tensor, old_logp: np.ndarray, advantages: np.ndarray,
               clip: float = 0.2, use_clip: bool = True) -> Tensor:
    """Surrogate policy loss on importance ratios against the sampling policy.

    With clipping: -mean(min(ratio * A, clip(ratio, 1 +/- eps) * A)); without,
    the raw ratio term.
    """
    ratio = (logp - Tensor(old_logp)).exp()
    adv = Tensor(advantages)
    surr = ratio * adv
    if use_clip:
        surr = surr.minimum(ratio.clip(1.0 - clip, 1.0 + clip) * adv)
    return -surr.mean()
