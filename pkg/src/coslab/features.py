"""Dual-feature extraction: per-movement embeddings, phase-competition
representation, and a transformer encoder across intersections.

Pipeline for a batch of joint observations ``(B, N, 8, 7)``:

1. Each of the 7 scalar movement features runs through its own tiny dense
   map with a sigmoid; the concatenation is the movement embedding (dim 28).
2. Phase embeddings are sums of their two movement embeddings. All 56
   ordered pairs of distinct phases are concatenated into a pair volume,
   passed through a 1x1 convolution, multiplied by the fixed competition
   mask (1 where the two phases share no movement), convolved again,
   flattened, and mapped by an MLP to the phase representation (dim 32).
3. Phase representations of all intersections, plus a learned positional
   embedding, run through a multi-head self-attention encoder; an output
   layer produces the intersection representation ``e_ir`` of shape (N, 32).

Raw observation features are scaled by fixed per-feature constants before
step 1 so counts land in O(1); the observation contract itself stays raw.
"""

from __future__ import annotations

import numpy as np

from .config import NetworkConfig
from .net import standard_phase_table
from .nn import (
    Conv1x1,
    Dense,
    ParamStore,
    PositionalEmbedding,
    Tensor,
    TransformerEncoderLayer,
    concat,
    take,
)

_PHASES = standard_phase_table()
PHASE_M1 = np.array([p.movements[0] - 1 for p in _PHASES])
PHASE_M2 = np.array([p.movements[1] - 1 for p in _PHASES])
PAIR_FIRST = np.array([i for i in range(8) for j in range(8) if i != j])
PAIR_SECOND = np.array([j for i in range(8) for j in range(8) if i != j])


def competition_mask() -> np.ndarray:
    """(56, 1) 0/1 mask: 1 where the two phases share no movement."""
    sets = [set(p.movements) for p in _PHASES]
    m = np.array([0.0 if sets[i] & sets[j] else 1.0
                  for i, j in zip(PAIR_FIRST, PAIR_SECOND)])
    return m[:, None]


COMPETITION_MASK = competition_mask()


def default_feature_scale(capacity: float, sat_rate: float, interval_s: float) -> np.ndarray:
    """Per-feature input scaling: counts by lane capacity, flow by green throughput."""
    cap = max(capacity, 1.0)
    thru = max(sat_rate * interval_s, 1.0)
    return np.array([1.0, 1.0 / cap, 1.0 / cap, 1.0, 1.0 / thru, 1.0 / cap, 1.0 / cap])


class DualFeatureExtractor:
    def __init__(self, store: ParamStore, cfg: NetworkConfig, rng: np.random.Generator,
                 feature_scale: np.ndarray | None = None):
        self.cfg = cfg
        self.scale = (feature_scale if feature_scale is not None
                      else np.ones(cfg.movement_features))
        self.feature_mlps = [
            Dense(store, f"fx.feat{k}", 1, cfg.feature_embed, rng, activation="sigmoid")
            for k in range(cfg.movement_features)
        ]
        move_dim = cfg.feature_embed * cfg.movement_features
        pair_dim = 2 * move_dim
        self.conv_rel = Conv1x1(store, "fx.conv_rel", pair_dim,
                                cfg.frap_relation_channels, rng, activation="relu")
        self.conv_comp = Conv1x1(store, "fx.conv_comp", cfg.frap_relation_channels,
                                 cfg.frap_competition_channels, rng, activation="relu")
        flat = 56 * cfg.frap_competition_channels
        self.frap_fc1 = Dense(store, "fx.frap_fc1", flat, cfg.frap_hidden, rng,
                              activation="relu")
        self.frap_fc2 = Dense(store, "fx.frap_fc2", cfg.frap_hidden, cfg.phase_dim, rng)
        self.in_proj = Dense(store, "fx.in_proj", cfg.phase_dim, cfg.d_model, rng)
        self.pos = PositionalEmbedding(store, "fx.pos", cfg.n_max, cfg.d_model, rng)
        self.encoder = [
            TransformerEncoderLayer(store, f"fx.enc{i}", cfg.d_model, cfg.heads,
                                    cfg.d_model, rng)
            for i in range(cfg.encoder_layers)
        ]
        self.out_proj = Dense(store, "fx.out", cfg.d_model, cfg.embed_dim, rng,
                              activation="relu")

    # -- stages -----------------------------------------------------------------

    def movement_embed(self, obs: Tensor) -> Tensor:
        """(B, N, 8, 7) raw features -> (B, N, 8, 28) movement embeddings."""
        x = obs * self.scale
        parts = [mlp(take(x, [k], axis=-1)) for k, mlp in enumerate(self.feature_mlps)]
        return concat(parts, axis=-1)

    def phase_embeddings(self, e_m: Tensor) -> Tensor:
        """(B, N, 8, D) movement embeddings -> (B, N, 8, D) phase embeddings."""
        return take(e_m, PHASE_M1, axis=2) + take(e_m, PHASE_M2, axis=2)

    def frap_forward(self, e_m: Tensor) -> Tensor:
        """Movement embeddings -> per-intersection phase representation (B, N, 32)."""
        e_p = self.phase_embeddings(e_m)
        pair = concat([take(e_p, PAIR_FIRST, axis=2), take(e_p, PAIR_SECOND, axis=2)],
                      axis=-1)
        rel = self.conv_rel(pair)
        comp = self.conv_comp(rel * COMPETITION_MASK)
        b, n = comp.shape[0], comp.shape[1]
        flat = comp.reshape(b, n, 56 * self.cfg.frap_competition_channels)
        return self.frap_fc2(self.frap_fc1(flat))

    def encode_intersections(self, e_pr: Tensor, positions=None) -> Tensor:
        """(B, N, 32) phase representations -> (B, N, 32) intersection representations."""
        h = self.pos(self.in_proj(e_pr), positions)
        for layer in self.encoder:
            h = layer(h)
        return self.out_proj(h)

    def __call__(self, obs: Tensor, positions=None) -> Tensor:
        return self.encode_intersections(self.frap_forward(self.movement_embed(obs)),
                                         positions)
