"""Network-shape knobs shared by the extractor, selection, and decision nets."""

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class NetworkConfig:
    feature_embed: int = 4          # width of each per-feature movement embedding
    movement_features: int = 7
    frap_relation_channels: int = 20
    frap_competition_channels: int = 8
    frap_hidden: int = 64
    phase_dim: int = 32             # e_pr width
    d_model: int = 64               # transformer width
    heads: int = 8
    encoder_layers: int = 2
    embed_dim: int = 32             # e_ir width
    n_max: int = 64                 # positional table size
    cos_hidden: int = 64
    actor_hidden: int = 64
    actor_gru: int = 64
    actor_out_hidden: int = 32
    n_actions: int = 8
    critic_hidden: int = 64

    def to_dict(self) -> dict:
        return asdict(self)
