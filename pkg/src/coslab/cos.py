"""Top-k collaborator selection.

Each intersection's embedding row maps through a shared two-layer MLP to one
logit per intersection; the row-wise softmax of those logits is the
collaborator matrix M (each row a probability distribution). Collaborators
are drawn *without replacement*: sample, remove, renormalize, repeat k
times. The joint probability of an ordered draw is the product of the
renormalized softmax terms, and the log of that product is what the policy
gradient differentiates.

Two regularizers act on M during training: the trace (self-selection) is
pushed up, and the mean squared difference between M and its transpose
(reciprocity) is pushed down.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .config import NetworkConfig
from .nn import Dense, ParamStore, Tensor, logsumexp, matmul, softmax

_BIG = 1e30


@dataclass(frozen=True)
class SelectionResult:
    ids: Tuple[int, ...]
    joint_logprob: float


def _softmax_np(alpha: np.ndarray) -> np.ndarray:
    e = np.exp(alpha - alpha.max())
    return e / e.sum()


def sample_topk(alpha: np.ndarray, k: int, rng: np.random.Generator) -> SelectionResult:
    """Ordered draw of k distinct indices by sequential renormalized sampling."""
    alpha = np.asarray(alpha, dtype=np.float64)
    n = alpha.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside 1..{n}")
    probs = _softmax_np(alpha)
    ids = []
    logp = 0.0
    for _ in range(k):
        total = probs.sum()
        cdf = np.cumsum(probs / total)
        cdf[-1] = 1.0
        j = int(np.searchsorted(cdf, rng.random(), side="right"))
        logp += float(np.log(probs[j] / total))
        ids.append(j)
        probs[j] = 0.0
    return SelectionResult(tuple(ids), logp)


def sample_topk_many(alpha: np.ndarray, k: int, n_draws: int,
                     rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized batch of sequential renormalized draws; same law as sample_topk.

    Returns (ids of shape (n_draws, k), joint log-probabilities (n_draws,)).
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    n = alpha.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside 1..{n}")
    probs = np.tile(_softmax_np(alpha), (n_draws, 1))
    ids = np.zeros((n_draws, k), dtype=np.int64)
    logp = np.zeros(n_draws)
    rows = np.arange(n_draws)
    for step in range(k):
        totals = probs.sum(axis=1)
        cdf = np.cumsum(probs / totals[:, None], axis=1)
        cdf[:, -1] = 1.0
        u = rng.random(n_draws)
        j = (cdf < u[:, None]).sum(axis=1)
        logp += np.log(probs[rows, j] / totals)
        ids[:, step] = j
        probs[rows, j] = 0.0
    return ids, logp


def joint_logprob_np(alpha: np.ndarray, ids) -> float:
    """Log-probability of an ordered selection under sequential renormalization."""
    probs = _softmax_np(np.asarray(alpha, dtype=np.float64)).copy()
    logp = 0.0
    for j in ids:
        total = probs.sum()
        logp += float(np.log(probs[int(j)] / total))
        probs[int(j)] = 0.0
    return logp


def eval_topk(alpha: np.ndarray, k: int) -> SelectionResult:
    """Deterministic k most-probable indices; ties break to the lowest index."""
    alpha = np.asarray(alpha, dtype=np.float64)
    n = alpha.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside 1..{n}")
    order = np.lexsort((np.arange(n), -alpha))
    ids = tuple(int(i) for i in order[:k])
    return SelectionResult(ids, joint_logprob_np(alpha, ids))


def team_repr(e_ir: np.ndarray, ids) -> np.ndarray:
    """Mean of the selected embedding rows."""
    idx = np.asarray(ids, dtype=np.int64)
    return np.asarray(e_ir)[idx].mean(axis=0)


def constraint_terms(m: np.ndarray) -> Tuple[float, float]:
    """(trace, mean squared asymmetry) of a collaborator matrix."""
    m = np.asarray(m, dtype=np.float64)
    n = m.shape[0]
    diag = float(np.trace(m))
    sym = float(((m - m.T) ** 2).sum() / (n * n))
    return diag, sym


class CollaboratorSelector:
    """Shared two-layer MLP from embedding rows to per-intersection logits."""

    def __init__(self, store: ParamStore, cfg: NetworkConfig, n_agents: int,
                 rng: np.random.Generator):
        self.n_agents = n_agents
        self.fc1 = Dense(store, "cos.fc1", cfg.embed_dim, cfg.cos_hidden, rng,
                         activation="relu")
        # Small head init keeps the initial collaborator matrix near uniform.
        self.fc2 = Dense(store, "cos.fc2", cfg.cos_hidden, n_agents, rng, w_scale=0.05)

    def logits(self, e_ir: Tensor) -> Tensor:
        """(B, N, D) -> (B, N, N) selection logits."""
        return self.fc2(self.fc1(e_ir))

    def matrix(self, logits: Tensor) -> Tensor:
        """Row-stochastic collaborator matrix (softmax over the last axis)."""
        return softmax(logits, axis=-1)

    def joint_logprob(self, logits: Tensor, ids: np.ndarray) -> Tensor:
        """Differentiable log-probability of stored ordered draws.

        ``logits`` is (B, N, N); ``ids`` is (B, N, k). Step j restricts the
        softmax normalizer to the indices not yet chosen.
        """
        b, n, _ = logits.shape
        k = ids.shape[-1]
        avail = np.ones((b, n, n))
        onehots = np.eye(n)[ids]                     # (B, N, k, N)
        total = None
        for step in range(k):
            oh = onehots[:, :, step, :]              # (B, N, N)
            chosen = (logits * oh).sum(axis=-1)      # (B, N)
            masked = logits + Tensor((avail - 1.0) * _BIG)
            lse = logsumexp(masked, axis=-1)
            term = chosen - lse
            total = term if total is None else total + term
            avail = avail - oh
        return total

    def diag_term(self, m: Tensor) -> Tensor:
        """Mean over the batch of the matrix trace."""
        b, n, _ = m.shape
        eye = np.eye(n)
        return (m * eye).sum(axis=(-2, -1)).mean()

    def sym_term(self, m: Tensor) -> Tensor:
        """Mean over the batch of the mean squared difference from the transpose."""
        b, n, _ = m.shape
        d = m - m.transpose((0, 2, 1))
        return (d * d).sum(axis=(-2, -1)).mean() * (1.0 / (n * n))

    def team_repr(self, e_ir: Tensor, ids: np.ndarray) -> Tensor:
        """(B, N, D) with (B, N, k) selections -> (B, N, D) mean-pooled teams."""
        b, n, _ = e_ir.shape
        k = ids.shape[-1]
        pool = np.eye(n)[ids].sum(axis=2) / k        # (B, N, N), rows sum to 1
        return matmul(Tensor(pool), e_ir)
