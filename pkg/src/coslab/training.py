"""Training and evaluation loops.

One training iteration per episode once the warmup is over:

* roll an episode with the stochastic policies, storing joint transitions
  (observations, collaborator draws, actions, rewards, behavior
  log-probabilities, and the actor's recurrent state) into a ring buffer;
* sample a mini-batch and take one AdamW step each for the selection policy
  (score-function term on the joint draw log-probability plus the trace and
  symmetry regularizers, all autodiffed), the decision policy (clipped
  importance-ratio surrogate), and the critic (TD error against the frozen
  target); the selection and decision losses share one advantage signal
  computed once per batch;
* copy the online critic into the target every ``target_sync_episodes``.

Evaluation is deterministic: greedy top-k selection, argmax actions, and no
exploration noise.
"""

from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .baselines import FixedTimeController, FtcConfig, MaxPressureController
from .config import NetworkConfig
from .cos import CollaboratorSelector, eval_topk, sample_topk
from .env import EnvConfig, TrafficEnv, Transition
from .features import DualFeatureExtractor, default_feature_scale
from .nn import (
    ParamStore,
    Tensor,
    adamw_step,
    concat,
    load_checkpoint,
    log_softmax,
    no_grad,
    save_checkpoint,
    config_hash,
)
from .policy import ActorNet, CriticNet, action_logprobs, actor_loss, critic_loss, td_target
from .scenario import InputError, Scenario


@dataclass
class TrainConfig:
    episodes: int = 200
    seed: int = 0
    gamma: float = 0.99
    lr: float = 5e-4
    critic_lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 1e-4
    clip: float = 0.2
    use_clip: bool = True
    raw_q: bool = False
    advantage_norm: bool = False
    eps_greedy: float = 1e-5
    k: int = 5
    matrix_mode: str = "learned"          # learned | fixed-hop:<radius> | random-frozen
    diag_weight: float = 1.0
    sym_weight: float = 1.0
    warmup_episodes: int = 4              # L1: episodes before updates start
    policy_warmup_episodes: int = 20      # critic-only updates until this episode
    target_sync_episodes: int = 2         # L2: target refresh cadence
    batch_size: int = 256
    buffer_capacity: int = 1024
    updates_per_episode: int = 1
    critic_updates: int = 8               # critic minibatch steps per update round
    eval_interval_steps: int = 4000
    eval_episodes: int = 100
    num_envs: int = 1
    net: NetworkConfig = field(default_factory=NetworkConfig)

    def to_dict(self) -> dict:
        d = asdict(self)
        return d


class ReplayBuffer:
    """Ring of joint transitions; sampling covers only the stored range."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._data: deque = deque(maxlen=capacity)
        self.episodes = 0

    def __len__(self) -> int:
        return len(self._data)

    def add(self, tr: Transition) -> None:
        self._data.append(tr)

    def extend_episode(self, trs: Iterable[Transition]) -> None:
        for tr in trs:
            self.add(tr)
        self.episodes += 1

    def sample(self, batch: int, rng: np.random.Generator) -> Dict[str, np.ndarray]:
        n = len(self._data)
        if batch > n:
            raise ValueError(f"batch {batch} exceeds stored {n}")
        idx = rng.choice(n, size=batch, replace=False)
        items = [self._data[int(i)] for i in idx]
        return {
            "obs": np.stack([t.obs for t in items]),
            "hidden": np.stack([t.hidden for t in items]),
            "ids": np.stack([t.ids for t in items]),
            "logp_ids": np.stack([t.logp_ids for t in items]),
            "actions": np.stack([t.actions for t in items]),
            "logp_actions": np.stack([t.logp_actions for t in items]),
            "rewards": np.stack([t.rewards for t in items]),
            "next_obs": np.stack([t.next_obs for t in items]),
            "done": np.array([float(t.done) for t in items]),
        }


def parse_matrix_mode(mode: str) -> Tuple[str, int]:
    if mode == "learned" or mode == "random-frozen":
        return mode, 0
    if mode.startswith("fixed-hop"):
        radius = 1
        if ":" in mode:
            radius = int(mode.split(":", 1)[1])
        return "fixed-hop", radius
    raise InputError(f"unknown matrix mode {mode!r}")


def fixed_hop_ids(scenario: Scenario, k: int, radius: int) -> np.ndarray:
    """k nearest intersections by hop distance (self first, then by (hops, index)).

    Nodes beyond ``radius`` are used only to pad up to k when the
    neighborhood is too small.
    """
    inters = scenario.network.intersections
    index_of = {i.id: i.index for i in inters}
    adj = {i.index: sorted(index_of[nb] for nb in i.neighbors.values() if nb)
           for i in inters}
    n = len(inters)
    out = np.zeros((n, k), dtype=np.int64)
    for start in range(n):
        dist = {start: 0}
        frontier = [start]
        while frontier:
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if v not in dist:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        ranked = sorted(dist, key=lambda v: (dist[v] > radius, dist[v], v))
        out[start] = ranked[:k]
    return out


def random_frozen_ids(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    return np.stack([rng.permutation(n)[:k] for _ in range(n)])


class CosLightAgent:
    """Bundles the shared extractor, selection policy, actor, and critic."""

    STORE_NAMES = ("extractor", "cos", "actor", "critic", "target")

    def __init__(self, scenario: Scenario, cfg: TrainConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.n = scenario.n
        self.k = min(cfg.k, self.n)
        self.mode, self._radius = parse_matrix_mode(cfg.matrix_mode)
        self.scale = default_feature_scale(
            scenario.lane_params.capacity, scenario.lane_params.sat_rate,
            scenario.sim_config.control_interval_s)
        net = cfg.net
        if self.n > net.n_max:
            net = replace(net, n_max=self.n)
        self.stores: Dict[str, ParamStore] = {name: ParamStore()
                                              for name in self.STORE_NAMES}
        self.extractor = DualFeatureExtractor(self.stores["extractor"], net, rng, self.scale)
        self.cos = CollaboratorSelector(self.stores["cos"], net, self.n, rng)
        self.actor = ActorNet(self.stores["actor"], net, rng)
        self.critic = CriticNet(self.stores["critic"], net, rng, self.scale)
        self.target = CriticNet(self.stores["target"], net, rng, self.scale)
        self.sync_target()
        if self.mode == "fixed-hop":
            self.fixed_ids: Optional[np.ndarray] = fixed_hop_ids(scenario, self.k, self._radius)
        elif self.mode == "random-frozen":
            self.fixed_ids = random_frozen_ids(self.n, self.k, rng)
        else:
            self.fixed_ids = None

    def sync_target(self) -> None:
        self.stores["target"].copy_values_from(self.stores["critic"])

    # -- inference ---------------------------------------------------------------

    def embed(self, obs_batch: np.ndarray) -> Tensor:
        return self.extractor(Tensor(obs_batch))

    def act_joint(self, obs: np.ndarray, hidden: np.ndarray,
                  rng: Optional[np.random.Generator], explore: bool = True):
        """One joint decision. Returns (ids, logp_ids, actions, logp_actions, hidden')."""
        with no_grad():
            e_ir_t = self.embed(obs[None])
            e_ir = e_ir_t.numpy()[0]
            if self.fixed_ids is not None:
                ids = self.fixed_ids
                logp_ids = np.zeros(self.n)
            else:
                alpha = self.cos.logits(e_ir_t).numpy()[0]
                ids = np.zeros((self.n, self.k), dtype=np.int64)
                logp_ids = np.zeros(self.n)
                for i in range(self.n):
                    sel = (sample_topk(alpha[i], self.k, rng) if explore
                           else eval_topk(alpha[i], self.k))
                    ids[i] = sel.ids
                    logp_ids[i] = sel.joint_logprob
            team = e_ir[ids].mean(axis=1)
            x = Tensor(np.concatenate([e_ir, team], axis=-1)[None])
            logits_t, h_t = self.actor(x, Tensor(hidden[None]))
            logp_all = log_softmax(logits_t, axis=-1).numpy()[0]
            hidden_next = h_t.numpy()[0]
            actions = np.zeros(self.n, dtype=np.int64)
            logp_a = np.zeros(self.n)
            for i in range(self.n):
                if explore:
                    if rng.random() < self.cfg.eps_greedy:
                        a = int(rng.integers(self.cfg.net.n_actions))
                    else:
                        p = np.exp(logp_all[i])
                        cdf = np.cumsum(p / p.sum())
                        cdf[-1] = 1.0
                        a = int(np.searchsorted(cdf, rng.random(), side="right"))
                else:
                    a = int(np.argmax(logp_all[i]))
                actions[i] = a
                logp_a[i] = logp_all[i, a]
        return ids, logp_ids, actions, logp_a, hidden_next

    # -- persistence ---------------------------------------------------------------

    def meta(self) -> dict:
        cfg_dict = self.cfg.to_dict()
        return {
            "config": cfg_dict,
            "config_hash": config_hash(cfg_dict),
            "n_agents": self.n,
            "k": self.k,
            "matrix_mode": self.cfg.matrix_mode,
            "fixed_ids": None if self.fixed_ids is None else self.fixed_ids.tolist(),
        }

    def save(self, path, extra_meta: Optional[dict] = None) -> None:
        meta = self.meta()
        if extra_meta:
            meta.update(extra_meta)
        save_checkpoint(path, self.stores, meta)

    def load(self, path) -> dict:
        meta = load_checkpoint(path, self.stores)
        if meta.get("n_agents") != self.n:
            raise InputError(
                f"checkpoint was trained for {meta.get('n_agents')} intersections, "
                f"scenario has {self.n}")
        if meta.get("fixed_ids") is not None:
            self.fixed_ids = np.asarray(meta["fixed_ids"], dtype=np.int64)
        return meta


def run_episode(env: TrafficEnv, agent: CosLightAgent,
                rng: Optional[np.random.Generator], explore: bool = True,
                seed: Optional[int] = None):
    """Roll one episode; returns (transitions, episode stats)."""
    obs = env.reset(seed)
    hidden = agent.actor.zero_hidden(env.n)
    transitions: List[Transition] = []
    reward_sum = 0.0
    queue_sum = 0.0
    steps = env.steps_per_episode
    for _ in range(steps):
        ids, lp_ids, actions, lp_a, hidden_next = agent.act_joint(obs, hidden, rng, explore)
        next_obs, rewards, done, info = env.step(actions)
        transitions.append(Transition(obs, hidden, ids, lp_ids, actions, lp_a,
                                      rewards, next_obs, done))
        reward_sum += float(rewards.mean())
        queue_sum += float(np.mean([s["queue"] for s in info["interval"].values()]))
        obs, hidden = next_obs, hidden_next
    metrics = env.sim.vehicle_metrics()
    stats = {
        "mean_reward": reward_sum / steps,
        "mean_queue": queue_sum / steps,
        "trip_time": metrics["trip_time"],
        "delay": metrics["delay"],
        "completed": metrics["completed"],
    }
    return transitions, stats


def _zero_all(agent: CosLightAgent) -> None:
    for store in agent.stores.values():
        store.zero_grad()


def _adam(agent: CosLightAgent, names: Sequence[str]) -> None:
    cfg = agent.cfg
    for name in names:
        lr = cfg.critic_lr if name == "critic" else cfg.lr
        adamw_step(agent.stores[name], lr=lr, beta1=cfg.beta1, beta2=cfg.beta2,
                   eps=cfg.adam_eps, weight_decay=cfg.weight_decay)


def compute_advantage(agent: CosLightAgent, obs: np.ndarray, actions: np.ndarray,
                      cfg: TrainConfig) -> np.ndarray:
    """Detached advantage shared by the selection and decision updates."""
    q_all = agent.critic.q_np(obs)
    q_a = np.take_along_axis(q_all, actions[..., None].astype(np.int64), axis=-1)[..., 0]
    adv = q_a if cfg.raw_q else q_a - q_all.mean(axis=-1)
    if cfg.advantage_norm:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    return adv


def update(buffer: ReplayBuffer, agent: CosLightAgent, cfg: TrainConfig,
           rng: np.random.Generator) -> dict:
    """One joint optimization round; no-op (with a report flag) until ready."""
    if buffer.episodes < cfg.warmup_episodes:
        return {"updated": False, "reason": "warmup"}
    if len(buffer) < cfg.batch_size:
        return {"updated": False, "reason": "buffer"}
    batch = buffer.sample(cfg.batch_size, rng)
    obs, actions = batch["obs"], batch["actions"]
    adv = compute_advantage(agent, obs, actions, cfg)
    policy_ready = buffer.episodes >= cfg.policy_warmup_episodes
    report: Dict[str, float] = {"updated": True, "adv_mean": float(adv.mean()),
                                "policy_updated": policy_ready}

    # Collaborator-selection step: joint log-probability times the shared
    # advantage, minus the trace bonus, plus the symmetry penalty.
    if agent.fixed_ids is None and policy_ready:
        _zero_all(agent)
        e_ir = agent.embed(obs)
        logits = agent.cos.logits(e_ir)
        m = agent.cos.matrix(logits)
        jlp = agent.cos.joint_logprob(logits, batch["ids"])
        pg = -(jlp * Tensor(adv)).mean()
        diag = agent.cos.diag_term(m)
        sym = agent.cos.sym_term(m)
        loss = pg - cfg.diag_weight * diag + cfg.sym_weight * sym
        loss.backward()
        _adam(agent, ("cos", "extractor"))
        report.update(cos_loss=loss.item(), pg_term=pg.item(),
                      diag_term=diag.item(), sym_term=sym.item())
    else:
        report.update(cos_loss=0.0, pg_term=0.0, diag_term=0.0, sym_term=0.0)

    # Decision-policy step: clipped importance-ratio surrogate.
    if policy_ready:
        _zero_all(agent)
        e_ir = agent.embed(obs)
        team = agent.cos.team_repr(e_ir, batch["ids"])
        logits_a, _ = agent.actor(concat([e_ir, team], axis=-1),
                                  Tensor(batch["hidden"]))
        logp = action_logprobs(logits_a, actions)
        a_loss = actor_loss(logp, batch["logp_actions"], adv, cfg.clip, cfg.use_clip)
        a_loss.backward()
        _adam(agent, ("actor", "extractor"))
        report["actor_loss"] = a_loss.item()
    else:
        report["actor_loss"] = 0.0

    # Critic steps: TD toward the frozen target's best next value. The critic
    # takes several minibatch steps per round so its value estimates track the
    # policy fast enough to give the two policy losses a usable advantage.
    for j in range(max(1, cfg.critic_updates)):
        cb = batch if j == 0 else buffer.sample(cfg.batch_size, rng)
        _zero_all(agent)
        y = td_target(cb["rewards"], agent.target.q_np(cb["next_obs"]),
                      cb["done"], cfg.gamma)
        c_loss = critic_loss(agent.critic, cb["obs"], cb["actions"], y)
        c_loss.backward()
        _adam(agent, ("critic",))
    report["critic_loss"] = c_loss.item()
    return report


TRAIN_LOG_HEADER = ("episode", "steps", "mean_reward", "mean_queue", "trip_time",
                    "delay", "completed", "updated", "cos_loss", "pg_term",
                    "diag_term", "sym_term", "actor_loss", "critic_loss")


def train(scenario: Scenario, cfg: TrainConfig, env_cfg: EnvConfig = EnvConfig(),
          resume: Optional[str] = None, on_checkpoint=None):
    """Run the training loop; returns (agent, log rows, summary dict)."""
    ss = np.random.SeedSequence(cfg.seed)
    init_s, rollout_s, update_s = ss.spawn(3)
    init_rng = np.random.Generator(np.random.PCG64(init_s))
    rollout_rng = np.random.Generator(np.random.PCG64(rollout_s))
    update_rng = np.random.Generator(np.random.PCG64(update_s))

    agent = CosLightAgent(scenario, cfg, init_rng)
    start_episode = 0
    steps_total = 0
    if resume is not None:
        meta = agent.load(resume)
        start_episode = int(meta.get("episode", 0))
        steps_total = int(meta.get("steps", 0))

    env = TrafficEnv(scenario, env_cfg, seed=cfg.seed)
    buffer = ReplayBuffer(cfg.buffer_capacity)
    rows: List[list] = []
    reward_curve: List[float] = []
    next_eval = cfg.eval_interval_steps
    checkpoints: List[str] = []

    for ep in range(start_episode, cfg.episodes):
        ep_seed = cfg.seed * 1000003 + ep
        transitions, stats = run_episode(env, agent, rollout_rng, explore=True,
                                         seed=ep_seed)
        buffer.extend_episode(transitions)
        steps_total += len(transitions)
        report = {"updated": False, "cos_loss": 0.0, "pg_term": 0.0, "diag_term": 0.0,
                  "sym_term": 0.0, "actor_loss": 0.0, "critic_loss": 0.0}
        for _ in range(cfg.updates_per_episode):
            rep = update(buffer, agent, cfg, update_rng)
            if not rep.get("updated"):
                break
            report = rep
        if (ep + 1) % cfg.target_sync_episodes == 0:
            agent.sync_target()
        reward_curve.append(stats["mean_reward"])
        rows.append([ep, steps_total, stats["mean_reward"], stats["mean_queue"],
                     stats["trip_time"], stats["delay"], stats["completed"],
                     int(bool(report.get("updated"))), report.get("cos_loss", 0.0),
                     report.get("pg_term", 0.0), report.get("diag_term", 0.0),
                     report.get("sym_term", 0.0), report.get("actor_loss", 0.0),
                     report.get("critic_loss", 0.0)])
        if steps_total >= next_eval:
            if on_checkpoint is not None:
                path = on_checkpoint(agent, ep, steps_total)
                if path:
                    checkpoints.append(path)
            next_eval += cfg.eval_interval_steps

    first = reward_curve[:10]
    last = reward_curve[-10:]
    summary = {
        "episodes": len(reward_curve),
        "steps": steps_total,
        "first10_reward": float(np.mean(first)) if first else 0.0,
        "final10_reward": float(np.mean(last)) if last else 0.0,
        "checkpoints": checkpoints,
    }
    return agent, rows, summary


# -- evaluation -----------------------------------------------------------------


class CosLightController:
    name = "coslight"

    def __init__(self, agent: CosLightAgent):
        self.agent = agent
        self._hidden: Optional[np.ndarray] = None

    def reset(self, env: TrafficEnv) -> None:
        self._hidden = self.agent.actor.zero_hidden(env.n)

    def actions(self, env: TrafficEnv, obs: np.ndarray) -> List[int]:
        ids, _, actions, _, self._hidden = self.agent.act_joint(
            obs, self._hidden, None, explore=False)
        return [int(a) for a in actions]


def make_controller(name: str, agent: Optional[CosLightAgent] = None,
                    ftc_cfg: Optional[FtcConfig] = None):
    if name == "ftc":
        return FixedTimeController(ftc_cfg or FtcConfig())
    if name == "maxpressure":
        return MaxPressureController()
    if name == "coslight":
        if agent is None:
            raise InputError("coslight evaluation needs a checkpoint")
        return CosLightController(agent)
    raise InputError(f"unknown controller {name!r}")


EVAL_SCENARIO_HEADER = ("seed", "episodes", "completed", "trip_time", "delay",
                        "wait", "reward")
EVAL_INTERSECTION_HEADER = ("seed", "intersection", "total", "delay_term", "wait_term",
                            "queue_term", "pressure_term", "queue_veh", "wait_s",
                            "delay_s", "pressure_veh")


def evaluate(scenario: Scenario, controller_name: str, seeds: Sequence[int],
             episodes: int, env_cfg: EnvConfig = EnvConfig(),
             agent: Optional[CosLightAgent] = None,
             ftc_cfg: Optional[FtcConfig] = None) -> dict:
    """Deterministic evaluation; returns per-seed and aggregate tables."""
    scen_rows: List[list] = []
    inter_rows: List[list] = []
    iids = [i.id for i in scenario.network.intersections]
    n = len(iids)
    steps = scenario.sim_config.episode_s // scenario.sim_config.control_interval_s

    for seed in seeds:
        env = TrafficEnv(scenario, env_cfg, seed=seed)
        base_cfg = ftc_cfg or FtcConfig()
        controller = make_controller(
            controller_name, agent,
            FtcConfig(base_cfg.order, base_cfg.duration_s, offset_seed=seed))
        trip_sum = delay_sum = wait_sum = 0.0
        completed = 0
        reward_sum = 0.0
        comp_sums = np.zeros((n, 5))    # total, delay, wait, queue, pressure terms
        raw_sums = np.zeros((n, 4))     # queue, wait, delay, |pressure| raw
        for ep in range(episodes):
            obs = env.reset(seed * 100003 + ep)
            controller.reset(env)
            for _ in range(steps):
                acts = controller.actions(env, obs)
                obs, rewards, done, info = env.step(acts)
                reward_sum += float(rewards.mean())
                for a, b in enumerate(info["breakdown"]):
                    comp_sums[a] += b.as_tuple()
                for a, iid in enumerate(iids):
                    s = info["interval"][iid]
                    raw_sums[a] += (s["queue"], s["wait"], s["delay"], s["pressure"])
            m = env.sim.vehicle_metrics()
            c = m["completed"]
            completed += c
            trip_sum += m["trip_time"] * c
            delay_sum += m["delay"] * c
            wait_sum += m["wait"] * c
        denom = max(1, completed)
        total_steps = episodes * steps
        scen_rows.append([seed, episodes, completed, trip_sum / denom,
                          delay_sum / denom, wait_sum / denom,
                          reward_sum / total_steps])
        for a, iid in enumerate(iids):
            comp = comp_sums[a] / total_steps
            raw = raw_sums[a] / total_steps
            inter_rows.append([seed, iid, comp[0], comp[1], comp[2], comp[3], comp[4],
                               raw[0], raw[1], raw[2], raw[3]])

    arr = np.array([[r[3], r[4], r[5], r[6]] for r in scen_rows])
    aggregate = {
        "trip_time_mean": float(arr[:, 0].mean()),
        "trip_time_std": float(arr[:, 0].std()),
        "delay_mean": float(arr[:, 1].mean()),
        "delay_std": float(arr[:, 1].std()),
        "wait_mean": float(arr[:, 2].mean()),
        "wait_std": float(arr[:, 2].std()),
        "reward_mean": float(arr[:, 3].mean()),
        "reward_std": float(arr[:, 3].std()),
    }
    # Intersection-wise aggregate over seeds and intersections (per-metric means).
    comp_all = np.array([[r[2], r[3], r[4], r[5], r[6]] for r in inter_rows])
    queue_all = np.array([r[7] for r in inter_rows])
    aggregate.update({
        "total_term_mean": float(comp_all[:, 0].mean()),
        "queue_veh_mean": float(queue_all.mean()),
    })
    return {
        "scenario_rows": scen_rows,
        "intersection_rows": inter_rows,
        "aggregate": aggregate,
    }


# -- artifact dumps -----------------------------------------------------------------


def collaborator_matrix_np(agent: CosLightAgent, obs: np.ndarray) -> np.ndarray:
    """Row-stochastic collaborator matrix for one joint observation."""
    if agent.fixed_ids is not None:
        m = np.zeros((agent.n, agent.n))
        for i, row in enumerate(agent.fixed_ids):
            m[i, row] = 1.0 / agent.k
        return m
    with no_grad():
        e_ir = agent.embed(obs[None])
        logits = agent.cos.logits(e_ir).numpy()[0]
    ex = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return ex / ex.sum(axis=-1, keepdims=True)


def dump_matrix(agent: CosLightAgent, scenario: Scenario, episodes: int,
                env_cfg: EnvConfig = EnvConfig(), seed: int = 0) -> List[list]:
    """Matrix rows at the start and end of each deterministic eval episode."""
    rows: List[list] = []
    env = TrafficEnv(scenario, env_cfg, seed=seed)
    controller = CosLightController(agent)
    steps = env.steps_per_episode
    for ep in range(episodes):
        obs = env.reset(seed * 100003 + ep)
        controller.reset(env)
        m_start = collaborator_matrix_np(agent, obs)
        for i in range(agent.n):
            rows.append([ep, "start", i] + list(m_start[i]))
        for _ in range(steps):
            acts = controller.actions(env, obs)
            obs, _, _, _ = env.step(acts)
        m_end = collaborator_matrix_np(agent, obs)
        for i in range(agent.n):
            rows.append([ep, "end", i] + list(m_end[i]))
    return rows


def dump_embeddings(agent: CosLightAgent, scenario: Scenario, episodes: int,
                    env_cfg: EnvConfig = EnvConfig(), seed: int = 0) -> List[list]:
    """One row per (episode, step, intersection) with the embedding values."""
    rows: List[list] = []
    env = TrafficEnv(scenario, env_cfg, seed=seed)
    controller = CosLightController(agent)
    steps = env.steps_per_episode
    for ep in range(episodes):
        obs = env.reset(seed * 100003 + ep)
        controller.reset(env)
        for step in range(steps):
            with no_grad():
                e_ir = agent.embed(obs[None]).numpy()[0]
            for i in range(agent.n):
                rows.append([ep, step, i] + list(e_ir[i]))
            acts = controller.actions(env, obs)
            obs, _, _, _ = env.step(acts)
    return rows
