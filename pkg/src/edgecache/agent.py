"""Double-DQN policy selector.

Every ``decision_requests`` requests the agent looks at the virtual caches'
recent hit ratios plus two context features (popularity churn, request
volume) and picks which ensemble policy controls the primary cache next.
Training rewards emulate the offline-optimal eviction rule: at every request
where any virtual cache evicts, the policies' eviction candidates are ranked
by how far in the future their next request lies, and the selected policy
banks its rank score. Learning uses an online and a less-frequently-copied
target network.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .cache import Cache
from .errors import ConfigError
from .nnet import Adam, LstmNetwork, huber, load_checkpoint, save_checkpoint
from .policies.base import FifPolicy, Policy
from .policies.lstm_int import lstm_int_from_payload, lstm_int_payload
from .policies.lstm_req import lstm_req_from_payload, lstm_req_payload
from .rng import substream
from .traces import Trace
from .virtual_bank import SLOT_REQUESTS, WINDOW_SLOTS, VirtualCacheBank

OVERLAP_WINDOW = 1000  # requests per popularity window
TOP_K = 100
VOLUME_SECONDS = 300.0  # "previous five minutes" of simulated time


@dataclass(frozen=True, eq=False)
class SelectorState:
    """Observation: (window_slots x |E|) hit-ratio matrix + 2 context scalars."""

    hit_matrix: np.ndarray
    overlap: float
    volume: float

    def __post_init__(self):
        if self.hit_matrix.ndim != 2:
            raise ConfigError(f"hit matrix must be 2-D, got shape {self.hit_matrix.shape}")

    @property
    def dimension(self) -> int:
        return self.hit_matrix.size + 2

    def vector(self) -> np.ndarray:
        return np.concatenate([self.hit_matrix.ravel(), [self.overlap, self.volume]])


@dataclass(frozen=True, eq=False)
class Experience:
    state: SelectorState
    action: int
    reward: float
    next_state: SelectorState


def top_frequent_items(items: Sequence[str], k: int = TOP_K) -> set[str]:
    """The k most frequent items; frequency ties break lexicographically."""
    counts = Counter(items)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return {item for item, _ in ranked[:k]}


def build_state(
    hit_matrix: np.ndarray,
    item_seq: Sequence[str],
    ts_array: np.ndarray,
    upto: int,
    volume_cap: float,
) -> SelectorState:
    """Observation after the first ``upto`` requests have been processed.

    Overlap is the (top-100 by frequency) set intersection of the two most
    recent disjoint 1000-request windows, 0 before 2000 requests were seen.
    Volume is the log-scaled count of requests in the trailing five minutes
    of simulated time, clipped by the cap learned in training.
    """
    if upto >= 2 * OVERLAP_WINDOW:
        older = item_seq[upto - 2 * OVERLAP_WINDOW : upto - OVERLAP_WINDOW]
        newer = item_seq[upto - OVERLAP_WINDOW : upto]
        common = top_frequent_items(older) & top_frequent_items(newer)
        overlap = len(common) / TOP_K
    else:
        overlap = 0.0
    if upto > 0:
        now = float(ts_array[upto - 1])
        start = np.searchsorted(ts_array[:upto], now - VOLUME_SECONDS, side="right")
        count = int(upto - start)
        volume = min(1.0, np.log1p(count) / np.log1p(max(volume_cap, 1.0)))
    else:
        volume = 0.0
    return SelectorState(hit_matrix, float(overlap), float(volume))


def max_trailing_volume(ts_array: np.ndarray, boundaries: Sequence[int]) -> int:
    """Largest trailing-5-minute request count over the decision boundaries."""
    best = 1
    for i in boundaries:
        if i <= 0:
            continue
        now = float(ts_array[i - 1])
        start = np.searchsorted(ts_array[:i], now - VOLUME_SECONDS, side="right")
        best = max(best, int(i - start))
    return best


def fif_rank_scores(candidate_scores: Sequence[float | None]) -> list[float]:
    """Rank scores for one eviction event.

    ``candidate_scores[k]`` is policy k's candidate's oracle score (now minus
    its next arrival; -inf when never requested again) or None when that
    policy's virtual cache had no eviction. The lowest score earns |E|-1,
    ties share (competition style), and candidate-less policies receive the
    mean of the assigned scores.
    """
    n = len(candidate_scores)
    present = [s for s in candidate_scores if s is not None]
    if not present:
        return [0.0] * n
    assigned: list[float | None] = []
    for s in candidate_scores:
        if s is None:
            assigned.append(None)
        else:
            assigned.append(float(n - 1 - sum(1 for t in present if t < s)))
    mean_score = sum(a for a in assigned if a is not None) / len(present)
    return [mean_score if a is None else a for a in assigned]


@dataclass
class AgentConfig:
    """Selector hyperparameters (defaults are the shipped configuration)."""

    decision_requests: int = 100
    sync_requests: int = 10_000
    gamma: float = 0.9
    lr: float = 3e-3
    epsilon_start: float = 1.0
    epsilon_final: float = 0.05
    epsilon_anneal_frac: float = 0.5
    buffer_size: int = 10_000
    batch_size: int = 32
    target_copy_every: int = 200
    lstm_hidden: int = 64
    head_hidden: int = 64
    passes: int = 3
    reward_scale: float | None = None  # default: 1 / (decision_requests * (|E|-1))

    def epsilon_at(self, decision_idx: int, total_decisions: int) -> float:
        anneal = max(1, int(total_decisions * self.epsilon_anneal_frac))
        frac = min(1.0, decision_idx / anneal)
        return self.epsilon_start + (self.epsilon_final - self.epsilon_start) * frac


def ddqn_targets(rewards: np.ndarray, q_next_online: np.ndarray, q_next_target: np.ndarray, gamma: float) -> np.ndarray:
    """y = r + gamma * Q_target(s', argmax_a Q_online(s', a))."""
    best_next = np.argmax(q_next_online, axis=1)
    return rewards + gamma * q_next_target[np.arange(len(rewards)), best_next]


class SelectorAgent:
    """Online/target Q-networks over SelectorState observations."""

    def __init__(self, ensemble_ids: Sequence[str], config: AgentConfig | None = None, *, seed: int = 0):
        if len(ensemble_ids) < 2:
            raise ConfigError(f"an ensemble needs at least 2 policies, got {list(ensemble_ids)}")
        self.ensemble_ids = list(ensemble_ids)
        self.config = config or AgentConfig()
        self.num_actions = len(self.ensemble_ids)
        self.state_dim = WINDOW_SLOTS * self.num_actions + 2
        cfg = self.config
        self.reward_scale = (
            cfg.reward_scale
            if cfg.reward_scale is not None
            else 1.0 / (cfg.decision_requests * (self.num_actions - 1))
        )
        init_rng = substream(seed, "agent-init")
        arch = (self.num_actions, cfg.lstm_hidden, 2, [cfg.head_hidden, self.num_actions], ["relu", "identity"])
        self.online = LstmNetwork(*arch, name="q", rng=init_rng)
        self.target = LstmNetwork(*arch, name="q", rng=substream(seed, "agent-target-scratch"))
        self.target.copy_params_from(self.online)
        self.optimizer = Adam(lr=cfg.lr)
        self.train_steps = 0

    def _check_state(self, state: SelectorState) -> None:
        if state.dimension != self.state_dim:
            raise ConfigError(f"state dimension {state.dimension} != expected {self.state_dim}")

    def q_values(self, state: SelectorState) -> np.ndarray:
        self._check_state(state)
        out, _ = self.online.forward(state.hit_matrix[None, :, :], np.array([[state.overlap, state.volume]]))
        return out[0]

    def select(self, state: SelectorState, *, epsilon: float = 0.0, rng: np.random.Generator | None = None) -> int:
        """Greedy action (ties -> lowest index); epsilon-greedy when asked."""
        if epsilon > 0.0:
            if rng is None:
                raise ConfigError("epsilon-greedy selection needs a random generator")
            if rng.random() < epsilon:
                return int(rng.integers(self.num_actions))
        return int(np.argmax(self.q_values(state)))

    def _batch_inputs(self, states: Sequence[SelectorState]):
        seq = np.stack([s.hit_matrix for s in states])
        extra = np.array([[s.overlap, s.volume] for s in states], dtype=np.float64)
        return seq, extra

    def train_step(self, batch: Sequence[Experience]) -> float:
        """One optimizer step on the online network from a replay batch."""
        cfg = self.config
        for exp in batch:
            self._check_state(exp.state)
            self._check_state(exp.next_state)
            if not 0 <= exp.action < self.num_actions:
                raise ConfigError(f"action {exp.action} out of range for ensemble of {self.num_actions}")
        seq, extra = self._batch_inputs([e.state for e in batch])
        nseq, nextra = self._batch_inputs([e.next_state for e in batch])
        actions = np.array([e.action for e in batch])
        rewards = np.array([e.reward for e in batch], dtype=np.float64) * self.reward_scale

        q_next_online, _ = self.online.forward(nseq, nextra)
        q_next_target, _ = self.target.forward(nseq, nextra)
        targets = ddqn_targets(rewards, q_next_online, q_next_target, cfg.gamma)

        q, cache = self.online.forward(seq, extra)
        rows = np.arange(len(batch))
        pred = q[rows, actions]
        loss, dpred = huber(pred, targets, delta=1.0)
        dq = np.zeros_like(q)
        dq[rows, actions] = dpred
        grads = self.online.backward(cache, dq)
        self.optimizer.step(self.online.params(), grads)
        self.train_steps += 1
        if self.train_steps % cfg.target_copy_every == 0:
            self.target.copy_params_from(self.online)
        return loss


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass
class DecisionLogRow:
    decision_idx: int
    epsilon: float
    reward: float
    loss: float | None
    selected_policy: str


@dataclass
class TrainResult:
    agent: SelectorAgent
    log: list[DecisionLogRow]
    volume_cap: int


@dataclass
class _Pending:
    state: SelectorState
    action: int
    epsilon: float
    decision_idx: int
    reward: float = 0.0


def train_selector(
    trace: Trace,
    policy_factory,
    ensemble_ids: Sequence[str],
    capacity: int,
    *,
    config: AgentConfig | None = None,
    seed: int = 0,
) -> TrainResult:
    """Run the full training loop over the trace (``config.passes`` times).

    ``policy_factory()`` must return a fresh list of policies matching
    ``ensemble_ids``; policy bookkeeping is stateful, so each pass replays
    the trace against new instances. The future-request oracle is only used
    here, never at evaluation time.
    """
    cfg = config or AgentConfig()
    requests = list(trace.requests)
    num_requests = len(requests)
    decisions_per_pass = -(-num_requests // cfg.decision_requests)  # ceil
    if decisions_per_pass < 1:
        raise ConfigError(f"trace of {num_requests} requests is too short to train on")
    total_decisions = decisions_per_pass * cfg.passes

    item_seq = [r.item_id for r in requests]
    ts_array = trace.timestamps()
    boundaries = list(range(0, num_requests, cfg.decision_requests))
    volume_cap = max_trailing_volume(ts_array, boundaries)

    agent = SelectorAgent(ensemble_ids, cfg, seed=seed)
    eps_rng = substream(seed, "agent-epsilon")
    replay_rng = substream(seed, "agent-replay")
    buffer: deque[Experience] = deque(maxlen=cfg.buffer_size)
    log: list[DecisionLogRow] = []
    decision_counter = 0

    for _ in range(cfg.passes):
        policies = policy_factory()
        if [p.policy_id for p in policies] != list(ensemble_ids):
            raise ConfigError("policy factory output does not match the ensemble ids")
        oracle = FifPolicy(trace)
        primary = Cache(capacity)
        bank = VirtualCacheBank(policies, capacity, slot_requests=SLOT_REQUESTS, window_slots=WINDOW_SLOTS)
        pending: _Pending | None = None

        def close_decision(next_state: SelectorState) -> None:
            nonlocal pending
            buffer.append(Experience(pending.state, pending.action, pending.reward, next_state))
            loss = None
            if len(buffer) >= cfg.batch_size:
                idx = replay_rng.choice(len(buffer), size=cfg.batch_size, replace=False)
                loss = agent.train_step([buffer[int(j)] for j in idx])
            log.append(
                DecisionLogRow(
                    pending.decision_idx,
                    pending.epsilon,
                    pending.reward,
                    loss,
                    ensemble_ids[pending.action],
                )
            )

        for i, req in enumerate(requests):
            if i % cfg.decision_requests == 0:
                state = build_state(bank.hit_ratio_features(), item_seq, ts_array, i, volume_cap)
                if pending is not None:
                    close_decision(state)
                epsilon = cfg.epsilon_at(decision_counter, total_decisions)
                action = agent.select(state, epsilon=epsilon, rng=eps_rng)
                pending = _Pending(state, action, epsilon, decision_counter)
                decision_counter += 1

            ts, item = req.timestamp, req.item_id
            for p in policies:
                p.observe(ts, item)
            oracle.observe(ts, item)
            primary.process(ts, item, policies[pending.action])
            outcomes = bank.process_request(ts, item)
            # ranking event: any policy's hypothetical (virtual) processing evicted
            if any(o.evicted is not None for o in outcomes):
                cand_scores = [
                    None if o.evicted is None else oracle.score(o.evicted, ts) for o in outcomes
                ]
                pending.reward += fif_rank_scores(cand_scores)[pending.action]
            if (i + 1) % cfg.sync_requests == 0:
                bank.sync_to_primary(primary.items_by_insertion())

        # last decision of the pass has no successor state; log it untrained
        if pending is not None:
            log.append(
                DecisionLogRow(pending.decision_idx, pending.epsilon, pending.reward, None, ensemble_ids[pending.action])
            )
    return TrainResult(agent, log, volume_cap)


# ---------------------------------------------------------------------------
# Agent checkpoints: network weights + ensemble + normalization + any
# trained policy models, in one file.
# ---------------------------------------------------------------------------


def save_agent(
    path,
    agent: SelectorAgent,
    *,
    volume_cap: int,
    models: Mapping[str, object] | None = None,
) -> None:
    model_meta = {}
    arrays: list[tuple[str, np.ndarray]] = [(f"online.{n}", a) for n, a in agent.online.params()]
    for pid, model in (models or {}).items():
        if pid == "lstm-int" or pid.startswith("lstm-int"):
            meta, params = lstm_int_payload(model)
        else:
            meta, params = lstm_req_payload(model)
        model_meta[pid] = meta
        arrays.extend((f"model.{pid}.{n}", a) for n, a in params)
    meta = {
        "kind": "cec-agent",
        "ensemble": agent.ensemble_ids,
        "volume_cap": volume_cap,
        "config": asdict(agent.config),
        "models": model_meta,
    }
    save_checkpoint(path, meta, arrays)


def load_agent(path) -> tuple[SelectorAgent, int, dict[str, object]]:
    """Rebuild (agent, volume_cap, models) from a checkpoint."""
    meta, arrays = load_checkpoint(path)
    if meta.get("kind") != "cec-agent":
        raise ConfigError(f"{path}: not an agent checkpoint")
    cfg = AgentConfig(**meta["config"])
    agent = SelectorAgent(meta["ensemble"], cfg, seed=0)
    for name, arr in agent.online.params():
        arr[...] = arrays[f"online.{name}"]
    agent.target.copy_params_from(agent.online)
    models: dict[str, object] = {}
    for pid, model_meta in meta.get("models", {}).items():
        prefix = f"model.{pid}."
        params = {name[len(prefix) :]: arr for name, arr in arrays.items() if name.startswith(prefix)}
        if model_meta["kind"] == "lstm-int":
            models[pid] = lstm_int_from_payload(model_meta, params)
        else:
            models[pid] = lstm_req_from_payload(model_meta, params)
    return agent, int(meta["volume_cap"]), models
