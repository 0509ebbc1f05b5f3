"""Dueling double deep-Q agent for the gate-control environment.

The default target rule is true double-Q (action chosen by the online
net, valued by the target net); ``target_rule="paper-literal"`` uses
max_a Q_target instead.  Learning fires once per episode by default
(``learn_timing="episode"``); a per-step mode exists for ablations.
Exploration is epsilon-greedy with a linear decay schedule.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import GateEnv
from .net import AdamOptimizer, DuelingNet
from .quantum import ControlTask, fidelity, log_infidelity
from .replay import Experience, PrioritizedReplay

TARGET_RULES = ("double", "paper-literal")
LEARN_TIMINGS = ("episode", "step")


class TrainingDiverged(RuntimeError):
    pass


def _as_widths(value, name: str) -> tuple[int, ...]:
    """Normalize a layer-width spec: a bare int means one layer, a string
    may be comma separated (the CLI passes "32,32" through unparsed)."""
    if isinstance(value, (int, np.integer)):
        value = (value,)
    elif isinstance(value, str):
        value = value.split(",")
    try:
        widths = tuple(int(w) for w in value)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be an int or a sequence of ints, "
                         f"got {value!r}") from None
    if not widths or any(w < 1 for w in widths):
        raise ValueError(f"{name} needs at least one positive width, "
                         f"got {widths}")
    return widths


@dataclass
class TrainConfig:
    """Hyperparameters; defaults follow the Hadamard-task settings."""

    episodes: int = 50_000
    batch_size: int = 72
    gamma: float = 0.95
    target_update_period: int = 100
    learning_rate: float = 0.001
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.6
    learn_timing: str = "episode"
    target_rule: str = "double"
    replay_capacity: int = 100_000
    per_alpha: float = 0.6
    per_beta_start: float = 0.4
    per_beta_end: float = 1.0
    per_eps: float = 1e-6
    encoder_widths: tuple[int, ...] = (600, 600, 600)
    head_widths: tuple[int, ...] = (600, 600, 600, 600)
    aggregation: str = "mean"
    seed: int = 0

    def __post_init__(self):
        self.encoder_widths = _as_widths(self.encoder_widths, "encoder_widths")
        self.head_widths = _as_widths(self.head_widths, "head_widths")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.target_update_period < 1:
            raise ValueError("target_update_period must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.target_rule not in TARGET_RULES:
            raise ValueError(f"target_rule must be one of {TARGET_RULES}")
        if self.learn_timing not in LEARN_TIMINGS:
            raise ValueError(f"learn_timing must be one of {LEARN_TIMINGS}")

    @classmethod
    def for_gate(cls, gate: str, **overrides) -> "TrainConfig":
        """Per-gate defaults: minibatch 72 / 128, episodes 50k / 150k."""
        if gate == "cnot":
            overrides.setdefault("batch_size", 128)
            overrides.setdefault("episodes", 150_000)
        return cls(**overrides)

    def epsilon_at(self, episode: int) -> float:
        """Linear decay from epsilon_start to epsilon_end over the first
        epsilon_decay_fraction of episodes, then constant."""
        horizon = max(1, int(self.epsilon_decay_fraction * self.episodes))
        if episode >= horizon:
            return self.epsilon_end
        frac = episode / horizon
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac


def select_action(net: DuelingNet, obs: np.ndarray, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy over Q(s, .); greedy ties break to the lowest index."""
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(net.n_actions))
    return int(np.argmax(net.forward(obs)))


def compute_targets(eval_net: DuelingNet, target_net: DuelingNet,
                    obs_next: np.ndarray, rewards: np.ndarray,
                    terminal: np.ndarray, gamma: float,
                    rule: str = "double") -> np.ndarray:
    """TD targets y_i: terminal samples get their reward; otherwise
    r + gamma * Q_target at the argmax action (online net for "double",
    target net itself for "paper-literal")."""
    if rule not in TARGET_RULES:
        raise ValueError(f"target rule must be one of {TARGET_RULES}")
    rewards = np.asarray(rewards, dtype=np.float64)
    terminal = np.asarray(terminal, dtype=bool)
    if len(rewards) == 0:
        raise ValueError("empty batch")
    y = rewards.copy()
    live = ~terminal
    if np.any(live):
        q_target = target_net.forward(obs_next[live])
        if rule == "double":
            picks = np.argmax(eval_net.forward(obs_next[live]), axis=1)
            bootstrap = q_target[np.arange(len(picks)), picks]
        else:
            bootstrap = q_target.max(axis=1)
        y[live] += gamma * bootstrap
    return y


@dataclass
class EpisodeRecord:
    episode: int
    fidelity: float
    log_infidelity: float
    epsilon: float
    loss: float | None


@dataclass
class TrainReport:
    best_protocol: np.ndarray
    best_fidelity: float
    best_log_infidelity: float
    episodes: list[EpisodeRecord] = field(repr=False)
    learn_events: int
    config: TrainConfig

    def fidelity_series(self) -> np.ndarray:
        return np.array([rec.fidelity for rec in self.episodes])


def _stack_batch(items: list[Experience]):
    obs = np.stack([e.s for e in items])
    actions = np.array([e.a for e in items], dtype=np.int64)
    rewards = np.array([e.r for e in items])
    obs_next = np.stack([e.s_next for e in items])
    terminal = np.array([e.terminal for e in items], dtype=bool)
    return obs, actions, rewards, obs_next, terminal


def train(task: ControlTask, cfg: TrainConfig, episode_callback=None,
          checkpoint_path=None) -> TrainReport:
    """Run the full episode loop and return the best protocol ever seen.

    ``episode_callback`` (if given) receives one dict per episode with
    keys {episode, terminal_fidelity, L, epsilon, loss}; the harness
    uses it to stream the learning curve to disk.  A non-finite loss
    aborts with TrainingDiverged after writing ``checkpoint_path``.
    """
    root = np.random.SeedSequence(cfg.seed)
    seed_init, seed_explore, seed_replay = root.spawn(3)
    env = GateEnv(task)
    eval_net = DuelingNet(env.observation_size, task.n_actions,
                          encoder=cfg.encoder_widths, heads=cfg.head_widths,
                          aggregation=cfg.aggregation,
                          seed=int(seed_init.generate_state(1)[0]))
    target_net = eval_net.clone()
    adam = AdamOptimizer(eval_net.parameters(), learning_rate=cfg.learning_rate)
    replay = PrioritizedReplay(cfg.replay_capacity, alpha=cfg.per_alpha,
                               beta=cfg.per_beta_start, eps_priority=cfg.per_eps,
                               seed=int(seed_replay.generate_state(1)[0]))
    rng = np.random.default_rng(int(seed_explore.generate_state(1)[0]))

    best_fidelity = -1.0
    best_protocol = None
    learn_events = 0
    records: list[EpisodeRecord] = []
    last_loss: float | None = None

    def learn() -> None:
        nonlocal learn_events, last_loss
        if len(replay) < cfg.batch_size:
            return
        items, leaves, weights = replay.sample(cfg.batch_size)
        obs, actions, rewards, obs_next, terminal = _stack_batch(items)
        targets = compute_targets(eval_net, target_net, obs_next, rewards,
                                  terminal, cfg.gamma, rule=cfg.target_rule)
        try:
            loss, abs_td = eval_net.train_step(obs, actions, targets, weights, adam)
        except ValueError as exc:
            if checkpoint_path is not None:
                eval_net.save(checkpoint_path, adam, seed=cfg.seed, step=adam.t)
            raise TrainingDiverged(str(exc)) from exc
        replay.update_priorities(leaves, abs_td)
        last_loss = loss
        learn_events += 1
        if learn_events % cfg.target_update_period == 0:
            target_net.copy_from(eval_net)

    for episode in range(cfg.episodes):
        epsilon = cfg.epsilon_at(episode)
        # Anneal the importance-sampling exponent linearly over training.
        replay.beta = cfg.per_beta_start + (cfg.per_beta_end - cfg.per_beta_start) * (
            episode / max(1, cfg.episodes - 1))
        obs = env.reset()
        actions_taken = np.empty(task.steps, dtype=np.int64)
        for t in range(task.steps):
            a = select_action(eval_net, obs, epsilon, rng)
            result = env.step(a)
            replay.store(Experience(obs, a, result.reward, result.observation,
                                    result.done))
            actions_taken[t] = a
            obs = result.observation
            if cfg.learn_timing == "step":
                learn()
        if cfg.learn_timing == "episode":
            learn()

        f = fidelity(env.unitary, task.target)
        ell = log_infidelity(f)
        if f > best_fidelity:
            best_fidelity = f
            best_protocol = actions_taken.copy()
        records.append(EpisodeRecord(episode, f, ell, epsilon, last_loss))
        if episode_callback is not None:
            episode_callback({"episode": episode, "terminal_fidelity": f,
                              "L": ell, "epsilon": epsilon, "loss": last_loss})

    if checkpoint_path is not None:
        eval_net.save(checkpoint_path, adam, seed=cfg.seed, step=adam.t)
    return TrainReport(
        best_protocol=best_protocol,
        best_fidelity=best_fidelity,
        best_log_infidelity=log_infidelity(best_fidelity),
        episodes=records,
        learn_events=learn_events,
        config=cfg,
    )
