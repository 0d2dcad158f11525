"""Deep Q-learning defense agent built on the hand-rolled nn module.

Replay memory, epsilon-greedy selection over the online network,
temporal-difference error against a hard-synced target network, Huber
loss minimized with Adam, and an episodic training loop that records
per-episode reward, action counts, and the wall-clock overhead of
decision-making (action selection + replay sampling + training step).
Everything is driven by numpy Generators derived from one seed, so a
run is bit-reproducible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .nn import (
    AdamState,
    Mlp,
    adam_step,
    huber,
    make_mlp,
    mlp_backward,
    mlp_forward,
)

EPS_MULTIPLICATIVE = "multiplicative_per_step"
EPS_EXPONENTIAL = "exponential_time_constant"


@dataclass(frozen=True)
class EpsilonSchedule:
    """Exploration anneal; t is the global environment step count."""

    start: float = 1.0
    end: float = 0.1
    decay: float = 0.99999
    mode: str = EPS_MULTIPLICATIVE

    def __post_init__(self) -> None:
        if not 0.0 <= self.end <= self.start <= 1.0:
            raise ConfigurationError("need 0 <= end <= start <= 1")
        if self.mode == EPS_MULTIPLICATIVE and not 0.0 < self.decay <= 1.0:
            raise ConfigurationError("per-step decay factor must lie in (0, 1]")
        if self.mode == EPS_EXPONENTIAL and self.decay <= 0.0:
            raise ConfigurationError("time constant must be positive")
        if self.mode not in (EPS_MULTIPLICATIVE, EPS_EXPONENTIAL):
            raise ConfigurationError(f"unknown epsilon mode '{self.mode}'")


def epsilon_at(schedule: EpsilonSchedule, t: int) -> float:
    if t < 0:
        raise ConfigurationError("step count must be non-negative")
    if schedule.mode == EPS_MULTIPLICATIVE:
        return max(schedule.end, schedule.start * schedule.decay**t)
    span = schedule.start - schedule.end
    return schedule.end + span * float(np.exp(-t / schedule.decay))


@dataclass(frozen=True)
class Transition:
    state: int
    action: int
    next_state: int
    reward: float
    done: bool


class ReplayBuffer:
    """Fixed-capacity ring; oldest transitions evicted first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigurationError("buffer capacity must be positive")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, item: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._cursor] = item
        self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, batch: int, rng: np.random.Generator) -> list[Transition] | None:
        """Uniform without replacement; None while underfilled."""
        if len(self._items) < batch:
            return None
        idx = rng.choice(len(self._items), size=batch, replace=False)
        return [self._items[int(i)] for i in idx]


@dataclass
class QNetworks:
    online: Mlp
    target: Mlp


def make_q_networks(sizes: list[int], rng: np.random.Generator) -> QNetworks:
    online = make_mlp(sizes, rng)
    return QNetworks(online=online, target=online.copy())


def sync_target(nets: QNetworks) -> None:
    """Hard copy: target becomes bitwise-identical to online."""
    nets.target.load_from(nets.online)


def n_actions_of(nets: QNetworks) -> int:
    return int(nets.online.layers[-1].bias.size)


def _one_hot(states: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros((states.size, width), dtype=np.float64)
    out[np.arange(states.size), states] = 1.0
    return out


def select_action(
    nets: QNetworks, encoded_state: np.ndarray, epsilon: float,
    rng: np.random.Generator,
) -> int:
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigurationError("epsilon must lie in [0, 1]")
    n = n_actions_of(nets)
    if rng.random() < epsilon:
        return int(rng.integers(n))
    q, _ = mlp_forward(nets.online, encoded_state)
    return int(np.argmax(q))  # argmax takes the lowest index on ties


def _batch_arrays(batch: list[Transition], width: int):
    states = _one_hot(np.array([t.state for t in batch]), width)
    nexts = _one_hot(np.array([t.next_state for t in batch]), width)
    actions = np.array([t.action for t in batch], dtype=np.intp)
    rewards = np.array([t.reward for t in batch], dtype=np.float64)
    live = np.array([0.0 if t.done else 1.0 for t in batch], dtype=np.float64)
    return states, actions, rewards, nexts, live


def td_error(
    batch: list[Transition], nets: QNetworks, gamma: float
) -> np.ndarray:
    """delta_j = r_j + gamma * max_a' Qtarget(s'_j) - Qonline(s_j, a_j);
    done transitions drop the bootstrap term."""
    if not batch:
        raise ConfigurationError("td_error needs a non-empty batch")
    width = int(nets.online.layers[0].weights.shape[1])
    states, actions, rewards, nexts, live = _batch_arrays(batch, width)
    q_next, _ = mlp_forward(nets.target, nexts)
    boot = gamma * live * q_next.max(axis=1)
    q_online, _ = mlp_forward(nets.online, states)
    taken = q_online[np.arange(len(batch)), actions]
    return rewards + boot - taken


def td_loss_and_grads(
    nets: QNetworks, batch: list[Transition], gamma: float
) -> tuple[float, list[np.ndarray]]:
    """Mean Huber TD loss and its gradient w.r.t. the online parameters.

    The bootstrap branch through the target network is a constant;
    gradient flows only through Q(s_j, a_j) of the taken actions.
    """
    width = int(nets.online.layers[0].weights.shape[1])
    states, actions, rewards, nexts, live = _batch_arrays(batch, width)
    q_next, _ = mlp_forward(nets.target, nexts)
    boot = gamma * live * q_next.max(axis=1)
    q_online, cache = mlp_forward(nets.online, states)
    taken = q_online[np.arange(len(batch)), actions]
    delta = rewards + boot - taken
    loss, dldelta = huber(delta)
    # d delta / d Q(s_j, a_j) = -1; only the taken entries carry gradient
    dq = np.zeros_like(q_online)
    dq[np.arange(len(batch)), actions] = -dldelta / len(batch)
    grads = mlp_backward(nets.online, cache, dq)
    return float(loss.mean()), grads


def train_step(
    nets: QNetworks, adam: AdamState, batch: list[Transition], gamma: float
) -> float:
    """One Adam step on the mean Huber TD loss; returns the loss."""
    loss, grads = td_loss_and_grads(nets, batch, gamma)
    adam_step(adam, nets.online.params(), grads)
    nets.online.mark_updated()
    return loss


@dataclass(frozen=True)
class DqnConfig:
    gamma: float = 0.95
    alpha: float = 1e-4
    tau: int = 20
    batch_size: int = 16
    episodes: int = 250
    epochs_per_episode: int = 100
    buffer_capacity: int = 50_000
    hidden: tuple[int, ...] = (64, 32)
    seed: int = 0
    epsilon: EpsilonSchedule = field(default_factory=EpsilonSchedule)

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigurationError("gamma must lie in [0, 1]")
        if self.batch_size > self.buffer_capacity:
            raise ConfigurationError("batch_size cannot exceed buffer capacity")
        if self.alpha <= 0:
            raise ConfigurationError("alpha must be positive")
        if min(self.tau, self.batch_size, self.epochs_per_episode) < 1:
            raise ConfigurationError("tau, batch_size, epochs_per_episode >= 1")
        if self.episodes < 0:
            raise ConfigurationError("episodes must be non-negative")


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int  # 1-based
    total_reward: float
    time_overhead_s: float
    n_inject: int
    n_check: int
    n_monitor: int
    n_block: int
    epsilon: float


@dataclass
class TrainResult:
    nets: QNetworks
    records: list[EpisodeRecord]
    sync_episodes: list[int]


def train(env, config: DqnConfig) -> TrainResult:
    """Episodic DQN training against any env with the step/reset protocol.

    The env contract: reset() -> state id, step(action) -> (next id,
    reward, done, info with a 4-tuple under "counters"), encode(id) ->
    feature vector. Time overhead per episode covers action selection,
    replay sampling, and the network update only.
    """
    streams = np.random.SeedSequence(config.seed).spawn(3)
    net_rng = np.random.default_rng(streams[0])
    action_rng = np.random.default_rng(streams[1])
    sample_rng = np.random.default_rng(streams[2])

    width = env.encode_width
    sizes = [width, *config.hidden, n_env_actions(env)]
    nets = make_q_networks(sizes, net_rng)
    adam = AdamState.for_params(nets.online.params(), alpha=config.alpha)
    buffer = ReplayBuffer(config.buffer_capacity)

    records: list[EpisodeRecord] = []
    sync_episodes: list[int] = []
    global_step = 0
    for ep in range(config.episodes):
        state = env.reset()
        total = 0.0
        overhead = 0.0
        counters = (0, 0, 0, 0)
        for _ in range(config.epochs_per_episode):
            eps = epsilon_at(config.epsilon, global_step)
            t0 = time.perf_counter()
            action = select_action(nets, env.encode(state), eps, action_rng)
            overhead += time.perf_counter() - t0
            next_state, reward, done, info = env.step(action)
            buffer.push(Transition(state, action, next_state, reward, done))
            t0 = time.perf_counter()
            batch = buffer.sample(config.batch_size, sample_rng)
            if batch is not None:
                train_step(nets, adam, batch, config.gamma)
            overhead += time.perf_counter() - t0
            total += reward
            counters = info["counters"]
            state = next_state
            global_step += 1
            if done:
                break
        records.append(EpisodeRecord(
            episode=ep + 1,
            total_reward=total,
            time_overhead_s=overhead,
            n_inject=counters[0],
            n_check=counters[1],
            n_monitor=counters[2],
            n_block=counters[3],
            epsilon=epsilon_at(config.epsilon, global_step),
        ))
        if (ep + 1) % config.tau == 0:
            sync_target(nets)
            sync_episodes.append(ep + 1)
    return TrainResult(nets=nets, records=records, sync_episodes=sync_episodes)


def n_env_actions(env) -> int:
    return getattr(env, "n_actions", 4)


def enforce(nets: QNetworks, env) -> list[tuple[int, int, float]]:
    """One greedy (epsilon = 0) episode; returns (state, action, reward) rows."""
    trace = []
    state = env.reset()
    done = False
    while not done:
        q, _ = mlp_forward(nets.online, env.encode(state))
        action = int(np.argmax(q))
        next_state, reward, done, _ = env.step(action)
        trace.append((state, action, reward))
        state = next_state
    return trace


def discounted_return(rewards, gamma: float) -> float:
    """Sum of gamma^t * r_t, evaluated right-to-left (Horner form)."""
    if not 0.0 <= gamma <= 1.0:
        raise ConfigurationError("gamma must lie in [0, 1]")
    acc = 0.0
    for r in reversed(list(rewards)):
        acc = float(r) + gamma * acc
    return acc
