"""Episodic hub-defense environment: 12 states, 4 actions, two-branch reward.

The state is how far the attacker's active chain has progressed (count
of chain events compromised, clamped to the state-space size). Four
actions: inject the attacker's next chain event, check access, monitor,
or block the attacker's next intended event (which may force a strategy
switch). The reward reads the episode's cumulative action counters and
the attack-proximity factor; it has a lenient branch while the
injection ratio stays below the configured threshold and an aggressive
branch at or above it. Proximity is latched at its episode high-water
mark so strategy switches never make it regress.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .attacker import Attacker
from .errors import ConfigurationError, ContractViolationError


class Action(IntEnum):
    INJECT = 0
    CHECK_ACCESS = 1
    MONITOR = 2
    BLOCK_TRIGGERS = 3


N_ACTIONS = 4


@dataclass(frozen=True)
class RewardParams:
    r_inject: float = 2.0
    r_check: float = 1.0
    r_monitor: float = 1.0
    r_block: float = 2.0
    injection_threshold: float = 0.25
    goal_reward: float = 10.0

    def __post_init__(self) -> None:
        vals = (self.r_inject, self.r_check, self.r_monitor, self.r_block,
                self.injection_threshold, self.goal_reward)
        if not all(np.isfinite(v) for v in vals):
            raise ConfigurationError("reward parameters must be finite")
        if not 0.0 <= self.injection_threshold <= 1.0:
            raise ConfigurationError("injection_threshold must lie in [0, 1]")


@dataclass
class ActionCounters:
    n_inject: int = 0
    n_check: int = 0
    n_monitor: int = 0
    n_block: int = 0

    def bump(self, action: Action) -> None:
        name = ("n_inject", "n_check", "n_monitor", "n_block")[int(action)]
        setattr(self, name, getattr(self, name) + 1)

    def total(self) -> int:
        return self.n_inject + self.n_check + self.n_monitor + self.n_block

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.n_inject, self.n_check, self.n_monitor, self.n_block)


def compute_reward(
    counters: ActionCounters,
    p: float,
    params: RewardParams,
    goal_compromised: bool,
) -> float:
    """Two-branch episodic reward over cumulative counters.

    ratio = n_inject * p / (n_inject + n_check), taken as 0 when the
    denominator is 0. Below the threshold the reward pays monitoring
    and charges the injection pressure term; at or above it, the reward
    is the block/monitor product term minus the worse of the
    check-access cost and the injection pressure. The goal stake enters
    only while the goal event is compromised.
    """
    if not 0.0 <= p <= 1.0:
        raise ConfigurationError(f"proximity {p} outside [0, 1]")
    ni, nc, nm, nb = (counters.n_inject, counters.n_check,
                      counters.n_monitor, counters.n_block)
    denom = ni + nc
    pressure = p * ni * params.r_inject / denom if denom else 0.0
    ratio = ni * p / denom if denom else 0.0
    g = params.goal_reward if goal_compromised else 0.0
    if ratio < params.injection_threshold:
        return nm * params.r_monitor - pressure - g
    pair = nb + nm
    product = (nb * params.r_block) * (nm * params.r_monitor) / pair if pair else 0.0
    return product - max(nc * params.r_check, pressure + g)


def proximity(compromised_count: int, chain_len: int) -> float:
    """Fraction of the active attack chain already compromised."""
    if chain_len <= 0:
        raise ConfigurationError("chain_len must be positive")
    if compromised_count > chain_len:
        raise ConfigurationError("compromised_count exceeds chain_len")
    return compromised_count / chain_len


def encode_state(state: int, width: int, n_states: int) -> np.ndarray:
    """One-hot feature vector, zero-padded to the network input width."""
    if width < n_states:
        raise ConfigurationError(f"encode width {width} < state count {n_states}")
    if not 0 <= state < n_states:
        raise ConfigurationError(f"state {state} outside [0, {n_states})")
    vec = np.zeros(width, dtype=np.float64)
    vec[state] = 1.0
    return vec


class HubEnv:
    """One defended hub episode loop around an Attacker instance.

    Episodes run for max_steps steps; when end_on_goal is set (the
    default) an episode also ends the moment the goal event is
    compromised. Stepping a finished episode is a contract violation.
    """

    def __init__(
        self,
        attacker: Attacker,
        goal: int,
        params: RewardParams | None = None,
        n_states: int = 12,
        max_steps: int = 100,
        encode_width: int = 128,
        end_on_goal: bool = True,
        seed: int = 0,
    ):
        if n_states < 2:
            raise ConfigurationError("need at least two states")
        if max_steps < 1:
            raise ConfigurationError("max_steps must be positive")
        if encode_width < n_states:
            raise ConfigurationError("encode_width must cover the state space")
        self.attacker = attacker
        self.goal = goal
        self.params = params or RewardParams()
        self.n_actions = N_ACTIONS
        self.n_states = n_states
        self.max_steps = max_steps
        self.encode_width = encode_width
        self.end_on_goal = end_on_goal
        self.seed = seed
        self.reset(seed)

    # -- episode protocol ----------------------------------------------------

    def reset(self, seed: int | None = None) -> int:
        if seed is not None:
            self.seed = seed
        self.counters = ActionCounters()
        self.compromised: set[int] = set()
        self.p = 0.0
        self.step_count = 0
        self.done = False
        self.attacker.reset()
        return self._state()

    def _chain_progress(self) -> int:
        chain = set(self.attacker.active_chain)
        return len(self.compromised & chain)

    def _state(self) -> int:
        return min(self._chain_progress(), self.n_states - 1)

    @property
    def goal_compromised(self) -> bool:
        return self.goal in self.compromised

    def step(self, action: Action | int) -> tuple[int, float, bool, dict]:
        if self.done:
            raise ContractViolationError("step() called on a finished episode")
        action = Action(action)
        self.counters.bump(action)
        switched = False
        if action == Action.INJECT:
            event = self.attacker.next_injection()
            if event is not None:
                self.compromised.add(event)
                self.attacker.confirm_injection(event)
        elif action == Action.BLOCK_TRIGGERS:
            target = self.attacker.next_injection()
            if target is not None:
                switched = self.attacker.on_block(target)
        # CHECK_ACCESS and MONITOR only move the counters

        self.p = max(self.p, proximity(self._chain_progress(),
                                       len(self.attacker.active_chain)))
        self.step_count += 1
        reward = compute_reward(self.counters, self.p, self.params,
                                self.goal_compromised)
        self.done = self.step_count >= self.max_steps or (
            self.end_on_goal and self.goal_compromised
        )
        info = {
            "counters": self.counters.as_tuple(),
            "p": self.p,
            "goal_compromised": self.goal_compromised,
            "strategy_switched": switched,
            "attacker_exhausted": self.attacker.exhausted,
        }
        return self._state(), reward, self.done, info

    def encode(self, state: int) -> np.ndarray:
        return encode_state(state, self.encode_width, self.n_states)
