"""Adaptive adversary that replays exploit sequences from a strategy pool.

The attacker owns a pool of precomputed strategies (ordered exploit
sequences that reach the goal event). It always plays the cheapest
feasible one: injection proceeds event by event along the active
strategy, and when the defender blocks an event the strategy still
needs, the attacker switches to the pool strategy with the fewest
remaining injections that avoids every blocked event. When no such
strategy exists the attacker is exhausted and stays silent for the
rest of the episode. Blocks are episode-scoped: reset clears them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigurationError
from .graph import AttackDependencyGraph, chain_events

POOL_HEADER = "strategies"


@dataclass(frozen=True)
class AttackStrategy:
    id: int
    start: int
    exploits: tuple[int, ...]
    events: tuple[int, ...]  # start followed by each exploit's effect

    @classmethod
    def from_exploits(
        cls, strategy_id: int, graph: AttackDependencyGraph, start: int,
        exploits: tuple[int, ...],
    ) -> "AttackStrategy":
        return cls(strategy_id, start, tuple(exploits),
                   chain_events(graph, start, exploits))


class Attacker:
    """Stateful adversary; mutated only by its owning environment."""

    def __init__(self, pool: list[AttackStrategy], seed: int = 0):
        if not pool:
            raise ConfigurationError("attacker needs a non-empty strategy pool")
        self.pool = list(pool)
        self.seed = seed
        self.reset()

    def reset(self) -> None:
        self.blocked: set[int] = set()
        self.compromised: set[int] = set()
        self.exhausted = False
        # minimally invasive: fewest injections first, id breaks ties
        best = min(self.pool, key=lambda z: (len(z.events), z.id))
        self.active = best.id
        self.cursor = 0

    # -- internal helpers ---------------------------------------------------

    def _strategy(self, strategy_id: int) -> AttackStrategy:
        for z in self.pool:
            if z.id == strategy_id:
                return z
        raise ConfigurationError(f"strategy {strategy_id} not in pool")

    def _remaining(self, z: AttackStrategy) -> list[int]:
        return [e for e in z.events if e not in self.compromised]

    def _skip_compromised(self) -> None:
        z = self._strategy(self.active)
        while self.cursor < len(z.events) and z.events[self.cursor] in self.compromised:
            self.cursor += 1

    def _reselect(self) -> bool:
        """Pick the cheapest feasible strategy; returns True on a switch."""
        candidates = [
            z for z in self.pool
            if not any(e in self.blocked for e in self._remaining(z))
        ]
        if not candidates:
            self.exhausted = True
            return False
        best = min(candidates, key=lambda z: (len(self._remaining(z)), z.id))
        switched = best.id != self.active
        self.active = best.id
        self.cursor = 0
        self._skip_compromised()
        return switched

    # -- contract operations ------------------------------------------------

    def next_injection(self) -> int | None:
        """The event the attacker intends to inject next, or None."""
        if self.exhausted:
            return None
        self._skip_compromised()
        z = self._strategy(self.active)
        if self.cursor >= len(z.events):
            return None  # full chain already compromised
        intended = z.events[self.cursor]
        if intended in self.blocked:
            # defensive path: a block recorded without on_block switching us
            self._reselect()
            return self.next_injection() if not self.exhausted else None
        return intended

    def confirm_injection(self, event: int) -> None:
        """Environment callback after an injection lands."""
        self.compromised.add(event)
        self._skip_compromised()

    def on_block(self, blocked_event: int) -> bool:
        """Record a blocked event; returns True if the strategy switched."""
        self.blocked.add(blocked_event)
        if self.exhausted:
            return False
        z = self._strategy(self.active)
        if not any(e in self.blocked for e in self._remaining(z)):
            return False  # block does not touch the active plan
        return self._reselect()

    @property
    def active_chain(self) -> tuple[int, ...]:
        return self._strategy(self.active).events


def build_pool_from_paths(
    graph: AttackDependencyGraph, starts: list[int], path_lookup
) -> list[AttackStrategy]:
    """Assemble a pool from (start, exploit sequence) pairs.

    path_lookup maps a start event to its exploit sequence (or None);
    unreachable starts are skipped. Duplicate exploit sequences keep
    the first occurrence.
    """
    pool: list[AttackStrategy] = []
    seen: set[tuple[int, ...]] = set()
    for start in starts:
        seq = path_lookup(start)
        if seq is None:
            continue
        key = tuple(seq)
        if key in seen:
            continue
        seen.add(key)
        pool.append(AttackStrategy.from_exploits(len(pool), graph, start, key))
    return pool


# ---------------------------------------------------------------------------
# pool serialization (one line per strategy)


def pool_to_text(pool: list[AttackStrategy]) -> str:
    lines = [f"{POOL_HEADER} {len(pool)}"]
    for z in sorted(pool, key=lambda z: z.id):
        seq = ",".join(str(x) for x in z.exploits) if z.exploits else "-"
        lines.append(f"strategy {z.id} start {z.start} exploits {seq}")
    return "\n".join(lines) + "\n"


def pool_from_text(text: str, graph: AttackDependencyGraph) -> list[AttackStrategy]:
    from .errors import InputError

    lines = text.splitlines()
    if not lines or not lines[0].startswith(POOL_HEADER + " "):
        raise InputError(f"line 1: expected '{POOL_HEADER} N' header")
    try:
        count = int(lines[0].split()[1])
    except (IndexError, ValueError) as exc:
        raise InputError("line 1: malformed pool header") from exc
    pool = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6 or parts[0] != "strategy" or parts[2] != "start" \
                or parts[4] != "exploits":
            raise InputError(f"line {lineno}: malformed strategy record")
        try:
            sid, start = int(parts[1]), int(parts[3])
            exploits = () if parts[5] == "-" else tuple(
                int(x) for x in parts[5].split(",")
            )
        except ValueError as exc:
            raise InputError(f"line {lineno}: {exc}") from exc
        try:
            pool.append(AttackStrategy.from_exploits(sid, graph, start, exploits))
        except KeyError as exc:
            raise InputError(f"line {lineno}: unknown exploit {exc}") from exc
    if len(pool) != count:
        raise InputError(f"header declares {count} strategies, found {len(pool)}")
    return pool
