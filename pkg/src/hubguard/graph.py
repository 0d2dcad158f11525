"""Attack dependency graphs for trigger-action IoT deployments.

An attack dependency graph is a DAG whose nodes are device event
conditions and whose hyper-edges are exploits: an exploit fires one
effect event once all of its precondition events (at most two) have
been compromised. A single sink event is the attack goal. The module
generates seeded synthetic graphs, validates structure, scores how
crucial each event is to reaching the goal, finds shortest exploit
sequences, and round-trips graphs through a line-oriented text format.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, InputError

MAX_PRECONDITIONS = 2


@dataclass(frozen=True)
class EventCondition:
    id: int
    label: str
    device: str


@dataclass(frozen=True)
class Exploit:
    id: int
    effect: int
    preconditions: tuple[int, ...]

    def __post_init__(self) -> None:
        if not 1 <= len(self.preconditions) <= MAX_PRECONDITIONS:
            raise ConfigurationError(
                f"exploit {self.id}: needs 1..{MAX_PRECONDITIONS} preconditions"
            )
        if len(set(self.preconditions)) != len(self.preconditions):
            raise ConfigurationError(f"exploit {self.id}: duplicate preconditions")
        if self.effect in self.preconditions:
            raise ConfigurationError(f"exploit {self.id}: effect is its own precondition")


@dataclass(frozen=True)
class AttackDependencyGraph:
    events: tuple[EventCondition, ...]
    exploits: tuple[Exploit, ...]
    goal: int

    def event_ids(self) -> list[int]:
        return [e.id for e in self.events]

    def exploits_for_effect(self, event_id: int) -> list[Exploit]:
        return [x for x in self.exploits if x.effect == event_id]

    def n_events(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class CrucialScore:
    event_id: int
    score: float


# ---------------------------------------------------------------------------
# Validation


def validate(graph: AttackDependencyGraph) -> list[str]:
    """Return a list of structural violations; empty means the graph is sound.

    Checks: unique event ids, precondition/effect references resolve,
    exactly one sink which is the goal, acyclicity (cycles are reported
    with the exploit ids involved), and every event on some path to goal.
    """
    problems: list[str] = []
    ids = [e.id for e in graph.events]
    known = set(ids)
    if len(known) != len(ids):
        problems.append("duplicate event ids")
    if graph.goal not in known:
        problems.append(f"goal {graph.goal} is not a declared event")
    xids = [x.id for x in graph.exploits]
    if len(set(xids)) != len(xids):
        problems.append("duplicate exploit ids")
    for x in graph.exploits:
        for ref in (x.effect, *x.preconditions):
            if ref not in known:
                problems.append(f"exploit {x.id} references unknown event {ref}")
    if problems:
        return problems

    # edge view: one arc per (precondition, effect) pair
    out_edges: dict[int, list[tuple[int, int]]] = {i: [] for i in known}
    for x in graph.exploits:
        for pre in x.preconditions:
            out_edges[pre].append((x.effect, x.id))

    # cycle detection; report names exactly the exploits on the cycle
    WHITE, GREY, BLACK = 0, 1, 2
    color = {i: WHITE for i in known}
    path: list[tuple[int, int]] = []  # (node arrived at, exploit used)

    def visit(u: int) -> list[int] | None:
        color[u] = GREY
        for v, xid in out_edges[u]:
            if color[v] == GREY:
                # back-edge to an ancestor: cycle is v .. u plus this arc
                hits = [k for k, (node, _) in enumerate(path) if node == v]
                start = hits[-1] + 1 if hits else 0
                return [x for _, x in path[start:]] + [xid]
            if color[v] == WHITE:
                path.append((v, xid))
                found = visit(v)
                path.pop()
                if found is not None:
                    return found
        color[u] = BLACK
        return None

    for node in sorted(known):
        if color[node] == WHITE:
            cycle = visit(node)
            if cycle:
                problems.append(
                    "cycle through exploits " + ",".join(str(i) for i in sorted(set(cycle)))
                )
                return problems

    sinks = [i for i in sorted(known) if not out_edges[i]]
    if sinks != [graph.goal]:
        problems.append(f"expected unique sink {graph.goal}, found sinks {sinks}")

    # reverse reachability from the goal
    reachable = {graph.goal}
    frontier = [graph.goal]
    in_edges: dict[int, list[int]] = {i: [] for i in known}
    for x in graph.exploits:
        for pre in x.preconditions:
            in_edges[x.effect].append(pre)
    while frontier:
        v = frontier.pop()
        for u in in_edges[v]:
            if u not in reachable:
                reachable.add(u)
                frontier.append(u)
    stranded = sorted(known - reachable)
    if stranded:
        problems.append(f"events with no path to goal: {stranded}")
    return problems


def _require_valid(graph: AttackDependencyGraph, context: str) -> None:
    problems = validate(graph)
    if problems:
        raise InputError(f"{context}: " + "; ".join(problems))


# ---------------------------------------------------------------------------
# Synthetic generation


def generate_synthetic_dag(
    n_events: int, edge_density: float, seed: int
) -> AttackDependencyGraph:
    """Generate a seeded random attack DAG.

    Nodes are laid out along a random topological order; each ordered
    pair becomes a single-precondition exploit with probability
    edge_density, every non-sink node is guaranteed at least one
    outgoing arc (so every event lies on a path to the goal), and a
    density-proportional share of effects additionally get one
    two-precondition exploit. The final order node is the goal sink.
    """
    if n_events < 2:
        raise ConfigurationError("need at least two events (one source, the goal)")
    if not 0.0 <= edge_density <= 1.0:
        raise ConfigurationError("edge_density must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    order = [int(v) for v in rng.permutation(n_events)]
    pos = {v: i for i, v in enumerate(order)}

    edges: set[tuple[int, int]] = set()  # (pre, effect) in topo positions
    for i in range(n_events - 1):
        for j in range(i + 1, n_events):
            if rng.random() < edge_density:
                edges.add((i, j))
    # every non-final position needs an out-arc, so the goal is the only sink
    for i in range(n_events - 1):
        if not any(a == i for a, _ in edges):
            j = int(rng.integers(i + 1, n_events))
            edges.add((i, j))

    exploits: list[Exploit] = []
    next_id = 0
    for j in range(1, n_events):
        preds = sorted(a for a, b in edges if b == j)
        for a in preds:
            exploits.append(Exploit(next_id, order[j], (order[a],)))
            next_id += 1
        if len(preds) >= 2 and rng.random() < edge_density:
            pair = sorted(rng.choice(len(preds), size=2, replace=False))
            pre = tuple(sorted((order[preds[pair[0]]], order[preds[pair[1]]])))
            exploits.append(Exploit(next_id, order[j], pre))
            next_id += 1

    events = tuple(
        EventCondition(i, f"ev{i}", f"dev{i}") for i in range(n_events)
    )
    graph = AttackDependencyGraph(events, tuple(exploits), goal=order[-1])
    problems = validate(graph)
    if problems:  # generator bug guard; should be unreachable
        raise ConfigurationError("generated graph failed validation: " + "; ".join(problems))
    return graph


# ---------------------------------------------------------------------------
# Crucial-node scoring


def score_crucial_nodes(
    graph: AttackDependencyGraph, traces: Sequence[Sequence[int]]
) -> list[CrucialScore]:
    """Rank events by (observed frequency) x (share of goal paths through them).

    Frequency comes from the event traces; the path share counts simple
    source-to-goal paths in the arc view of the graph. Scores are
    normalized so the top event scores 1.0; returned in descending
    order with event id as the tiebreak.
    """
    if not traces:
        raise InputError("need at least one trace to score crucial nodes")
    _require_valid(graph, "score_crucial_nodes")  # path counting needs a DAG
    known = set(graph.event_ids())
    counts = {i: 0 for i in known}
    total = 0
    for trace in traces:
        for ev in trace:
            if ev not in known:
                raise InputError(f"trace references unknown event {ev}")
            counts[ev] += 1
            total += 1
    if total == 0:
        raise InputError("traces contain no events")

    out_adj: dict[int, set[int]] = {i: set() for i in known}
    in_deg = {i: 0 for i in known}
    for x in graph.exploits:
        for pre in x.preconditions:
            if x.effect not in out_adj[pre]:
                out_adj[pre].add(x.effect)
    for i in known:
        for j in out_adj[i]:
            in_deg[j] += 1
    sources = [i for i in sorted(known) if in_deg[i] == 0]

    # path counts via DFS with memoized counts below each node
    below: dict[int, int] = {}

    def paths_to_goal(u: int) -> int:
        if u == graph.goal:
            return 1
        if u in below:
            return below[u]
        below[u] = sum(paths_to_goal(v) for v in sorted(out_adj[u]))
        return below[u]

    above: dict[int, int] = {i: 0 for i in known}
    for s in sources:
        above[s] += 1
    for u in _topo_order(known, out_adj):
        for v in sorted(out_adj[u]):
            above[v] += above[u]

    total_paths = sum(paths_to_goal(s) for s in sources)
    raw = {}
    for i in known:
        share = (above[i] * paths_to_goal(i)) / total_paths if total_paths else 0.0
        raw[i] = (counts[i] / total) * share
    top = max(raw.values())
    scores = [
        CrucialScore(i, raw[i] / top if top > 0 else 0.0) for i in sorted(known)
    ]
    scores.sort(key=lambda s: (-s.score, s.event_id))
    return scores


def _topo_order(nodes: set[int], out_adj: dict[int, set[int]]) -> list[int]:
    in_deg = {i: 0 for i in nodes}
    for u in nodes:
        for v in out_adj[u]:
            in_deg[v] += 1
    ready = sorted(i for i in nodes if in_deg[i] == 0)
    order = []
    while ready:
        u = ready.pop(0)
        order.append(u)
        for v in sorted(out_adj[u]):
            in_deg[v] -= 1
            if in_deg[v] == 0:
                ready.append(v)
        ready.sort()
    return order


# ---------------------------------------------------------------------------
# Shortest exploit sequences


def optimal_paths(graph: AttackDependencyGraph, start: int) -> tuple[int, ...] | None:
    """Shortest exploit sequence compromising the goal from `start`.

    The start event counts as already compromised. Ties in length are
    broken toward the lexicographically smallest exploit-id sequence.
    Returns None when the goal cannot be reached.
    """
    if start not in set(graph.event_ids()):
        raise InputError(f"unknown start event {start}")
    if start == graph.goal:
        return ()
    exploits = sorted(graph.exploits, key=lambda x: x.id)
    max_depth = graph.n_events()

    # iterative deepening in exploit-id order: the first hit at the
    # shallowest depth is the lexicographically smallest shortest path
    def dfs(compromised: frozenset[int], depth: int, dead: dict[frozenset[int], int]):
        if depth == 0:
            return None
        if dead.get(compromised, -1) >= depth:
            return None
        for x in exploits:
            if x.effect in compromised:
                continue
            if not all(p in compromised for p in x.preconditions):
                continue
            nxt = compromised | {x.effect}
            if x.effect == graph.goal:
                return (x.id,)
            tail = dfs(nxt, depth - 1, dead)
            if tail is not None:
                return (x.id,) + tail
        dead[compromised] = max(dead.get(compromised, 0), depth)
        return None

    for depth in range(1, max_depth + 1):
        found = dfs(frozenset({start}), depth, {})
        if found is not None:
            return found
    return None


def replay_exploits(
    graph: AttackDependencyGraph, start: int, exploit_ids: Iterable[int]
) -> frozenset[int]:
    """Apply an exploit sequence from a compromised start; returns the
    compromised set. Raises InputError if any step's preconditions fail."""
    by_id = {x.id: x for x in graph.exploits}
    compromised = {start}
    for xid in exploit_ids:
        if xid not in by_id:
            raise InputError(f"unknown exploit {xid}")
        x = by_id[xid]
        if not all(p in compromised for p in x.preconditions):
            raise InputError(f"exploit {xid} fired before its preconditions held")
        compromised.add(x.effect)
    return frozenset(compromised)


def chain_events(
    graph: AttackDependencyGraph, start: int, exploit_ids: Sequence[int]
) -> tuple[int, ...]:
    """Event sequence a strategy injects: the start, then each effect."""
    by_id = {x.id: x for x in graph.exploits}
    events = [start]
    for xid in exploit_ids:
        events.append(by_id[xid].effect)
    return tuple(events)


# ---------------------------------------------------------------------------
# Text serialization


def to_text(graph: AttackDependencyGraph) -> str:
    """Canonical text form: header, events by id, exploits by id."""
    lines = [f"events {graph.n_events()} goal {graph.goal}"]
    for e in sorted(graph.events, key=lambda e: e.id):
        lines.append(f"event {e.id} {e.label} {e.device}")
    for x in sorted(graph.exploits, key=lambda x: x.id):
        pres = ",".join(str(p) for p in x.preconditions)
        lines.append(f"exploit {x.id} {x.effect} {pres}")
    return "\n".join(lines) + "\n"


def from_text(text: str) -> AttackDependencyGraph:
    """Parse the to_text format; validates the result before returning."""
    lines = text.splitlines()
    if not lines:
        raise InputError("empty graph text")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "events" or head[2] != "goal":
        raise InputError("line 1: expected 'events N goal G' header")
    try:
        n_events, goal = int(head[1]), int(head[3])
    except ValueError as exc:
        raise InputError("line 1: non-numeric header fields") from exc
    events: list[EventCondition] = []
    exploits: list[Exploit] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        try:
            if parts[0] == "event" and len(parts) == 4:
                events.append(EventCondition(int(parts[1]), parts[2], parts[3]))
            elif parts[0] == "exploit" and len(parts) == 4:
                pres = tuple(int(p) for p in parts[3].split(","))
                exploits.append(Exploit(int(parts[1]), int(parts[2]), pres))
            else:
                raise ValueError("unrecognized record")
        except (ValueError, ConfigurationError) as exc:
            raise InputError(f"line {lineno}: {exc}") from exc
    if len(events) != n_events:
        raise InputError(f"header declares {n_events} events, found {len(events)}")
    graph = AttackDependencyGraph(tuple(events), tuple(exploits), goal)
    _require_valid(graph, "graph text")
    return graph


def write_graph(path, graph: AttackDependencyGraph) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(to_text(graph))
    except OSError as exc:
        raise InputError(f"cannot write graph to {path}: {exc}") from exc


def read_graph(path) -> AttackDependencyGraph:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return from_text(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read graph from {path}: {exc}") from exc
