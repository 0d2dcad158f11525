"""Synthetic device-event traces over an attack dependency graph.

A trace is what a hub's event log would show while automations run: a
feasibility-respecting walk over the graph's events with optional
sensor noise interleaved. Each log slot is noise with probability
noise_rate (a uniformly random non-goal event that does not advance
the walk); otherwise the walk fires one feasible not-yet-seen event,
where an event is feasible if nothing produces it (a spontaneous
trigger) or some exploit for it has all preconditions already seen.
Noiseless walks always run to the goal; noisy ones stop at the goal
or after max_len slots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputError
from .graph import AttackDependencyGraph, validate

TRACE_CSV_HEADER = "trace_id,event_id,timestamp_s"


@dataclass(frozen=True)
class Trace:
    trace_id: int
    events: tuple[int, ...]
    timestamps: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.events) != len(self.timestamps):
            raise InputError(
                f"trace {self.trace_id}: {len(self.events)} events but "
                f"{len(self.timestamps)} timestamps"
            )


def _feasible_events(graph: AttackDependencyGraph, seen: set[int]) -> list[int]:
    produced = {x.effect for x in graph.exploits}
    out = []
    for e in graph.event_ids():
        if e in seen:
            continue
        if e not in produced:
            out.append(e)  # spontaneous trigger
            continue
        for x in graph.exploits:
            if x.effect == e and all(p in seen for p in x.preconditions):
                out.append(e)
                break
    return out


def generate_traces(
    graph: AttackDependencyGraph,
    n_traces: int,
    noise_rate: float,
    max_len: int,
    seed: int,
) -> list[Trace]:
    """Simulate n_traces seeded event logs."""
    if n_traces < 1:
        raise ConfigurationError("n_traces must be positive")
    if not 0.0 <= noise_rate <= 1.0:
        raise ConfigurationError("noise_rate must lie in [0, 1]")
    if max_len < 1:
        raise ConfigurationError("max_len must be positive")
    problems = validate(graph)
    if problems:
        raise InputError("generate_traces: " + "; ".join(problems))

    rng = np.random.default_rng(seed)
    non_goal = [e for e in graph.event_ids() if e != graph.goal]
    traces = []
    for tid in range(n_traces):
        seen: set[int] = set()
        events: list[int] = []
        stamps: list[float] = []
        clock = 0.0
        # noiseless walks are allowed to overrun max_len to reach the goal
        while graph.goal not in seen and (noise_rate == 0.0 or len(events) < max_len):
            clock += float(rng.exponential(1.0))
            if rng.random() < noise_rate:
                events.append(int(rng.choice(non_goal)))
            else:
                choices = _feasible_events(graph, seen)
                step = int(choices[rng.integers(len(choices))])
                seen.add(step)
                events.append(step)
            stamps.append(clock)
        traces.append(Trace(tid, tuple(events), tuple(stamps)))
    return traces


def split_train_val(
    traces: list[Trace], ratio: float, seed: int
) -> tuple[list[Trace], list[Trace]]:
    """Seeded shuffle, then round(ratio * n) traces for training.

    Both sides are guaranteed non-empty, which needs at least two traces.
    """
    if not 0.0 < ratio < 1.0:
        raise ConfigurationError("split ratio must lie strictly in (0, 1)")
    if len(traces) < 2:
        raise InputError("need at least two traces to split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(traces))
    n_train = int(round(ratio * len(traces)))
    n_train = min(max(n_train, 1), len(traces) - 1)
    train = [traces[i] for i in order[:n_train]]
    val = [traces[i] for i in order[n_train:]]
    return train, val


# ---------------------------------------------------------------------------
# CSV round-trip


def traces_to_csv(traces: list[Trace]) -> str:
    lines = [TRACE_CSV_HEADER]
    for t in traces:
        for e, s in zip(t.events, t.timestamps):
            lines.append(f"{t.trace_id},{e},{repr(float(s))}")
    return "\n".join(lines) + "\n"


def traces_from_csv(text: str) -> list[Trace]:
    """Parse the traces_to_csv format; problems name their line number."""
    lines = text.splitlines()
    if not lines or lines[0] != TRACE_CSV_HEADER:
        raise InputError(f"line 1: expected header '{TRACE_CSV_HEADER}'")
    rows: list[tuple[int, int, float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise InputError(f"line {lineno}: expected 3 comma-separated fields")
        try:
            rows.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise InputError(f"line {lineno}: {exc}") from exc

    traces: list[Trace] = []
    finished: set[int] = set()
    cur_id: int | None = None
    events: list[int] = []
    stamps: list[float] = []

    def flush() -> None:
        if cur_id is not None:
            traces.append(Trace(cur_id, tuple(events), tuple(stamps)))
            finished.add(cur_id)

    for i, (tid, ev, ts) in enumerate(rows):
        lineno = i + 2
        if tid != cur_id:
            if tid in finished:
                raise InputError(
                    f"line {lineno}: trace {tid} rows are not contiguous"
                )
            flush()
            cur_id, events, stamps = tid, [], []
        elif stamps and ts <= stamps[-1]:
            raise InputError(
                f"line {lineno}: timestamp_s not increasing within trace {tid}"
            )
        events.append(ev)
        stamps.append(ts)
    flush()
    return traces


def write_traces(path, traces: list[Trace]) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(traces_to_csv(traces))
    except OSError as exc:
        raise InputError(f"cannot write traces to {path}: {exc}") from exc


def read_traces(path) -> list[Trace]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return traces_from_csv(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read traces from {path}: {exc}") from exc
