"""Flat key=value run configuration shared by every CLI command.

One file (or `--set key=value` overrides) drives the whole pipeline:
graph synthesis, trace generation, sequence-model training, the
environment's reward shape, and the DQN hyperparameters. Unknown keys
are rejected so typos fail loudly before any work starts.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .dqn import DqnConfig, EpsilonSchedule
from .env import RewardParams
from .errors import ConfigurationError
from .seqmodel import SeqModelConfig


@dataclass(frozen=True)
class RunConfig:
    # attack dependency graph + observed traces
    n_events: int = 12
    edge_density: float = 0.2
    graph_seed: int = 7
    n_traces: int = 24
    noise_rate: float = 0.0
    max_trace_len: int = 64
    trace_seed: int = 11
    split_ratio: float = 0.8
    kappa: int = 1
    # sequence model (desk-scale defaults)
    embed_dim: int = 16
    lstm_units: tuple[int, ...] = (16, 8)
    bidirectional: bool = True
    seq_len: int = 16
    seq_epochs: int = 60
    seq_learning_rate: float = 0.01
    seq_seed: int = 0
    # environment + reward shape
    n_states: int = 12
    max_steps: int = 100
    encode_width: int = 128
    k: float = 0.25
    G_r: float = 10.0
    r_a1: float = 2.0
    r_a2: float = 1.0
    r_a3: float = 1.0
    r_a4: float = 2.0
    end_on_goal: bool = True
    # defense agent
    gamma: float = 0.95
    alpha: float = 1e-4
    tau: int = 20
    batch_size: int = 16
    episodes: int = 250
    epochs_per_episode: int = 100
    buffer_capacity: int = 50_000
    hidden: tuple[int, ...] = (64, 32)
    epsilon_start: float = 1.0
    epsilon_end: float = 0.1
    epsilon_decay: float = 0.99999
    epsilon_mode: str = "multiplicative_per_step"
    seed: int = 0
    out_dir: str = "runs/default"

    def __post_init__(self) -> None:
        if self.n_events < 2:
            raise ConfigurationError("n_events must be at least 2")
        if not 0.0 <= self.edge_density <= 1.0:
            raise ConfigurationError("edge_density must lie in [0, 1]")
        if self.n_traces < 2:
            raise ConfigurationError("n_traces must be at least 2")
        if self.kappa < 1:
            raise ConfigurationError("kappa must be at least 1")


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_int_tuple(raw: str) -> tuple[int, ...]:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    return tuple(int(p) for p in parts)


_CONVERTERS = {
    int: int,
    float: float,
    bool: _parse_bool,
    str: str,
    tuple[int, ...]: _parse_int_tuple,
}

_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
# under `from __future__ import annotations` field types are strings
_TYPE_BY_NAME = {"int": int, "float": float, "bool": bool, "str": str,
                 "tuple[int, ...]": tuple[int, ...]}


def parse_kv_text(text: str) -> dict[str, str]:
    """key=value lines; '#' starts a comment; later duplicates win."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def build_run_config(entries: dict[str, str]) -> RunConfig:
    """Coerce string entries onto RunConfig; unknown keys are rejected."""
    kwargs = {}
    for key, raw in entries.items():
        if key not in _FIELD_TYPES:
            raise ConfigurationError(f"unknown config key '{key}'")
        ftype = _FIELD_TYPES[key]
        if isinstance(ftype, str):
            ftype = _TYPE_BY_NAME[ftype]
        try:
            kwargs[key] = _CONVERTERS[ftype](raw)
        except ValueError as exc:
            raise ConfigurationError(f"config key '{key}': {exc}") from exc
    return RunConfig(**kwargs)


def load_run_config(path: str | None, overrides: dict[str, str] | None = None) -> RunConfig:
    """File values first (if any), then override pairs on top."""
    entries: dict[str, str] = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                entries.update(parse_kv_text(fh.read()))
        except OSError as exc:
            raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    entries.update(overrides or {})
    return build_run_config(entries)


def config_to_text(cfg: RunConfig) -> str:
    """Round-trippable dump in declaration order."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, tuple):
            rendered = ",".join(str(v) for v in value)
        else:
            rendered = str(value)
        lines.append(f"{f.name}={rendered}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Views onto the module-level configs

def reward_params(cfg: RunConfig) -> RewardParams:
    return RewardParams(
        r_inject=cfg.r_a1,
        r_check=cfg.r_a2,
        r_monitor=cfg.r_a3,
        r_block=cfg.r_a4,
        injection_threshold=cfg.k,
        goal_reward=cfg.G_r,
    )


def dqn_config(cfg: RunConfig) -> DqnConfig:
    return DqnConfig(
        gamma=cfg.gamma,
        alpha=cfg.alpha,
        tau=cfg.tau,
        batch_size=cfg.batch_size,
        episodes=cfg.episodes,
        epochs_per_episode=cfg.epochs_per_episode,
        buffer_capacity=cfg.buffer_capacity,
        hidden=cfg.hidden,
        seed=cfg.seed,
        epsilon=EpsilonSchedule(
            start=cfg.epsilon_start,
            end=cfg.epsilon_end,
            decay=cfg.epsilon_decay,
            mode=cfg.epsilon_mode,
        ),
    )


def seq_config(cfg: RunConfig, n_classes: int) -> SeqModelConfig:
    return SeqModelConfig(
        n_classes=n_classes,
        embed_dim=cfg.embed_dim,
        lstm_units=cfg.lstm_units,
        bidirectional=cfg.bidirectional,
        seq_len=cfg.seq_len,
        epochs=cfg.seq_epochs,
        learning_rate=cfg.seq_learning_rate,
        seed=cfg.seq_seed,
    )
