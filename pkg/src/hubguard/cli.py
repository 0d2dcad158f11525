"""Command-line pipeline: graph/trace synthesis, model training,
defense-agent training, evaluation, and threshold sweeps.

Every command is deterministic given its configuration; the only
nondeterministic output anywhere is the time_overhead_s column of the
training CSV, which measures real wall-clock work.

Exit codes: 0 success, 2 configuration error, 3 input/data error,
4 contract violation.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .attacker import Attacker, pool_from_text, pool_to_text
from .config import (
    RunConfig,
    config_to_text,
    dqn_config,
    load_run_config,
    reward_params,
    seq_config,
)
from .dqn import QNetworks, TrainResult, enforce, make_q_networks, sync_target, train
from .env import N_ACTIONS, HubEnv
from .errors import (
    ConfigurationError,
    ContractViolationError,
    HubguardError,
    InputError,
)
from .graph import (
    generate_synthetic_dag,
    read_graph,
    score_crucial_nodes,
    write_graph,
)
from .nn import load_params, save_params
from .seqmodel import build_strategy_pool, train_seq_model, write_history
from .traces import generate_traces, read_traces, split_train_val, write_traces

TRAIN_CSV_HEADER = "episode,total_reward,time_overhead_s,n_a1,n_a2,n_a3,n_a4,epsilon"
SWEEP_CSV_HEADER = "k,avg_episodic_reward"
TRACE_CSV_HEADER = "step,state,action,reward"

_EXIT_CODES = {
    ConfigurationError: 2,
    InputError: 3,
    ContractViolationError: 4,
}


def _fmt(value: float) -> str:
    return repr(float(value))


# ---------------------------------------------------------------------------
# Pipeline pieces shared by the commands

def _make_graph(cfg: RunConfig, graph_path: str | None):
    if graph_path is not None:
        return read_graph(graph_path), False
    return generate_synthetic_dag(cfg.n_events, cfg.edge_density, cfg.graph_seed), True


def _make_pool(cfg: RunConfig, graph, pool_path: str | None):
    """Strategy pool from a file, or decoded end-to-end from fresh traces."""
    if pool_path is not None:
        try:
            with open(pool_path, "r", encoding="utf-8") as fh:
                return pool_from_text(fh.read(), graph), None
        except OSError as exc:
            raise InputError(f"cannot read strategy pool from {pool_path}: {exc}") from exc
    traces = generate_traces(
        graph, cfg.n_traces, cfg.noise_rate, cfg.max_trace_len, cfg.trace_seed)
    train_traces, val_traces = split_train_val(traces, cfg.split_ratio, cfg.trace_seed)
    n_classes = 1 + max(graph.event_ids())
    model, history = train_seq_model(
        train_traces, seq_config(cfg, n_classes), val_traces=val_traces)
    scores = score_crucial_nodes(graph, [t.events for t in traces])
    pool = build_strategy_pool(model, graph, scores, cfg.kappa)
    return pool, (traces, history)


def _make_env(cfg: RunConfig, graph, pool) -> HubEnv:
    attacker = Attacker(pool, seed=cfg.seed)
    return HubEnv(
        attacker,
        goal=graph.goal,
        params=reward_params(cfg),
        n_states=cfg.n_states,
        max_steps=cfg.max_steps,
        encode_width=cfg.encode_width,
        end_on_goal=cfg.end_on_goal,
        seed=cfg.seed,
    )


def _train_csv(result: TrainResult) -> str:
    lines = [TRAIN_CSV_HEADER]
    for r in result.records:
        lines.append(",".join([
            str(r.episode), _fmt(r.total_reward), _fmt(r.time_overhead_s),
            str(r.n_inject), str(r.n_check), str(r.n_monitor), str(r.n_block),
            _fmt(r.epsilon),
        ]))
    return "\n".join(lines) + "\n"


def _avg_episodic_reward(result: TrainResult, epochs_per_episode: int,
                         window: int = 50) -> float:
    """Mean per-step reward over the trailing window of episodes."""
    tail = result.records[-window:]
    if not tail:
        raise InputError("no episodes recorded; cannot average")
    return float(np.mean([r.total_reward / epochs_per_episode for r in tail]))


def _save_checkpoint(path: str, nets: QNetworks) -> None:
    named = {}
    for i, layer in enumerate(nets.online.layers):
        named[f"w{i}"] = layer.weights
        named[f"b{i}"] = layer.bias
    save_params(path, named)


def _load_checkpoint(path: str, nets: QNetworks) -> None:
    named = load_params(path)
    for i, layer in enumerate(nets.online.layers):
        for key, arr in ((f"w{i}", layer.weights), (f"b{i}", layer.bias)):
            if key not in named:
                raise InputError(f"{path}: checkpoint is missing parameter {key}")
            if named[key].shape != arr.shape:
                raise InputError(
                    f"{path}: parameter {key} has shape {named[key].shape}, "
                    f"expected {arr.shape}")
            arr[...] = named[key]
    nets.online.mark_updated()
    sync_target(nets)


def _fresh_networks(cfg: RunConfig) -> QNetworks:
    sizes = [cfg.encode_width, *cfg.hidden, N_ACTIONS]
    return make_q_networks(sizes, np.random.default_rng(cfg.seed))


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Commands

def cmd_gen_graph(cfg: RunConfig, out: str) -> int:
    graph = generate_synthetic_dag(cfg.n_events, cfg.edge_density, cfg.graph_seed)
    write_graph(out, graph)
    print(f"wrote {graph.n_events()}-event graph (goal {graph.goal}) to {out}")
    return 0


def cmd_gen_traces(cfg: RunConfig, graph_path: str, out: str) -> int:
    graph = read_graph(graph_path)
    traces = generate_traces(
        graph, cfg.n_traces, cfg.noise_rate, cfg.max_trace_len, cfg.trace_seed)
    write_traces(out, traces)
    print(f"wrote {len(traces)} traces to {out}")
    return 0


def cmd_train_seq(cfg: RunConfig, graph_path: str, traces_path: str,
                  out_model: str, out_history: str) -> int:
    graph = read_graph(graph_path)
    traces = read_traces(traces_path)
    train_traces, val_traces = split_train_val(traces, cfg.split_ratio, cfg.trace_seed)
    n_classes = 1 + max(graph.event_ids())
    model, history = train_seq_model(
        train_traces, seq_config(cfg, n_classes), val_traces=val_traces)
    save_params(out_model, {f"p{i}": p for i, p in enumerate(model.params())})
    write_history(out_history, history)
    print(f"trained {len(history)} epochs; final val_acc {history.val_acc[-1]:.3f}; "
          f"wrote {out_model} and {out_history}")
    return 0


def cmd_train(cfg: RunConfig, graph_path: str | None, pool_path: str | None,
              out_dir: str | None) -> int:
    out = out_dir if out_dir is not None else cfg.out_dir
    os.makedirs(out, exist_ok=True)
    graph, generated = _make_graph(cfg, graph_path)
    if generated:
        write_graph(os.path.join(out, "graph.txt"), graph)
    pool, artifacts = _make_pool(cfg, graph, pool_path)
    if artifacts is not None:
        traces, history = artifacts
        write_traces(os.path.join(out, "traces.csv"), traces)
        write_history(os.path.join(out, "seq_history.csv"), history)
    _write(os.path.join(out, "pool.txt"), pool_to_text(pool))
    env = _make_env(cfg, graph, pool)
    result = train(env, dqn_config(cfg))
    _write(os.path.join(out, "train.csv"), _train_csv(result))
    _save_checkpoint(os.path.join(out, "checkpoint.txt"), result.nets)
    _write(os.path.join(out, "config_used.txt"), config_to_text(cfg))
    if result.records:
        print(f"trained {len(result.records)} episodes; "
              f"final total_reward {result.records[-1].total_reward:.1f}")
    else:
        print("trained 0 episodes")
    print(f"artifacts in {out}")
    return 0


def _parse_k_values(raw: str) -> list[float]:
    try:
        values = [float(p) for p in raw.split(",") if p.strip()]
    except ValueError as exc:
        raise InputError(f"bad k value in {raw!r}: {exc}") from exc
    if not values:
        raise InputError("need at least one k value")
    for k in values:
        if not 0.0 <= k <= 1.0:
            raise InputError(f"k={k} outside [0, 1]")
    return sorted(values)


def cmd_sweep_k(cfg: RunConfig, k_values_raw: str, out: str,
                checkpoint: str | None) -> int:
    """Retrains per k by default; --use-checkpoint scores one agent instead."""
    k_values = _parse_k_values(k_values_raw)
    graph, _ = _make_graph(cfg, None)
    pool, _ = _make_pool(cfg, graph, None)
    rows = [SWEEP_CSV_HEADER]
    for k in k_values:
        cfg_k = replace(cfg, k=k)
        env = _make_env(cfg_k, graph, pool)
        if checkpoint is None:
            result = train(env, dqn_config(cfg_k))
            avg = _avg_episodic_reward(result, cfg_k.epochs_per_episode)
        else:
            nets = _fresh_networks(cfg_k)
            _load_checkpoint(checkpoint, nets)
            trace = enforce(nets, env)
            avg = float(sum(r for _, _, r in trace)) / cfg_k.epochs_per_episode
        rows.append(f"{_fmt(k)},{_fmt(avg)}")
        print(f"k={k:g}: avg episodic reward {avg:.4f}")
    _write(out, "\n".join(rows) + "\n")
    print(f"wrote {len(k_values)} rows to {out}")
    return 0


def cmd_evaluate(cfg: RunConfig, checkpoint: str, graph_path: str | None,
                 pool_path: str | None, out: str | None) -> int:
    graph, _ = _make_graph(cfg, graph_path)
    pool, _ = _make_pool(cfg, graph, pool_path)
    env = _make_env(cfg, graph, pool)
    nets = _fresh_networks(cfg)
    _load_checkpoint(checkpoint, nets)
    trace = enforce(nets, env)
    if out is not None:
        lines = [TRACE_CSV_HEADER]
        for step, (state, action, reward) in enumerate(trace, start=1):
            lines.append(f"{step},{state},{action},{_fmt(reward)}")
        _write(out, "\n".join(lines) + "\n")
    defended = "yes" if not env.goal_compromised else "no"
    total = sum(r for _, _, r in trace)
    print(f"goal defended: {defended}")
    print(f"steps: {len(trace)}")
    print(f"total reward: {total:.4f}")
    return 0


# ---------------------------------------------------------------------------
# Argument plumbing

def _add_config_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key=value config file")
    sub.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override a single config key (repeatable)")


def _collect_config(args: argparse.Namespace) -> RunConfig:
    overrides = {}
    for pair in args.set:
        if "=" not in pair:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {pair!r}")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value.strip()
    return load_run_config(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hubguard",
        description="Trigger-action injection attack simulator and RL defense",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", help="synthesize an attack dependency graph")
    _add_config_args(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("gen-traces", help="sample event traces from a graph")
    _add_config_args(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train-seq", help="train the next-event model on traces")
    _add_config_args(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--traces", required=True)
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-history", required=True)

    p = sub.add_parser("train", help="train the defense agent end to end")
    _add_config_args(p)
    p.add_argument("--graph", help="existing graph file (default: synthesize)")
    p.add_argument("--pool", help="existing strategy pool (default: decode one)")
    p.add_argument("--out-dir", help="artifact directory (default from config)")

    p = sub.add_parser("sweep-k", help="average episodic reward across thresholds")
    _add_config_args(p)
    p.add_argument("--k-values", required=True,
                   help="comma-separated thresholds in [0, 1]")
    p.add_argument("--out", required=True)
    p.add_argument("--use-checkpoint", metavar="PATH",
                   help="score this trained agent instead of retraining per k")

    p = sub.add_parser("evaluate", help="run one greedy episode from a checkpoint")
    _add_config_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--graph")
    p.add_argument("--pool")
    p.add_argument("--out", help="write the episode trace CSV here")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _collect_config(args)
        if args.command == "gen-graph":
            return cmd_gen_graph(cfg, args.out)
        if args.command == "gen-traces":
            return cmd_gen_traces(cfg, args.graph, args.out)
        if args.command == "train-seq":
            return cmd_train_seq(cfg, args.graph, args.traces,
                                 args.out_model, args.out_history)
        if args.command == "train":
            return cmd_train(cfg, args.graph, args.pool, args.out_dir)
        if args.command == "sweep-k":
            return cmd_sweep_k(cfg, args.k_values, args.out, args.use_checkpoint)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.checkpoint, args.graph, args.pool, args.out)
        raise ConfigurationError(f"unknown command {args.command!r}")
    except HubguardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for klass, code in _EXIT_CODES.items():
            if isinstance(exc, klass):
                return code
        return 4


if __name__ == "__main__":
    sys.exit(main())
