"""Release acceptance suite — one test (one pass/fail line under -v) per
shipped guarantee, each stating its tolerance and time budget inline.

The default-configuration training run is expensive, so criteria 4, 5,
9 and 10 share a single session-scoped run produced through the real
CLI entry point. Criterion 6 owns the threshold sweep (the slowest
item, ~2 min). Criterion 5 is a known failure: with the stock
exploration schedule the two counters it compares are statistically
symmetric — the assertion message carries the measured rate and the
argument, and notes/decisions.md (outside the package) has the full
analysis.
"""

import math
import time
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest

from oracles import ChainMdp, chain_mdp_oracle_policy
from hubguard.cli import main
from hubguard.dqn import (
    EPS_EXPONENTIAL,
    EPS_MULTIPLICATIVE,
    DqnConfig,
    EpsilonSchedule,
    Transition,
    epsilon_at,
    make_q_networks,
    td_loss_and_grads,
    train,
)
from hubguard.env import ActionCounters, RewardParams, compute_reward
from hubguard.graph import (
    AttackDependencyGraph,
    EventCondition,
    Exploit,
    optimal_paths,
)
from hubguard.nn import (
    gradient_check,
    lstm_backward_batch,
    lstm_forward_batch,
    lstm_init,
    mlp_forward,
)
from hubguard.seqmodel import (
    SeqModelConfig,
    decode_attack_sequence,
    train_seq_model,
)
from hubguard.traces import Trace


def read_columns(path):
    """CSV -> {header name: float array}, preserving row order."""
    lines = path.read_text().splitlines()
    names = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    return {n: np.array([float(r[i]) for r in rows])
            for i, n in enumerate(names)}


@pytest.fixture(scope="session")
def default_run(tmp_path_factory):
    """One stock-config training run through the CLI, shared read-only."""
    out = tmp_path_factory.mktemp("default_run")
    t0 = time.perf_counter()
    code = main(["train", "--out-dir", str(out)])
    elapsed = time.perf_counter() - t0
    assert code == 0
    return SimpleNamespace(out=out, elapsed=elapsed,
                           cols=read_columns(out / "train.csv"))


def test_c01_finite_difference_gradients_mlp_huber_and_lstm():
    # rel err <= 1e-4 on every parameter, 20 seeds, under 30 s
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)

        nets = make_q_networks([3, 5, 2], rng)
        batch = [
            Transition(int(rng.integers(3)), int(rng.integers(2)),
                       int(rng.integers(3)), float(rng.normal(scale=0.5)),
                       bool(rng.random() < 0.3))
            for _ in range(6)
        ]
        report = gradient_check(lambda: td_loss_and_grads(nets, batch, 0.95),
                                nets.online.params(), tolerance=1e-4)
        assert report.passed, f"seed {seed} TD-loss check: {report}"
        worst = max(worst, report.max_rel_error)

        cell = lstm_init(2, 3, rng)
        xs = rng.normal(size=(2, 3, 2))
        readout = rng.normal(size=(2, 3, 3))

        def cell_loss():
            hs, cache = lstm_forward_batch(cell, xs)
            grads, _ = lstm_backward_batch(cell, cache, readout)
            return float(np.sum(hs * readout)), grads

        report = gradient_check(cell_loss, cell.params(), tolerance=1e-4)
        assert report.passed, f"seed {seed} recurrent-cell check: {report}"
        worst = max(worst, report.max_rel_error)
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0, f"gradient checks took {elapsed:.1f}s"
    print(f"criterion 1: worst rel err {worst:.2e} over 20 seeds, "
          f"{elapsed:.1f}s")


def test_c02_greedy_policy_equals_value_iteration_on_chain_mdp():
    # 4-state corridor, gamma=0.95, oracle iterated to 1e-10; 3/3 seeds
    # inside 500 episodes, under 2 min
    t0 = time.perf_counter()
    oracle = chain_mdp_oracle_policy(0.95)
    for seed in (0, 1, 2):
        cfg = DqnConfig(
            gamma=0.95, alpha=3e-3, tau=5, batch_size=16, episodes=400,
            epochs_per_episode=25, buffer_capacity=2000, hidden=(16,),
            seed=seed,
            epsilon=EpsilonSchedule(1.0, 0.05, 0.9995, EPS_MULTIPLICATIVE),
        )
        result = train(ChainMdp(), cfg)
        for s in range(3):  # terminal state never acts
            q, _ = mlp_forward(result.nets.online, ChainMdp().encode(s))
            assert int(np.argmax(q)) == oracle[s], \
                f"seed {seed}: greedy action at state {s} is not optimal"
    elapsed = time.perf_counter() - t0
    assert elapsed < 120.0, f"tabular-oracle check took {elapsed:.1f}s"
    print(f"criterion 2: 3/3 seeds optimal in {elapsed:.1f}s")


def test_c03_reward_worked_examples_bitwise():
    # four frozen hand-worked cases: both branches, the exact
    # ratio == threshold boundary, and both goal-stake settings
    lenient = RewardParams(injection_threshold=0.5, r_monitor=1.0,
                           r_inject=2.0)
    assert compute_reward(ActionCounters(), 0.5, lenient, False) == 0.0

    # below threshold: 3*1 - (0.5*2*2)/4 - 0
    assert compute_reward(
        ActionCounters(n_inject=2, n_check=2, n_monitor=3), 0.5,
        lenient, False) == 2.5

    aggressive = RewardParams(injection_threshold=0.5, r_inject=1.0,
                              r_check=1.0, r_monitor=1.0, r_block=2.0,
                              goal_reward=10.0)
    counters = ActionCounters(n_inject=4, n_check=0, n_monitor=2, n_block=2)
    # at/above threshold, goal safe: (2*2)(2*1)/4 - max(0, 1 + 0)
    assert compute_reward(counters, 1.0, aggressive, False) == 1.0
    # same counters with the goal stake applied: 2 - max(0, 1 + 10)
    assert compute_reward(counters, 1.0, aggressive, True) == -9.0

    # ratio == threshold exactly routes to the aggressive branch:
    # 2*0.5/4 = 0.25 == k, value 0 - max(2, 0.5) instead of 1 - 0.5
    boundary = RewardParams(injection_threshold=0.25, r_inject=2.0)
    assert compute_reward(
        ActionCounters(n_inject=2, n_check=2, n_monitor=1), 0.5,
        boundary, False) == -2.0
    print("criterion 3: 4 worked examples + boundary case exact")


def test_c04_default_run_reward_stabilizes(default_run):
    # late-window |std/mean| <= 0.25 and late mean > early mean, <10 min
    ep = default_run.cols["episode"]
    reward = default_run.cols["total_reward"]
    late = reward[(ep >= 200) & (ep <= 250)]
    early = reward[ep <= 50]
    wobble = abs(float(np.std(late) / np.mean(late)))
    assert wobble <= 0.25, f"late-window |std/mean| {wobble:.3f} > 0.25"
    assert float(np.mean(late)) > float(np.mean(early)), (
        f"late mean {np.mean(late):.1f} not above early mean "
        f"{np.mean(early):.1f}")
    assert default_run.elapsed < 600.0, \
        f"default run took {default_run.elapsed:.0f}s"
    print(f"criterion 4: |std/mean| {wobble:.3f}, "
          f"mean {np.mean(early):.1f} -> {np.mean(late):.1f}, "
          f"{default_run.elapsed:.0f}s")


def test_c05_blocks_trail_injections_after_warmup(default_run):
    # KNOWN FAILURE. Requires n_a4 <= n_a1 in >= 90% of episodes > 50.
    ep = default_run.cols["episode"]
    sel = ep > 50
    blocks = default_run.cols["n_a4"][sel]
    injects = default_run.cols["n_a1"][sel]
    frac = float(np.mean(blocks <= injects))
    assert frac >= 0.90, (
        f"n_a4 <= n_a1 in only {frac:.1%} of episodes 51-250 (need 90%). "
        "With the stock schedule epsilon only decays to ~0.78 by episode "
        "250, so both counters are dominated by uniform exploration "
        "residuals of equal rate; their difference is symmetric around "
        "zero and the orderings are near coin flips (~53%). Forcing the "
        "ordering would mean rigging the policy rather than training it; "
        "see notes/decisions.md for the full analysis.")


def test_c06_threshold_sweep_plateau_and_low_k_distinct(tmp_path):
    # spread of the k >= 0.3 plateau <= 0.20; k = 0.05 separated from
    # the plateau by more than its own spread; whole sweep < 30 min
    t0 = time.perf_counter()
    out = tmp_path / "sweep.csv"
    code = main(["sweep-k",
                 "--k-values", "0.05,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0",
                 "--out", str(out)])
    elapsed = time.perf_counter() - t0
    assert code == 0
    cols = read_columns(out)
    k, avg = cols["k"], cols["avg_episodic_reward"]
    plateau = avg[k >= 0.3]
    low = float(avg[k < 0.3][0])
    spread = float((plateau.max() - plateau.min()) / abs(plateau.mean()))
    assert spread <= 0.20, f"plateau relative spread {spread:.3f} > 0.20"
    gap = abs(low - float(plateau.mean()))
    band = float(plateau.max() - plateau.min())
    assert gap > band, (
        f"k=0.05 average {low:.2f} within plateau band "
        f"(gap {gap:.2f} <= spread {band:.2f})")
    assert elapsed < 1800.0, f"sweep took {elapsed:.0f}s"
    print(f"criterion 6: spread {spread:.3f}, low-k gap {gap:.2f} "
          f"vs band {band:.2f}, {elapsed:.0f}s")


def test_c07_epsilon_schedule_closed_forms_both_modes():
    # exact to 1e-12 at t in {0, 1, 10, 1e6} with the default triple
    start, end, decay = 1.0, 0.1, 0.99999
    mult = EpsilonSchedule(start, end, decay, EPS_MULTIPLICATIVE)
    expo = EpsilonSchedule(start, end, decay, EPS_EXPONENTIAL)
    for t in (0, 1, 10, 10**6):
        want = max(end, start * decay**t)
        assert abs(epsilon_at(mult, t) - want) <= 1e-12, f"mult t={t}"
        want = end + (start - end) * math.exp(-t / decay)
        assert abs(epsilon_at(expo, t) - want) <= 1e-12, f"exp t={t}"
    print("criterion 7: both modes exact at t in {0, 1, 10, 1e6}")


def test_c08_sequence_model_learns_noiseless_chain():
    # held-out starts reach val acc >= 0.95 within 100 epochs and the
    # decoder reproduces the shortest-path oracle from every start; <5 min
    t0 = time.perf_counter()
    n = 12
    events = tuple(EventCondition(i, f"ev{i}", f"dev{i}") for i in range(n))
    exploits = tuple(Exploit(i, i + 1, (i,)) for i in range(n - 1))
    graph = AttackDependencyGraph(events, exploits, n - 1)

    def suffix(tid, s):
        seq = tuple(range(s, n))
        return Trace(tid, seq, tuple(float(i + 1) for i in range(len(seq))))

    train_traces = [suffix(i, s) for i, s in enumerate(range(0, 11, 2))]
    held_out = [suffix(100 + i, s) for i, s in enumerate(range(1, 11, 2))]
    cfg = SeqModelConfig(n_classes=n, embed_dim=16, lstm_units=(16,),
                         seq_len=n, epochs=100, learning_rate=1e-2, seed=0)
    model, history = train_seq_model(train_traces, cfg, val_traces=held_out)
    acc = np.array(history.val_acc)
    assert acc.max() >= 0.95, f"best held-out accuracy {acc.max():.3f}"
    first = int(np.argmax(acc >= 0.95)) + 1
    for s in range(n):
        got = decode_attack_sequence(model, graph, s)
        assert got.complete and got.exploits == optimal_paths(graph, s), \
            f"decode from start {s} diverges from the oracle"
    elapsed = time.perf_counter() - t0
    assert elapsed < 300.0, f"sequence-model check took {elapsed:.1f}s"
    print(f"criterion 8: val acc {acc.max():.3f} (first >=0.95 at epoch "
          f"{first}), decode matches oracle from all {n} starts, "
          f"{elapsed:.1f}s")


def drop_column(text, name):
    lines = text.splitlines()
    idx = lines[0].split(",").index(name)
    keep = lambda ln: ",".join(
        p for i, p in enumerate(ln.split(",")) if i != idx)
    return "\n".join(keep(ln) for ln in lines)


def test_c09_training_is_deterministic_across_runs(default_run,
                                                   tmp_path_factory):
    # same config + seed -> byte-identical artifacts, wall time aside
    rerun = tmp_path_factory.mktemp("default_rerun")
    assert main(["train", "--out-dir", str(rerun)]) == 0
    for name in ("graph.txt", "traces.csv", "seq_history.csv", "pool.txt",
                 "checkpoint.txt", "config_used.txt"):
        a = (default_run.out / name).read_bytes()
        b = (rerun / name).read_bytes()
        assert a == b, f"{name} differs between identical runs"
    a = drop_column((default_run.out / "train.csv").read_text(),
                    "time_overhead_s")
    b = drop_column((rerun / "train.csv").read_text(), "time_overhead_s")
    assert a == b, "train.csv differs beyond the wall-time column"
    print("criterion 9: 7/7 artifacts identical modulo time_overhead_s")


def test_c10_time_overhead_stabilizes(default_run):
    # late-window overhead std <= 50% of its mean
    ep = default_run.cols["episode"]
    overhead = default_run.cols["time_overhead_s"][(ep >= 200) & (ep <= 250)]
    ratio = float(np.std(overhead) / np.mean(overhead))
    assert ratio <= 0.50, f"overhead std/mean {ratio:.3f} > 0.50"
    print(f"criterion 10: overhead std/mean {ratio:.3f} "
          f"(mean {np.mean(overhead) * 1e3:.2f} ms)")
