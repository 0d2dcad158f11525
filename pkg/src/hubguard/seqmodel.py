"""Recurrent next-event predictor and strategy-pool construction.

An embedding feeds a stack of (optionally bidirectional) LSTM layers;
a linear head over the last timestep scores the next event. Trained
with full-batch Adam on softmax cross entropy over sliding windows, so
identical seeds give bitwise-identical histories. The trained model
greedily decodes exploit chains through the dependency graph, and the
top-scoring crucial events seed the adversary's strategy pool.

Windows shorter than the configured length are left-padded with a
reserved id (== n_classes); the pad id never appears as a label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attacker import AttackStrategy
from .errors import ConfigurationError, InputError
from .graph import AttackDependencyGraph, CrucialScore
from .nn import (
    AdamState,
    DenseLayer,
    Embedding,
    LstmCell,
    adam_step,
    embed_backward,
    embed_lookup,
    embedding_init,
    lstm_backward_batch,
    lstm_forward_batch,
    lstm_init,
    softmax,
    softmax_cross_entropy_batch,
)


@dataclass(frozen=True)
class SeqModelConfig:
    """Desk-scale defaults; n_classes must equal the event vocabulary."""

    n_classes: int
    embed_dim: int = 16
    lstm_units: tuple[int, ...] = (16, 8)
    bidirectional: bool = True
    seq_len: int = 16
    epochs: int = 60
    learning_rate: float = 1e-2
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.n_classes, self.embed_dim, self.seq_len) < 1:
            raise ConfigurationError("n_classes, embed_dim, seq_len must be positive")
        if not self.lstm_units or min(self.lstm_units) < 1:
            raise ConfigurationError("need at least one positive lstm layer width")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be positive")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning rate must be positive")


@dataclass
class SeqModel:
    config: SeqModelConfig
    embedding: Embedding  # vocab = n_classes + 1; last row is the pad id
    layers: list[tuple[LstmCell, LstmCell | None]]  # (forward, backward|None)
    head: DenseLayer

    @property
    def pad_id(self) -> int:
        return self.config.n_classes

    def params(self) -> list[np.ndarray]:
        out = [self.embedding.table]
        for fwd, bwd in self.layers:
            out.extend(fwd.params())
            if bwd is not None:
                out.extend(bwd.params())
        out.extend([self.head.weights, self.head.bias])
        return out


@dataclass(frozen=True)
class TrainHistory:
    train_acc: tuple[float, ...]
    val_acc: tuple[float, ...]
    train_loss: tuple[float, ...]
    val_loss: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.train_acc)


def make_seq_model(config: SeqModelConfig, rng: np.random.Generator) -> SeqModel:
    emb = embedding_init(config.n_classes + 1, config.embed_dim, rng)
    layers: list[tuple[LstmCell, LstmCell | None]] = []
    width = config.embed_dim
    for units in config.lstm_units:
        fwd = lstm_init(width, units, rng)
        bwd = lstm_init(width, units, rng) if config.bidirectional else None
        layers.append((fwd, bwd))
        width = units * (2 if config.bidirectional else 1)
    bound = 1.0 / np.sqrt(width)
    head = DenseLayer(
        rng.uniform(-bound, bound, size=(config.n_classes, width)),
        np.zeros(config.n_classes),
        "linear",
    )
    return SeqModel(config=config, embedding=emb, layers=layers, head=head)


# ---------------------------------------------------------------------------
# Windowing

def make_windows(traces, config: SeqModelConfig) -> tuple[np.ndarray, np.ndarray]:
    """Sliding next-event windows over every trace: (B, seq_len) ids, (B,) labels."""
    windows, labels = [], []
    for trace in traces:
        for ev in trace.events:
            if not 0 <= ev < config.n_classes:
                raise InputError(
                    f"event id {ev} outside the {config.n_classes}-class vocabulary")
        for i in range(1, len(trace.events)):
            prefix = trace.events[max(0, i - config.seq_len):i]
            pad = (config.n_classes,) * (config.seq_len - len(prefix))
            windows.append(pad + tuple(prefix))
            labels.append(trace.events[i])
    if not windows:
        raise InputError("no trainable windows: every trace has fewer than 2 events")
    return np.array(windows, dtype=np.int64), np.array(labels, dtype=np.int64)


# ---------------------------------------------------------------------------
# Forward / backward over the whole stack

def seq_forward(model: SeqModel, windows: np.ndarray):
    """Logits (B, n_classes) for a batch of id windows, plus backprop cache."""
    ids = np.asarray(windows, dtype=np.int64)
    if ids.ndim != 2:
        raise InputError("expected a (B, T) window batch")
    x = embed_lookup(model.embedding, ids)
    caches = []
    for fwd, bwd in model.layers:
        hs_f, cache_f = lstm_forward_batch(fwd, x)
        if bwd is None:
            x = hs_f
            caches.append((cache_f, None))
        else:
            hs_b, cache_b = lstm_forward_batch(bwd, x[:, ::-1, :])
            x = np.concatenate([hs_f, hs_b[:, ::-1, :]], axis=2)
            caches.append((cache_f, cache_b))
    last = x[:, -1, :]
    logits = last @ model.head.weights.T + model.head.bias
    return logits, (ids, caches, last)


def loss_and_grads(model: SeqModel, windows: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy loss, gradients aligned with model.params(), logits."""
    logits, (ids, caches, last) = seq_forward(model, windows)
    loss, dlogits = softmax_cross_entropy_batch(logits, labels)

    d_head_w = dlogits.T @ last
    d_head_b = dlogits.sum(axis=0)
    dlast = dlogits @ model.head.weights
    T = ids.shape[1]

    layer_grads: list[list[np.ndarray]] = []
    dh = np.zeros((ids.shape[0], T, last.shape[1]))
    dh[:, -1, :] = dlast
    for (fwd, bwd), (cache_f, cache_b) in zip(
            reversed(model.layers), reversed(caches)):
        if bwd is None:
            grads_f, dx = lstm_backward_batch(fwd, cache_f, dh)
            layer_grads.append(grads_f)
        else:
            h = fwd.hidden_dim
            grads_f, dx_f = lstm_backward_batch(fwd, cache_f, dh[:, :, :h])
            grads_b, dx_b = lstm_backward_batch(bwd, cache_b, dh[:, ::-1, h:])
            layer_grads.append(grads_f + grads_b)
            dx = dx_f + dx_b[:, ::-1, :]
        dh = dx
    d_table = embed_backward(model.embedding, ids, dh)

    grads = [d_table]
    for g in reversed(layer_grads):
        grads.extend(g)
    grads.extend([d_head_w, d_head_b])
    return loss, grads, logits


def _accuracy(logits: np.ndarray, labels: np.ndarray) -> float:
    return float((logits.argmax(axis=1) == labels).mean())


# ---------------------------------------------------------------------------
# Training

def train_seq_model(traces, config: SeqModelConfig, val_traces=None):
    """Full-batch Adam on next-event cross entropy; returns (model, history).

    The caller applies any train/validation split: windows from
    `val_traces` are scored (never trained on) after each epoch's
    update; when absent the training windows double as the validation
    set.
    """
    if not traces:
        raise InputError("need at least one training trace")
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    model = make_seq_model(config, rng)
    windows, labels = make_windows(traces, config)
    if val_traces is not None:
        v_windows, v_labels = make_windows(val_traces, config)
    else:
        v_windows, v_labels = windows, labels

    adam = AdamState.for_params(model.params(), alpha=config.learning_rate)
    tr_acc, va_acc, tr_loss, va_loss = [], [], [], []
    for _ in range(config.epochs):
        loss, grads, logits = loss_and_grads(model, windows, labels)
        adam_step(adam, model.params(), grads)
        v_logits, _ = seq_forward(model, v_windows)
        v_loss, _ = softmax_cross_entropy_batch(v_logits, v_labels)
        tr_acc.append(_accuracy(logits, labels))
        tr_loss.append(float(loss))
        va_acc.append(_accuracy(v_logits, v_labels))
        va_loss.append(float(v_loss))
    history = TrainHistory(tuple(tr_acc), tuple(va_acc),
                           tuple(tr_loss), tuple(va_loss))
    return model, history


def history_to_csv(history: TrainHistory) -> str:
    lines = ["epoch,train_acc,val_acc,train_loss,val_loss"]
    rows = zip(history.train_acc, history.val_acc,
               history.train_loss, history.val_loss)
    for epoch, (ta, va, tl, vl) in enumerate(rows, start=1):
        lines.append(",".join([str(epoch), repr(float(ta)), repr(float(va)),
                               repr(float(tl)), repr(float(vl))]))
    return "\n".join(lines) + "\n"


def write_history(path, history: TrainHistory) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(history_to_csv(history))


# ---------------------------------------------------------------------------
# Inference

def predict_next(model: SeqModel, prefix) -> np.ndarray:
    """Probability vector over the event vocabulary given a prefix."""
    ids = tuple(int(e) for e in prefix)
    if not ids:
        raise InputError("prefix must be non-empty")
    n = model.config.n_classes
    for ev in ids:
        if not 0 <= ev < n:
            raise InputError(f"event id {ev} outside the {n}-class vocabulary")
    window = ids[-model.config.seq_len:]
    pad = (model.pad_id,) * (model.config.seq_len - len(window))
    logits, _ = seq_forward(model, np.array([pad + window], dtype=np.int64))
    return softmax(logits[0])


@dataclass(frozen=True)
class DecodeResult:
    exploits: tuple[int, ...]
    complete: bool  # True iff the decoded chain reaches the goal


def decode_attack_sequence(
    model: SeqModel, graph: AttackDependencyGraph, start: int,
    max_steps: int | None = None,
) -> DecodeResult:
    """Greedy feasible decode from `start` toward the graph's goal.

    At each step the not-yet-compromised event with the highest
    predicted probability whose producing exploit is enabled by the
    compromised set is taken (ties: lowest event id, then lowest
    exploit id). Stops at the goal, at max_steps, or when nothing is
    feasible (flagged incomplete).
    """
    ids = graph.event_ids()
    if start not in ids:
        raise InputError(f"unknown start event {start}")
    if max_steps is None:
        max_steps = graph.n_events()
    compromised = {start}
    seq = [start]
    exploits: list[int] = []
    while graph.goal not in compromised and len(exploits) < max_steps:
        probs = predict_next(model, seq)
        best: tuple[int, int] | None = None  # (event, exploit)
        best_p = -1.0
        for ev in sorted(ids):
            if ev in compromised:
                continue
            enabled = [x.id for x in graph.exploits_for_effect(ev)
                       if set(x.preconditions) <= compromised]
            if not enabled:
                continue
            p = float(probs[ev]) if ev < probs.size else 0.0
            if p > best_p:
                best, best_p = (ev, min(enabled)), p
        if best is None:
            return DecodeResult(tuple(exploits), False)
        compromised.add(best[0])
        seq.append(best[0])
        exploits.append(best[1])
    return DecodeResult(tuple(exploits), graph.goal in compromised)


def build_strategy_pool(
    model: SeqModel, graph: AttackDependencyGraph,
    crucial: list[CrucialScore], kappa: int,
) -> list[AttackStrategy]:
    """Decode one goal-reaching strategy per top-kappa crucial event.

    The goal itself is skipped (an empty chain is not a strategy) and
    duplicate decoded chains are dropped. Raises if nothing decodes to
    a complete chain.
    """
    if kappa < 1:
        raise ConfigurationError("kappa must be at least 1")
    ranked = [c.event_id for c in crucial if c.event_id != graph.goal]
    pool: list[AttackStrategy] = []
    seen: set[tuple[int, ...]] = set()
    for start in ranked[:kappa]:
        decoded = decode_attack_sequence(model, graph, start)
        if not decoded.complete:
            continue
        strategy = AttackStrategy.from_exploits(
            len(pool), graph, start, decoded.exploits)
        if strategy.events in seen:
            continue
        seen.add(strategy.events)
        pool.append(strategy)
    if not pool:
        raise ConfigurationError(
            "no complete attack chain decodable from the crucial events")
    return pool
