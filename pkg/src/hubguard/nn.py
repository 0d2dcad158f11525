"""Neural-network numerics built directly on float64 numpy arrays.

Everything the learning components need lives here: dense layers and
multi-layer perceptrons, an LSTM cell with full backpropagation through
time, an embedding table, Huber and softmax cross-entropy losses, Adam,
a central-finite-difference gradient checker, and a plain-text parameter
snapshot format. No autograd: every backward pass is written out by hand
and verified against finite differences in the test suite.

Array conventions: weights are (out, in) row-major float64; activations
for a batch are (B, features). Single-sample entry points accept 1-D
vectors and wrap them in a batch of one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, ContractViolationError, InputError

Array = np.ndarray

_ACTIVATIONS = ("relu", "linear")


def _as_f64(x, name: str = "array") -> Array:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


def _check_finite(arr: Array, where: str) -> Array:
    if not np.all(np.isfinite(arr)):
        raise ContractViolationError(f"non-finite values produced in {where}")
    return arr


def relu(z: Array) -> Array:
    return np.maximum(z, 0.0)


# ---------------------------------------------------------------------------
# Dense layers / MLP


@dataclass
class DenseLayer:
    weights: Array  # (out, in)
    bias: Array  # (out,)
    activation: str = "relu"

    def __post_init__(self) -> None:
        self.weights = _as_f64(self.weights, "weights")
        self.bias = _as_f64(self.bias, "bias")
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise ConfigurationError("dense layer needs 2-D weights and 1-D bias")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ConfigurationError(
                f"bias length {self.bias.shape[0]} != output dim {self.weights.shape[0]}"
            )
        if self.activation not in _ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


def dense_init(in_dim: int, out_dim: int, activation: str, rng: np.random.Generator) -> DenseLayer:
    """Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] for weights and bias."""
    if in_dim < 1 or out_dim < 1:
        raise ConfigurationError("layer dims must be positive")
    bound = 1.0 / math.sqrt(in_dim)
    w = rng.uniform(-bound, bound, size=(out_dim, in_dim))
    b = rng.uniform(-bound, bound, size=out_dim)
    return DenseLayer(w, b, activation)


def dense_forward(layer: DenseLayer, x: Array) -> tuple[Array, Array]:
    """Return (activations, pre-activations) for a (B, in) batch."""
    z = x @ layer.weights.T + layer.bias
    a = relu(z) if layer.activation == "relu" else z
    return a, z


def dense_backward(layer: DenseLayer, x: Array, z: Array, da: Array) -> tuple[Array, Array, Array]:
    """Return (dW, db, dx) given upstream grad on the layer output."""
    dz = da * (z > 0.0) if layer.activation == "relu" else da
    dw = dz.T @ x
    db = dz.sum(axis=0)
    dx = dz @ layer.weights
    return dw, db, dx


class Mlp:
    """A stack of DenseLayers with explicit forward/backward passes.

    Mutating parameters (e.g. via adam_step) must be followed by
    mark_updated(); forward caches are stamped with the parameter
    version so a backward pass against a stale cache fails loudly.
    """

    def __init__(self, layers: Sequence[DenseLayer]):
        layers = list(layers)
        if not layers:
            raise ConfigurationError("Mlp needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ConfigurationError(
                    f"layer dims mismatch: {prev.out_dim} -> {nxt.in_dim}"
                )
        self.layers = layers
        self._version = 0

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def params(self) -> list[Array]:
        out: list[Array] = []
        for layer in self.layers:
            out.append(layer.weights)
            out.append(layer.bias)
        return out

    def mark_updated(self) -> None:
        self._version += 1

    def copy(self) -> "Mlp":
        return Mlp(
            [DenseLayer(l.weights.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )

    def load_from(self, other: "Mlp") -> None:
        if len(other.layers) != len(self.layers):
            raise ContractViolationError("cannot copy parameters between unlike networks")
        for mine, theirs in zip(self.layers, other.layers):
            if mine.weights.shape != theirs.weights.shape:
                raise ContractViolationError("cannot copy parameters between unlike networks")
            mine.weights[...] = theirs.weights
            mine.bias[...] = theirs.bias
        self.mark_updated()


def make_mlp(
    sizes: Sequence[int],
    rng: np.random.Generator,
    hidden_activation: str = "relu",
    out_activation: str = "linear",
) -> Mlp:
    """Build an MLP from layer sizes, e.g. (128, 64, 32, 4)."""
    if len(sizes) < 2:
        raise ConfigurationError("need input and output sizes")
    layers = []
    for i, (a, b) in enumerate(zip(sizes, sizes[1:])):
        act = out_activation if i == len(sizes) - 2 else hidden_activation
        layers.append(dense_init(a, b, act, rng))
    return Mlp(layers)


@dataclass
class MlpCache:
    net: Mlp
    version: int
    inputs: list[Array]  # input to each layer, (B, in)
    preacts: list[Array]  # z of each layer, (B, out)
    squeezed: bool  # True if the caller passed a single vector


def mlp_forward(net: Mlp, x) -> tuple[Array, MlpCache]:
    """Forward pass; returns (output, cache) where cache suffices for backprop."""
    x = _as_f64(x, "input")
    squeezed = x.ndim == 1
    if squeezed:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.in_dim:
        raise InputError(f"input width {x.shape[-1]} != network input dim {net.in_dim}")
    inputs, preacts = [], []
    a = x
    for layer in net.layers:
        inputs.append(a)
        a, z = dense_forward(layer, a)
        preacts.append(z)
    _check_finite(a, "mlp_forward")
    out = a[0] if squeezed else a
    return out, MlpCache(net, net._version, inputs, preacts, squeezed)


def mlp_backward(net: Mlp, cache: MlpCache, output_grad) -> list[Array]:
    """Backprop the upstream output gradient; returns grads aligned with params()."""
    if cache.net is not net or cache.version != net._version:
        raise ContractViolationError("stale or foreign forward cache")
    da = _as_f64(output_grad, "output_grad")
    if cache.squeezed:
        da = da[None, :]
    if da.shape != (cache.inputs[0].shape[0], net.out_dim):
        raise InputError("output_grad shape does not match the cached forward pass")
    grads: list[Array] = [None] * (2 * len(net.layers))  # type: ignore[list-item]
    for i in range(len(net.layers) - 1, -1, -1):
        dw, db, da = dense_backward(net.layers[i], cache.inputs[i], cache.preacts[i], da)
        grads[2 * i] = dw
        grads[2 * i + 1] = db
    for g in grads:
        _check_finite(g, "mlp_backward")
    return grads


# ---------------------------------------------------------------------------
# Losses


def huber(delta):
    """Huber loss and derivative at the given residual (unit transition point).

    Quadratic delta**2/2 for |delta| <= 1, linear |delta| - 1/2 beyond;
    value and slope agree at the knee. Vectorizes over arrays.
    """
    d = np.asarray(delta, dtype=np.float64)
    if not np.all(np.isfinite(d)):
        raise InputError("huber residual must be finite")
    small = np.abs(d) <= 1.0
    loss = np.where(small, 0.5 * d * d, np.abs(d) - 0.5)
    grad = np.where(small, d, np.sign(d))
    if np.isscalar(delta) or getattr(delta, "ndim", 0) == 0:
        return float(loss), float(grad)
    return loss, grad


def softmax(logits: Array) -> Array:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, target: int) -> tuple[float, Array]:
    """Mean-free single-sample cross entropy; returns (loss, dlogits)."""
    z = _as_f64(logits, "logits")
    if z.ndim != 1:
        raise InputError("single-sample cross entropy expects a 1-D logit vector")
    if not 0 <= target < z.shape[0]:
        raise InputError(f"target {target} out of range for {z.shape[0]} classes")
    p = softmax(z)
    # log-sum-exp form keeps the loss finite for extreme logits
    m = z.max()
    loss = float(math.log(np.exp(z - m).sum()) + m - z[target])
    grad = p.copy()
    grad[target] -= 1.0
    return loss, grad


def softmax_cross_entropy_batch(logits: Array, targets: Array) -> tuple[float, Array]:
    """Mean cross entropy over a batch; grad is already scaled by 1/B."""
    z = _as_f64(logits, "logits")
    t = np.asarray(targets, dtype=np.int64)
    if z.ndim != 2 or t.ndim != 1 or z.shape[0] != t.shape[0]:
        raise InputError("batch cross entropy expects (B, C) logits and (B,) targets")
    if t.min(initial=0) < 0 or t.max(initial=0) >= z.shape[1]:
        raise InputError("target id out of range")
    m = z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z - m).sum(axis=1)) + m[:, 0]
    losses = lse - z[np.arange(z.shape[0]), t]
    grad = softmax(z)
    grad[np.arange(z.shape[0]), t] -= 1.0
    return float(losses.mean()), grad / z.shape[0]


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    alpha: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8
    step: int = 0
    m: list[Array] = field(default_factory=list)
    v: list[Array] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Sequence[Array], alpha: float, **kw) -> "AdamState":
        if alpha <= 0:
            raise ConfigurationError("alpha must be positive")
        state = cls(alpha=alpha, **kw)
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
        return state


def adam_step(state: AdamState, params: Sequence[Array], grads: Sequence[Array]) -> None:
    """One Adam update, in place, with bias correction."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ContractViolationError("param/grad lists do not match optimizer state")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ContractViolationError("gradient shape does not match parameter")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.alpha * (m / c1) / (np.sqrt(v / c2) + state.eps_hat)


# ---------------------------------------------------------------------------
# LSTM


@dataclass
class LstmCell:
    """Gated recurrent cell: sigmoid input/forget/output gates, tanh candidate.

    Weight layout: w_* are (hidden, input), u_* are (hidden, hidden),
    biases (hidden,). Gate order throughout is i, f, o, g.
    """

    w_i: Array
    w_f: Array
    w_o: Array
    w_g: Array
    u_i: Array
    u_f: Array
    u_o: Array
    u_g: Array
    b_i: Array
    b_f: Array
    b_o: Array
    b_g: Array

    def __post_init__(self) -> None:
        h, d = self.w_i.shape
        for name in ("w_i", "w_f", "w_o", "w_g"):
            if getattr(self, name).shape != (h, d):
                raise ConfigurationError("inconsistent input weight shapes")
        for name in ("u_i", "u_f", "u_o", "u_g"):
            if getattr(self, name).shape != (h, h):
                raise ConfigurationError("inconsistent recurrent weight shapes")
        for name in ("b_i", "b_f", "b_o", "b_g"):
            if getattr(self, name).shape != (h,):
                raise ConfigurationError("inconsistent bias shapes")

    @property
    def input_dim(self) -> int:
        return self.w_i.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w_i.shape[0]

    def params(self) -> list[Array]:
        return [
            self.w_i, self.w_f, self.w_o, self.w_g,
            self.u_i, self.u_f, self.u_o, self.u_g,
            self.b_i, self.b_f, self.b_o, self.b_g,
        ]


def lstm_init(input_dim: int, hidden_dim: int, rng: np.random.Generator) -> LstmCell:
    if input_dim < 1 or hidden_dim < 1:
        raise ConfigurationError("lstm dims must be positive")
    bw = 1.0 / math.sqrt(input_dim)
    bu = 1.0 / math.sqrt(hidden_dim)
    w = lambda: rng.uniform(-bw, bw, size=(hidden_dim, input_dim))
    u = lambda: rng.uniform(-bu, bu, size=(hidden_dim, hidden_dim))
    b = lambda: rng.uniform(-bu, bu, size=hidden_dim)
    return LstmCell(w(), w(), w(), w(), u(), u(), u(), u(), b(), b(), b(), b())


def _sigmoid(z: Array) -> Array:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LstmCache:
    xs: Array  # (B, T, in)
    h_prev: list[Array]
    c_prev: list[Array]
    gates: list[tuple[Array, Array, Array, Array]]  # i, f, o, g per step
    c: list[Array]
    tanh_c: list[Array]


def lstm_forward_batch(cell: LstmCell, xs: Array) -> tuple[Array, LstmCache]:
    """Run the cell over (B, T, in); returns hidden states (B, T, H) and cache."""
    xs = _as_f64(xs, "lstm input")
    if xs.ndim != 3 or xs.shape[1] == 0:
        raise InputError("lstm input must be a non-empty (B, T, in) array")
    if xs.shape[2] != cell.input_dim:
        raise InputError(f"lstm input dim {xs.shape[2]} != cell input dim {cell.input_dim}")
    B, T, _ = xs.shape
    H = cell.hidden_dim
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    cache = LstmCache(xs, [], [], [], [], [])
    hs = np.empty((B, T, H))
    for t in range(T):
        x = xs[:, t, :]
        cache.h_prev.append(h)
        cache.c_prev.append(c)
        i = _sigmoid(x @ cell.w_i.T + h @ cell.u_i.T + cell.b_i)
        f = _sigmoid(x @ cell.w_f.T + h @ cell.u_f.T + cell.b_f)
        o = _sigmoid(x @ cell.w_o.T + h @ cell.u_o.T + cell.b_o)
        g = np.tanh(x @ cell.w_g.T + h @ cell.u_g.T + cell.b_g)
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        cache.gates.append((i, f, o, g))
        cache.c.append(c)
        cache.tanh_c.append(tc)
        hs[:, t, :] = h
    _check_finite(hs, "lstm_forward")
    return hs, cache


def lstm_backward_batch(
    cell: LstmCell, cache: LstmCache, hidden_grads: Array
) -> tuple[list[Array], Array]:
    """BPTT through the cached pass; returns (param grads, input grads)."""
    dh_seq = _as_f64(hidden_grads, "hidden_grads")
    B, T, _ = cache.xs.shape
    if dh_seq.shape != (B, T, cell.hidden_dim):
        raise InputError("hidden_grads shape does not match the cached forward pass")
    grads = [np.zeros_like(p) for p in cell.params()]
    (dw_i, dw_f, dw_o, dw_g, du_i, du_f, du_o, du_g, db_i, db_f, db_o, db_g) = grads
    dxs = np.zeros_like(cache.xs)
    dh_next = np.zeros((B, cell.hidden_dim))
    dc_next = np.zeros((B, cell.hidden_dim))
    for t in range(T - 1, -1, -1):
        i, f, o, g = cache.gates[t]
        tc = cache.tanh_c[t]
        x = cache.xs[:, t, :]
        h_prev = cache.h_prev[t]
        c_prev = cache.c_prev[t]
        dh = dh_seq[:, t, :] + dh_next
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dc_next = dc * f
        dpi = di * i * (1.0 - i)
        dpf = df * f * (1.0 - f)
        dpo = do * o * (1.0 - o)
        dpg = dg * (1.0 - g * g)
        dw_i += dpi.T @ x
        dw_f += dpf.T @ x
        dw_o += dpo.T @ x
        dw_g += dpg.T @ x
        du_i += dpi.T @ h_prev
        du_f += dpf.T @ h_prev
        du_o += dpo.T @ h_prev
        du_g += dpg.T @ h_prev
        db_i += dpi.sum(axis=0)
        db_f += dpf.sum(axis=0)
        db_o += dpo.sum(axis=0)
        db_g += dpg.sum(axis=0)
        dxs[:, t, :] = dpi @ cell.w_i + dpf @ cell.w_f + dpo @ cell.w_o + dpg @ cell.w_g
        dh_next = dpi @ cell.u_i + dpf @ cell.u_f + dpo @ cell.u_o + dpg @ cell.u_g
    for gr in grads:
        _check_finite(gr, "lstm_backward")
    return grads, dxs


def lstm_forward(cell: LstmCell, input_seq: Array) -> tuple[Array, LstmCache]:
    """Single-sequence wrapper: (T, in) -> (T, H) hidden states."""
    seq = _as_f64(input_seq, "lstm input")
    if seq.ndim != 2:
        raise InputError("lstm_forward expects a (T, in) sequence")
    hs, cache = lstm_forward_batch(cell, seq[None, :, :])
    return hs[0], cache


def lstm_backward(cell: LstmCell, cache: LstmCache, hidden_grads: Array) -> tuple[list[Array], Array]:
    """Single-sequence wrapper matching lstm_forward."""
    dh = _as_f64(hidden_grads, "hidden_grads")
    if dh.ndim != 2:
        raise InputError("lstm_backward expects (T, H) hidden grads")
    grads, dxs = lstm_backward_batch(cell, cache, dh[None, :, :])
    return grads, dxs[0]


# ---------------------------------------------------------------------------
# Embedding


@dataclass
class Embedding:
    table: Array  # (vocab, dim)

    def __post_init__(self) -> None:
        self.table = _as_f64(self.table, "embedding table")
        if self.table.ndim != 2:
            raise ConfigurationError("embedding table must be 2-D")

    @property
    def vocab(self) -> int:
        return self.table.shape[0]

    @property
    def dim(self) -> int:
        return self.table.shape[1]


def embedding_init(vocab: int, dim: int, rng: np.random.Generator) -> Embedding:
    if vocab < 1 or dim < 1:
        raise ConfigurationError("embedding dims must be positive")
    bound = 1.0 / math.sqrt(dim)
    return Embedding(rng.uniform(-bound, bound, size=(vocab, dim)))


def embed_lookup(emb: Embedding, ids) -> Array:
    idx = np.asarray(ids, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= emb.vocab):
        raise InputError(f"embedding id out of range [0, {emb.vocab})")
    return emb.table[idx]


def embed_backward(emb: Embedding, ids, dvecs: Array) -> Array:
    """Accumulate output grads into a dense table gradient."""
    idx = np.asarray(ids, dtype=np.int64)
    grad = np.zeros_like(emb.table)
    np.add.at(grad, idx.reshape(-1), dvecs.reshape(-1, emb.dim))
    return grad


# ---------------------------------------------------------------------------
# Gradient checking


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    passed: bool
    worst_param: int
    worst_index: int


def gradient_check(
    function: Callable[[], tuple[float, Sequence[Array]]],
    params: Sequence[Array],
    tolerance: float = 1e-4,
    step: float = 1e-5,
) -> GradCheckReport:
    """Compare analytic gradients with central finite differences.

    `function` must be deterministic, evaluate the loss at the current
    parameter values, and return (loss, grads) with grads aligned to
    `params`. Each parameter entry is perturbed by +/- step in place.
    Relative error uses a small floor so near-zero gradients are judged
    on absolute terms.
    """
    if step <= 0 or tolerance <= 0:
        raise ConfigurationError("step and tolerance must be positive")
    _, analytic = function()
    if len(analytic) != len(params):
        raise ContractViolationError("function returned grads misaligned with params")
    worst = (0.0, -1, -1)
    for pi, p in enumerate(params):
        flat = p.reshape(-1)
        an = np.asarray(analytic[pi]).reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            lo_plus, _ = function()
            flat[j] = orig - step
            lo_minus, _ = function()
            flat[j] = orig
            numeric = (lo_plus - lo_minus) / (2.0 * step)
            denom = max(abs(an[j]), abs(numeric), 1e-3)
            rel = abs(an[j] - numeric) / denom
            if rel > worst[0]:
                worst = (rel, pi, j)
    return GradCheckReport(worst[0], tolerance, worst[0] <= tolerance, worst[1], worst[2])


# ---------------------------------------------------------------------------
# Parameter snapshots

_SNAPSHOT_MAGIC = "hubguard-params 1"


def save_params(path, named: dict[str, Array]) -> None:
    """Write named arrays as text: a header, then per array one shape line
    followed by one line of row-major values (repr round-trips float64 exactly)."""
    lines = [_SNAPSHOT_MAGIC, str(len(named))]
    for name, arr in named.items():
        if any(ch.isspace() for ch in name) or not name:
            raise InputError(f"bad parameter name {name!r}")
        a = np.asarray(arr, dtype=np.float64)
        dims = " ".join(str(d) for d in a.shape)
        lines.append(f"param {name} {a.ndim} {dims}".rstrip())
        lines.append(" ".join(repr(float(v)) for v in a.reshape(-1)))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_params(path) -> dict[str, Array]:
    """Inverse of save_params; raises InputError on malformed snapshots."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read parameter snapshot {path}: {exc}") from exc
    if not lines or lines[0] != _SNAPSHOT_MAGIC:
        raise InputError(f"{path} is not a parameter snapshot")
    try:
        count = int(lines[1])
    except (IndexError, ValueError) as exc:
        raise InputError(f"{path}: bad snapshot header") from exc
    named: dict[str, Array] = {}
    pos = 2
    for _ in range(count):
        try:
            head = lines[pos].split()
            if head[0] != "param":
                raise ValueError("expected param line")
            name = head[1]
            ndim = int(head[2])
            shape = tuple(int(d) for d in head[3 : 3 + ndim])
            values = np.array([float(v) for v in lines[pos + 1].split()], dtype=np.float64)
            named[name] = values.reshape(shape)
            pos += 2
        except (IndexError, ValueError) as exc:
            raise InputError(f"{path}: malformed snapshot near line {pos + 1}") from exc
    return named
