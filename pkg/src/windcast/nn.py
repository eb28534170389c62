"""Float64 LSTM and dense layers with hand-written backpropagation through time.

Gate blocks are stored stacked in the order forget, input, candidate, output,
so one matrix product per timestep serves all four gates.  Per-gate views are
available through :meth:`LstmCellParams.gate`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from .errors import DimensionError, NumericError

GATES = ("f", "i", "c", "o")
OPTIMIZERS = ("sgdm", "adam", "rmsprop")


@dataclass
class LstmCellParams:
    W: np.ndarray  # recurrent weights, (4H, H)
    U: np.ndarray  # input weights, (4H, I)
    b: np.ndarray  # biases, (4H,)

    @property
    def hidden_size(self) -> int:
        return self.W.shape[1]

    @property
    def input_size(self) -> int:
        return self.U.shape[1]

    def gate(self, name: str):
        """Return views ``(w_g, u_g, b_g)`` for gate ``name`` in ``GATES``."""
        k = GATES.index(name)
        H = self.hidden_size
        sl = slice(k * H, (k + 1) * H)
        return self.W[sl], self.U[sl], self.b[sl]

    def check(self):
        H, I = self.hidden_size, self.input_size
        if self.W.shape != (4 * H, H) or self.U.shape != (4 * H, I) or self.b.shape != (4 * H,):
            raise DimensionError(
                f"inconsistent LSTM shapes W={self.W.shape} U={self.U.shape} b={self.b.shape}"
            )

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int) -> "LstmCellParams":
        H = hidden_size
        return cls(np.zeros((4 * H, H)), np.zeros((4 * H, input_size)), np.zeros(4 * H))

    @classmethod
    def xavier(cls, input_size: int, hidden_size: int, rng: np.random.Generator,
               forget_bias: float = 1.0) -> "LstmCellParams":
        H, I = hidden_size, input_size
        lim_u = np.sqrt(6.0 / (I + H))
        lim_w = np.sqrt(6.0 / (2 * H))
        U = rng.uniform(-lim_u, lim_u, size=(4 * H, I))
        W = rng.uniform(-lim_w, lim_w, size=(4 * H, H))
        b = np.zeros(4 * H)
        b[:H] = forget_bias
        return cls(W, U, b)


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden_size: int, batch: Optional[int] = None) -> "LstmState":
        shape = (hidden_size,) if batch is None else (batch, hidden_size)
        return cls(np.zeros(shape), np.zeros(shape))


@dataclass
class GateCache:
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    f: np.ndarray
    i: np.ndarray
    g: np.ndarray  # candidate cell value
    o: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray


def _norms(params: LstmCellParams) -> str:
    return (f"|W|={np.linalg.norm(params.W):.3g} |U|={np.linalg.norm(params.U):.3g} "
            f"|b|={np.linalg.norm(params.b):.3g}")


def lstm_step(params: LstmCellParams, x: np.ndarray, prev: Optional[LstmState] = None):
    """One LSTM timestep.  ``x`` is ``(I,)`` or batched ``(B, I)``."""
    x = np.asarray(x, dtype=np.float64)
    H = params.hidden_size
    if x.shape[-1] != params.input_size or x.ndim not in (1, 2):
        raise DimensionError(f"input of shape {x.shape} for input_size={params.input_size}")
    if prev is None:
        prev = LstmState.zeros(H, None if x.ndim == 1 else x.shape[0])
    if prev.h.shape[-1] != H or prev.c.shape[-1] != H:
        raise DimensionError(f"state shape {prev.h.shape} for hidden_size={H}")

    z = prev.h @ params.W.T + x @ params.U.T + params.b
    f = expit(z[..., :H])
    i = expit(z[..., H:2 * H])
    g = np.tanh(z[..., 2 * H:3 * H])
    o = expit(z[..., 3 * H:])
    c = prev.c * f + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(c))):
        raise NumericError(f"non-finite LSTM state; {_norms(params)}")
    return LstmState(h, c), GateCache(x, prev.h, prev.c, f, i, g, o, c, tanh_c)


def lstm_forward(params: LstmCellParams, xs: np.ndarray, state: Optional[LstmState] = None):
    """Run a ``(B, T, I)`` batch through the cell.  Returns ``(hs, caches)`` with hs ``(B, T, H)``."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 3:
        raise DimensionError(f"expected (batch, time, features), got {xs.shape}")
    B, T, _ = xs.shape
    if state is None:
        state = LstmState.zeros(params.hidden_size, B)
    hs = np.empty((B, T, params.hidden_size))
    caches = []
    for t in range(T):
        state, cache = lstm_step(params, xs[:, t, :], state)
        hs[:, t, :] = state.h
        caches.append(cache)
    return hs, caches


def lstm_backward(params: LstmCellParams, caches, dh_last=None, dh_seq=None):
    """Backpropagation through time.

    ``dh_last`` is the loss gradient w.r.t. the final hidden state; ``dh_seq``
    (shape ``(B, T, H)``) carries gradients for every timestep, as needed when
    another layer consumes the whole sequence.  Either or both may be given.

    Returns ``(grads, dxs)`` where ``grads`` is an :class:`LstmCellParams`
    holding dL/dW, dL/dU, dL/db and ``dxs`` is dL/dx for each timestep.
    """
    if not caches or any(c is None for c in caches):
        raise ValueError("lstm_backward needs a forward cache for every timestep")
    H = params.hidden_size
    T = len(caches)
    first = caches[0]
    grads = LstmCellParams.zeros(params.input_size, H)
    dxs = np.zeros((T,) + first.x.shape)
    dh_next = np.zeros_like(first.h_prev)
    dc_next = np.zeros_like(first.c_prev)
    for t in range(T - 1, -1, -1):
        k = caches[t]
        dh = dh_next
        if dh_seq is not None:
            dh = dh + dh_seq[..., t, :]
        if dh_last is not None and t == T - 1:
            dh = dh + dh_last
        do = dh * k.tanh_c
        dc = dc_next + dh * k.o * (1.0 - k.tanh_c ** 2)
        dz = np.concatenate(
            [
                dc * k.c_prev * k.f * (1.0 - k.f),
                dc * k.g * k.i * (1.0 - k.i),
                dc * k.i * (1.0 - k.g ** 2),
                do * k.o * (1.0 - k.o),
            ],
            axis=-1,
        )
        dc_next = dc * k.f
        if dz.ndim == 1:
            grads.W += np.outer(dz, k.h_prev)
            grads.U += np.outer(dz, k.x)
            grads.b += dz
        else:
            grads.W += dz.T @ k.h_prev
            grads.U += dz.T @ k.x
            grads.b += dz.sum(axis=0)
        dh_next = dz @ params.W
        dxs[t] = dz @ params.U
    if dxs.ndim == 3:
        dxs = dxs.transpose(1, 0, 2)
    return grads, dxs


def dropout_mask(shape, rate: float, rng) -> np.ndarray:
    """Inverted-dropout mask: 0 with probability ``rate``, else ``1/(1-rate)``."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if rate == 0.0:
        return np.ones(shape)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def mse_loss(pred: np.ndarray, target: np.ndarray):
    diff = pred - target
    return float(np.mean(diff ** 2)), 2.0 * diff / diff.size


def clip_global_norm(grads: dict, max_norm: float = 1.0):
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if np.isfinite(total) and total > max_norm:
        scale = max_norm / total
        grads = {k: g * scale for k, g in grads.items()}
    return grads, total


class Optimizer:
    """Stateful first-order update rule over a dict of parameter arrays."""

    def __init__(self, kind: str = "adam", lr: float = 1e-3, *, beta1=0.9, beta2=0.999,
                 eps=1e-8, momentum=0.9, decay=0.9):
        if kind not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {kind!r}; choose from {OPTIMIZERS}")
        self.kind = kind
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.momentum = momentum
        self.decay = decay
        self.t = 0
        self.m: dict = {}
        self.v: dict = {}

    def step(self, params: dict, grads: dict) -> dict:
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for {name!r}; step refused")
            if g.shape != params[name].shape:
                raise DimensionError(f"gradient {name!r} has shape {g.shape}, "
                                     f"parameter has {params[name].shape}")
        self.t += 1
        for name, g in grads.items():
            p = params[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                if self.kind == "adam":
                    self.v[name] = np.zeros_like(p)
            if self.kind == "sgdm":
                buf = self.m[name]
                buf *= self.momentum
                buf += g
                p -= self.lr * buf
            elif self.kind == "rmsprop":
                sq = self.m[name]
                sq *= self.decay
                sq += (1.0 - self.decay) * g * g
                p -= self.lr * g / (np.sqrt(sq) + self.eps)
            else:
                m, v = self.m[name], self.v[name]
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * g * g
                m_hat = m / (1.0 - self.beta1 ** self.t)
                v_hat = v / (1.0 - self.beta2 ** self.t)
                p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return params


class LstmNetwork:
    """Stacked LSTM (1 or 2 layers) followed by inverted dropout and a dense scalar head.

    Parameters live in ``self.params``, a flat dict of arrays keyed
    ``l{k}.W``, ``l{k}.U``, ``l{k}.b``, ``head.W``, ``head.b``.
    """

    def __init__(self, params: dict, dropout_rate: float = 0.0):
        self.params = params
        self.dropout_rate = dropout_rate
        self.num_layers = sum(1 for k in params if k.endswith(".W") and k.startswith("l"))

    @classmethod
    def init(cls, input_size: int, hidden_sizes, rng: np.random.Generator,
             dropout_rate: float = 0.0) -> "LstmNetwork":
        params = {}
        fan_in = input_size
        for k, H in enumerate(hidden_sizes):
            cell = LstmCellParams.xavier(fan_in, H, rng)
            params[f"l{k}.W"], params[f"l{k}.U"], params[f"l{k}.b"] = cell.W, cell.U, cell.b
            fan_in = H
        lim = np.sqrt(6.0 / (fan_in + 1))
        params["head.W"] = rng.uniform(-lim, lim, size=(1, fan_in))
        params["head.b"] = np.zeros(1)
        return cls(params, dropout_rate)

    def cell(self, k: int) -> LstmCellParams:
        p = self.params
        return LstmCellParams(p[f"l{k}.W"], p[f"l{k}.U"], p[f"l{k}.b"])

    @property
    def input_size(self) -> int:
        return self.params["l0.U"].shape[1]

    @property
    def hidden_sizes(self):
        return [self.params[f"l{k}.W"].shape[1] for k in range(self.num_layers)]

    def forward(self, X: np.ndarray, training: bool = False, rng=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3 or X.shape[2] != self.input_size:
            raise DimensionError(f"input windows of shape {X.shape}; "
                                 f"expected (n, lookback, {self.input_size})")
        drop = training and self.dropout_rate > 0.0
        seq = X
        layer_caches, masks = [], []
        for k in range(self.num_layers):
            hs, caches = lstm_forward(self.cell(k), seq)
            layer_caches.append(caches)
            last = k == self.num_layers - 1
            out = hs[:, -1, :] if last else hs
            if drop:
                mask = dropout_mask(out.shape, self.dropout_rate, rng)
                out = out * mask
                masks.append(mask)
            else:
                masks.append(None)
            seq = out
        y = seq @ self.params["head.W"].T + self.params["head.b"]
        return y[:, 0], (layer_caches, masks, seq)

    def backward(self, cache, dy: np.ndarray) -> dict:
        layer_caches, masks, head_in = cache
        grads = {
            "head.W": dy[None, :] @ head_in,
            "head.b": np.array([dy.sum()]),
        }
        dout = dy[:, None] @ self.params["head.W"]
        for k in range(self.num_layers - 1, -1, -1):
            if masks[k] is not None:
                dout = dout * masks[k]
            last = k == self.num_layers - 1
            g, dxs = lstm_backward(self.cell(k), layer_caches[k],
                                   dh_last=dout if last else None,
                                   dh_seq=None if last else dout)
            grads[f"l{k}.W"], grads[f"l{k}.U"], grads[f"l{k}.b"] = g.W, g.U, g.b
            dout = dxs
        return grads

    def predict(self, X: np.ndarray, batch_size: int = 4096) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3 or X.shape[2] != self.input_size:
            raise DimensionError(f"input windows of shape {X.shape}; "
                                 f"expected (n, lookback, {self.input_size})")
        out = [self.forward(X[s:s + batch_size])[0] for s in range(0, len(X), batch_size)]
        return np.concatenate(out) if out else np.empty(0)

    def copy_params(self) -> dict:
        return {k: v.copy() for k, v in self.params.items()}
