"""Parameter containers and the small set of layers the models are built from."""
from __future__ import annotations

from collections import OrderedDict

import numpy as np

from . import tensor as T
from .tensor import Tensor


class Module:
    """Registers :class:`Tensor` attributes and child modules in assignment order.

    Every tensor attribute is saved in checkpoints; only those with
    ``requires_grad`` are trained and counted.
    """

    def __init__(self):
        object.__setattr__(self, "_params", OrderedDict())
        object.__setattr__(self, "_children", OrderedDict())

    def __setattr__(self, name, value):
        if isinstance(value, Tensor):
            self._params[name] = value
        elif isinstance(value, Module):
            self._children[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = ""):
        for name, p in self._params.items():
            yield prefix + name, p
        for name, child in self._children.items():
            yield from child.named_parameters(prefix + name + ".")

    def parameters(self, trainable_only: bool = False) -> list[Tensor]:
        return [p for _, p in self.named_parameters() if p.requires_grad or not trainable_only]

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((name, p.data) for name, p in self.named_parameters())

    def load_state_dict(self, state) -> None:
        own = dict(self.named_parameters())
        missing = set(own) ^ set(state)
        if missing:
            raise KeyError(f"parameter names differ: {sorted(missing)}")
        for name, value in state.items():
            if own[name].shape != np.shape(value):
                raise ValueError(f"{name}: expected shape {own[name].shape}, got {np.shape(value)}")
            own[name].data = np.array(value, dtype=np.float64)

    def parameter_bytes(self) -> bytes:
        """Raw bytes of every stored tensor, for bit-exact comparisons."""
        return b"".join(np.ascontiguousarray(p.data).tobytes() for p in self.parameters())


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.weight = T.parameter(glorot(rng, n_in, n_out))
        if bias:
            self.bias = T.parameter(np.zeros(n_out))
        self.has_bias = bias

    def __call__(self, x: Tensor) -> Tensor:
        out = x @ self.weight
        return out + self.bias if self.has_bias else out


_ACTIVATIONS = {"relu": T.relu, "tanh": T.tanh, "leaky_relu": T.leaky_relu,
                "linear": lambda x: x}


class FeedForward(Module):
    """Stack of ``Linear -> activation -> dropout`` blocks."""

    def __init__(self, n_in: int, hidden: list[int], rng: np.random.Generator,
                 activation: str = "relu", dropout: float = 0.0):
        super().__init__()
        self.n_layers = len(hidden)
        dims = [n_in] + list(hidden)
        for i in range(self.n_layers):
            setattr(self, f"layer{i}", Linear(dims[i], dims[i + 1], rng))
        self.activation = activation
        self.dropout = dropout
        self.output_dim = dims[-1]

    def __call__(self, x: Tensor, rng=None, training: bool = False) -> Tensor:
        act = _ACTIVATIONS[self.activation]
        for i in range(self.n_layers):
            x = T.dropout(act(getattr(self, f"layer{i}")(x)), self.dropout, rng, training)
        return x


class LSTM(Module):
    """Single-direction LSTM over right-padded ``B x L x d`` batches.

    Padded steps carry the previous state forward unchanged, so outputs at real
    positions never depend on padding.
    """

    def __init__(self, n_in: int, hidden: int, rng: np.random.Generator):
        super().__init__()
        self.hidden = hidden
        self.w_input = T.parameter(glorot(rng, n_in, 4 * hidden))
        self.w_hidden = T.parameter(glorot(rng, hidden, 4 * hidden))
        bias = np.zeros(4 * hidden)
        bias[hidden:2 * hidden] = 1.0  # forget gate
        self.bias = T.parameter(bias)

    def __call__(self, x: Tensor, mask: np.ndarray) -> Tensor:
        batch, length, _ = x.shape
        H = self.hidden
        projected = x @ self.w_input + self.bias
        h = T.Tensor(np.zeros((batch, H)))
        c = T.Tensor(np.zeros((batch, H)))
        outputs = []
        for t in range(length):
            gates = projected[:, t, :] + h @ self.w_hidden
            i = T.sigmoid(gates[:, :H])
            f = T.sigmoid(gates[:, H:2 * H])
            g = T.tanh(gates[:, 2 * H:3 * H])
            o = T.sigmoid(gates[:, 3 * H:])
            c_new = f * c + i * g
            h_new = o * T.tanh(c_new)
            if mask[:, t].all():
                c, h = c_new, h_new
            else:
                m = mask[:, t:t + 1].astype(np.float64)
                c = c_new * m + c * (1.0 - m)
                h = h_new * m + h * (1.0 - m)
            outputs.append(h)
        return T.stack(outputs, axis=1)


def reverse_padded(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays that reverse each row's real tokens in place, leaving padding last."""
    batch, length = mask.shape
    lengths = mask.sum(axis=1)
    cols = np.tile(np.arange(length), (batch, 1))
    rev = np.where(cols < lengths[:, None], lengths[:, None] - 1 - cols, cols)
    rows = np.repeat(np.arange(batch)[:, None], length, axis=1)
    return rows, rev


class BiLSTM(Module):
    """Stacked bidirectional LSTM; each layer outputs ``[forward_i ; backward_i]``."""

    def __init__(self, n_in: int, hidden: int, n_layers: int, rng: np.random.Generator,
                 dropout: float = 0.0):
        super().__init__()
        self.n_layers = n_layers
        self.hidden = hidden
        self.dropout = dropout
        for layer in range(n_layers):
            dim = n_in if layer == 0 else 2 * hidden
            setattr(self, f"fwd{layer}", LSTM(dim, hidden, rng))
            setattr(self, f"bwd{layer}", LSTM(dim, hidden, rng))

    @property
    def output_dim(self) -> int:
        return 2 * self.hidden

    def __call__(self, x: Tensor, mask: np.ndarray, rng=None, training: bool = False) -> Tensor:
        rows, rev = reverse_padded(mask)
        for layer in range(self.n_layers):
            if layer > 0:
                x = T.dropout(x, self.dropout, rng, training)
            forward = getattr(self, f"fwd{layer}")(x, mask)
            backward = getattr(self, f"bwd{layer}")(x[rows, rev], mask)[rows, rev]
            x = T.concat([forward, backward], axis=-1)
        return x


def masked_sum(x: Tensor, mask: np.ndarray) -> Tensor:
    """Sum ``B x L x d`` over real positions."""
    return (x * mask[:, :, None].astype(np.float64)).sum(axis=1)


def masked_mean(x: Tensor, mask: np.ndarray) -> Tensor:
    counts = mask.sum(axis=1, keepdims=True).astype(np.float64)
    return masked_sum(x, mask) / counts


def masked_max(x: Tensor, mask: np.ndarray) -> Tensor:
    filled = T.masked_fill(x, ~mask[:, :, None], -1e7)
    return T.tmax(filled, axis=1)


def last_positions(x: Tensor, mask: np.ndarray) -> Tensor:
    """Vector at each row's final real position of a ``B x L x d`` batch."""
    lengths = mask.sum(axis=1)
    return x[np.arange(x.shape[0]), lengths - 1]
