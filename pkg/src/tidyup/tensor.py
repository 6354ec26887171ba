"""Dense float64 arrays with reverse-mode differentiation.

Just enough machinery for the agents: elementwise ops, matmul, concat,
softmax, a GRU cell, a graph-attention layer, and trilinear similarity.
Arrays are numpy under the hood; the tape and every backward rule are ours.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np


class ShapeMismatch(Exception):
    pass


class NotScalar(Exception):
    pass


class NonFinite(Exception):
    pass


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, grad={self.requires_grad})"

    # operator sugar; the module-level functions carry the semantics
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _make(data, parents, backward) -> Tensor:
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` back down to `shape` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _accumulate(tensor: Tensor, grad: np.ndarray) -> None:
    if tensor.requires_grad:
        tensor.grad += _unbroadcast(grad, tensor.data.shape)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeMismatch(f"add: {a.shape} vs {b.shape}")

    def backward(grad):
        _accumulate(a, grad)
        _accumulate(b, grad)

    return _make(data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError:
        raise ShapeMismatch(f"sub: {a.shape} vs {b.shape}")

    def backward(grad):
        _accumulate(a, grad)
        _accumulate(b, -grad)

    return _make(data, (a, b), backward)


def mul(a, b) -> Tensor:
    """Elementwise product."""
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeMismatch(f"mul: {a.shape} vs {b.shape}")

    def backward(grad):
        _accumulate(a, grad * b.data)
        _accumulate(b, grad * a.data)

    return _make(data, (a, b), backward)


def scale(a, factor: float) -> Tensor:
    a = _as_tensor(a)

    def backward(grad):
        _accumulate(a, grad * factor)

    return _make(a.data * factor, (a,), backward)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim > 2 or b.data.ndim > 2:
        raise ShapeMismatch(f"matmul supports rank <= 2, got {a.shape} and {b.shape}")
    try:
        data = a.data @ b.data
    except ValueError:
        raise ShapeMismatch(f"matmul: {a.shape} vs {b.shape}")

    def backward(grad):
        ad, bd = a.data, b.data
        if ad.ndim == 1 and bd.ndim == 1:  # dot -> 0-d
            _accumulate(a, grad * bd)
            _accumulate(b, grad * ad)
        elif ad.ndim == 2 and bd.ndim == 2:
            _accumulate(a, grad @ bd.T)
            _accumulate(b, ad.T @ grad)
        elif ad.ndim == 1:  # (m,) @ (m,n) -> (n,)
            _accumulate(a, bd @ grad)
            _accumulate(b, np.outer(ad, grad))
        else:  # (n,m) @ (m,) -> (n,)
            _accumulate(a, np.outer(grad, bd))
            _accumulate(b, ad.T @ grad)

    return _make(data, (a, b), backward)


def concat(tensors, axis: int = 0) -> Tensor:
    parts = [_as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        raise ShapeMismatch(f"concat: {[p.shape for p in parts]}")
    sizes = [p.data.shape[axis] for p in parts]

    def backward(grad):
        offset = 0
        for part, size in zip(parts, sizes):
            index = [slice(None)] * grad.ndim
            index[axis] = slice(offset, offset + size)
            _accumulate(part, grad[tuple(index)])
            offset += size

    return _make(data, parts, backward)


def stack_rows(tensors) -> Tensor:
    """Stack rank-1 tensors into a matrix."""
    parts = [_as_tensor(t) for t in tensors]
    data = np.stack([p.data for p in parts])

    def backward(grad):
        for i, part in enumerate(parts):
            _accumulate(part, grad[i])

    return _make(data, parts, backward)


def take_row(a, index: int) -> Tensor:
    a = _as_tensor(a)
    data = a.data[index]

    def backward(grad):
        if a.requires_grad:
            a.grad[index] += grad

    return _make(data, (a,), backward)


def transpose(a) -> Tensor:
    a = _as_tensor(a)

    def backward(grad):
        _accumulate(a, grad.T)

    return _make(a.data.T, (a,), backward)


def _unary(a, func, derivative) -> Tensor:
    a = _as_tensor(a)
    data = func(a.data)

    def backward(grad):
        _accumulate(a, grad * derivative(a.data, data))

    return _make(data, (a,), backward)


def relu(a) -> Tensor:
    return _unary(a, lambda x: np.maximum(x, 0.0), lambda x, y: (x > 0).astype(np.float64))


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    return _unary(
        a,
        lambda x: np.where(x > 0, x, slope * x),
        lambda x, y: np.where(x > 0, 1.0, slope),
    )


def tanh(a) -> Tensor:
    return _unary(a, np.tanh, lambda x, y: 1.0 - y * y)


def sigmoid(a) -> Tensor:
    return _unary(a, lambda x: 1.0 / (1.0 + np.exp(-x)), lambda x, y: y * (1.0 - y))


def exp(a) -> Tensor:
    return _unary(a, np.exp, lambda x, y: y)


def log(a) -> Tensor:
    return _unary(a, np.log, lambda x, y: 1.0 / x)


def tsum(a, axis: int | None = None) -> Tensor:
    a = _as_tensor(a)
    data = a.data.sum(axis=axis)

    def backward(grad):
        if axis is None:
            _accumulate(a, np.broadcast_to(grad, a.data.shape))
        else:
            _accumulate(a, np.broadcast_to(np.expand_dims(grad, axis), a.data.shape))

    return _make(data, (a,), backward)


def tmean(a, axis: int | None = None) -> Tensor:
    a = _as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return scale(tsum(a, axis=axis), 1.0 / count)


def softmax(a, axis: int = -1) -> Tensor:
    """Max-subtracted stable softmax along `axis`."""
    a = _as_tensor(a)
    if not np.isfinite(a.data).all():
        raise NonFinite("softmax input contains non-finite values")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    exps = np.exp(shifted)
    data = exps / exps.sum(axis=axis, keepdims=True)

    def backward(grad):
        inner = (grad * data).sum(axis=axis, keepdims=True)
        _accumulate(a, data * (grad - inner))

    return _make(data, (a,), backward)


def log_softmax(a, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    if not np.isfinite(a.data).all():
        raise NonFinite("log_softmax input contains non-finite values")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    data = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    probs = np.exp(data)

    def backward(grad):
        _accumulate(a, grad - probs * grad.sum(axis=axis, keepdims=True))

    return _make(data, (a,), backward)


def pick(a, index: int) -> Tensor:
    """Single element of a rank-1 tensor, as a 0-d tensor."""
    a = _as_tensor(a)
    data = a.data[index]

    def backward(grad):
        if a.requires_grad:
            a.grad[index] += grad

    return _make(data, (a,), backward)


def backward(loss: Tensor) -> None:
    """Reverse-mode accumulation from a scalar; callers zero param grads beforehand."""
    if loss.data.ndim != 0:
        raise NotScalar(f"backward needs a scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    loss.grad = loss.grad + 1.0
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)


@dataclass(frozen=True)
class GruParams:
    """Gate weights stored (in, out) so batched rows multiply on the left."""

    w_update: Tensor
    b_update: Tensor
    w_reset: Tensor
    b_reset: Tensor
    w_candidate: Tensor
    b_candidate: Tensor


def gru_cell(h_prev: Tensor, x: Tensor, params: GruParams) -> Tensor:
    """One GRU step; h_prev and x are vectors or row-batched matrices."""
    if h_prev.data.shape[-1] != params.w_update.data.shape[1]:
        raise ShapeMismatch(f"gru hidden {h_prev.shape} vs params {params.w_update.shape}")
    xh = concat([x, h_prev], axis=-1)
    z = sigmoid(add(matmul(xh, params.w_update), params.b_update))
    r = sigmoid(add(matmul(xh, params.w_reset), params.b_reset))
    xrh = concat([x, mul(r, h_prev)], axis=-1)
    candidate = tanh(add(matmul(xrh, params.w_candidate), params.b_candidate))
    one_minus_z = sub(Tensor(np.ones_like(z.data)), z)
    return add(mul(one_minus_z, h_prev), mul(z, candidate))


@dataclass(frozen=True)
class GatHead:
    w: Tensor  # (f_in, f_out)
    a: Tensor  # (2 * f_out,)


def gat_layer(node_feats: Tensor, edges, heads: list[GatHead]) -> Tensor:
    """Multi-head graph attention over index-pair edges; heads concatenated.

    Neighborhoods are undirected plus a self-loop, so isolated nodes attend
    only to themselves.
    """
    n = node_feats.data.shape[0]
    if n < 1:
        raise ShapeMismatch("gat_layer needs at least one node")
    neighbor_sets: list[dict[int, None]] = [dict() for _ in range(n)]
    for i in range(n):
        neighbor_sets[i][i] = None
    for i, j in edges:
        neighbor_sets[i][j] = None
        neighbor_sets[j][i] = None
    outputs = []
    for head in heads:
        projected = matmul(node_feats, head.w)
        rows = [take_row(projected, i) for i in range(n)]
        new_rows = []
        for i in range(n):
            neighbors = list(neighbor_sets[i])
            scores = stack_rows(
                [
                    matmul(head.a, concat([rows[i], rows[j]]))
                    for j in neighbors
                ]
            )
            alpha = softmax(leaky_relu(scores), axis=0)
            mixed = matmul(alpha, stack_rows([rows[j] for j in neighbors]))
            new_rows.append(sigmoid(mixed))
        outputs.append(stack_rows(new_rows))
    return outputs[0] if len(outputs) == 1 else concat(outputs, axis=1)


def trilinear_similarity(graph_feats: Tensor, token_feats: Tensor, w0: Tensor) -> Tensor:
    """S[j, i] = w0 . [g_i ; o_j ; g_i * o_j] for node i, token j."""
    g, o = _as_tensor(graph_feats), _as_tensor(token_feats)
    w = _as_tensor(w0)
    d = g.data.shape[1]
    if o.data.shape[1] != d or w.data.shape != (3 * d,):
        raise ShapeMismatch(
            f"trilinear: graph {g.shape}, tokens {o.shape}, weights {w.shape}"
        )
    wg, wo, wp = w.data[:d], w.data[d : 2 * d], w.data[2 * d :]
    # S = 1 (G wg)^T + (O wo) 1^T + (O * wp) G^T
    data = (g.data @ wg)[None, :] + (o.data @ wo)[:, None] + (o.data * wp) @ g.data.T

    def backward(grad):
        col = grad.sum(axis=0)  # (n,)
        row = grad.sum(axis=1)  # (N,)
        _accumulate(g, np.outer(col, wg) + (grad.T @ o.data) * wp)
        _accumulate(o, np.outer(row, wo) + (grad @ g.data) * wp)
        if w.requires_grad:
            w.grad[:d] += g.data.T @ col
            w.grad[d : 2 * d] += o.data.T @ row
            w.grad[2 * d :] += ((grad.T @ o.data) * g.data).sum(axis=0)

    return _make(data, (g, o, w), backward)


CHECKPOINT_MAGIC = b"TWCP"
CHECKPOINT_VERSION = 1


class ParameterStore:
    """Named learnable tensors with seeded uniform(+-1/sqrt(fan_in)) init."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._params: dict[str, Tensor] = {}

    def parameter(self, name: str, shape: tuple[int, ...], fan_in: int | None = None) -> Tensor:
        if name in self._params:
            if self._params[name].shape != tuple(shape):
                raise ShapeMismatch(f"{name}: have {self._params[name].shape}, want {shape}")
            return self._params[name]
        if fan_in is None:
            fan_in = shape[0]
        bound = 1.0 / np.sqrt(fan_in)
        tensor = Tensor(self._rng.uniform(-bound, bound, size=shape), requires_grad=True)
        self._params[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return sorted(self._params)

    def items(self) -> list[tuple[str, Tensor]]:
        return [(name, self._params[name]) for name in self.names()]

    def zero_grads(self) -> None:
        for tensor in self._params.values():
            tensor.zero_grad()

    def copy(self) -> "ParameterStore":
        clone = ParameterStore(self.seed)
        for name, tensor in self._params.items():
            duplicate = Tensor(tensor.data.copy(), requires_grad=True)
            clone._params[name] = duplicate
        return clone

    def save(self, path) -> None:
        with open(path, "wb") as handle:
            handle.write(CHECKPOINT_MAGIC)
            handle.write(struct.pack("<I", CHECKPOINT_VERSION))
            for name, tensor in self.items():
                encoded = name.encode("utf-8")
                handle.write(struct.pack("<Q", len(encoded)))
                handle.write(encoded)
                handle.write(struct.pack("<Q", tensor.data.ndim))
                for dim in tensor.data.shape:
                    handle.write(struct.pack("<Q", dim))
                handle.write(tensor.data.astype("<f8").tobytes())

    def load(self, path) -> None:
        with open(path, "rb") as handle:
            blob = handle.read()
        if blob[:4] != CHECKPOINT_MAGIC:
            raise ValueError("not a parameter checkpoint")
        (version,) = struct.unpack_from("<I", blob, 4)
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        offset = 8
        params: dict[str, Tensor] = {}
        while offset < len(blob):
            (name_len,) = struct.unpack_from("<Q", blob, offset)
            offset += 8
            name = blob[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<Q", blob, offset)
            offset += 8
            dims = struct.unpack_from(f"<{rank}Q", blob, offset)
            offset += 8 * rank
            count = int(np.prod(dims)) if rank else 1
            data = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(dims)
            offset += 8 * count
            params[name] = Tensor(data.copy(), requires_grad=True)
        self._params = params



def load_embeddings(path) -> dict[str, np.ndarray]:
    """GloVe-style text file `token v1 ... vd`; dimension inferred from line one."""
    table: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            parts = line.split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise ValueError(f"{token!r}: expected {dim} values, got {len(values)}")
            table[token] = np.array([float(v) for v in values], dtype=np.float64)
    if dim is None:
        raise ValueError("embedding file is empty")
    return table


def embedding_dim(table: dict[str, np.ndarray]) -> int:
    return len(next(iter(table.values())))
