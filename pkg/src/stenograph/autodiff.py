"""Dense float64 tensors with reverse-mode automatic differentiation.

The engine is deliberately small: a `Tape` records primitive ops in forward
order, `backward` replays them in exact reverse order, and gradients
accumulate additively at fan-out. Tapes are rebuilt on every forward pass;
there is no persistent graph. Everything is float64.

The numeric kernels (`conv1d_forward`, `sigmoid`, ...) are plain functions so
the inference path can reuse them without paying for tape bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError

Array = np.ndarray
#: Flat float64 vector of parameter gradients in registry order.
GradientVector = np.ndarray


def _f64(x) -> Array:
    return np.asarray(x, dtype=np.float64)


def sigmoid(x: Array) -> Array:
    """Numerically stable logistic function."""
    x = _f64(x)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def conv1d_output_length(length: int, kernel: int, stride: int, padding: int) -> int:
    return (length + 2 * padding - kernel) // stride + 1


def _conv1d_cols(x: Array, kernel: int, stride: int, padding: int) -> tuple[Array, int]:
    """im2col: (B, C, L) -> (B*L_out, C*K) patch matrix."""
    b, c, length = x.shape
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding)))
    l_out = conv1d_output_length(length, kernel, stride, padding)
    windows = np.lib.stride_tricks.sliding_window_view(x, kernel, axis=2)
    windows = windows[:, :, ::stride, :]  # (B, C, L_out, K), a view
    cols = windows.transpose(0, 2, 1, 3).reshape(b * l_out, c * kernel)
    return cols, l_out


def conv1d_forward(x: Array, w: Array, stride: int = 1, padding: int = 0,
                   bias: Array | None = None) -> Array:
    """Cross-correlation of (B, C_in, L) with kernels (C_out, C_in, K)."""
    y, _ = _conv1d_with_cols(x, w, stride, padding, bias)
    return y


def _conv1d_with_cols(x, w, stride, padding, bias):
    b, c_in, length = x.shape
    c_out, c_in_w, kernel = w.shape
    if c_in_w != c_in:
        raise ShapeError(
            f"conv1d: input has {c_in} channels but kernels expect {c_in_w}")
    if stride < 1:
        raise ShapeError(f"conv1d: stride must be >= 1, got {stride}")
    if padding < 0:
        raise ShapeError(f"conv1d: padding must be >= 0, got {padding}")
    if kernel > length + 2 * padding:
        raise ShapeError(
            f"conv1d: kernel {kernel} exceeds padded length {length + 2 * padding}")
    cols, l_out = _conv1d_cols(x, kernel, stride, padding)
    y = cols @ w.reshape(c_out, c_in * kernel).T
    y = y.reshape(b, l_out, c_out).transpose(0, 2, 1)
    if bias is not None:
        y = y + bias[:, None]
    return np.ascontiguousarray(y), cols


def _conv1d_backward(dy, cols, x_shape, w, stride, padding):
    """Gradients of conv1d w.r.t. input and kernels given upstream (B, C_out, L_out)."""
    b, c_in, length = x_shape
    c_out, _, kernel = w.shape
    l_out = dy.shape[2]
    dy2 = dy.transpose(0, 2, 1).reshape(b * l_out, c_out)
    dw = (dy2.T @ cols).reshape(c_out, c_in, kernel)
    dcols = (dy2 @ w.reshape(c_out, c_in * kernel))
    dcols = dcols.reshape(b, l_out, c_in, kernel).transpose(0, 2, 3, 1)
    dx_pad = np.zeros((b, c_in, length + 2 * padding))
    for k in range(kernel):
        dx_pad[:, :, k:k + stride * l_out:stride] += dcols[:, :, k, :]
    dx = dx_pad[:, :, padding:padding + length] if padding else dx_pad
    return np.ascontiguousarray(dx), dw


class Tensor:
    """A float64 array plus the gradient slot used during backward."""

    __slots__ = ("data", "grad", "is_param", "name")

    def __init__(self, data, is_param: bool = False, name: str | None = None):
        self.data = _f64(data)
        self.grad: Array | None = None
        self.is_param = is_param
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        tag = f" param={self.name!r}" if self.is_param else ""
        return f"Tensor(shape={self.data.shape}{tag})"


class ParameterStore:
    """Ordered registry of named parameter arrays.

    Registration order is the canonical flattening order for
    :data:`GradientVector`, so it must be deterministic across runs.
    """

    def __init__(self):
        self._arrays: dict[str, Array] = {}

    def add(self, name: str, array) -> Array:
        if name in self._arrays:
            raise ValueError(f"parameter {name!r} already registered")
        arr = _f64(array).copy()
        self._arrays[name] = arr
        return arr

    def __getitem__(self, name: str) -> Array:
        return self._arrays[name]

    def __setitem__(self, name: str, value) -> None:
        arr = _f64(value)
        if name in self._arrays and arr.shape != self._arrays[name].shape:
            raise ShapeError(f"parameter {name!r}: shape {arr.shape} != "
                             f"{self._arrays[name].shape}")
        self._arrays[name] = arr.copy()

    def __contains__(self, name: str) -> bool:
        return name in self._arrays

    def names(self) -> list[str]:
        return list(self._arrays)

    def items(self):
        return self._arrays.items()

    @property
    def n_values(self) -> int:
        return sum(a.size for a in self._arrays.values())

    def flatten(self) -> Array:
        return np.concatenate([a.ravel() for a in self._arrays.values()]) \
            if self._arrays else np.zeros(0)

    def load_flat(self, vec: Array) -> None:
        vec = _f64(vec)
        if vec.shape != (self.n_values,):
            raise ShapeError(f"flat vector has {vec.shape}, store holds "
                             f"{self.n_values} values")
        off = 0
        for name, arr in self._arrays.items():
            self._arrays[name] = vec[off:off + arr.size].reshape(arr.shape).copy()
            off += arr.size

    def flatten_grads(self, grads: dict[str, Array | None]) -> GradientVector:
        parts = []
        for name, arr in self._arrays.items():
            g = grads.get(name)
            parts.append(np.zeros(arr.size) if g is None else g.ravel())
        return np.concatenate(parts) if parts else np.zeros(0)

    def mask(self, predicate) -> Array:
        """Boolean mask over flat coordinates for names where predicate holds."""
        parts = [np.full(arr.size, bool(predicate(name)))
                 for name, arr in self._arrays.items()]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=bool)

    def copy(self) -> "ParameterStore":
        fresh = ParameterStore()
        for name, arr in self._arrays.items():
            fresh.add(name, arr)
        return fresh


class Tape:
    """Ordered record of primitive ops for one forward pass."""

    def __init__(self):
        self._records: list[tuple[Tensor, object]] = []
        self._leaves: list[Tensor] = []
        self._watched: dict[str, Tensor] = {}
        self._relu_inputs: list[Tensor] = []

    # ---- graph construction -------------------------------------------------

    def leaf(self, data, is_param=False, name=None) -> Tensor:
        t = Tensor(data, is_param=is_param, name=name)
        self._leaves.append(t)
        return t

    def watch(self, store: ParameterStore) -> dict[str, Tensor]:
        """Create parameter leaves for every entry of the store."""
        for name, arr in store.items():
            if name not in self._watched:
                self._watched[name] = self.leaf(arr, is_param=True, name=name)
        return dict(self._watched)

    def _record(self, out: Tensor, pull) -> Tensor:
        self._records.append((out, pull))
        return out

    @staticmethod
    def _accum(t: Tensor, g: Array) -> None:
        t.grad = g if t.grad is None else t.grad + g

    # ---- primitives ----------------------------------------------------------

    def conv1d(self, x: Tensor, w: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
        squeeze = x.data.ndim == 2
        xd = x.data[None] if squeeze else x.data
        if xd.ndim != 3 or w.data.ndim != 3:
            raise ShapeError(f"conv1d: got input {x.shape}, kernels {w.shape}")
        y, cols = _conv1d_with_cols(xd, w.data, stride, padding, None)
        out = Tensor(y[0] if squeeze else y)

        def pull(dy):
            dyb = dy[None] if squeeze else dy
            dx, dw = _conv1d_backward(dyb, cols, xd.shape, w.data, stride, padding)
            self._accum(x, dx[0] if squeeze else dx)
            self._accum(w, dw)

        return self._record(out, pull)

    def channel_bias(self, x: Tensor, b: Tensor) -> Tensor:
        """Add a per-channel bias to (B, C, L) or (C, L) activations."""
        axis = x.data.ndim - 2
        if b.data.shape != (x.data.shape[axis],):
            raise ShapeError(f"channel_bias: bias {b.shape} vs input {x.shape}")
        out = Tensor(x.data + np.expand_dims(b.data, -1))

        def pull(dy):
            self._accum(x, dy)
            self._accum(b, dy.sum(axis=tuple(i for i in range(dy.ndim) if i != axis)))

        return self._record(out, pull)

    def dense(self, x: Tensor, w: Tensor, b: Tensor) -> Tensor:
        """Affine map of (B, F) rows by weights (C, F) and bias (C,)."""
        if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[1]:
            raise ShapeError(f"dense: input {x.shape} vs weights {w.shape}")
        out = Tensor(x.data @ w.data.T + b.data)

        def pull(dy):
            self._accum(x, dy @ w.data)
            self._accum(w, dy.T @ x.data)
            self._accum(b, dy.sum(axis=0))

        return self._record(out, pull)

    def relu(self, x: Tensor) -> Tensor:
        out = Tensor(np.maximum(x.data, 0.0))
        self._relu_inputs.append(x)

        def pull(dy):
            self._accum(x, dy * (x.data > 0))  # subgradient at 0 is 0

        return self._record(out, pull)

    def sigmoid(self, x: Tensor) -> Tensor:
        y = sigmoid(x.data)
        out = Tensor(y)

        def pull(dy):
            self._accum(x, dy * y * (1.0 - y))

        return self._record(out, pull)

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        if a.data.shape != b.data.shape:
            raise ShapeError(f"add: {a.shape} vs {b.shape}")
        out = Tensor(a.data + b.data)

        def pull(dy):
            self._accum(a, dy)
            self._accum(b, dy)

        return self._record(out, pull)

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.data.shape != b.data.shape:
            raise ShapeError(f"mul: {a.shape} vs {b.shape}")
        out = Tensor(a.data * b.data)

        def pull(dy):
            self._accum(a, dy * b.data)
            self._accum(b, dy * a.data)

        return self._record(out, pull)

    def mul_scalar(self, x: Tensor, c: float) -> Tensor:
        c = float(c)
        out = Tensor(x.data * c)

        def pull(dy):
            self._accum(x, dy * c)

        return self._record(out, pull)

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        return self.add(a, self.mul_scalar(b, -1.0))

    def log(self, x: Tensor) -> Tensor:
        out = Tensor(np.log(x.data))

        def pull(dy):
            self._accum(x, dy / x.data)

        return self._record(out, pull)

    def exp(self, x: Tensor) -> Tensor:
        y = np.exp(x.data)
        out = Tensor(y)

        def pull(dy):
            self._accum(x, dy * y)

        return self._record(out, pull)

    def mean(self, x: Tensor) -> Tensor:
        n = x.data.size
        out = Tensor(x.data.mean())

        def pull(dy):
            self._accum(x, np.broadcast_to(dy / n, x.data.shape).copy())

        return self._record(out, pull)

    def global_avg_pool(self, x: Tensor) -> Tensor:
        """(B, C, L) -> (B, C) average over the length axis."""
        if x.data.ndim != 3:
            raise ShapeError(f"global_avg_pool: expected (B, C, L), got {x.shape}")
        length = x.data.shape[2]
        out = Tensor(x.data.mean(axis=2))

        def pull(dy):
            self._accum(x, np.repeat(dy[:, :, None], length, axis=2) / length)

        return self._record(out, pull)

    def bce_with_logits(self, logits: Tensor, targets: Array) -> Tensor:
        """Elementwise binary cross-entropy, computed in log-space."""
        t = _f64(targets)
        if t.shape != logits.data.shape:
            raise ShapeError(f"bce: logits {logits.shape} vs targets {t.shape}")
        if not np.all((t == 0.0) | (t == 1.0)):
            raise NumericError("bce_with_logits: targets must be 0 or 1")
        z = logits.data
        out = Tensor(np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z))))

        def pull(dy):
            self._accum(logits, dy * (sigmoid(z) - t))

        return self._record(out, pull)

    # ---- reverse pass --------------------------------------------------------

    def backward(self, loss: Tensor) -> dict[str, Array]:
        """Reverse sweep from a scalar loss; returns grads of watched params.

        Resets every gradient first, so repeated calls on the same tape are
        independent. Watched parameters not reachable from `loss` get zeros.
        """
        if loss.data.shape != ():
            raise ShapeError(f"backward: loss must be scalar, got {loss.shape}")
        for t, _ in self._records:
            t.grad = None
        for t in self._leaves:
            t.grad = None
        loss.grad = np.asarray(1.0)
        for t, pull in reversed(self._records):
            if t.grad is not None:
                pull(t.grad)
        return {name: (leaf.grad if leaf.grad is not None
                       else np.zeros(leaf.data.shape))
                for name, leaf in self._watched.items()}

    def relu_activation_signs(self) -> Array:
        """Concatenated sign pattern of every relu input (kink detection)."""
        if not self._relu_inputs:
            return np.zeros(0)
        return np.concatenate([np.sign(t.data).ravel() for t in self._relu_inputs])


def backward(tape: Tape, loss: Tensor, store: ParameterStore) -> GradientVector:
    """dLoss/dtheta for every registered parameter, flat in registry order."""
    return store.flatten_grads(tape.backward(loss))


# ---- gradient checking -------------------------------------------------------


@dataclass
class GradCheckEntry:
    name: str
    n_checked: int
    n_excluded: int
    max_rel_err: float


@dataclass
class GradCheckReport:
    tolerance: float
    entries: list[GradCheckEntry] = field(default_factory=list)

    @property
    def max_rel_err(self) -> float:
        errs = [e.max_rel_err for e in self.entries if e.n_checked > e.n_excluded]
        return max(errs, default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tolerance


def _rel_err(a: float, f: float) -> float:
    return abs(a - f) / max(abs(a), abs(f), 1e-6)


def grad_check(loss_builder, store: ParameterStore, tolerance: float = 1e-5,
               h: float = 1e-5, max_per_param: int | None = None,
               seed: int = 0) -> GradCheckReport:
    """Compare reverse-mode gradients against central finite differences.

    `loss_builder(store)` must deterministically rebuild the computation and
    return `(tape, loss)`. Components whose +h/-h evaluations land on
    different sides of a relu kink are reported but excluded from pass/fail.
    When `max_per_param` is set, a seeded random subset of each parameter's
    components is checked instead of all of them.
    """
    tape, loss = loss_builder(store)
    grads = tape.backward(loss)
    rng = np.random.default_rng(seed)
    report = GradCheckReport(tolerance=tolerance)

    for name in store.names():
        arr = store[name]
        flat_idx = np.arange(arr.size)
        if max_per_param is not None and arr.size > max_per_param:
            flat_idx = np.sort(rng.choice(arr.size, size=max_per_param, replace=False))
        analytic = grads[name].ravel()
        max_err, excluded = 0.0, 0
        for idx in flat_idx:
            orig = arr.ravel()[idx]
            arr.ravel()[idx] = orig + h
            tape_p, loss_p = loss_builder(store)
            arr.ravel()[idx] = orig - h
            tape_m, loss_m = loss_builder(store)
            arr.ravel()[idx] = orig
            if not np.array_equal(tape_p.relu_activation_signs(),
                                  tape_m.relu_activation_signs()):
                excluded += 1
                continue
            fd = (loss_p.item() - loss_m.item()) / (2.0 * h)
            max_err = max(max_err, _rel_err(float(analytic[idx]), fd))
        report.entries.append(GradCheckEntry(name, len(flat_idx), excluded, max_err))
    return report
