"""Dense float64 layer primitives with explicit forward/backward pairs.

No autodiff graph: every layer exposes a forward function returning a
cache and a backward function consuming it.  Gradients accumulate into
a :class:`ParamSet`, whose gradient buffers mirror the parameter
shapes.  All math is 64-bit; analytic gradients are validated against
central finite differences by :func:`grad_check`.
"""

from __future__ import annotations

from typing import Callable

import numpy as np


class ShapeError(ValueError):
    """Operand dimensions incompatible with the layer parameters."""


class NumericError(ArithmeticError):
    """Non-finite value where finite math was required."""


def sigmoid(x: np.ndarray) -> np.ndarray:
    # clip keeps exp finite; beyond +/-60 the true value saturates anyway
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """uniform(-r, r) with r = sqrt(6 / (fan_in + fan_out)).

    For 2-D weights fans are (columns, rows); for conv filter banks
    (f, w, d) the fans are (w*d, f).
    """
    if len(shape) == 2:
        fan_in, fan_out = shape[1], shape[0]
    elif len(shape) == 3:
        fan_in, fan_out = shape[1] * shape[2], shape[0]
    else:
        fan_in = fan_out = int(np.prod(shape))
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, size=shape)


class ParamSet:
    """Named parameter tensors plus parallel gradient accumulators."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def add(self, name: str, array: np.ndarray) -> np.ndarray:
        if name in self.params:
            raise ValueError(f"duplicate parameter {name!r}")
        arr = np.asarray(array, dtype=np.float64)
        self.params[name] = arr
        self.grads[name] = np.zeros_like(arr)
        return arr

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def copy_grads(self) -> dict[str, np.ndarray]:
        return {k: g.copy() for k, g in self.grads.items()}

    def copy(self) -> "ParamSet":
        dup = ParamSet()
        for k, v in self.params.items():
            dup.add(k, v.copy())
        return dup

    def global_grad_norm(self) -> float:
        total = 0.0
        for g in self.grads.values():
            total += float(np.sum(g * g))
        return float(np.sqrt(total))

    def scale_grads(self, factor: float) -> None:
        for g in self.grads.values():
            g *= factor

    def clip_grads(self, max_norm: float) -> float:
        """Scale all gradients so the global norm is at most max_norm."""
        norm = self.global_grad_norm()
        if norm > max_norm and norm > 0.0:
            self.scale_grads(max_norm / norm)
        return norm

    def sgd_step(self, learning_rate: float) -> None:
        for name, p in self.params.items():
            p -= learning_rate * self.grads[name]

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(g)) for g in self.grads.values()) and all(
            np.all(np.isfinite(p)) for p in self.params.values()
        )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ParamSet)
            and self.params.keys() == other.params.keys()
            and all(np.array_equal(self.params[k], other.params[k]) for k in self.params)
        )


# ---------------------------------------------------------------------------
# GRU


def gru_init(
    rng: np.random.Generator, ps: ParamSet, prefix: str, dim_in: int, hidden: int
) -> None:
    """Stacked GRU parameters: W (3h x in) rows [z; r; h], U (2h x h)
    rows [z; r], Uh (h x h), b (3h)."""
    ps.add(f"{prefix}.W", glorot_uniform(rng, (3 * hidden, dim_in)))
    ps.add(f"{prefix}.U", glorot_uniform(rng, (2 * hidden, hidden)))
    ps.add(f"{prefix}.Uh", glorot_uniform(rng, (hidden, hidden)))
    ps.add(f"{prefix}.b", np.zeros(3 * hidden))


def gru_cell(
    x: np.ndarray, h_prev: np.ndarray, ps: ParamSet, prefix: str
) -> tuple[np.ndarray, dict]:
    """One GRU step.

    z = sigma(Wz x + Uz h + bz), r = sigma(Wr x + Ur h + br),
    hc = tanh(Wh x + Uh (r*h) + bh), out = (1-z)*h + z*hc.
    """
    W, U = ps.params[f"{prefix}.W"], ps.params[f"{prefix}.U"]
    Uh, b = ps.params[f"{prefix}.Uh"], ps.params[f"{prefix}.b"]
    H = Uh.shape[0]
    if x.shape != (W.shape[1],) or h_prev.shape != (H,):
        raise ShapeError(
            f"gru_cell expects x({W.shape[1]},) h({H},), "
            f"got x{x.shape} h{h_prev.shape}"
        )
    xp = W @ x + b
    return _gru_step(xp, x, h_prev, U, Uh, H)


def _gru_step(xp, x, h_prev, U, Uh, H):
    zr = sigmoid(xp[: 2 * H] + U @ h_prev)
    z, r = zr[:H], zr[H:]
    rh = r * h_prev
    hc = np.tanh(xp[2 * H :] + Uh @ rh)
    h = (1.0 - z) * h_prev + z * hc
    cache = {"x": x, "h_prev": h_prev, "z": z, "r": r, "rh": rh, "hc": hc}
    return h, cache


def _gru_step_backward(dh, cache, U, Uh, gU, gUh, H):
    """Per-step gradients; returns (dxp, dh_prev) where dxp is the
    gradient of the stacked pre-activation projection W x + b."""
    z, r, rh, hc, h_prev = (
        cache["z"], cache["r"], cache["rh"], cache["hc"], cache["h_prev"],
    )
    dxp = np.empty(3 * H)
    dxp[:H] = dh * (hc - h_prev) * z * (1.0 - z)
    dah = dh * z * (1.0 - hc * hc)
    dxp[2 * H :] = dah
    dh_prev = dh * (1.0 - z)
    gUh += dah[:, None] * rh[None, :]
    drh = Uh.T @ dah
    dxp[H : 2 * H] = drh * h_prev * r * (1.0 - r)
    dh_prev = dh_prev + drh * r
    dazr = dxp[: 2 * H]
    gU += dazr[:, None] * h_prev[None, :]
    dh_prev = dh_prev + U.T @ dazr
    return dxp, dh_prev


def gru_cell_backward(
    dh: np.ndarray, cache: dict, ps: ParamSet, prefix: str
) -> tuple[np.ndarray, np.ndarray]:
    """Accumulate parameter gradients; return (dx, dh_prev)."""
    W, U = ps.params[f"{prefix}.W"], ps.params[f"{prefix}.U"]
    Uh = ps.params[f"{prefix}.Uh"]
    gU, gUh = ps.grads[f"{prefix}.U"], ps.grads[f"{prefix}.Uh"]
    H = Uh.shape[0]
    dxp, dh_prev = _gru_step_backward(dh, cache, U, Uh, gU, gUh, H)
    ps.grads[f"{prefix}.W"] += dxp[:, None] * cache["x"][None, :]
    ps.grads[f"{prefix}.b"] += dxp
    return W.T @ dxp, dh_prev


def gru_sequence(
    xs: np.ndarray, ps: ParamSet, prefix: str, reverse: bool = False
) -> tuple[np.ndarray, dict]:
    """Run a GRU over a (T, in) sequence from a zero initial state.

    With ``reverse`` the recurrence runs right to left; outputs stay
    aligned with the input positions.
    """
    W, U = ps.params[f"{prefix}.W"], ps.params[f"{prefix}.U"]
    Uh, b = ps.params[f"{prefix}.Uh"], ps.params[f"{prefix}.b"]
    H = Uh.shape[0]
    if xs.ndim != 2 or xs.shape[1] != W.shape[1]:
        raise ShapeError(f"gru_sequence expects (T, {W.shape[1]}), got {xs.shape}")
    T = xs.shape[0]
    Xp = xs @ W.T + b
    hs = np.zeros((T, H))
    caches = [None] * T
    h = np.zeros(H)
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        h, caches[t] = _gru_step(Xp[t], xs[t], h, U, Uh, H)
        hs[t] = h
    return hs, {"caches": caches, "xs": xs, "reverse": reverse, "T": T, "H": H}


def gru_sequence_backward(
    dhs: np.ndarray, cache: dict, ps: ParamSet, prefix: str
) -> np.ndarray:
    """Accumulate gradients for a gru_sequence call; return d(xs).

    The W and b gradients are accumulated in one matrix product over
    the whole sequence.
    """
    T, H = cache["T"], cache["H"]
    caches = cache["caches"]
    W, U = ps.params[f"{prefix}.W"], ps.params[f"{prefix}.U"]
    Uh = ps.params[f"{prefix}.Uh"]
    gU, gUh = ps.grads[f"{prefix}.U"], ps.grads[f"{prefix}.Uh"]
    dXp = np.empty((T, 3 * H))
    dh_carry = np.zeros(H)
    order = range(T) if cache["reverse"] else range(T - 1, -1, -1)
    for t in order:
        dXp[t], dh_carry = _gru_step_backward(
            dhs[t] + dh_carry, caches[t], U, Uh, gU, gUh, H
        )
    ps.grads[f"{prefix}.W"] += dXp.T @ cache["xs"]
    ps.grads[f"{prefix}.b"] += dXp.sum(axis=0)
    return dXp @ W


# ---------------------------------------------------------------------------
# highway combine


def highway_init(
    rng: np.random.Generator, ps: ParamSet, prefix: str, dim: int
) -> None:
    ps.add(f"{prefix}.W", glorot_uniform(rng, (dim, dim)))
    ps.add(f"{prefix}.b", np.zeros(dim))


def highway_combine(
    x: np.ndarray, transformed: np.ndarray, ps: ParamSet, prefix: str
) -> tuple[np.ndarray, dict]:
    """Gate t = sigma(W x + b); output t*transformed + (1-t)*x.

    Works on single vectors or (T, d) sequences.
    """
    if x.shape != transformed.shape:
        raise ShapeError(f"highway operands differ: {x.shape} vs {transformed.shape}")
    W, b = ps.params[f"{prefix}.W"], ps.params[f"{prefix}.b"]
    if x.shape[-1] != W.shape[1]:
        raise ShapeError(f"highway expects dim {W.shape[1]}, got {x.shape[-1]}")
    gate = sigmoid(x @ W.T + b)
    out = gate * transformed + (1.0 - gate) * x
    return out, {"x": x, "transformed": transformed, "gate": gate}


def highway_backward(
    dout: np.ndarray, cache: dict, ps: ParamSet, prefix: str
) -> tuple[np.ndarray, np.ndarray]:
    """Return (dx, dtransformed); accumulate gate gradients."""
    W = ps.params[f"{prefix}.W"]
    gW, gb = ps.grads[f"{prefix}.W"], ps.grads[f"{prefix}.b"]
    x, tr, gate = cache["x"], cache["transformed"], cache["gate"]
    dgate = dout * (tr - x)
    da = dgate * gate * (1.0 - gate)
    if x.ndim == 1:
        gW += np.outer(da, x)
        gb += da
    else:
        gW += da.T @ x
        gb += da.sum(axis=0)
    dtr = dout * gate
    dx = dout * (1.0 - gate) + da @ W
    return dx, dtr


# ---------------------------------------------------------------------------
# 1-D convolution + max pool over time


def conv_maxpool_init(
    rng: np.random.Generator,
    ps: ParamSet,
    prefix: str,
    dim_in: int,
    widths: tuple[int, ...],
    filters: int,
) -> None:
    for w in widths:
        ps.add(f"{prefix}.w{w}.F", glorot_uniform(rng, (filters, w, dim_in)))
        ps.add(f"{prefix}.w{w}.b", np.zeros(filters))


def conv_maxpool(
    seq: np.ndarray, ps: ParamSet, prefix: str, widths: tuple[int, ...]
) -> tuple[np.ndarray, dict]:
    """Valid convolution per width, tanh, max over time, concatenated.

    Requires T >= max(widths); ties at the max route to the first
    window (argmax convention).
    """
    T = seq.shape[0]
    if T < max(widths):
        raise ShapeError(f"sequence of {T} steps shorter than filter width {max(widths)}")
    outs, caches = [], {}
    for w in widths:
        F = ps.params[f"{prefix}.w{w}.F"]
        b = ps.params[f"{prefix}.w{w}.b"]
        if seq.shape[1] != F.shape[2]:
            raise ShapeError(f"conv expects dim {F.shape[2]}, got {seq.shape[1]}")
        n = T - w + 1
        windows = np.stack([seq[i : i + w] for i in range(n)])  # (n, w, d)
        act = np.tanh(np.tensordot(windows, F, axes=([1, 2], [1, 2])) + b)  # (n, f)
        best = np.argmax(act, axis=0)  # first max per filter
        outs.append(act[best, np.arange(F.shape[0])])
        caches[w] = {"windows": windows, "act": act, "best": best}
    return np.concatenate(outs), {"per_width": caches, "seq_shape": seq.shape}


def conv_maxpool_backward(
    dout: np.ndarray, cache: dict, ps: ParamSet, prefix: str, widths: tuple[int, ...]
) -> np.ndarray:
    """Return d(seq); gradient routes through each filter's argmax."""
    dseq = np.zeros(cache["seq_shape"])
    offset = 0
    for w in widths:
        F = ps.params[f"{prefix}.w{w}.F"]
        gF, gb = ps.grads[f"{prefix}.w{w}.F"], ps.grads[f"{prefix}.w{w}.b"]
        c = cache["per_width"][w]
        f = F.shape[0]
        dpool = dout[offset : offset + f]
        offset += f
        for j in range(f):
            i = c["best"][j]
            da = dpool[j] * (1.0 - c["act"][i, j] ** 2)
            gF[j] += da * c["windows"][i]
            gb[j] += da
            dseq[i : i + w] += da * F[j]
    return dseq


# ---------------------------------------------------------------------------
# linear / softmax


def linear_init(
    rng: np.random.Generator, ps: ParamSet, prefix: str, dim_in: int, dim_out: int
) -> None:
    ps.add(f"{prefix}.W", glorot_uniform(rng, (dim_out, dim_in)))
    ps.add(f"{prefix}.b", np.zeros(dim_out))


def linear(x: np.ndarray, ps: ParamSet, prefix: str) -> np.ndarray:
    W, b = ps.params[f"{prefix}.W"], ps.params[f"{prefix}.b"]
    if x.shape[-1] != W.shape[1]:
        raise ShapeError(f"linear expects dim {W.shape[1]}, got {x.shape[-1]}")
    return x @ W.T + b


def linear_backward(
    dy: np.ndarray, x: np.ndarray, ps: ParamSet, prefix: str
) -> np.ndarray:
    W = ps.params[f"{prefix}.W"]
    gW, gb = ps.grads[f"{prefix}.W"], ps.grads[f"{prefix}.b"]
    if x.ndim == 1:
        gW += np.outer(dy, x)
        gb += dy
    else:
        gW += dy.T @ x
        gb += dy.sum(axis=0)
    return dy @ W


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-stable softmax for vectors or (T, L) matrices."""
    m = logits.max(axis=-1, keepdims=True)
    ex = np.exp(logits - m)
    return ex / ex.sum(axis=-1, keepdims=True)


def softmax_xent(logits: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    """Cross-entropy of softmax(logits) against a class index.

    Returns (loss, grad) with grad = softmax(logits) - onehot(target),
    computed through a log-sum-exp stabilized path.
    """
    n = logits.shape[0]
    if not (0 <= target < n):
        raise IndexError(f"target {target} out of range for {n} classes")
    m = float(logits.max())
    ex = np.exp(logits - m)
    Z = float(ex.sum())
    loss = float(np.log(Z) + m - logits[target])
    grad = ex / Z
    grad[target] -= 1.0
    return loss, grad


# ---------------------------------------------------------------------------
# finite-difference verification


def grad_check(
    func: Callable[[bool], float],
    params: ParamSet,
    epsilon: float = 1e-5,
    names: list[str] | None = None,
) -> float:
    """Max relative error between analytic and central-difference grads.

    ``func(compute_grads)`` must return the scalar loss; when called
    with True it must also accumulate analytic gradients into
    ``params.grads`` (the buffers are zeroed here first).  The relative
    error per coordinate is |a - fd| / max(|a|, |fd|, 1e-12).
    """
    params.zero_grads()
    base = func(True)
    if not np.isfinite(base):
        raise NumericError(f"non-finite loss {base!r}")
    analytic = params.copy_grads()
    worst = 0.0
    for name in names if names is not None else list(params.params):
        flat = params.params[name].reshape(-1)
        aflat = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            fp = func(False)
            flat[i] = orig - epsilon
            fm = func(False)
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise NumericError(f"non-finite loss while perturbing {name}[{i}]")
            fd = (fp - fm) / (2.0 * epsilon)
            err = abs(aflat[i] - fd) / max(abs(aflat[i]), abs(fd), 1e-12)
            worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# parameter checkpoint container

_MAGIC = b"FPCK"
_VERSION = 1


def save_tensors(path, tensors: dict[str, np.ndarray]) -> None:
    """Flat binary container: magic, version byte, then (name, shape,
    little-endian float64 values) records."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(bytes([_VERSION]))
        fh.write(np.array(len(tensors), dtype="<u4").tobytes())
        for name, arr in tensors.items():
            raw = name.encode("utf-8")
            fh.write(np.array(len(raw), dtype="<u2").tobytes())
            fh.write(raw)
            fh.write(bytes([arr.ndim]))
            fh.write(np.asarray(arr.shape, dtype="<u4").tobytes())
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_tensors(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a parameter container")
        version = fh.read(1)[0]
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported container version {version}")
        count = int(np.frombuffer(fh.read(4), dtype="<u4")[0])
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            name_len = int(np.frombuffer(fh.read(2), dtype="<u2")[0])
            name = fh.read(name_len).decode("utf-8")
            ndim = fh.read(1)[0]
            shape = tuple(np.frombuffer(fh.read(4 * ndim), dtype="<u4").tolist())
            n_values = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * n_values), dtype="<f8")
            out[name] = data.reshape(shape).astype(np.float64)
        return out
