"""Reverse-mode differentiation over dense float64 tensors.

A Tape records every operation as a node holding its forward value; node ids
are plain ints and always reference earlier nodes. backward() replays the
tape in reverse and returns gradients for leaves registered as parameters.
The tape is real-valued only: complex wavefunction values are assembled
outside from two real heads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

_LN_EPS = 1e-5  # variance floor inside layer_norm
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass
class Node:
    op: str
    inputs: tuple[int, ...]
    value: np.ndarray
    extra: dict = field(default_factory=dict)
    param: bool = False


def _shape_error(op, *shapes):
    listed = ", ".join(str(tuple(s)) for s in shapes)
    return ValueError(f"{op}: incompatible shapes {listed}")


class Tape:
    def __init__(self):
        self.nodes: list[Node] = []

    def _push(self, op, inputs, value, extra=None, param=False) -> int:
        self.nodes.append(Node(op, tuple(inputs), value, extra or {}, param))
        return len(self.nodes) - 1

    def value(self, nid: int) -> np.ndarray:
        return self.nodes[nid].value

    # -- leaves ----------------------------------------------------------
    def param(self, value) -> int:
        arr = np.asarray(value, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("param: values must be finite")
        return self._push("leaf", (), arr, param=True)

    def constant(self, value) -> int:
        arr = np.asarray(value, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("constant: values must be finite")
        return self._push("leaf", (), arr)

    # -- ops --------------------------------------------------------------
    def matmul(self, a: int, b: int, transpose_a=False, transpose_b=False) -> int:
        va, vb = self.nodes[a].value, self.nodes[b].value
        ma = va.T if transpose_a else va
        mb = vb.T if transpose_b else vb
        if ma.ndim != 2 or mb.ndim != 2 or ma.shape[1] != mb.shape[0]:
            raise _shape_error("matmul", va.shape, vb.shape)
        return self._push("matmul", (a, b), ma @ mb,
                          {"ta": transpose_a, "tb": transpose_b})

    def add(self, a: int, b: int) -> int:
        va, vb = self.nodes[a].value, self.nodes[b].value
        bias = va.shape != vb.shape
        if bias and not (va.ndim == 2 and vb.shape == (va.shape[1],)):
            raise _shape_error("add", va.shape, vb.shape)
        return self._push("add", (a, b), va + vb, {"bias": bias})

    def multiply(self, a: int, b: int) -> int:
        va, vb = self.nodes[a].value, self.nodes[b].value
        if va.shape != vb.shape:
            raise _shape_error("multiply", va.shape, vb.shape)
        return self._push("multiply", (a, b), va * vb)

    def concat(self, ids, axis: int = 0) -> int:
        vals = [self.nodes[i].value for i in ids]
        try:
            out = np.concatenate(vals, axis=axis)
        except ValueError:
            raise _shape_error("concat", *[v.shape for v in vals])
        sizes = [v.shape[axis] for v in vals]
        return self._push("concat", tuple(ids), out, {"axis": axis, "sizes": sizes})

    def slice(self, a: int, key) -> int:
        va = self.nodes[a].value
        out = np.asarray(va[key], dtype=float)
        if out.base is not None:
            out = out.copy()
        return self._push("slice", (a,), out, {"key": key, "shape": va.shape})

    def embedding_lookup(self, table: int, indices) -> int:
        vt = self.nodes[table].value
        idx = np.asarray(indices, dtype=np.intp)
        if vt.ndim != 2 or idx.ndim != 1 or idx.min(initial=0) < 0 \
                or (idx.size and idx.max() >= vt.shape[0]):
            raise _shape_error("embedding_lookup", vt.shape, idx.shape)
        return self._push("embedding_lookup", (table,), vt[idx], {"idx": idx})

    def layer_norm(self, a: int, gain: int, bias: int) -> int:
        va = self.nodes[a].value
        vg, vb = self.nodes[gain].value, self.nodes[bias].value
        if va.ndim != 2 or vg.shape != (va.shape[1],) or vb.shape != vg.shape:
            raise _shape_error("layer_norm", va.shape, vg.shape, vb.shape)
        mean = va.mean(axis=1, keepdims=True)
        var = va.var(axis=1, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + _LN_EPS)
        x_hat = (va - mean) * inv_std
        return self._push("layer_norm", (a, gain, bias), x_hat * vg + vb,
                          {"x_hat": x_hat, "inv_std": inv_std})

    def softmax_rows(self, a: int) -> int:
        va = self.nodes[a].value
        if va.ndim != 2:
            raise _shape_error("softmax_rows", va.shape)
        shifted = va - va.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        out = e / e.sum(axis=1, keepdims=True)
        return self._push("softmax_rows", (a,), out)

    def gelu(self, a: int) -> int:
        va = self.nodes[a].value
        return self._push("gelu", (a,), 0.5 * va * (1.0 + erf(va / np.sqrt(2.0))))

    def tanh(self, a: int) -> int:
        return self._push("tanh", (a,), np.tanh(self.nodes[a].value))

    def log(self, a: int) -> int:
        return self._push("log", (a,), np.log(self.nodes[a].value))

    def sum(self, a: int, axis=None) -> int:
        va = self.nodes[a].value
        out = np.asarray(va.sum(axis=axis), dtype=float)
        return self._push("sum", (a,), out, {"axis": axis, "shape": va.shape})

    def masked_fill(self, a: int, mask, value: float) -> int:
        va = self.nodes[a].value
        m = np.asarray(mask, dtype=bool)
        if m.shape != va.shape:
            raise _shape_error("masked_fill", va.shape, m.shape)
        return self._push("masked_fill", (a,), np.where(m, value, va), {"mask": m})

    # -- reverse pass ------------------------------------------------------
    def backward(self, output: int) -> dict[int, np.ndarray]:
        """Gradients of the scalar node wrt every parameter leaf.

        Forward values are left untouched; repeating the call reproduces the
        same gradients bitwise.
        """
        if self.nodes[output].value.size != 1:
            raise ValueError("backward: output node must be a scalar")
        grads: list[np.ndarray | None] = [None] * len(self.nodes)
        grads[output] = np.ones_like(self.nodes[output].value)

        def accum(nid, g):
            if grads[nid] is None:
                grads[nid] = np.zeros_like(self.nodes[nid].value)
            grads[nid] += g

        for nid in range(output, -1, -1):
            g = grads[nid]
            if g is None:
                continue
            node = self.nodes[nid]
            op, ins, ex = node.op, node.inputs, node.extra
            if op == "leaf":
                continue
            if op == "matmul":
                a, b = ins
                va, vb = self.nodes[a].value, self.nodes[b].value
                ma = va.T if ex["ta"] else va
                mb = vb.T if ex["tb"] else vb
                ga = g @ mb.T
                gb = ma.T @ g
                accum(a, ga.T if ex["ta"] else ga)
                accum(b, gb.T if ex["tb"] else gb)
            elif op == "add":
                a, b = ins
                accum(a, g)
                accum(b, g.sum(axis=0) if ex["bias"] else g)
            elif op == "multiply":
                a, b = ins
                accum(a, g * self.nodes[b].value)
                accum(b, g * self.nodes[a].value)
            elif op == "concat":
                start = 0
                for i, size in zip(ins, ex["sizes"]):
                    sl = [slice(None)] * g.ndim
                    sl[ex["axis"]] = slice(start, start + size)
                    accum(i, g[tuple(sl)])
                    start += size
            elif op == "slice":
                back = np.zeros(ex["shape"])
                key = ex["key"]
                if isinstance(key, tuple) and any(
                        isinstance(k, np.ndarray) for k in key):
                    np.add.at(back, key, g)
                elif isinstance(key, np.ndarray):
                    np.add.at(back, key, g)
                else:
                    back[key] += g
                accum(ins[0], back)
            elif op == "embedding_lookup":
                back = np.zeros_like(self.nodes[ins[0]].value)
                np.add.at(back, ex["idx"], g)
                accum(ins[0], back)
            elif op == "layer_norm":
                a, gain, bias = ins
                vg = self.nodes[gain].value
                x_hat, inv_std = ex["x_hat"], ex["inv_std"]
                d = x_hat.shape[1]
                dx_hat = g * vg
                term = (d * dx_hat - dx_hat.sum(axis=1, keepdims=True)
                        - x_hat * (dx_hat * x_hat).sum(axis=1, keepdims=True))
                accum(a, inv_std / d * term)
                accum(gain, (g * x_hat).sum(axis=0))
                accum(bias, g.sum(axis=0))
            elif op == "softmax_rows":
                s = node.value
                accum(ins[0], (g - (g * s).sum(axis=1, keepdims=True)) * s)
            elif op == "gelu":
                x = self.nodes[ins[0]].value
                phi = 0.5 * (1.0 + erf(x / np.sqrt(2.0)))
                density = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
                accum(ins[0], g * (phi + x * density))
            elif op == "tanh":
                accum(ins[0], g * (1.0 - node.value**2))
            elif op == "log":
                accum(ins[0], g / self.nodes[ins[0]].value)
            elif op == "sum":
                axis, shape = ex["axis"], ex["shape"]
                if axis is None:
                    accum(ins[0], np.broadcast_to(g, shape).copy())
                else:
                    accum(ins[0], np.broadcast_to(
                        np.expand_dims(g, axis), shape).copy())
            elif op == "masked_fill":
                accum(ins[0], np.where(ex["mask"], 0.0, g))
            else:  # pragma: no cover
                raise RuntimeError(f"unknown op {op}")

        return {i: grads[i] if grads[i] is not None else np.zeros_like(n.value)
                for i, n in enumerate(self.nodes) if n.param}
