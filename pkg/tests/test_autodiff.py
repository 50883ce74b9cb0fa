"""Tape-based reverse-mode differentiation checked against finite differences."""

import numpy as np
import pytest

from nnvqe.autodiff import Tape


def fd_gradients(build, arrays, step=1e-5):
    """Central-difference gradients of the scalar build(tape, ids) output."""
    nums = []
    for k in range(len(arrays)):
        g = np.zeros_like(arrays[k])
        flat = g.reshape(-1)
        for j in range(arrays[k].size):
            vals = []
            for sign in (1.0, -1.0):
                pert = [a.copy() for a in arrays]
                pert[k].reshape(-1)[j] += sign * step
                tape = Tape()
                ids = [tape.param(a) for a in pert]
                vals.append(tape.value(build(tape, ids)).item())
            flat[j] = (vals[0] - vals[1]) / (2.0 * step)
        nums.append(g)
    return nums


def check_against_fd(build, arrays, rel=1e-5, step=1e-5):
    tape = Tape()
    ids = [tape.param(a) for a in arrays]
    out = build(tape, ids)
    grads = tape.backward(out)
    nums = fd_gradients(build, arrays, step=step)
    for nid, num in zip(ids, nums):
        ana = grads[nid]
        assert ana.shape == num.shape
        assert np.all(np.abs(ana - num) <= rel * np.maximum(1.0, np.abs(num)))


def test_matmul_identity_passthrough():
    tape = Tape()
    a = tape.param(np.arange(12.0).reshape(3, 4))
    eye = tape.constant(np.eye(3))
    out = tape.matmul(eye, a)
    assert np.array_equal(tape.value(out), np.arange(12.0).reshape(3, 4))


def test_matmul_transpose_flags():
    rng = np.random.default_rng(0)
    va, vb = rng.normal(size=(3, 5)), rng.normal(size=(4, 5))
    tape = Tape()
    a, b = tape.param(va), tape.param(vb)
    out = tape.matmul(a, b, transpose_b=True)
    assert np.allclose(tape.value(out), va @ vb.T)


def test_shape_errors_name_op_and_shapes():
    tape = Tape()
    a = tape.param(np.zeros((2, 3)))
    b = tape.param(np.zeros((2, 3)))
    with pytest.raises(ValueError, match=r"matmul.*\(2, 3\).*\(2, 3\)"):
        tape.matmul(a, b)
    with pytest.raises(ValueError, match="add"):
        tape.add(a, tape.param(np.zeros(2)))
    with pytest.raises(ValueError, match="multiply"):
        tape.multiply(a, tape.param(np.zeros((3, 2))))
    with pytest.raises(ValueError, match="masked_fill"):
        tape.masked_fill(a, np.zeros((3, 3), dtype=bool), 0.0)
    with pytest.raises(ValueError, match="layer_norm"):
        tape.layer_norm(a, tape.param(np.ones(2)), tape.param(np.zeros(2)))
    with pytest.raises(ValueError, match="concat"):
        tape.concat([a, tape.param(np.zeros((2, 4)))], axis=0)
    with pytest.raises(ValueError, match="embedding_lookup"):
        tape.embedding_lookup(a, np.array([0, 5]))
    with pytest.raises(ValueError, match="finite"):
        tape.param(np.array([1.0, np.inf]))


def test_softmax_equal_logits_is_uniform():
    tape = Tape()
    out = tape.softmax_rows(tape.param(np.full((3, 5), 2.7)))
    assert np.all(np.abs(tape.value(out) - 0.2) <= 1e-12)


def test_softmax_rows_normalized_and_stable():
    tape = Tape()
    logits = np.array([[1000.0, 1000.0, -1000.0], [3.0, 1.0, 0.5]])
    s = tape.value(tape.softmax_rows(tape.param(logits)))
    assert np.all(np.isfinite(s))
    assert np.allclose(s.sum(axis=1), 1.0, atol=1e-12)
    assert np.allclose(s[0], [0.5, 0.5, 0.0], atol=1e-12)


def test_layer_norm_normalizes_rows():
    # variance deficit from the 1e-5 floor scales as eps/sigma^2, negligible
    # at this input scale
    rng = np.random.default_rng(1)
    x = rng.normal(scale=1000.0, size=(6, 32))
    tape = Tape()
    out = tape.layer_norm(tape.param(x), tape.constant(np.ones(32)),
                          tape.constant(np.zeros(32)))
    y = tape.value(out)
    assert np.all(np.abs(y.mean(axis=1)) <= 1e-10)
    assert np.all(np.abs(y.var(axis=1) - 1.0) <= 1e-10)


def test_sum_gradient_is_ones():
    tape = Tape()
    a = tape.param(np.arange(6.0).reshape(2, 3))
    grads = tape.backward(tape.sum(a))
    assert np.array_equal(grads[a], np.ones((2, 3)))


def test_constant_leaves_get_no_gradient():
    tape = Tape()
    a = tape.param(np.ones((2, 2)))
    c = tape.constant(np.full((2, 2), 3.0))
    grads = tape.backward(tape.sum(tape.multiply(a, c)))
    assert a in grads and c not in grads


def test_backward_requires_scalar():
    tape = Tape()
    a = tape.param(np.ones((2, 2)))
    with pytest.raises(ValueError, match="scalar"):
        tape.backward(a)


def test_backward_repeatable_and_nonmutating():
    rng = np.random.default_rng(2)
    tape = Tape()
    a = tape.param(rng.normal(size=(3, 3)))
    b = tape.param(rng.normal(size=(3, 3)))
    out = tape.sum(tape.tanh(tape.matmul(a, b)))
    before = [n.value.copy() for n in tape.nodes]
    g1 = tape.backward(out)
    g2 = tape.backward(out)
    for n, v in zip(tape.nodes, before):
        assert np.array_equal(n.value, v)
    for k in g1:
        assert np.array_equal(g1[k], g2[k])


def test_mlp_matches_finite_differences():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(4, 6))
    arrays = [rng.normal(size=(6, 8)) * 0.5, rng.normal(size=8) * 0.1,
              rng.normal(size=(8, 8)) * 0.5, rng.normal(size=8) * 0.1,
              rng.normal(size=(8, 1)) * 0.5, rng.normal(size=1) * 0.1]

    def build(tape, ids):
        w1, b1, w2, b2, w3, b3 = ids
        h = tape.gelu(tape.add(tape.matmul(tape.constant(x), w1), b1))
        h = tape.gelu(tape.add(tape.matmul(h, w2), b2))
        return tape.sum(tape.add(tape.matmul(h, w3), b3))

    check_against_fd(build, arrays, rel=1e-5, step=1e-5)


@pytest.mark.parametrize("name,build,shapes", [
    ("matmul", lambda t, i: t.sum(t.tanh(t.matmul(i[0], i[1]))),
     [(3, 4), (4, 2)]),
    ("matmul_t", lambda t, i: t.sum(t.tanh(t.matmul(i[0], i[1],
                                                    transpose_a=True,
                                                    transpose_b=True))),
     [(4, 3), (2, 4)]),
    ("add_bias", lambda t, i: t.sum(t.tanh(t.add(i[0], i[1]))),
     [(3, 4), (4,)]),
    ("multiply", lambda t, i: t.sum(t.multiply(i[0], t.tanh(i[1]))),
     [(3, 4), (3, 4)]),
    ("concat", lambda t, i: t.sum(t.tanh(t.concat([i[0], i[1]], axis=1))),
     [(3, 2), (3, 4)]),
    ("slice", lambda t, i: t.sum(t.tanh(t.slice(i[0], (slice(1, 3),
                                                       slice(None))))),
     [(4, 3)]),
    ("layer_norm", lambda t, i: t.sum(t.tanh(t.layer_norm(i[0], i[1], i[2]))),
     [(3, 6), (6,), (6,)]),
    ("softmax", lambda t, i: t.sum(t.multiply(t.softmax_rows(i[0]),
                                              t.tanh(i[1]))),
     [(3, 5), (3, 5)]),
    ("gelu", lambda t, i: t.sum(t.gelu(i[0])), [(4, 4)]),
    ("tanh", lambda t, i: t.sum(t.tanh(i[0])), [(4, 4)]),
    ("sum_axis", lambda t, i: t.sum(t.tanh(t.sum(i[0], axis=1))), [(3, 4)]),
])
def test_op_gradients_match_fd(name, build, shapes):
    rng = np.random.default_rng(hash(name) % 2**32)
    arrays = [rng.normal(size=s) for s in shapes]
    check_against_fd(build, arrays, rel=1e-5, step=1e-5)


def test_log_gradient_matches_fd():
    rng = np.random.default_rng(7)
    arrays = [rng.uniform(0.5, 2.0, size=(3, 4))]
    check_against_fd(lambda t, i: t.sum(t.log(i[0])), arrays)


def test_fancy_slice_gradient_accumulates():
    rows = np.array([0, 2, 2, 1])
    cols = np.array([1, 0, 0, 2])

    def build(tape, ids):
        return tape.sum(tape.tanh(tape.slice(ids[0], (rows, cols))))

    rng = np.random.default_rng(8)
    check_against_fd(build, [rng.normal(size=(3, 3))])


def test_embedding_lookup_forward_and_repeats():
    table = np.arange(12.0).reshape(4, 3)
    idx = np.array([2, 0, 2])
    tape = Tape()
    tid = tape.param(table)
    out = tape.embedding_lookup(tid, idx)
    assert np.array_equal(tape.value(out), table[idx])
    grads = tape.backward(tape.sum(out))
    expected = np.zeros((4, 3))
    np.add.at(expected, idx, 1.0)
    assert np.array_equal(grads[tid], expected)


def test_masked_fill_blocks_gradient():
    mask = np.array([[True, False], [False, True]])
    tape = Tape()
    a = tape.param(np.ones((2, 2)))
    grads = tape.backward(tape.sum(tape.masked_fill(a, mask, -50.0)))
    assert np.array_equal(grads[a], np.where(mask, 0.0, 1.0))
    out_value = tape.value(tape.masked_fill(a, mask, -50.0))
    assert np.array_equal(out_value, np.where(mask, -50.0, 1.0))


def test_attention_block_matches_fd():
    rng = np.random.default_rng(9)
    n, d = 4, 6
    x = rng.normal(size=(n, d))
    causal = np.triu(np.ones((n, n), dtype=bool), k=1)
    scale = np.full((n, n), 1.0 / np.sqrt(d))
    arrays = [rng.normal(size=(d, d)) * 0.5 for _ in range(4)]

    def build(tape, ids):
        wq, wk, wv, wo = ids
        xc = tape.constant(x)
        q = tape.matmul(xc, wq)
        k = tape.matmul(xc, wk)
        v = tape.matmul(xc, wv)
        scores = tape.multiply(tape.matmul(q, k, transpose_b=True),
                               tape.constant(scale))
        probs = tape.softmax_rows(tape.masked_fill(scores, causal, -1e9))
        return tape.sum(tape.tanh(tape.matmul(tape.matmul(probs, v), wo)))

    check_against_fd(build, arrays, rel=1e-4, step=1e-5)
