"""Tests for the reverse-mode autodiff engine.

Every differentiable op gets a central finite-difference gradient check at
fixed seeded points; forward values are pinned against hand-computed
oracles; structural invariants run under hypothesis.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from tinydialog import tensor as T

# Hand-computed forward oracles.
SOFTMAX_123 = np.array([0.09003057, 0.24472847, 0.66524096])  # e^k / sum(e^1..e^3)
COSINE_12_21 = 0.8  # (1*2 + 2*1) / (sqrt(5) * sqrt(5))
MATMUL_2X2_2X1 = np.array([[17.0], [39.0]])
OUTER_12_34 = np.array([[3.0, 4.0], [6.0, 8.0]])

finite_vec = arrays(np.float64, st.integers(1, 8),
                    elements=st.floats(-50, 50, allow_nan=False))


def tensors(*datas, grad=True):
    return [T.Tensor(np.asarray(d, dtype=np.float64), requires_grad=grad) for d in datas]


class TestForwardOracles:
    def test_softmax_pinned(self):
        (x,) = tensors([1.0, 2.0, 3.0])
        with T.Tape():
            out = T.softmax(x)
        np.testing.assert_allclose(out.data, SOFTMAX_123, atol=1e-3)
        assert abs(out.data.sum() - 1.0) < 1e-12

    def test_cosine_pinned(self):
        a, b = tensors([1.0, 2.0], [2.0, 1.0])
        out = T.cosine_similarity(a, b)
        np.testing.assert_allclose(out.item(), COSINE_12_21, atol=1e-9)

    def test_matmul_pinned(self):
        a, b = tensors([[1.0, 2.0], [3.0, 4.0]], [[5.0], [6.0]])
        out = T.matmul(a, b)
        np.testing.assert_array_equal(out.data, MATMUL_2X2_2X1)

    def test_outer_pinned(self):
        u, s = tensors([1.0, 2.0], [3.0, 4.0])
        out = T.outer(u, s)
        np.testing.assert_array_equal(out.data, OUTER_12_34)

    def test_rowwise_outer_with_ones_ordering(self):
        # One row, u=[1,2], s=[3]: append ones then flatten the outer
        # product row-major over (u index, s index).
        u, s = tensors([[1.0, 2.0]], [[3.0]])
        out = T.rowwise_outer(T.append_ones_col(u), T.append_ones_col(s))
        np.testing.assert_array_equal(out.data, [[3.0, 1.0, 6.0, 2.0, 3.0, 1.0]])

    def test_zero_norm_cosine_is_zero(self):
        a, b = tensors([0.0, 0.0], [1.0, 2.0])
        assert T.cosine_similarity(a, b).item() == 0.0
        assert T.cosine_similarity(b, a).item() == 0.0
        m = T.Tensor(np.array([[0.0, 0.0], [1.0, 1.0]]))
        sims = T.cosine_rows(b, m)
        assert sims.data[0] == 0.0
        assert sims.data[1] != 0.0

    def test_sigmoid_extremes_stable(self):
        (x,) = tensors([-800.0, 0.0, 800.0])
        out = T.sigmoid(x)
        assert np.all(np.isfinite(out.data))
        np.testing.assert_allclose(out.data, [0.0, 0.5, 1.0], atol=1e-12)

    def test_transpose_pinned(self):
        (m,) = tensors([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        np.testing.assert_array_equal(T.transpose(m).data,
                                      [[1.0, 4.0], [2.0, 5.0], [3.0, 6.0]])

    def test_cosine_matrix_agrees_with_vector_case(self):
        a = T.Tensor(np.array([[1.0, 2.0], [0.0, 0.0], [2.0, 1.0]]))
        b = T.Tensor(np.array([[2.0, 1.0], [1.0, 0.0]]))
        sims = T.cosine_matrix(a, b)
        assert sims.data.shape == (3, 2)
        np.testing.assert_allclose(sims.data[0, 0], COSINE_12_21, atol=1e-12)
        assert sims.data[1, 0] == 0.0 and sims.data[1, 1] == 0.0  # zero row
        np.testing.assert_allclose(sims.data[2, 0], 1.0, atol=1e-12)


RNG = np.random.default_rng(7)

# (name, loss builder, differentiated input data); each builder maps the
# checked tensor to a scalar, closing over fixed co-operands.
A23 = T.Tensor(RNG.normal(size=(2, 3)))
A32 = T.Tensor(RNG.normal(size=(3, 2)))
W22 = T.Tensor(RNG.normal(size=(2, 2)))
W33 = T.Tensor(RNG.normal(size=(3, 3)))
W24 = T.Tensor(RNG.normal(size=(2, 4)))
W26 = T.Tensor(RNG.normal(size=(2, 6)))
V3 = T.Tensor(RNG.normal(size=3))
V2 = T.Tensor(RNG.normal(size=2))
POS4 = T.Tensor(RNG.uniform(0.2, 1.0, size=4))

GRAD_CASES = [
    ("add", lambda x: T.sum_all(T.add(x, A23)), RNG.normal(size=(2, 3))),
    ("sub", lambda x: T.sum_all(T.sub(A23, x)), RNG.normal(size=(2, 3))),
    ("mul", lambda x: T.sum_all(T.mul(x, A23)), RNG.normal(size=(2, 3))),
    ("scale", lambda x: T.sum_all(T.scale(x, -2.5)), RNG.normal(size=4)),
    ("add_scalar", lambda x: T.sum_all(T.add_scalar(x, 1.5)), RNG.normal(size=4)),
    ("add_rowvec_m", lambda x: T.sum_all(T.mul(T.add_rowvec(x, V3), A23)), RNG.normal(size=(2, 3))),
    ("add_rowvec_v", lambda x: T.sum_all(T.mul(T.add_rowvec(A23, x), A23)), RNG.normal(size=3)),
    ("mul_rowvec_m", lambda x: T.sum_all(T.mul_rowvec(x, V3)), RNG.normal(size=(2, 3))),
    ("mul_rowvec_v", lambda x: T.sum_all(T.mul_rowvec(A23, x)), RNG.normal(size=3)),
    ("scale_rows_m", lambda x: T.sum_all(T.scale_rows(x, V2)), RNG.normal(size=(2, 3))),
    ("scale_rows_c", lambda x: T.sum_all(T.scale_rows(A23, x)), RNG.normal(size=2)),
    ("mul_by_scalar_a", lambda x: T.sum_all(T.mul_by_scalar_tensor(x, T.Tensor(1.7))), RNG.normal(size=4)),
    ("mul_by_scalar_s", lambda x: T.sum_all(T.mul_by_scalar_tensor(A23, x)), np.array(0.6)),
    ("matmul_22_lhs", lambda x: T.sum_all(T.mul(T.matmul(x, A32), W22)), RNG.normal(size=(2, 3))),
    ("matmul_22_rhs", lambda x: T.sum_all(T.mul(T.matmul(A23, x), W22)), RNG.normal(size=(3, 2))),
    ("matmul_12_lhs", lambda x: T.sum_all(T.matmul(x, A32)), RNG.normal(size=3)),
    ("matmul_12_rhs", lambda x: T.sum_all(T.matmul(V3, x)), RNG.normal(size=(3, 2))),
    ("matmul_21_lhs", lambda x: T.sum_all(T.matmul(x, V3)), RNG.normal(size=(2, 3))),
    ("matmul_21_rhs", lambda x: T.sum_all(T.matmul(A23, x)), RNG.normal(size=3)),
    ("dot", lambda x: T.dot(x, V3), RNG.normal(size=3)),
    ("concat0", lambda x: T.sum_all(T.mul(T.concat([x, A23], axis=0), T.concat([A23, A23], axis=0))), RNG.normal(size=(2, 3))),
    ("concat1", lambda x: T.sum_all(T.mul(T.concat([x, A32], axis=1), T.concat([A32, A32], axis=1))), RNG.normal(size=(3, 2))),
    ("slice_last", lambda x: T.sum_all(T.mul(T.slice_last(x, 1, 3), T.Tensor(np.ones((2, 2))))), RNG.normal(size=(2, 4))),
    ("slice_rows", lambda x: T.sum_all(T.slice_rows(x, 1, 3)), RNG.normal(size=(4, 2))),
    ("reshape", lambda x: T.sum_all(T.mul(T.reshape(x, (3, 2)), A32)), RNG.normal(size=(2, 3))),
    ("row", lambda x: T.sum_all(T.mul(T.row(x, 1), V3)), RNG.normal(size=(2, 3))),
    ("rows_repeat", lambda x: T.sum_all(T.mul(T.rows(x, [1, 0, 1]), W33)), RNG.normal(size=(2, 3))),
    ("stack_rows", lambda x: T.sum_all(T.mul(T.stack_rows([x, V3, x]), W33)), RNG.normal(size=3)),
    ("sigmoid", lambda x: T.sum_all(T.sigmoid(x)), RNG.normal(size=5)),
    ("tanh", lambda x: T.sum_all(T.tanh(x)), RNG.normal(size=5)),
    ("relu", lambda x: T.sum_all(T.relu(x)), np.array([-1.3, -0.4, 0.6, 2.0])),
    ("power", lambda x: T.sum_all(T.power(x, 2.0)), RNG.uniform(0.1, 1.0, size=4)),
    ("normalize_sum", lambda x: T.sum_all(T.mul(T.normalize_sum(x), POS4)), RNG.uniform(0.2, 1.0, size=4)),
    ("softmax", lambda x: T.sum_all(T.mul(T.softmax(x), POS4)), RNG.normal(size=4)),
    ("softmax_rows", lambda x: T.sum_all(T.mul(T.softmax_rows(x), A23)), RNG.normal(size=(2, 3))),
    ("mean", lambda x: T.mean(x), RNG.normal(size=(2, 3))),
    ("mean_rows", lambda x: T.sum_all(T.mul(T.mean_rows(x), V3)), RNG.normal(size=(4, 3))),
    ("layer_norm", lambda x: T.sum_all(T.mul(T.layer_norm_rows(x), A23)), RNG.normal(size=(2, 3))),
    ("outer_u", lambda x: T.sum_all(T.mul(T.outer(x, V3), A23)), RNG.normal(size=2)),
    ("outer_s", lambda x: T.sum_all(T.mul(T.outer(V2, x), A23)), RNG.normal(size=3)),
    ("rowwise_outer_u", lambda x: T.sum_all(T.mul(T.rowwise_outer(x, A23), W26)), RNG.normal(size=(2, 2))),
    ("rowwise_outer_s", lambda x: T.sum_all(T.mul(T.rowwise_outer(A23, x), W26)), RNG.normal(size=(2, 2))),
    ("append_ones", lambda x: T.sum_all(T.mul(T.append_ones_col(x), W24)), RNG.normal(size=(2, 3))),
    ("cosine", lambda x: T.cosine_similarity(x, V3), RNG.normal(size=3) + 0.5),
    ("cosine_rows_v", lambda x: T.sum_all(T.mul(T.cosine_rows(x, A23), V2)), RNG.normal(size=3) + 0.3),
    ("cosine_rows_m", lambda x: T.sum_all(T.mul(T.cosine_rows(V3, x), V2)), RNG.normal(size=(2, 3)) + 0.3),
    ("cosine_pairs_a", lambda x: T.sum_all(T.mul(T.cosine_pairs(x, A23), V2)), RNG.normal(size=(2, 3)) + 0.4),
    ("cosine_pairs_b", lambda x: T.sum_all(T.mul(T.cosine_pairs(A23, x), V2)), RNG.normal(size=(2, 3)) + 0.4),
    ("transpose", lambda x: T.sum_all(T.mul(T.transpose(x), A32)), RNG.normal(size=(2, 3))),
    ("cosine_matrix_a", lambda x: T.sum_all(T.mul(T.cosine_matrix(x, W33), A23)), RNG.normal(size=(2, 3)) + 0.4),
    ("cosine_matrix_b", lambda x: T.sum_all(T.mul(T.cosine_matrix(A23, x), A23)), RNG.normal(size=(3, 3)) + 0.4),
]


@pytest.mark.parametrize("name,f,x_data", GRAD_CASES, ids=[c[0] for c in GRAD_CASES])
def test_gradient_matches_finite_differences(name, f, x_data):
    x = T.Tensor(x_data)
    err = T.check_gradients(f, x, eps=1e-3)
    assert err < 1e-4, f"{name}: max relative gradient error {err:.2e}"


class TestBackwardMechanics:
    def test_reused_tensor_accumulates(self):
        x = T.Tensor([1.0, 2.0, 3.0], requires_grad=True)
        with T.Tape() as tape:
            h = T.add(x, x)
            loss = T.sum_all(T.mul(h, h))  # sum (2x)^2, grad = 8x
            T.backward(loss, tape)
        np.testing.assert_allclose(x.grad, 8.0 * x.data, atol=1e-12)

    def test_shared_subexpression(self):
        x = T.Tensor([0.5, -0.25], requires_grad=True)
        def f(t):
            s = T.sigmoid(t)
            return T.sum_all(T.add(T.mul(s, s), s))
        assert T.check_gradients(f, x) < 1e-6

    def test_no_tape_no_recording(self):
        x = T.Tensor([1.0], requires_grad=True)
        out = T.scale(x, 2.0)
        assert not out.requires_grad  # inference mode: nothing to track
        with pytest.raises(RuntimeError):
            T.backward(out)

    def test_tape_length_counts_recorded_ops(self):
        x = T.Tensor([1.0, 2.0], requires_grad=True)
        frozen = T.Tensor([3.0, 4.0])
        with T.Tape() as tape:
            T.add(T.mul(x, x), frozen)
            T.add(frozen, frozen)  # constant arithmetic stays off the tape
        assert len(tape) == 2

    def test_backward_requires_scalar_root(self):
        x = T.Tensor([1.0, 2.0], requires_grad=True)
        with T.Tape() as tape:
            y = T.scale(x, 3.0)
            with pytest.raises(ValueError):
                T.backward(y, tape)

    def test_execution_order_is_topological(self):
        x = T.Tensor([1.0, 2.0], requires_grad=True)
        with T.Tape() as tape:
            y = T.scale(x, 2.0)
            z = T.sum_all(T.mul(y, y))
        outs = [entry[0] for entry in tape.entries]
        assert outs.index(y) < len(outs) - 1 and outs[-1] is z

    def test_zero_norm_cosine_backward_is_silent(self):
        # A zero-norm operand returns an untracked constant; no gradients flow.
        a = T.Tensor([0.0, 0.0], requires_grad=True)
        b = T.Tensor([1.0, 2.0], requires_grad=True)
        with T.Tape() as tape:
            c = T.cosine_similarity(a, b)
            assert not c.requires_grad
            assert len(tape) == 0


class TestShapeContracts:
    def test_mismatched_add(self):
        a, b = tensors([1.0, 2.0], [1.0, 2.0, 3.0])
        with pytest.raises(T.ShapeError):
            T.add(a, b)

    def test_mismatched_matmul(self):
        a, b = tensors([[1.0, 2.0]], [[1.0, 2.0]])
        with pytest.raises(T.ShapeError):
            T.matmul(a, b)

    def test_softmax_rejects_matrix_and_empty(self):
        with pytest.raises(ValueError):
            T.softmax(T.Tensor([[1.0, 2.0]]))
        with pytest.raises(ValueError):
            T.softmax(T.Tensor(np.empty(0)))

    def test_normalize_sum_rejects_nonpositive_total(self):
        with pytest.raises(ValueError):
            T.normalize_sum(T.Tensor([0.0, 0.0]))

    def test_rowwise_outer_shape_law(self):
        u = T.Tensor(np.ones((5, 3)))
        s = T.Tensor(np.ones((5, 4)))
        assert T.rowwise_outer(u, s).shape == (5, 12)
        with pytest.raises(T.ShapeError):
            T.rowwise_outer(u, T.Tensor(np.ones((4, 4))))


class TestHypothesisProperties:
    @given(finite_vec)
    def test_softmax_is_simplex(self, v):
        out = T.softmax(T.Tensor(v))
        assert np.all(out.data >= 0.0)
        assert abs(out.data.sum() - 1.0) < 1e-9
        assert out.shape == v.shape

    @given(finite_vec, st.floats(-20, 20))
    def test_softmax_shift_invariant(self, v, c):
        a = T.softmax(T.Tensor(v)).data
        b = T.softmax(T.Tensor(v + c)).data
        np.testing.assert_allclose(a, b, atol=1e-9)

    @given(arrays(np.float64, 4, elements=st.floats(-100, 100, allow_nan=False)),
           arrays(np.float64, 4, elements=st.floats(-100, 100, allow_nan=False)))
    def test_cosine_bounded(self, a, b):
        sim = T.cosine_similarity(T.Tensor(a), T.Tensor(b)).item()
        assert -1.0 - 1e-9 <= sim <= 1.0 + 1e-9

    @given(arrays(np.float64, (3, 5), elements=st.floats(-30, 30, allow_nan=False)))
    def test_concat_slice_roundtrip(self, m):
        a = T.Tensor(m[:, :2])
        b = T.Tensor(m[:, 2:])
        joined = T.concat([a, b], axis=1)
        np.testing.assert_array_equal(T.slice_last(joined, 0, 2).data, a.data)
        np.testing.assert_array_equal(T.slice_last(joined, 2, 5).data, b.data)

    @given(arrays(np.float64, st.integers(1, 6),
                  elements=st.floats(0.01, 10, allow_nan=False)))
    def test_normalize_sum_is_simplex(self, v):
        out = T.normalize_sum(T.Tensor(v))
        assert abs(out.data.sum() - 1.0) < 1e-9
        assert np.all(out.data >= 0.0)

    @given(arrays(np.float64, (4, 6), elements=st.floats(-5, 5, allow_nan=False,
                                                         allow_subnormal=False)))
    @settings(max_examples=50)
    def test_layer_norm_rows_standardizes(self, m):
        out = T.layer_norm_rows(T.Tensor(m)).data
        np.testing.assert_allclose(out.mean(axis=1), 0.0, atol=1e-9)
        # Unit variance up to the eps floor; constant rows collapse to zero.
        var = out.var(axis=1)
        assert np.all(var <= 1.0 + 1e-9)

    @given(arrays(np.float64, (3, 4), elements=st.floats(-9, 9, allow_nan=False)),
           st.lists(st.integers(0, 2), min_size=1, max_size=6))
    def test_rows_gather_matches_numpy(self, m, idx):
        out = T.rows(T.Tensor(m), idx)
        np.testing.assert_array_equal(out.data, m[np.asarray(idx)])

    @given(arrays(np.float64, (2, 3), elements=st.floats(-9, 9, allow_nan=False)),
           arrays(np.float64, (2, 4), elements=st.floats(-9, 9, allow_nan=False)))
    def test_rowwise_outer_entries(self, u, s):
        out = T.rowwise_outer(T.Tensor(u), T.Tensor(s)).data
        for i in range(2):
            for a in range(3):
                for b in range(4):
                    assert out[i, a * 4 + b] == u[i, a] * s[i, b]


class TestOptimizerAndCheckpoints:
    def test_adam_minimizes_quadratic(self):
        x = T.Tensor([10.0, -4.0], requires_grad=True)
        target = T.Tensor([3.0, 1.0])
        opt = T.Adam({"x": x}, lr=0.1)
        for _ in range(400):
            opt.zero_grad()
            with T.Tape() as tape:
                d = T.sub(x, target)
                loss = T.sum_all(T.mul(d, d))
                T.backward(loss, tape)
            opt.step()
        np.testing.assert_allclose(x.data, target.data, atol=1e-3)

    def test_checkpoint_roundtrip_bit_exact(self, tmp_path):
        params = {
            "w": T.Tensor(np.array([[np.pi, 1.0 / 3.0], [1e-17, -2.5]]), requires_grad=True),
            "b": T.Tensor(np.array([0.1 + 0.2]), requires_grad=True),
        }
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        T.save_checkpoint(p1, params, meta={"note": "x"})
        loaded, meta = T.load_checkpoint(p1)
        assert meta == {"note": "x"}
        for k in params:
            assert loaded[k].data.tobytes() == params[k].data.tobytes()
            assert loaded[k].data.shape == params[k].data.shape
        T.save_checkpoint(p2, loaded, meta={"note": "x"})
        assert p1.read_bytes() == p2.read_bytes()

    def test_checkpoint_rejects_foreign_files(self, tmp_path):
        p = tmp_path / "junk.json"
        p.write_text('{"format": "something-else", "params": {}}')
        with pytest.raises(ValueError):
            T.load_checkpoint(p)

    def test_xavier_uniform_seeded_and_bounded(self):
        a = T.xavier_uniform(np.random.default_rng(3), 40, 60)
        b = T.xavier_uniform(np.random.default_rng(3), 40, 60)
        np.testing.assert_array_equal(a.data, b.data)
        limit = np.sqrt(6.0 / 100.0)
        assert np.all(np.abs(a.data) <= limit)
        assert a.requires_grad


def _triple_with_wrong_gradient(t):
    out = T.Tensor._wrap(t.data * 3.0)
    def bw(g):
        T._accum(t, g * 2.0)  # wrong factor on purpose
    return T._record(out, (t,), bw)


def test_gradient_checker_flags_wrong_gradient():
    # The checker itself must be able to fail: a deliberately broken
    # backward has to produce a large reported error.
    x = T.Tensor([1.0, 2.0])
    err = T.check_gradients(lambda t: T.sum_all(_triple_with_wrong_gradient(t)), x)
    assert err > 0.1
