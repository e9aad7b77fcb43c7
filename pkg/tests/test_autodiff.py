import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regionemb.autodiff import (
    Tape,
    Tensor,
    clamp_min,
    concat,
    cosine_sim,
    log,
    matmul,
    normalize_rows,
    sigmoid,
    soft_threshold,
    softmax,
    tensor_sum,
    transpose,
)
from regionemb.gradcheck import compare_gradients, finite_diff_grad

import oracles


# frozen from a 50-digit evaluation of exp/sum
SOFTMAX_123 = [0.09003057317038046, 0.24472847105479764, 0.6652409557748219]


class TestSoftmax:
    def test_symmetry(self):
        out = softmax(Tensor([0.0, 0.0, 0.0])).data
        assert np.allclose(out, [1 / 3] * 3, atol=0)

    def test_large_inputs_no_overflow(self):
        out = softmax(Tensor([1000.0, 0.0])).data
        assert np.isfinite(out).all()
        assert out[0] > 1 - 1e-12 and out[1] < 1e-12

    def test_frozen_values(self):
        out = softmax(Tensor([1.0, 2.0, 3.0])).data
        assert np.abs(out - SOFTMAX_123).max() <= 1e-9

    def test_matches_oracle(self):
        xs = np.random.default_rng(0).uniform(-5, 5, 7)
        assert np.allclose(softmax(Tensor(xs)).data, oracles.softmax_vec(list(xs)), atol=1e-12)

    def test_empty_errors(self):
        with pytest.raises(ValueError):
            softmax(Tensor(np.zeros(0)))

    def test_nan_errors(self):
        with pytest.raises(ValueError):
            softmax(Tensor([0.0, np.nan]))

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=1000))
    @settings(max_examples=60, deadline=None)
    def test_rows_sum_to_one(self, xs):
        out = softmax(Tensor(xs)).data
        assert abs(out.sum() - 1.0) <= 1e-9
        assert (out >= 0).all()

    @given(st.lists(st.floats(-20, 20), min_size=2, max_size=50), st.floats(-30, 30))
    @settings(max_examples=60, deadline=None)
    def test_shift_invariance(self, xs, c):
        a = softmax(Tensor(xs)).data
        b = softmax(Tensor([x + c for x in xs])).data
        assert np.abs(a - b).max() <= 1e-9


class TestCosineSim:
    def test_identical(self):
        assert cosine_sim([1.0, 2.0, -3.0], [1.0, 2.0, -3.0]) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine_sim([1.0, 0.0], [0.0, 5.0]) == 0.0

    def test_hand_value(self):
        # 1/sqrt(2)
        assert cosine_sim([1.0, 0.0], [1.0, 1.0]) == pytest.approx(0.7071067811865476, abs=1e-12)

    def test_zero_norm_returns_zero(self):
        assert cosine_sim([0.0, 0.0], [1.0, 2.0]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            cosine_sim([1.0], [1.0, 2.0])

    @given(
        st.lists(st.floats(-10, 10), min_size=2, max_size=8),
        st.lists(st.floats(-10, 10), min_size=2, max_size=8),
        st.floats(0.1, 100.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_symmetric_and_scale_invariant(self, a, b, scale):
        m = min(len(a), len(b))
        a, b = a[:m], b[:m]
        s1 = cosine_sim(a, b)
        assert s1 == pytest.approx(cosine_sim(b, a), abs=1e-12)
        if any(x != 0 for x in a) and any(x != 0 for x in b):
            assert s1 == pytest.approx(cosine_sim([scale * x for x in a], b), abs=1e-9)
        assert -1.0 <= s1 <= 1.0


class TestSoftThreshold:
    @pytest.mark.parametrize(
        "x,tau,expected",
        [(2.0, 0.5, 1.5), (0.3, 0.5, 0.0), (-2.0, 0.5, -1.5), (0.5, 0.5, 0.0), (-0.5, 0.5, 0.0)],
    )
    def test_piecewise(self, x, tau, expected):
        assert soft_threshold(Tensor(x), tau).data == expected

    def test_negative_threshold_errors(self):
        with pytest.raises(ValueError):
            soft_threshold(Tensor([1.0]), -0.1)

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=30), st.floats(0, 5))
    @settings(max_examples=60, deadline=None)
    def test_odd_and_contractive(self, xs, tau):
        x = np.asarray(xs)
        y = soft_threshold(Tensor(x), tau).data
        y_neg = soft_threshold(Tensor(-x), tau).data
        assert np.array_equal(y_neg, -y)
        assert (np.abs(y) <= np.abs(x)).all()
        assert (np.sign(y) * np.sign(x) >= 0).all()

    def test_input_gradient_zero_or_one(self):
        x = Tensor(np.asarray([-2.0, -0.3, 0.0, 0.2, 3.0]), requires_grad=True)
        with Tape() as tape:
            y = tensor_sum(soft_threshold(x, 0.5))
        g = tape.backward(y).get(x)
        assert set(np.unique(g)) <= {0.0, 1.0}
        assert np.array_equal(g, [1.0, 0.0, 0.0, 0.0, 1.0])

    def test_threshold_gradient_is_minus_sign_outside_band(self):
        tau = Tensor(0.5, requires_grad=True)
        x = Tensor(np.asarray([-2.0, 0.1, 3.0, 0.4]))
        with Tape() as tape:
            y = tensor_sum(soft_threshold(x, tau))
        # contributions: +1 (x<-tau), 0, -1 (x>tau), 0
        assert tape.backward(y).get(tau) == 0.0
        weights = Tensor(np.asarray([1.0, 1.0, 0.0, 0.0]))
        with Tape() as tape:
            y = tensor_sum(weights * soft_threshold(x, tau))
        assert tape.backward(y).get(tau) == 1.0


class TestBackwardRules:
    def _check(self, build, params, eps=1e-5):
        with Tape() as tape:
            loss = build()
        grads = tape.backward(loss)
        numeric = finite_diff_grad(lambda: float(build().data), params, eps=eps)
        for name, p in params.items():
            rel, ab = compare_gradients(grads.get(p, np.zeros_like(p.data)), numeric[name])
            assert rel <= 1e-4 and ab <= 1e-6, f"{name}: rel={rel}, abs={ab}"

    def test_elementwise_and_matmul(self):
        rng = np.random.default_rng(1)
        a = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        b = Tensor(rng.standard_normal((4, 2)), requires_grad=True)
        c = Tensor(rng.standard_normal((3, 2)), requires_grad=True)

        def build():
            out = matmul(a, b) * c + c / 2.0 - 0.1 * c
            return tensor_sum(out * out)

        self._check(build, {"a": a, "b": b, "c": c})

    def test_fanout_accumulates(self):
        x = Tensor(3.0, requires_grad=True)
        with Tape() as tape:
            y = x + x
        assert tape.backward(y).get(x) == 2.0

    def test_softmax_log_sigmoid_grads(self):
        rng = np.random.default_rng(2)
        a = Tensor(rng.standard_normal((4, 5)), requires_grad=True)

        def build():
            p = softmax(a, axis=1)
            return tensor_sum(log(clamp_min(p, 1e-12)) * sigmoid(a))

        self._check(build, {"a": a})

    def test_normalize_rows_grad(self):
        rng = np.random.default_rng(3)
        a = Tensor(rng.standard_normal((5, 3)), requires_grad=True)
        w = Tensor(rng.standard_normal((5, 3)))

        def build():
            return tensor_sum(normalize_rows(a) * w)

        self._check(build, {"a": a})

    def test_normalize_rows_zero_row(self):
        a = Tensor(np.asarray([[0.0, 0.0], [3.0, 4.0]]), requires_grad=True)
        with Tape() as tape:
            u = normalize_rows(a)
            loss = tensor_sum(u)
        assert np.array_equal(u.data[0], [0.0, 0.0])
        assert np.allclose(u.data[1], [0.6, 0.8])
        g = tape.backward(loss).get(a)
        assert np.array_equal(g[0], [0.0, 0.0])

    def test_concat_transpose_sum_grads(self):
        rng = np.random.default_rng(4)
        a = Tensor(rng.standard_normal((3, 2)), requires_grad=True)
        b = Tensor(rng.standard_normal((3, 3)), requires_grad=True)

        def build():
            m = concat([a, b], axis=1)
            return tensor_sum(matmul(m, transpose(m)) * 0.5)

        self._check(build, {"a": a, "b": b})

    def test_sum_axis_keepdims_grad(self):
        rng = np.random.default_rng(5)
        a = Tensor(rng.standard_normal((4, 3)), requires_grad=True)

        def build():
            s = tensor_sum(a, axis=1, keepdims=True)
            return tensor_sum(a / (s * s + 1.0))

        self._check(build, {"a": a})

    def test_no_tape_means_no_recording(self):
        a = Tensor(np.ones((2, 2)), requires_grad=True)
        out = a * 2.0
        assert not out.requires_grad  # nothing active to record on

    def test_backward_requires_scalar(self):
        a = Tensor(np.ones(3), requires_grad=True)
        with Tape() as tape:
            y = a * 1.0
        with pytest.raises(ValueError):
            tape.backward(y)


class TestFiniteDiff:
    def test_quadratic(self):
        p = Tensor(3.0, requires_grad=True)
        g = finite_diff_grad(lambda: float(p.data) ** 2, {"p": p})["p"]
        assert abs(g - 6.0) <= 1e-6

    def test_constant(self):
        p = Tensor(np.ones(4), requires_grad=True)
        g = finite_diff_grad(lambda: 7.0, {"p": p})["p"]
        assert np.array_equal(g, np.zeros(4))

    def test_nondeterministic_rejected(self):
        p = Tensor(1.0, requires_grad=True)
        state = {"k": 0.0}

        def noisy():
            state["k"] += 1.0
            return state["k"]

        with pytest.raises(ValueError):
            finite_diff_grad(noisy, {"p": p})


def test_matmul_shape_errors():
    with pytest.raises(ValueError):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(ValueError):
        matmul(Tensor(np.ones(3)), Tensor(np.ones((3, 2))))


def test_finite_outputs_on_finite_inputs():
    rng = np.random.default_rng(6)
    x = Tensor(rng.uniform(-30, 30, (6, 6)))
    for out in (softmax(x, axis=1), sigmoid(x), normalize_rows(x), soft_threshold(x, 1.0)):
        assert np.isfinite(out.data).all()
