import numpy as np
import pytest

from regionemb.autodiff import Tensor
from regionemb.optim import Adam

# closed-form first Adam step with g=1 and defaults: -lr * 1 / (1 + eps)
FIRST_STEP_DELTA = -0.00499999995


def test_zero_gradient_only_decay_moves_params():
    p_decay = Tensor(np.full(3, 2.0), requires_grad=True)
    p_plain = Tensor(np.full(3, 2.0), requires_grad=True)
    opt = Adam({"a": p_decay, "b": p_plain}, lr=0.005, weight_decay=0.001, decay={"a"})
    opt.step({"a": np.zeros(3), "b": np.zeros(3)})
    assert np.allclose(p_decay.data, 2.0 * (1 - 0.005 * 0.001), atol=0)
    assert np.array_equal(p_plain.data, np.full(3, 2.0))


def test_first_step_closed_form():
    p = Tensor(0.0, requires_grad=True)
    opt = Adam({"p": p}, lr=0.005, weight_decay=0.0)
    opt.step({"p": np.asarray(1.0)})
    assert float(p.data) == pytest.approx(FIRST_STEP_DELTA, abs=1e-15)


def test_identical_params_get_identical_updates():
    p1 = Tensor(np.full(4, 0.5), requires_grad=True)
    p2 = Tensor(np.full(4, 0.5), requires_grad=True)
    opt = Adam({"p1": p1, "p2": p2}, lr=0.01, weight_decay=0.0)
    g = np.linspace(-1, 1, 4)
    for _ in range(5):
        opt.step({"p1": g.copy(), "p2": g.copy()})
    assert np.array_equal(p1.data, p2.data)


def test_shape_mismatch_errors():
    p = Tensor(np.zeros((2, 2)), requires_grad=True)
    opt = Adam({"p": p})
    with pytest.raises(ValueError):
        opt.step({"p": np.zeros(3)})


def test_unknown_decay_name_errors():
    p = Tensor(np.zeros(2), requires_grad=True)
    with pytest.raises(ValueError):
        Adam({"p": p}, decay={"q"})


def test_bit_reproducible_across_runs():
    def run():
        rng = np.random.default_rng(42)
        p = Tensor(rng.standard_normal(8), requires_grad=True)
        opt = Adam({"p": p}, lr=0.005, weight_decay=0.001, decay={"p"})
        for _ in range(50):
            opt.step({"p": np.sin(p.data)})
        return p.data.copy()

    assert np.array_equal(run(), run())


def test_moments_match_param_shapes():
    p = Tensor(np.zeros((3, 5)), requires_grad=True)
    opt = Adam({"p": p})
    assert opt.state.m["p"].shape == (3, 5)
    assert opt.state.v["p"].shape == (3, 5)
    before = opt.state.step
    opt.step({"p": np.ones((3, 5))})
    assert opt.state.step == before + 1
