import mpmath
import numpy as np
import pytest

from curricomp.errors import ConfigError, NumericError
from curricomp.nn import (Dense, ModelSpec, ModelState, Sigmoid, backward, backward_parallel,
                          flip_layer_sign, forward, forward_backward, grad_check, init_state,
                          logits, random_problem, zero_state)


def small_spec(hidden=(5, 4)):
    return ModelSpec.mlp((4, 4, 3), hidden=hidden)


def test_zero_state_gives_half(rng):
    spec = small_spec()
    out = forward(spec, zero_state(spec), rng.random((7, 4, 4, 3)))
    assert out.shape == (7, 6)
    assert np.all(out == 0.5)


def test_single_dense_bias_four_matches_high_precision():
    spec = ModelSpec((1, 1, 1), (Dense(1), Sigmoid()), num_classes=1)
    state = ModelState([np.zeros((1, 1))], [np.array([4.0])])
    mpmath.mp.dps = 50
    expected = float(1 / (1 + mpmath.exp(-4)))
    got = forward(spec, state, np.ones((1, 1, 1, 1)))[0, 0]
    assert got == pytest.approx(expected, abs=1e-15)
    assert round(got, 4) == 0.9820


def test_duplicated_rows_identical(rng):
    spec = small_spec()
    state = init_state(spec, 0)
    x = rng.random((1, 4, 4, 3))
    out = forward(spec, state, np.concatenate([x, x, x]))
    assert np.array_equal(out[0], out[1]) and np.array_equal(out[1], out[2])


def test_outputs_strictly_inside_unit_interval():
    spec = ModelSpec((1, 1, 1), (Dense(6), Sigmoid()))
    state = ModelState([np.zeros((1, 6))], [np.array([800.0, -800.0, 40.0, -40.0, 0.0, 1.0])])
    out = forward(spec, state, np.ones((2, 1, 1, 1)))
    assert np.all(out > 0) and np.all(out < 1)


def test_shape_mismatch_is_config_error(rng):
    spec = small_spec()
    with pytest.raises(ConfigError):
        forward(spec, init_state(spec, 0), rng.random((2, 5, 5, 3)))


def test_spec_must_end_in_sigmoid_head():
    with pytest.raises(ConfigError):
        ModelSpec((2, 2, 1), (Dense(6),))


def test_nonfinite_input_names_layer():
    spec = small_spec()
    x = np.full((1, 4, 4, 3), np.nan)
    with pytest.raises(NumericError) as info:
        forward(spec, init_state(spec, 0), x)
    assert info.value.layer is not None


def test_labels_equal_output_zero_head_gradient(rng):
    spec = small_spec()
    state = init_state(spec, 3)
    x = rng.random((5, 4, 4, 3))
    p = forward(spec, state, x)
    g = backward(spec, state, x, p)
    assert np.allclose(g.weights[-1], 0, atol=1e-15)
    assert np.allclose(g.biases[-1], 0, atol=1e-15)


def test_duplicated_batch_same_gradient(rng):
    spec = small_spec()
    state = init_state(spec, 4)
    x = rng.random((3, 4, 4, 3))
    y = rng.integers(0, 2, (3, 6)).astype(float)
    g1 = backward(spec, state, x, y)
    g2 = backward(spec, state, np.concatenate([x, x]), np.concatenate([y, y]))
    for a, b in zip(g1.params(), g2.params()):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)


def test_batch_permutation_invariance(rng):
    spec = small_spec()
    state = init_state(spec, 5)
    x = rng.random((6, 4, 4, 3))
    y = rng.random((6, 6))
    perm = rng.permutation(6)
    p, g = forward_backward(spec, state, x, y)
    pp, gp = forward_backward(spec, state, x[perm], y[perm])
    np.testing.assert_allclose(pp, p[perm], rtol=0, atol=0)
    for a, b in zip(g.params(), gp.params()):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)


def test_parallel_backward_matches_serial(rng):
    spec = small_spec()
    state = init_state(spec, 6)
    x = rng.random((17, 4, 4, 3))
    y = rng.random((17, 6))
    for a, b in zip(backward(spec, state, x, y).params(),
                    backward_parallel(spec, state, x, y, threads=4).params()):
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-14)


def test_init_reproducible():
    spec = small_spec()
    a, b = init_state(spec, 11), init_state(spec, 11)
    assert all(np.array_equal(p, q) for p, q in zip(a.params(), b.params()))
    c = init_state(spec, 12)
    assert not np.array_equal(a.weights[0], c.weights[0])


@pytest.mark.parametrize("seed", range(5))
def test_grad_check_random_models(seed):
    spec, state, x, y = random_problem(seed)
    assert spec.num_params() <= 5000
    rep = grad_check(spec, state, x, y, eps=1e-5, tol=1e-4)
    assert rep.passed, rep.max_rel_err


def test_grad_check_catches_sign_flip():
    spec, state, x, y = random_problem(0)
    rep = grad_check(spec, state, x, y, backward_fn=flip_layer_sign(0))
    assert not rep.passed


def test_grad_check_rejects_zero_eps():
    spec, state, x, y = random_problem(0)
    with pytest.raises(ConfigError):
        grad_check(spec, state, x, y, eps=0)


def test_logits_linear_in_bias(rng):
    spec = small_spec()
    state = init_state(spec, 7)
    x = rng.random((2, 4, 4, 3))
    z0 = logits(spec, state, x)
    state.biases[-1] = state.biases[-1] + 1.5
    np.testing.assert_allclose(logits(spec, state, x), z0 + 1.5, atol=1e-12)
