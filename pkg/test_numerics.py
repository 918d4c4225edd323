import numpy as np
import pytest

from src.numerics import tensor as tn
from src.numerics.gradcheck import grad_check, numeric_gradient
from src.numerics.layers import Mlp, MlpSpec, ParameterSet, mhdpa, mlp_forward
from src.numerics.optim import Adam
from src.numerics.tensor import Tape, Tensor, backward, no_grad
from src.utils.errors import ConfigError, ContractError, DimensionError


def _param(rng, *shape, name=None):
    return Tensor(rng.normal(size=shape), requires_grad=True, name=name)


def test_broadcast_arithmetic_gradients_match_finite_differences():
    rng = np.random.default_rng(0)
    a, b = _param(rng, 3, 4), _param(rng, 4)
    c = Tensor(rng.uniform(1.0, 2.0, size=(3, 1)), requires_grad=True)

    def f():
        return tn.tensor_sum(tn.exp((a * b - c) / (c + 1.0)) + tn.square(a - 0.5 * b))

    assert grad_check(f, [a, b, c]) < 1e-6


def test_batched_matmul_gradient():
    rng = np.random.default_rng(1)
    a, b = _param(rng, 2, 3, 4), _param(rng, 4, 5)
    weights = rng.normal(size=(2, 3, 5))
    assert grad_check(lambda: tn.tensor_sum(tn.matmul(a, b) * weights), [a, b]) < 1e-6


def test_softmax_and_log_softmax():
    rng = np.random.default_rng(2)
    x = _param(rng, 3, 5)
    weights = rng.normal(size=(3, 5))
    probs = tn.softmax(x, axis=-1).data
    np.testing.assert_allclose(probs.sum(axis=-1), 1.0, atol=1e-12)
    shifted = tn.softmax(Tensor(x.data + 100.0), axis=-1).data
    np.testing.assert_allclose(shifted, probs, atol=1e-12)
    np.testing.assert_allclose(np.exp(tn.log_softmax(x).data), probs, atol=1e-12)
    assert grad_check(lambda: tn.tensor_sum(tn.softmax(x) * weights), [x]) < 1e-6
    assert grad_check(lambda: tn.tensor_sum(tn.log_softmax(x) * weights), [x]) < 1e-6


def test_indexing_stack_concat_and_reductions():
    rng = np.random.default_rng(3)
    x, y = _param(rng, 4, 3), _param(rng, 4, 3)
    rows, cols = np.array([0, 2, 2]), np.array([1, 0, 0])

    def f():
        picked = tn.take(x, (rows, cols))
        joined = tn.concat([x, y], axis=1)
        stacked = tn.stack([x, y], axis=0)
        return tn.tensor_sum(picked * 3.0) + tn.mean(joined * joined) + tn.tensor_sum(stacked.mean(axis=0) * x) + tn.tensor_sum(x[1:, :])

    assert grad_check(f, [x, y]) < 1e-6


def test_clip_minimum_relu_reshape_transpose():
    rng = np.random.default_rng(4)
    x = Tensor(rng.uniform(0.5, 1.5, size=(2, 3)), requires_grad=True)
    z = _param(rng, 2, 3)
    advantages = rng.normal(size=(2, 3))

    def f():
        clipped = tn.clip(x, 0.8, 1.2)
        surrogate = tn.minimum(x * advantages, clipped * advantages)
        return tn.tensor_sum(surrogate) + tn.tensor_sum(tn.relu(z).reshape(3, 2).transpose(1, 0) * 2.0)

    assert grad_check(f, [x, z]) < 1e-5


def test_backward_requires_scalar_loss():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = x * 2.0
    with pytest.raises(ContractError):
        backward(tape, y)


def test_reused_tensor_accumulates_gradient():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    with Tape() as tape:
        loss = tn.tensor_sum(x * x + x)
    grads = backward(tape, loss)
    np.testing.assert_allclose(grads[x], [3.0, 5.0])


def test_no_grad_records_nothing():
    x = Tensor(np.ones(2), requires_grad=True)
    with Tape() as tape:
        with no_grad():
            y = x * 3.0
    assert len(tape) == 0
    assert not y.requires_grad


def test_untouched_parameter_gets_zero_gradient():
    x = Tensor(np.ones(2), requires_grad=True)
    unused = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape() as tape:
        loss = tn.tensor_sum(x)
    np.testing.assert_array_equal(backward(tape, loss)[unused], np.zeros((2, 2)))


def test_matmul_shape_mismatch_raises():
    with pytest.raises(DimensionError):
        tn.matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_mlp_shapes_and_gradient():
    params = ParameterSet()
    rng = np.random.default_rng(5)
    mlp = Mlp(params, 'ff', MlpSpec(widths=[4, 6, 2]), rng)
    assert params.names() == ['ff.w0', 'ff.b0', 'ff.w1', 'ff.b1']
    x = rng.normal(size=(3, 4))
    assert mlp(x).shape == (3, 2)
    with pytest.raises(DimensionError):
        mlp_forward(mlp, np.ones((3, 5)))
    assert grad_check(lambda: tn.tensor_sum(mlp(x) * x[:, :2]), list(params)) < 1e-5


def test_uniform_initialization_bounds_and_seeding():
    a, b = ParameterSet(), ParameterSet()
    wa = a.uniform('w', (16, 8), 16, np.random.default_rng(7))
    wb = b.uniform('w', (16, 8), 16, np.random.default_rng(7))
    assert np.all(np.abs(wa.data) <= 0.25)
    np.testing.assert_array_equal(wa.data, wb.data)
    with pytest.raises(ConfigError):
        a.add('w', np.zeros(2))


def test_mhdpa_rows_are_distributions_and_differentiable():
    rng = np.random.default_rng(6)
    q, k, v = _param(rng, 2, 3, 4), _param(rng, 2, 5, 4), _param(rng, 2, 5, 4)
    out_proj = _param(rng, 4, 4)
    attention, output = mhdpa(q, k, v, heads=2, out_proj=out_proj)
    assert attention.shape == (2, 3, 5)
    assert output.shape == (2, 3, 4)
    np.testing.assert_allclose(attention.data.sum(axis=-1), 1.0, atol=1e-12)
    target = rng.normal(size=(2, 3, 4))

    def f():
        att, out = mhdpa(q, k, v, heads=2, out_proj=out_proj)
        return tn.tensor_sum(out * target) + tn.tensor_sum(att * 0.5)

    assert grad_check(f, [q, k, v, out_proj]) < 1e-5


def test_mhdpa_rejects_indivisible_heads():
    with pytest.raises(ConfigError):
        mhdpa(np.ones((3, 6)), np.ones((3, 6)), np.ones((3, 6)), heads=4)


def test_numeric_gradient_of_quadratic():
    x = Tensor(np.array([1.0, -2.0, 0.5]), requires_grad=True)
    grad = numeric_gradient(lambda: tn.tensor_sum(x * x), x)
    np.testing.assert_allclose(grad, 2.0 * x.data, atol=1e-8)


def test_adam_zero_learning_rate_is_identity():
    params = ParameterSet()
    w = params.uniform('w', (3, 3), 3, np.random.default_rng(0))
    before = w.data.copy()
    optimizer = Adam(params, lr=0.0)
    with Tape() as tape:
        loss = tn.tensor_sum(w * w)
    optimizer.step(backward(tape, loss))
    np.testing.assert_array_equal(w.data, before)
    assert optimizer.t == 1


def test_adam_descends_and_clips():
    params = ParameterSet()
    w = params.add('w', np.array([3.0, -4.0]))
    optimizer = Adam(params, lr=0.1, max_grad_norm=1.0)
    losses = []
    for _ in range(50):
        with Tape() as tape:
            loss = tn.tensor_sum(w * w)
        losses.append(loss.item())
        norm = optimizer.step(backward(tape, loss))
    assert losses[-1] < losses[0]
    assert norm >= 0.0
    state = optimizer.state()
    assert state['t'] == 50
    assert set(state['m']) == {'w'}


def test_matmul_is_associative_on_random_triples():
    rng = np.random.default_rng(21)
    for _ in range(20):
        a, b, c = (Tensor(rng.normal(size=(4, 4))) for _ in range(3))
        left = tn.matmul(tn.matmul(a, b), c).data
        right = tn.matmul(a, tn.matmul(b, c)).data
        assert np.abs(left - right).max() < 1e-9
