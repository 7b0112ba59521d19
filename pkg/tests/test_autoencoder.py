import numpy as np
import pytest

from hifdetect import autoencoder as ae
from hifdetect.errors import (ConfigurationError, InvalidInputError, ShapeError,
                              TrainingDivergenceError)
from hifdetect.signal_prep import minmax_apply, minmax_fit

from oracles import fd_gradient, max_relative_error, random_net


def test_dims_validation():
    with pytest.raises(ConfigurationError):
        ae.AutoencoderModel.initialize((4, 4, 4))  # not undercomplete
    with pytest.raises(ConfigurationError):
        ae.AutoencoderModel.initialize((4, 2, 3))  # output != input
    m = ae.AutoencoderModel.initialize(ae.DEFAULT_LAYERS)
    assert [w.shape for w in m.weights] == [(15, 32), (10, 15), (15, 10), (32, 15)]
    assert m.bottleneck_layer == 2
    assert ae.n_parameters(ae.DEFAULT_LAYERS) == m.flat().size == 1332


def test_init_glorot_bounds_and_zero_bias():
    m = ae.AutoencoderModel.initialize(ae.DEFAULT_LAYERS, seed=1)
    for w, b in zip(m.weights, m.biases):
        bound = np.sqrt(6.0 / (w.shape[0] + w.shape[1]))
        assert np.all(np.abs(w) <= bound)
        assert np.abs(w).max() > 0.8 * bound
        np.testing.assert_array_equal(b, 0.0)


def test_zero_model_outputs_zero(rng):
    m = ae.AutoencoderModel.zeros((5, 3, 5))
    x_rec, h = ae.forward(m, rng.normal(size=(4, 5)))
    np.testing.assert_array_equal(x_rec, 0.0)
    np.testing.assert_array_equal(ae.residuals(m, np.ones((2, 5))), 1.0)


def test_one_one_one_net_by_hand():
    # A 1-1-1 net is not a valid bottleneck model, so the raw forward pass is used here.
    pre, acts = ae._forward([np.array([[2.0]]), np.array([[0.5]])], [np.zeros(1), np.zeros(1)],
                            np.array([[0.5]]))
    assert acts[1][0, 0] == 1.0
    assert acts[2][0, 0] == 0.5


def test_negative_preactivation_is_cut():
    m = ae.AutoencoderModel((2, 1, 2), (np.array([[-1.0, -1.0]]), np.array([[3.0], [3.0]])),
                            (np.zeros(1), np.array([0.25, -0.5])))
    x_rec, h = ae.forward(m, np.array([1.0, 2.0]))
    assert h[0] == 0.0
    np.testing.assert_array_equal(x_rec, [0.25, -0.5])


def test_forward_errors():
    m = ae.AutoencoderModel.initialize((4, 2, 4))
    with pytest.raises(ShapeError):
        ae.forward(m, np.ones(3))
    with pytest.raises(InvalidInputError):
        ae.forward(m, np.array([1.0, np.nan, 0.0, 0.0]))


def test_loss_examples():
    x = np.array([[0.3, 0.7]])
    assert ae.loss(x, x) == 0.0
    assert ae.loss(np.array([[1.0, 0.0]]), np.zeros((1, 2))) == 0.5
    assert ae.loss(np.eye(2), np.zeros((2, 2))) == 0.5
    with pytest.raises(ShapeError):
        ae.loss(np.ones((2, 2)), np.ones((2, 3)))


def test_output_bias_gradient_zero_at_perfect_reconstruction():
    # identity path through an active ReLU unit reconstructs [a, a] exactly
    m = ae.AutoencoderModel((2, 1, 2), (np.array([[1.0, 0.0]]), np.array([[1.0], [1.0]])),
                            (np.zeros(1), np.zeros(2)))
    g = ae.backward(m, np.array([[0.4, 0.4], [0.9, 0.9]]))
    np.testing.assert_array_equal(g.biases[-1], 0.0)
    np.testing.assert_array_equal(g.flat(), 0.0)


def test_dead_hidden_unit_has_zero_incoming_gradient(rng):
    m = ae.AutoencoderModel.initialize((6, 3, 6), seed=2)
    w0 = m.weights[0].copy()
    b0 = m.biases[0].copy()
    w0[1] = -np.abs(w0[1])
    b0[1] = -5.0
    m = ae.AutoencoderModel((6, 3, 6), (w0, m.weights[1]), (b0, m.biases[1]))
    g = ae.backward(m, rng.uniform(0, 1, size=(8, 6)))
    np.testing.assert_array_equal(g.weights[0][1], 0.0)
    assert g.biases[0][1] == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    model = random_net(rng)
    x = rng.uniform(0, 1, size=(int(rng.integers(1, 17)), model.input_dim))
    analytic = ae.backward(model, x).flat()
    assert max_relative_error(analytic, fd_gradient(model, x)) < 1e-4


def test_adam_zero_gradient_is_noop():
    cfg = ae.TrainConfig()
    p = np.array([1.0, -2.0, 3.0])
    new, state = ae.adam_step(p, np.zeros(3), ae.AdamState.zeros(3), cfg)
    np.testing.assert_array_equal(new, p)
    assert state.step == 1


def test_adam_first_step_by_hand():
    # m_hat = g and v_hat = g^2 after bias correction, so the step is lr * g / (|g| + eps)
    cfg = ae.TrainConfig(learning_rate=1e-3)
    new, _ = ae.adam_step(np.array([1.0]), np.array([0.1]), ae.AdamState.zeros(1), cfg)
    assert new[0] == pytest.approx(1.0 - 1e-3 * 0.1 / (0.1 + 1e-8), abs=1e-15)
    assert new[0] == pytest.approx(0.999, abs=1e-9)


def test_adam_is_pure():
    cfg = ae.TrainConfig()
    state = ae.AdamState(np.array([0.01, 0.0]), np.array([1e-4, 2e-4]), 3)
    a = ae.adam_step(np.array([0.5, 0.5]), np.array([0.2, -0.1]), state, cfg)
    b = ae.adam_step(np.array([0.5, 0.5]), np.array([0.2, -0.1]), state, cfg)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1].m, b[1].m)
    np.testing.assert_array_equal(state.m, [0.01, 0.0])


def test_train_config_validation():
    for bad in ({"learning_rate": 0}, {"epochs": 0}, {"batch_size": 0}, {"beta1": 1.0}):
        with pytest.raises(ConfigurationError):
            ae.TrainConfig(**bad)


def _rank_one(n, m, seed):
    """Rows that are scalar multiples of one vector, min-max scaled to [0, 1]."""
    rng = np.random.default_rng(seed)
    raw = np.outer(rng.uniform(-1, 1, size=n), rng.normal(size=m))
    return minmax_apply(minmax_fit(raw), raw)


def test_train_is_deterministic():
    x = _rank_one(200, 8, 0)
    cfg = ae.TrainConfig(epochs=5, batch_size=16, seed=11)
    a, ha = ae.train(x[:160], x[160:], (8, 4, 2, 4, 8), cfg)
    b, hb = ae.train(x[:160], x[160:], (8, 4, 2, 4, 8), cfg)
    np.testing.assert_array_equal(a.flat(), b.flat())
    assert ha.train == hb.train and ha.validation == hb.validation
    c, _ = ae.train(x[:160], x[160:], (8, 4, 2, 4, 8), ae.TrainConfig(epochs=5, batch_size=16, seed=12))
    assert not np.array_equal(a.flat(), c.flat())


@pytest.mark.parametrize("seed", range(3))
def test_train_fits_rank_one_data(seed):
    x = _rank_one(1000, 8, 1)
    model, hist = ae.train(x[:800], x[800:], (8, 6, 4, 6, 8), ae.TrainConfig(seed=seed))
    assert hist.validation[-1] < 0.01 * x.var()
    assert hist.train[-1] < hist.train[0]
    assert len(hist.train) == len(hist.validation) == 100


def test_train_uses_last_partial_batch():
    # 5 rows with batch 4 -> 2 Adam steps per epoch; check through an equivalent manual loop
    x = _rank_one(5, 4, 2)
    cfg = ae.TrainConfig(epochs=1, batch_size=4, seed=3)
    model, hist = ae.train(x, x, (4, 2, 4), cfg)
    rng = np.random.default_rng(3)
    params = ae._init_flat((4, 2, 4), rng)
    state = ae.AdamState.zeros(params.size)
    order = rng.permutation(5)
    for batch in (x[order[:4]], x[order[4:]]):
        g = ae.backward(ae.AutoencoderModel.from_flat((4, 2, 4), params), batch).flat()
        params, state = ae.adam_step(params, g, state, cfg)
    np.testing.assert_array_equal(model.flat(), params)
    assert state.step == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_train_divergence_names_epoch():
    x = np.random.default_rng(0).uniform(0, 1, size=(64, 4)) * 1e200
    with pytest.raises(TrainingDivergenceError) as info:
        ae.train(x, x[:8], (4, 2, 4), ae.TrainConfig(epochs=3, learning_rate=1e3))
    assert info.value.epoch == 1


def test_residuals_definition(rng):
    m = ae.AutoencoderModel.initialize((6, 3, 6), seed=4)
    x = rng.uniform(size=(3, 6))
    e = ae.residuals(m, x)
    np.testing.assert_allclose(e[1], x[1] - ae.forward(m, x[1])[0], rtol=0, atol=1e-15)


def test_flat_round_trip():
    m = ae.AutoencoderModel.initialize((8, 6, 4, 6, 8), seed=9)
    back = ae.AutoencoderModel.from_flat(m.layer_dims, m.flat())
    for a, b in zip(m.weights + m.biases, back.weights + back.biases):
        np.testing.assert_array_equal(a, b)
