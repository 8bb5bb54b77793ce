import warnings

import numpy as np
import pytest

from oracles import max_grad_error
from qsurrogate.errors import TrainingDivergedError
from qsurrogate.nn import (
    VARIANTS, AdamState, Dense, EarlyStopping, EmbedConfig, HybridModel, QuantumConfig, QuantumLayer,
    TrainConfig, adam_step, build_variant, checkpoint, evaluate, evaluate_arrays, hc_qubits,
    loss_and_grads, mse_loss, split_indices, train,
)

SMALL_Q = QuantumConfig(n_layers=2, diag_qubits=3, cq_qubits=4, axes=("Y", "Z"))
SMALL_E = EmbedConfig(degree=1, include_bias=True)


def small_model(tag, seed=1, n_in=3, n_out=6):
    arch = build_variant(tag, n_in, n_out, cluster_k=4, quantum=SMALL_Q, embed=SMALL_E, hidden=(5, 4))
    rng = np.random.default_rng(0)
    X, Y = rng.normal(size=(5, n_in)), rng.normal(size=(5, n_out))
    m = HybridModel.initialize(arch, np.random.default_rng(seed))
    m.fit_preprocessing(X, Y)
    return m, m.featurize(X), m.y_scaler.transform(Y)


def test_zero_weights_give_bias():
    d = Dense(np.zeros((3, 4)), np.array([1.0, -2.0, 0.5]), "identity")
    np.testing.assert_array_equal(d.forward(np.random.default_rng(0).normal(size=(2, 4))), [[1, -2, 0.5]] * 2)


def test_identity_layer_passes_input():
    x = np.random.default_rng(0).normal(size=(3, 4))
    np.testing.assert_array_equal(Dense(np.eye(4), np.zeros(4), "identity").forward(x), x)


def test_dense_validation():
    with pytest.raises(ValueError):
        Dense(np.zeros((2, 3)), np.zeros(3))
    with pytest.raises(ValueError):
        Dense(np.zeros((2, 3)), np.zeros(2), "tanh")
    with pytest.raises(ValueError):
        Dense(np.zeros((2, 3)), np.zeros(2)).forward(np.zeros((1, 4)))


def test_baseline_shape_and_parameter_count():
    arch = build_variant("BaselineMLP")
    m = HybridModel.initialize(arch, np.random.default_rng(0))
    assert m.forward(np.ones((1, 7))).shape == (1, 1017)
    assert arch.parameter_count() == (7 * 64 + 64) + (64 * 32 + 32) + (32 * 1017 + 1017) == 36153
    assert arch.parameter_count() == sum(p.size for _, p in m.parameters())


def test_variant_shapes():
    assert build_variant("ClusteredMLP").hidden_widths() == [64, 7]
    assert build_variant("ClusteredMLP", cluster_placement="penultimate").hidden_widths() == [7, 32]
    qc = build_variant("QuantumClassical")
    assert qc.blocks[0]["n_qubits"] == 7 and qc.hidden_widths() == [64, 32]
    cq = build_variant("ClassicalQuantum")
    assert [b["type"] for b in cq.blocks] == ["dense", "dense", "quantum", "dense"]
    assert cq.blocks[1]["n_out"] == 8 and cq.blocks[2]["n_qubits"] == 8
    assert build_variant("PolySPD_Clustered").blocks[0]["n_qubits"] == 7
    hc = build_variant("PolySPD_HC_Clustered", embed=EmbedConfig(terms="exact_degree_only"))
    assert hc.blocks[0]["n_qubits"] == 10 == hc_qubits(28)
    assert hc.blocks[0]["encoding"] == "amplitude" and hc.hidden_widths() == [64, 7]
    assert build_variant("PolySPD_HC_Clustered", embed=SMALL_E).blocks[0]["n_qubits"] == 6
    # 119 cubic terms: 119^2 amplitudes fit exactly in 14 qubits.
    assert build_variant("PolySPD_HC_Clustered", embed=EmbedConfig(degree=3)).blocks[0]["n_qubits"] == 14


def test_variant_errors():
    with pytest.raises(ValueError):
        build_variant("Transformer")
    with pytest.raises(ValueError):
        build_variant("ClassicalQuantum", quantum=QuantumConfig(cq_qubits=15))
    with pytest.raises(ValueError):
        build_variant("PolySPD_Clustered", embed=EmbedConfig(degree=1), quantum=QuantumConfig(diag_qubits=9))
    with pytest.raises(ValueError):
        build_variant("BaselineMLP", n_outputs=0)


def test_hc_angle_fallback_encoding():
    arch = build_variant("PolySPD_HC_Clustered", 3, 4, quantum=QuantumConfig(n_layers=1, hc_encoding="angle"),
                         embed=SMALL_E)
    m = HybridModel.initialize(arch, np.random.default_rng(0))
    m.fit_preprocessing(np.random.default_rng(1).normal(size=(6, 3)), np.ones((6, 4)))
    F = m.featurize(np.zeros((2, 3)))
    assert F.shape == (2, hc_qubits(4)) and np.all(np.abs(F) <= np.pi)


def test_mse_loss_examples():
    t = np.random.default_rng(0).normal(size=(4, 5))
    assert mse_loss(t, t) == 0
    assert mse_loss(t + 1, t) == pytest.approx(5)
    p = t + np.random.default_rng(1).normal(size=t.shape)
    brute = sum(sum((p[i, j] - t[i, j]) ** 2 for j in range(5)) for i in range(4)) / 4
    assert mse_loss(p, t) == pytest.approx(brute, rel=1e-14)
    with pytest.raises(ValueError):
        mse_loss(np.zeros((0, 3)), np.zeros((0, 3)))
    with pytest.raises(ValueError):
        mse_loss(np.zeros((2, 3)), np.zeros((2, 4)))


def test_linear_layer_closed_form_gradient():
    rng = np.random.default_rng(2)
    d = Dense(rng.normal(size=(3, 4)), rng.normal(size=3), "identity")
    x, t = rng.normal(size=(1, 4)), rng.normal(size=(1, 3))
    pred = d.forward(x)
    d.backward(2.0 * (pred - t))
    np.testing.assert_allclose(d.grads["W"], 2.0 * (pred - t).T @ x, rtol=1e-15)
    np.testing.assert_allclose(d.grads["b"], 2.0 * (pred - t)[0], rtol=1e-15)


@pytest.mark.parametrize("tag", VARIANTS)
def test_zero_cotangent_gives_zero_gradients(tag):
    m, F, _ = small_model(tag)
    out = m.forward(F)
    m.backward(np.zeros_like(out))
    for g in m.gradients():
        np.testing.assert_array_equal(g, 0)


@pytest.mark.parametrize("tag", VARIANTS)
def test_full_model_gradient_check(tag):
    m, F, T = small_model(tag)
    assert max_grad_error(m, F, T) <= 1e-5


def test_classical_quantum_propagates_into_front_layers():
    m, F, T = small_model("ClassicalQuantum")
    _, grads = loss_and_grads(m, F, T, 0.0)
    assert np.any(grads[0] != 0)


@pytest.mark.parametrize("tag", ["QuantumClassical", "PolySPD_Clustered", "PolySPD_HC_Clustered"])
def test_quantum_features_feed_bounded_values(tag):
    m, F, _ = small_model(tag)
    q = m.layers[0].forward(F)
    assert isinstance(m.layers[0], QuantumLayer)
    assert np.all(np.abs(q) <= 1 + 1e-10)


def test_adam_examples():
    cfg = TrainConfig()
    p = [np.array([1.0, -2.0])]
    state = AdamState.zeros_like(p)
    adam_step(p, [np.zeros(2)], state, cfg)
    np.testing.assert_array_equal(p[0], [1.0, -2.0])

    p = [np.array([0.5])]
    adam_step(p, [np.array([1.0])], AdamState.zeros_like(p), cfg)
    # m_hat = 1, v_hat = 1 after bias correction: step = lr / (1 + eps).
    assert p[0][0] - 0.5 == pytest.approx(-0.001 / (1 + 1e-8), rel=1e-12)


def test_adam_constant_gradient_step_tends_to_lr():
    cfg = TrainConfig(learning_rate=0.01)
    p = [np.array([0.0])]
    state = AdamState.zeros_like(p)
    steps = []
    for _ in range(3000):
        before = p[0][0]
        adam_step(p, [np.array([7.3])], state, cfg)
        steps.append(before - p[0][0])
    assert steps[-1] == pytest.approx(0.01, rel=1e-6)


def test_l2_is_in_loss_gradient():
    m, F, T = small_model("BaselineMLP")
    _, g0 = loss_and_grads(m, F, T, 0.0)
    _, g1 = loss_and_grads(m, F, T, 0.1)
    for (name, p), a, b in zip(m.parameters(), g0, g1):
        expected = a + 0.2 * p if name.endswith(".W") else a
        np.testing.assert_allclose(b, expected, rtol=1e-12, atol=1e-15)


def test_early_stopping_patience_contract():
    es = EarlyStopping(patience=10)
    losses = [1.0] + [1.0 + k for k in range(1, 30)]
    stopped = next(i for i, v in enumerate(losses) if es.update(v))
    assert es.best_epoch == 0 and stopped == 10


def test_early_stopping_min_delta():
    es = EarlyStopping(patience=2, min_delta=0.1)
    assert not es.update(1.0)
    assert not es.update(0.95)  # not a real improvement
    assert es.update(0.93)
    assert es.best_epoch == 0


@pytest.fixture(scope="module")
def linear_task():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(3, 12))
    X = rng.normal(size=(2000, 3))
    return X, X @ A


def test_learns_linear_map(linear_task):
    X, Y = linear_task
    m, hist = train(build_variant("BaselineMLP", 3, 12), X, Y, TrainConfig(max_epochs=200))
    _, va = split_indices(len(X), 0.2, 0)
    # Targets are standardized, so unit variance per output.
    assert evaluate(m, X[va], Y[va]).mse < 1e-3
    assert len(hist.val_loss) <= 200


def test_training_is_deterministic_and_restores_best(linear_task):
    X, Y = linear_task[0][:300], linear_task[1][:300]
    cfg = TrainConfig(max_epochs=15, patience=3, seed=4)
    runs = [train(build_variant("ClusteredMLP", 3, 12, cluster_k=3), X, Y, cfg) for _ in range(2)]
    (m1, h1), (m2, h2) = runs
    assert h1.val_loss == h2.val_loss and h1.train_loss == h2.train_loss
    for a, b in zip(m1.get_state(), m2.get_state()):
        np.testing.assert_array_equal(a, b)
    tr, va = split_indices(len(X), cfg.val_fraction, cfg.seed)
    restored = mse_loss(m1.forward(m1.featurize(X[va])), m1.y_scaler.transform(Y[va]))
    assert restored == h1.best_val_loss == min(h1.val_loss)
    if h1.stopped_epoch < cfg.max_epochs - 1:
        assert h1.stopped_epoch - h1.best_epoch == cfg.patience


def test_explicit_validation_set(linear_task):
    X, Y = linear_task
    m, hist = train(build_variant("BaselineMLP", 3, 12), X[:200], Y[:200], TrainConfig(max_epochs=3),
                    validation=(X[200:300], Y[200:300]))
    assert len(hist.val_loss) == 3


def test_divergence_is_reported(linear_task):
    X, Y = linear_task
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        with pytest.raises(TrainingDivergedError) as err:
            train(build_variant("BaselineMLP", 3, 12), X[:100], Y[:100], TrainConfig(learning_rate=1e300))
    assert err.value.epoch == 0


def test_train_config_validation():
    for bad in ({"learning_rate": 0}, {"val_fraction": 0.6}, {"beta1": 1.0}, {"l2": -1}, {"batch_size": 0}):
        with pytest.raises(ValueError):
            TrainConfig(**bad)
    assert TrainConfig().config_hash() == TrainConfig().config_hash() != TrainConfig(seed=1).config_hash()


def test_metrics_examples():
    t = np.random.default_rng(3).normal(size=(20, 4))
    perfect = evaluate_arrays(t, t)
    assert perfect.mse == 0 and perfect.r2 == 1
    mean = evaluate_arrays(np.full_like(t, t.mean()), t)
    assert abs(mean.r2) <= 1e-12
    with pytest.raises(ValueError):
        evaluate_arrays(np.ones((3, 2)), np.ones((3, 2)))
    with pytest.raises(ValueError):
        evaluate_arrays(np.ones((0, 2)), np.ones((0, 2)))


def test_metrics_match_scalar_loop():
    rng = np.random.default_rng(4)
    t = rng.normal(size=(7, 3))
    p = t + 0.3 * rng.normal(size=t.shape)
    vals = [(p[i, j], t[i, j]) for i in range(7) for j in range(3)]
    n = len(vals)
    mse = sum((a - b) ** 2 for a, b in vals) / n
    mu = sum(b for _, b in vals) / n
    ss_tot = sum((b - mu) ** 2 for _, b in vals)
    std = (ss_tot / n) ** 0.5
    rng_ = max(b for _, b in vals) - min(b for _, b in vals)
    r = evaluate_arrays(p, t)
    assert r.mse == pytest.approx(mse, rel=1e-13)
    assert r.rmse == np.sqrt(r.mse)
    assert r.r2 == pytest.approx(1 - mse * n / ss_tot, rel=1e-13)
    assert r.nrmse_range == pytest.approx(mse**0.5 / rng_, rel=1e-13)
    assert r.nrmse_std == pytest.approx(mse**0.5 / std, rel=1e-13)


@pytest.mark.parametrize("tag", VARIANTS)
def test_checkpoint_round_trip_is_bit_exact(tag, tmp_path):
    embed = EmbedConfig(degree=2, reduce_k=4) if tag.startswith("PolySPD") else SMALL_E
    arch = build_variant(tag, 3, 6, cluster_k=4, quantum=SMALL_Q, embed=embed, hidden=(5, 4))
    rng = np.random.default_rng(5)
    X, Y = rng.normal(size=(40, 3)), rng.normal(size=(40, 6))
    m, _ = train(arch, X, Y, TrainConfig(max_epochs=2))
    checkpoint.save(m, tmp_path / "m.npz", {"note": "x"})
    back, meta = checkpoint.load(tmp_path / "m.npz")
    assert meta["note"] == "x" and back.tag == tag
    np.testing.assert_array_equal(back.predict(X), m.predict(X))
    assert evaluate(back, X, Y) == evaluate(m, X, Y)


def test_checkpoint_errors(tmp_path):
    from qsurrogate.errors import DataError

    with pytest.raises(DataError):
        checkpoint.load(tmp_path / "missing.npz")
    (tmp_path / "junk.npz").write_bytes(b"not a zip")
    with pytest.raises(DataError):
        checkpoint.load(tmp_path / "junk.npz")
