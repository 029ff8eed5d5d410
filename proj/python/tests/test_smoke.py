# SPDX-License-Identifier: Apache-2.0
import math

import numpy as np
import pytest

import ctpred

SMALL = {"n_tx": 8, "n_rf": 2, "n_subcarriers": 4, "history_frames": 3, "feature_l": 4, "feature_r": 6}


def test_dataset_shapes_and_determinism():
    a = ctpred.generate_dataset(4, "test", seed=3, config=SMALL)
    b = ctpred.generate_dataset(4, "test", seed=3, config=SMALL)
    assert len(a) == 4
    assert a.hash() == b.hash()
    s = a[0]
    assert len(s.inputs) == 3
    assert s.inputs[0].shape == (4, 4)
    assert s.inputs[0].dtype == np.complex128
    assert s.label_times == pytest.approx([i / 5 for i in range(1, 11)])
    with pytest.raises(IndexError):
        a[4]


def test_predict_and_zero_head():
    data = ctpred.generate_dataset(1, "test", config=SMALL)
    p = ctpred.init_params(seed=2, config=SMALL)
    s = data[0]
    preds = ctpred.predict(p, s.inputs, s.label_times)
    assert len(preds) == 10
    assert all(np.all(x == 0) for x in preds)
    assert ctpred.nmse_loss(preds, s.labels) == pytest.approx(1.0)


def test_gradients_agree_between_paths():
    data = ctpred.generate_dataset(1, "train", config=SMALL)
    p = ctpred.init_params(seed=2, config=SMALL, zero_head=False)
    la, ga = ctpred.loss_and_grad(p, data[0], step=0.05, path="tape")
    lb, gb = ctpred.loss_and_grad(p, data[0], step=0.05, path="adjoint")
    assert la == pytest.approx(lb, rel=1e-12)
    num = sum(np.sum(np.abs(ga[k] - gb[k]) ** 2) for k in ga)
    den = sum(np.sum(np.abs(ga[k]) ** 2) for k in ga)
    assert math.sqrt(num / den) < 1e-3


def test_training_reduces_loss():
    data = ctpred.generate_dataset(6, "train", config=SMALL)
    p = ctpred.init_params(seed=1, config=SMALL)
    cfg = dict(SMALL, epochs=5, batch_size=3, learning_rate=1e-2, patience=0)
    trained, trace = ctpred.train_tnode(p, data, cfg)
    assert len(trace) == 5
    assert trace[-1] < trace[0]
    assert set(trained) == set(p)


def test_zf_and_rate():
    rng = np.random.default_rng(0)
    h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    d = ctpred.zf_precoder(h)
    assert np.allclose(d @ h, np.eye(4), atol=1e-9)
    assert ctpred.subcarrier_rate(d, h, 0.1) == pytest.approx(4 * math.log2(3.5), rel=1e-12)
    with pytest.raises(ctpred.NumericError):
        ctpred.zf_precoder(np.ones((4, 2), dtype=complex))


def test_interpolation_endpoints():
    b = [np.full((2, 2), v, dtype=complex) for v in (0.0, 1.0, 3.0)]
    slots = ctpred.interpolate_slots(b, 5)
    assert len(slots) == 10
    assert np.all(slots[4] == 1.0)
    assert np.allclose(slots[6], 1.0 + 2.0 * 2 / 5)


def test_counts_and_config_errors():
    assert ctpred.vanilla_head_float_count(16, 256, 16 * 256) == 33554432
    assert ctpred.head_float_count(16, 256, 16, 256) == 131584
    flops = ctpred.count_flops()
    assert flops["field_evaluations"] == 40
    assert flops["head"] == flops["head_formula"]
    with pytest.raises(ctpred.ConfigError, match="nonsense"):
        ctpred.generate_dataset(1, config={"nonsense": 1})
    with pytest.raises(ctpred.ConfigError):
        ctpred.generate_dataset(1, mode="sideways")


def test_gradcheck_passes():
    ok, text = ctpred.gradcheck(config=SMALL)
    assert ok, text
