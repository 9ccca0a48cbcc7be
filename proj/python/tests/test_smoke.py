import numpy as np
import pytest

import orbitfilter as of


def test_architectures_and_macs():
    assert set(of.arch_names()) == {"msnet", "shufflenet_lite", "mobilenet_v2_lite", "simple_cnn"}
    report = of.mac_count("msnet")
    assert report["total"] == 3_428_608
    assert report["parameters"] == 24_546
    assert sum(macs for _, macs in report["layers"]) == report["total"]
    with pytest.raises(of.Error):
        of.mac_count("alexnet")


def test_transmit_and_calibrate_agree():
    a, b, residual = of.calibrate([(420, 3.96), (272, 2.61)])
    assert residual == pytest.approx(0.0, abs=1e-20)
    total, stamps = of.transmit(420, a, b)
    assert total == pytest.approx(3.96, abs=1e-12)
    assert len(stamps) == 420
    assert all(x <= y for x, y in zip(stamps, stamps[1:]))
    assert of.transmit(0, a, b)[0] == 0.0
    assert (a, b) == pytest.approx(of.default_link())
    with pytest.raises(of.ConfigError):
        of.transmit(3, 0.1, 0.0)


def test_config_round_trip():
    text = of.normalize_config("seed = 9\nedge.arch = simple_cnn, msnet\n")
    assert "seed = 9" in text
    assert of.normalize_config(text) == text
    with pytest.raises(of.ConfigError, match="training.epochs"):
        of.normalize_config("training.epochs = -1")


def test_synthetic_images_are_balanced_and_deterministic():
    images, labels = of.generate_synthetic(10, seed=3)
    assert images.shape == (10, 3, 64, 64)
    assert labels.sum() == 5
    assert images.min() >= -1.0 and images.max() <= 1.0
    again, _ = of.generate_synthetic(10, seed=3)
    np.testing.assert_array_equal(images, again)


def test_resize_preserves_constants():
    img = np.full((3, 17, 40), 0.25)
    out = of.resize_bilinear(img)
    assert out.shape == (3, 64, 64)
    np.testing.assert_allclose(out, 0.25, atol=1e-15)


def test_metrics_counts():
    m = of.metrics(np.array([1, 1, 0, 0]), np.array([1, 0, 1, 0]))
    assert (m["tp"], m["fp"], m["fn"], m["tn"]) == (1, 1, 1, 1)
    assert m["f1"] == pytest.approx(0.5)


def test_model_train_predict_save_load(tmp_path):
    images, labels = of.generate_synthetic(24, seed=5)
    model = of.Model("msnet", seed=1)
    assert not model.trained
    history = model.train(images, labels, epochs=1, batch=8)
    assert len(history) == 1 and np.isfinite(history[0][0])
    assert model.trained
    pred = model.predict(images)
    assert pred.shape == (24,) and set(pred.tolist()) <= {0, 1}
    path = tmp_path / "m.ofw"
    model.save(path)
    loaded = of.Model.load(path)
    np.testing.assert_array_equal(loaded.predict(images), pred)
    with pytest.raises(of.ShapeError):
        model.predict(np.zeros((2, 3, 32, 32)))


def test_bent_pipe_experiment(tmp_path):
    result = of.run_experiment("modes = bent_pipe\ndataset.n_synthetic = 50\n", out_dir=tmp_path)
    (row,) = result["rows"]
    assert row["mode"] == "bent_pipe"
    assert row["n_transmitted"] == 10
    assert row["metrics"] is None
    assert (tmp_path / "report.csv").read_text() == result["csv"]
    assert "Bent Pipe" in result["markdown"]
