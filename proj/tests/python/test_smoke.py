import json
import math

import numpy as np
import pytest

import unifi


def small_config(**train):
    cfg = json.loads(unifi.default_config())
    cfg["model"].update(state_hidden=16, traj_hidden=8, attn_dim=8, n_heads_attn=2, context=20)
    cfg["simulation"]["length_s"] = [8.0, 12.0]
    cfg["train"].update(epochs=2, batch_size=8, **train)
    return json.dumps(cfg)


def test_config_round_trip_and_errors():
    text = unifi.default_config()
    assert unifi.normalize_config(text) == text
    assert unifi.config_fingerprint(text) == unifi.config_fingerprint()
    with pytest.raises(unifi.ConfigError, match="unknown key"):
        unifi.normalize_config('{"tarin": {}}')
    assert issubclass(unifi.ConfigError, unifi.UnifiError)


def test_generate_sequence_shapes_and_determinism():
    a = unifi.generate_sequence(seed=3, index=2)
    b = unifi.generate_sequence(seed=3, index=2)
    n = len(a["real"])
    assert 2000 <= n <= 4000
    assert a["pos"].shape == (n, 2)
    assert a["features"].shape == (n, 5)
    assert set(np.unique(a["real"])) <= {0, 1, 2, 3}
    np.testing.assert_array_equal(a["pos"], b["pos"])
    inside = a["inside"].astype(bool)
    assert np.all((a["pos"][inside] >= [0, 0]) & (a["pos"][inside] <= [4, 3.5]))


def test_range_rate_and_wavelength():
    assert unifi.range_rate((0, 0), (4, 0), (2, 1.5), (0, 1)) == pytest.approx(1.2)
    assert unifi.wavelength() == pytest.approx(299792458.0 / 5.32e9)


def test_csi_synthesis_and_extraction():
    t = np.arange(300) / 100.0
    pos = np.stack([2.0 + 0.0 * t, 0.8 + 0.8 * t], axis=1)
    csi = unifi.synthesize_csi(pos, np.ones(len(t), dtype=np.uint8), rate=100.0)
    assert csi.shape[0] == 300 and csi.dtype == np.complex128
    ts, feats = unifi.extract_features(csi, rate=100.0)
    assert feats.shape[1] == 5 and len(ts) == feats.shape[0]
    assert np.isnan(feats[0]).any()
    assert np.isfinite(feats[-1]).all()
    with pytest.raises(unifi.DataError):
        unifi.extract_features(np.zeros((3, 4), dtype=complex))


def test_simulate_train_infer_evaluate(tmp_path):
    cfg = small_config()
    data = tmp_path / "train.jsonl"
    balance = unifi.simulate(str(data), n=16, seed=5, config=cfg)
    assert "absence" in balance
    model_path = tmp_path / "m.bin"
    seen = []
    log = unifi.train([str(data)], str(model_path), config=cfg, on_epoch=seen.append)
    assert len(log) == 2 and len(seen) == 2
    assert all(math.isfinite(e["val_loss"]) for e in log)

    model = unifi.Model.load(str(model_path))
    assert model.n_params > 0
    seq = unifi.generate_sequence(seed=9, config=cfg)
    ts = np.arange(len(seq["real"])) / seq["f_s"]
    out = model.infer(ts, seq["features"])
    assert out["probs"].shape[1] == 4
    np.testing.assert_allclose(out["probs"].sum(axis=1), 1.0, atol=1e-12)
    absent = out["event"] == 0
    assert np.isnan(out["pos"][absent]).all()
    assert np.isfinite(out["pos"][~absent]).all()

    summary = model.evaluate(str(data), out=str(tmp_path / "rep"))
    assert 0.0 <= summary["accuracy"] <= 1.0
    assert sum(map(sum, summary["confusion"])) == summary["frames"]
    assert (tmp_path / "rep.cdf.tsv").exists()


def test_missing_files_raise_data_error(tmp_path):
    with pytest.raises(unifi.DataError):
        unifi.Model.load(str(tmp_path / "nope.bin"))
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"not a model at all")
    with pytest.raises(unifi.DataError):
        unifi.Model.load(str(bad))
