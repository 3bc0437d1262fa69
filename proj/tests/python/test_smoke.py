import json

import numpy as np
import pytest

import pcn


def test_version():
    assert pcn.__version__ == "0.1.0"


def test_network_roundtrip(tmp_path):
    net = pcn.Network.random([3, 5, 4], activation="tanh", seed=1)
    assert net.dims == [3, 5, 4]
    assert net.depth == 2
    assert [w.shape for w in net.weights] == [(3, 5), (5, 4)]
    path = tmp_path / "net.pcnckpt"
    net.save(str(path))
    assert pcn.Network.load(str(path)) == net


def test_forward_matches_numpy():
    net = pcn.Network.random([2, 3, 4], activation="tanh", seed=2)
    x = np.random.default_rng(0).uniform(size=(4, 5))
    w0, w1 = net.weights
    expected = w0 @ np.tanh(w1 @ np.tanh(x))
    np.testing.assert_allclose(net.forward(x), expected, rtol=1e-12, atol=1e-12)


def test_weights_setter_validates_shapes():
    net = pcn.Network.random([2, 3], seed=0)
    with pytest.raises(pcn.ShapeError):
        net.weights = [np.zeros((3, 3))]
    net.weights = [np.ones((2, 3))]
    assert np.all(net.weights[0] == 1.0)


def test_zil_matches_bp():
    rng = np.random.default_rng(3)
    net = pcn.Network.random([3, 6, 5, 4], seed=4)
    x = rng.uniform(-1, 1, size=(4, 2))
    y = rng.uniform(-1, 1, size=(3, 2))
    a = pcn.zil_update(net, x, y, 0.1)
    b = pcn.bp_update(net, x, y, 0.1)
    for wa, wb in zip(a.weights, b.weights):
        assert np.max(np.abs(wa - wb)) <= 1e-10


def test_predicted_smm():
    assert pcn.predicted_smm("ipc", 10) == (19, 2)
    assert pcn.predicted_smm("pc", 10, T=8) == (152, 16)
    assert pcn.predicted_smm("bp", 10) == (19, 19)
    assert pcn.predicted_smm("zil", 10) == (171, 18)
    with pytest.raises(pcn.UsageError):
        pcn.predicted_smm("ipc", 0)


def test_train_full_batch_ipc_counts():
    rng = np.random.default_rng(5)
    x = rng.uniform(size=(6, 40))
    classes = [int(i % 3) for i in range(40)]
    net = pcn.Network.random([3, 8, 6], seed=6)
    r = pcn.train(net, x, classes, algorithm="ipc", gamma=0.2, alpha=0.01, total_steps=25, stop_on_plateau=False)
    assert r["weight_updates"] == 25
    assert r["smm"] == 50
    assert r["energy_trace"][-1] < r["energy_trace"][0]
    assert r["network"] != net


def test_engines_agree():
    rng = np.random.default_rng(7)
    x = rng.uniform(size=(5, 12))
    classes = [int(i % 2) for i in range(12)]
    net = pcn.Network.random([2, 4, 4, 5], seed=8)
    kw = dict(algorithm="pc", T=4, gamma=0.3, alpha=0.01, total_steps=10, stop_on_plateau=False)
    a = pcn.train(net, x, classes, engine="serial", **kw)
    b = pcn.train(net, x, classes, engine="parallel", workers=4, **kw)
    assert a["network"] == b["network"]
    assert a["energy_trace"] == b["energy_trace"]


def test_ada_ece():
    conf = [0.95, 0.9, 0.85, 0.8, 0.75, 0.7, 0.65, 0.6, 0.55, 0.5, 0.45, 0.4]
    hit = [True, True, False, True, False, True, True, False, False, True, False, False]
    expected = (abs(0.25 - 0.475) + abs(0.5 - 0.675) + abs(0.75 - 0.875)) / 3
    assert pcn.ada_ece(conf, hit, 3) == pytest.approx(expected, abs=1e-15)


def test_read_idx(tmp_path):
    path = tmp_path / "labels-idx1-ubyte"
    path.write_bytes(bytes([0, 0, 8, 1, 0, 0, 0, 3, 7, 8, 9]))
    assert pcn.read_idx(str(path)).tolist() == [7, 8, 9]
    path.write_bytes(bytes([0, 0, 8, 1, 0, 0, 0, 4, 7]))
    with pytest.raises(pcn.ParseError):
        pcn.read_idx(str(path))


def test_run_config(tmp_path):
    cfg = {
        "schema_version": 1,
        "experiment": "classify",
        "name": "py-smoke",
        "output": str(tmp_path / "out"),
        "dataset": {"source": "synthetic", "synthetic_dims": [8, 3], "synthetic_classes": 2,
                    "train_size": 40, "synthetic_test_size": 20, "synthetic_seed": 1},
        "network": {"hidden": [6]},
        "schedule": {"gamma": 0.5, "alpha": 0.05, "batch_size": 10, "epochs": 2},
        "runs": [{"algorithm": "ipc"}],
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    rc, log = pcn.run(str(path), dry_run=True)
    assert rc == 0 and "dry run" in log
    rc, log = pcn.run(str(path))
    assert rc == 0
    assert (tmp_path / "out" / "summary.csv").exists()
    cfg["bogus"] = 1
    path.write_text(json.dumps(cfg))
    with pytest.raises(pcn.ConfigError):
        pcn.run(str(path))
