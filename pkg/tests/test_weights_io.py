"""Weight container round-trips and format guards."""

import numpy as np
import pytest

from wastefinder.nn import (
    BatchNorm,
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    MaxPool,
    Relu,
    Sigmoid,
    build_network,
    forward,
    load_network,
    save_network,
)
from wastefinder.nn.weights_io import WeightFormatError
from wastefinder.rng import make_rng


def test_roundtrip_is_bit_exact(tmp_path):
    net = build_network(
        (8, 8, 3),
        [Conv2d(4, (3, 3)), BatchNorm(), Relu(), MaxPool(2), Flatten(),
         Dense(6), Dropout(0.3), Dense(1), Sigmoid()],
        seed=21,
    )
    # dirty the running stats so non-default state is exercised
    net.states[1].params["running_mean"][:] = 0.25
    net.mode = "infer"
    path = tmp_path / "net.wfnet"
    save_network(net, path)
    loaded = load_network(path)
    assert loaded.input_shape == net.input_shape
    assert loaded.mode == net.mode
    for st_a, st_b in zip(net.states, loaded.states):
        for name in st_a.params:
            assert np.array_equal(st_a.params[name], st_b.params[name]), name
    x = make_rng(1).standard_normal((4, 8, 8, 3)).astype(np.float32)
    assert np.array_equal(forward(net, x), forward(loaded, x))


def test_double_roundtrip_same_bytes(tmp_path):
    net = build_network((5,), [Dense(3), Sigmoid()], seed=2)
    p1, p2 = tmp_path / "a.wfnet", tmp_path / "b.wfnet"
    save_network(net, p1)
    save_network(load_network(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_bad_magic_rejected(tmp_path):
    p = tmp_path / "junk.wfnet"
    p.write_bytes(b"NOTANET" + b"\x00" * 64)
    with pytest.raises(WeightFormatError, match="magic"):
        load_network(p)


def test_truncation_detected(tmp_path):
    net = build_network((5,), [Dense(3)], seed=2)
    p = tmp_path / "net.wfnet"
    save_network(net, p)
    p.write_bytes(p.read_bytes() + b"\x00\x00")
    with pytest.raises(WeightFormatError, match="trailing"):
        load_network(p)
