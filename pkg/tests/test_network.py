import numpy as np
import pytest

from prdlab.core import SeededRng
from prdlab.network import (
    DiscriminatorNet,
    GeneratorNet,
    forward_discriminator,
    forward_generator,
    init_discriminator,
    init_generator,
    load_network,
    save_discriminator,
    save_generator,
)


def test_theory_init_statistics():
    net = init_generator(10_000, 10, 1, "theory", SeededRng(0))
    assert abs(net.U.mean()) < 0.05 and abs(net.U.var() - 1) < 0.05
    assert set(np.unique(net.V)) == {-1.0, 1.0}


def test_xavier_output_is_gaussian():
    net = init_generator(2000, 4, 3, "xavier", SeededRng(0))
    assert len(np.unique(net.V)) > 100


def test_snapshot_is_frozen_copy():
    net = init_generator(8, 3, 2, rng=SeededRng(1))
    U0 = net.U.copy()
    net.U += 1.0
    assert np.array_equal(net.snapshot.U0, U0)
    with pytest.raises(ValueError):
        net.snapshot.U0[0, 0] = 0.0


def test_forward_closed_form():
    U = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])
    V = np.array([[1.0, -1.0, 1.0]])
    net = GeneratorNet(U, V)
    x = np.array([2.0, 1.0])
    assert forward_generator(net, x) == pytest.approx([(2.0 - 1.0) / np.sqrt(3)])


def test_forward_batch_matches_single():
    net = init_generator(16, 5, 3, rng=SeededRng(2))
    X = SeededRng(3).gaussian((4, 5))
    batch = forward_generator(net, X)
    for i in range(4):
        assert np.allclose(batch[i], forward_generator(net, X[i]))


def test_positive_homogeneity():
    net = init_generator(16, 5, 2, rng=SeededRng(2))
    x = SeededRng(3).gaussian(5)
    assert np.allclose(forward_generator(net, 3.0 * x), 3.0 * forward_generator(net, x))


def test_forward_dimension_check():
    net = init_generator(4, 3, 1)
    with pytest.raises(ValueError):
        forward_generator(net, np.ones(4))


def test_discriminator_rows_within_L():
    for seed in range(5):
        d = init_discriminator(64, 10, 0.01, SeededRng(seed))
        assert np.linalg.norm(d.W, axis=1).max() <= 0.01 + 1e-15


def test_discriminator_dead_and_sign_flip():
    d = init_discriminator(32, 3, 1.0, SeededRng(0))
    y = SeededRng(1).gaussian(3)
    flipped = DiscriminatorNet(d.W, -d.a, d.L)
    assert forward_discriminator(flipped, y) == pytest.approx(-forward_discriminator(d, y))
    dead = DiscriminatorNet(np.abs(d.W), d.a, d.L)
    assert forward_discriminator(dead, -np.abs(y) - 1.0) == 0.0


def test_checkpoint_round_trip(tmp_path):
    net = init_generator(12, 5, 3, "xavier", SeededRng(9))
    net.U += 0.5
    save_generator(net, tmp_path / "g.bin")
    back = load_network(tmp_path / "g.bin")
    assert np.array_equal(back.U, net.U) and np.array_equal(back.V, net.V)
    assert np.array_equal(back.snapshot.U0, net.snapshot.U0)
    assert back.mode == "xavier" and back.seed == net.seed

    d = init_discriminator(12, 3, 0.01, SeededRng(1))
    save_discriminator(d, tmp_path / "d.bin")
    dback = load_network(tmp_path / "d.bin")
    assert np.array_equal(dback.W, d.W) and np.array_equal(dback.a, d.a) and dback.L == d.L


def test_checkpoint_rejects_garbage(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"not a network at all, definitely not")
    with pytest.raises(ValueError):
        load_network(tmp_path / "x.bin")
    net = init_generator(4, 2, 1)
    save_generator(net, tmp_path / "g.bin")
    raw = (tmp_path / "g.bin").read_bytes()
    (tmp_path / "t.bin").write_bytes(raw[:-8])
    with pytest.raises(ValueError, match="truncated"):
        load_network(tmp_path / "t.bin")
