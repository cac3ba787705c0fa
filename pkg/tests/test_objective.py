import numpy as np
import pytest

from prdlab.core import SeededRng
from prdlab.network import DiscriminatorNet, GeneratorNet, forward_discriminator, init_discriminator, init_generator
from prdlab.objective import (
    adversarial_term,
    critic_input_gradient,
    critic_loss,
    discriminator_gradients,
    generator_gradients,
    loss_breakdown,
    project_row_norm,
    supervised_loss,
)


def instance(seed, m=12, d_in=4, d_out=3, n=5, L=0.5):
    rng = SeededRng(seed)
    net = init_generator(m, d_in, d_out, "xavier", rng.spawn(1))
    disc = init_discriminator(m, d_out, L, rng.spawn(2))
    x = rng.gaussian((n, d_in))
    y = rng.gaussian((n, d_out))
    return net, disc, x, y


def numeric(f, arr, h=1e-6):
    g = np.zeros_like(arr)
    for i in np.ndindex(arr.shape):
        old = arr[i]
        arr[i] = old + h
        fp = f()
        arr[i] = old - h
        fm = f()
        arr[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def test_zero_residual_zero_loss():
    net, _, x, _ = instance(0)
    from prdlab.network import forward_generator

    y = forward_generator(net, x)
    assert supervised_loss(net, x, y) == 0.0
    g = generator_gradients(net, None, x, y)
    assert not np.any(g.dU) and not np.any(g.dV)


def test_loss_is_half_sum_of_squares():
    U = np.array([[1.0, 0.0]])
    net = GeneratorNet(U, np.array([[1.0]]))
    x = np.array([[2.0, 0.0], [-1.0, 0.0]])
    y = np.array([[0.0], [1.0]])
    assert supervised_loss(net, x, y) == pytest.approx(0.5 * (4.0 + 1.0))


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("mode", ["supervised", "augmented"])
def test_generator_gradients_match_finite_differences(seed, mode):
    net, disc, x, y = instance(seed)

    def loss():
        lb = loss_breakdown(net, disc if mode == "augmented" else None, x, y)
        return lb.augmented

    g = generator_gradients(net, disc, x, y, mode=mode)
    for arr, ana in ((net.U, g.dU), (net.V, g.dV)):
        num = numeric(loss, arr)
        assert np.linalg.norm(num - ana) <= 1e-5 * max(1.0, np.linalg.norm(num))


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("gp", [0.0, 10.0])
def test_discriminator_gradients_match_finite_differences(seed, gp):
    _, disc, _, y = instance(seed)
    rng = SeededRng(100 + seed)
    fake = rng.gaussian(y.shape)
    w = rng.uniform(0, 1, y.shape[0])
    g = discriminator_gradients(disc, y, fake, gp, weights=w)
    f = lambda: critic_loss(disc, y, fake, gp, weights=w)  # noqa: E731
    for arr, ana in ((disc.W, g.dW), (disc.a, g.da)):
        num = numeric(f, arr)
        assert np.linalg.norm(num - ana) <= 1e-5 * max(1.0, np.linalg.norm(num))


def test_adversarial_term_matches_unfolded_form():
    # sum_p g(f(x_p)) == (1/(m sqrt(d_out))) sum_p a^T relu(W V relu(U x_p))
    net, disc, x, _ = instance(3, m=10, d_out=2)
    m, d_out = net.m, net.d_out
    direct = sum(
        disc.a @ np.maximum(disc.W @ net.V @ np.maximum(net.U @ xp, 0), 0) for xp in x
    ) / (m * np.sqrt(d_out))
    assert adversarial_term(net, disc, x) == pytest.approx(direct, rel=1e-12)


def test_silent_critic_leaves_supervised_gradient():
    net, disc, x, y = instance(4)
    silent = DiscriminatorNet(np.zeros_like(disc.W), disc.a, disc.L)
    assert adversarial_term(net, silent, x) == 0.0
    sup = generator_gradients(net, None, x, y)
    aug = generator_gradients(net, silent, x, y, mode="augmented")
    assert np.array_equal(sup.dU, aug.dU) and np.array_equal(sup.dV, aug.dV)


def test_critic_dead_on_all_predictions():
    disc = DiscriminatorNet(np.array([[1.0, 1.0], [0.5, 2.0]]), np.array([1.0, -1.0]), 10.0)
    z = -np.abs(SeededRng(0).gaussian((6, 2))) - 0.1
    assert np.all(forward_discriminator(disc, z) == 0.0)
    assert not np.any(critic_input_gradient(disc, z))


def test_critic_input_gradient_matches_numeric():
    disc = init_discriminator(20, 3, 1.0, SeededRng(2))
    y = SeededRng(3).gaussian(3)
    num = np.array([(forward_discriminator(disc, y + e * 1e-6) - forward_discriminator(disc, y - e * 1e-6)) / 2e-6
                    for e in np.eye(3)])
    assert np.allclose(critic_input_gradient(disc, y)[0], num, atol=1e-8)


def test_fully_dead_critic_penalty():
    W = np.array([[1.0], [2.0]])
    disc = DiscriminatorNet(W, np.array([1.0, -1.0]), 10.0)
    real = np.array([[-1.0], [-2.0]])
    fake = np.array([[-3.0], [-0.5]])
    g = discriminator_gradients(disc, real, fake, 10.0, weights=np.array([0.3, 0.7]))
    assert not np.any(g.dW) and not np.any(g.da)
    assert critic_loss(disc, real, fake, 10.0, weights=np.array([0.3, 0.7])) == pytest.approx(10.0)


def test_penalty_needs_randomness():
    _, disc, _, y = instance(0)
    with pytest.raises(ValueError):
        discriminator_gradients(disc, y, y, 10.0)


def test_pair_count_mismatch():
    _, disc, _, y = instance(0)
    with pytest.raises(ValueError):
        discriminator_gradients(disc, y, y[:-1])


def test_projection():
    W = np.array([[3.0, 4.0], [0.001, 0.0], [0.0, 0.0]])
    P = project_row_norm(W, 1.0)
    assert np.allclose(P[0], [0.6, 0.8])
    assert np.array_equal(P[1:], W[1:])
    assert np.array_equal(project_row_norm(P, 1.0), P)
    with pytest.raises(ValueError):
        project_row_norm(W, 0.0)


def test_skip_output_gradient():
    net, _, x, y = instance(1)
    g = generator_gradients(net, None, x, y, need_v=False)
    full = generator_gradients(net, None, x, y)
    assert np.array_equal(g.dU, full.dU) and not np.any(g.dV)
