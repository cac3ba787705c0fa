import math

import numpy as np
import pytest

from prdlab.core import SeededRng
from prdlab.data import ManifoldSpec, generate_manifold_dataset, normalize_unit
from prdlab.network import init_generator
from prdlab.theory import (
    BoundPreconditionError,
    bde_compare,
    bound_theorem1,
    bound_theorem2,
    compute_constants,
    diffusion_magnitude,
    expected_initial_error,
    gram_at,
    gram_infinity,
    gram_stability_report,
    hoeffding_exceedance,
    init_ball_radius,
    joint_positivity,
    prediction_error_envelope,
    settling_time,
    theorem3_asymptotics,
)


def unit_pairs(angles_deg):
    return np.array([[math.cos(math.radians(a)), math.sin(math.radians(a))] for a in angles_deg])


def test_joint_positivity_closed_form():
    assert joint_positivity(0.0) == 0.5
    assert joint_positivity(math.pi / 2) == pytest.approx(0.25)
    assert joint_positivity(math.pi) == 0.0


def test_gram_infinity_small_sample():
    x = unit_pairs([0, 60, 90])
    H = gram_infinity(x, 100_000, SeededRng(0), shard=25_000)
    # entries: cos(theta) * (pi - theta) / (2 pi)
    assert H[0, 0] == pytest.approx(0.5, abs=6e-3)
    assert H[0, 1] == pytest.approx(0.5 * (2 / 3) / 2, abs=6e-3)
    assert H[0, 2] == pytest.approx(0.0, abs=6e-3)
    assert np.allclose(H, H.T)


def test_gram_infinity_sample_floor():
    with pytest.raises(ValueError):
        gram_infinity(unit_pairs([0, 10]), 100)


def test_gram_infinity_deterministic():
    x = unit_pairs([0, 45])
    a = gram_infinity(x, 20_000, SeededRng(3))
    b = gram_infinity(x, 20_000, SeededRng(3))
    assert np.array_equal(a, b)


def test_gram_at_is_psd_and_symmetric():
    net = init_generator(64, 3, 1, rng=SeededRng(1))
    x = SeededRng(2).gaussian((6, 3))
    H = gram_at(net, x)
    assert np.allclose(H, H.T)
    assert np.linalg.eigvalsh(H).min() > -1e-10


def test_stability_report_identity():
    ds = normalize_unit(generate_manifold_dataset(ManifoldSpec(12, 8, 4, 2, 2, seed=3)))
    net = init_generator(256, 4, 2, rng=SeededRng(1))
    rep = gram_stability_report(net, net.copy(), ds, lambda0=1e-3, lambda1_inf=10.0)
    assert rep.drift_norm == 0.0
    assert rep.H0_spectrum == rep.Ht_spectrum


def test_stability_report_flags_violations():
    ds = normalize_unit(generate_manifold_dataset(ManifoldSpec(12, 8, 4, 2, 2, seed=3)))
    net = init_generator(64, 4, 2, rng=SeededRng(1))
    moved = net.copy()
    moved.U = moved.U + 5.0 * SeededRng(9).gaussian(moved.U.shape)
    rep = gram_stability_report(moved, net, ds, lambda0=1.0, lambda1_inf=0.1)
    assert "drift_norm > lambda0/4" in rep.violations or "lambda_max(H) > lambda1_inf + lambda0/2" in rep.violations
    assert "lambda_min(H) < lambda0/2" in rep.violations


def test_mu_scaling():
    mu = diffusion_magnitude(0.01, 16, 4096, 0.1)
    assert mu == pytest.approx(0.01 * 16 * math.sqrt(2 * math.log(20)) / 64)
    assert diffusion_magnitude(0.01, 16, 4 * 4096, 0.1) == pytest.approx(mu / 2)


def test_init_ball_radius():
    assert init_ball_radius(100, 4, 0.5) == pytest.approx(2 * 20 / (math.sqrt(2 * math.pi) * 0.5))


def test_settling_time_and_preconditions():
    t = settling_time(0.5, 2.0, 0.1, 0.2)
    assert prediction_error_envelope(t, 2.0, 1.0, 0.1, 0.5) == pytest.approx(0.2)
    with pytest.raises(BoundPreconditionError):
        settling_time(0.5, 2.0, 0.3, 0.2)
    with pytest.raises(BoundPreconditionError):
        settling_time(0.5, 0.1, 0.01, 0.2)


def test_constants_report():
    c = compute_constants(n=16, m=4096, d_in=10, lambda0=0.1, lambda1_inf=4.0, L=0.01, delta=0.1, epsilon=0.5,
                          z0_err=4.0)
    assert c.lambda1 == pytest.approx(2 * (4.0 + 0.05))
    assert c.kappa == pytest.approx(c.lambda1 / 0.1)
    assert c.m_min_supervised == pytest.approx(16**7 / (0.1**4 * 0.1**4))
    assert math.isnan(compute_constants(16, 4096, 10, 0.1, 4.0, 0.5, 0.1, 0.5, 4.0, strict=False).T0)
    with pytest.raises(BoundPreconditionError):
        compute_constants(16, 4096, 10, 0.1, 4.0, 0.5, 0.1, 0.5, 4.0)


def test_envelope_at_zero_and_infinity():
    assert prediction_error_envelope(0.0, 3.0, 2.0, 0.1, 1.0) == pytest.approx(3.0)
    assert prediction_error_envelope(1e6, 3.0, 2.0, 0.1, 1.0) == pytest.approx(0.2)


@pytest.mark.parametrize("psi0,mu", [(1.0, 0.0), (4.0, 0.05), (0.25, 0.2)])
def test_bde_closed_form(psi0, mu):
    assert bde_compare(0.8, 3.0, mu, psi0, 10.0) <= 1e-6


def test_bde_fixed_point():
    lam0, lam1, mu = 0.5, 2.0, 0.1
    psi_star = (lam1 / lam0 * mu) ** 2
    assert bde_compare(lam0, lam1, mu, psi_star, 10.0) <= 1e-9


def test_bound_affine_in_t():
    args = (16, 1024, 0.01, 0.1, 3.0, 0.02, 50.0)
    p0, f0 = bound_theorem2(*args, 0.0)
    p1, f1 = bound_theorem2(*args, 1.0)
    p2, f2 = bound_theorem2(*args, 2.0)
    assert (p0, f0) == pytest.approx(bound_theorem1(*args[:5]))
    assert f2 - f1 == pytest.approx(f1 - f0)
    assert (f1 - f0) / (p1 - p0) == pytest.approx(math.sqrt(1024))


def test_theorem3_orders():
    r = theorem3_asymptotics(10, 100, 5, 4)
    assert r["reaction_u"] == r["reaction_v"] == pytest.approx(10 * 5 * math.sqrt(4 / 100))
    assert r["diffusion_u"] / r["diffusion_v"] == pytest.approx(4)


def test_expected_initial_error_positive():
    ds = normalize_unit(generate_manifold_dataset(ManifoldSpec(12, 8, 4, 2, 2, seed=3)))
    assert expected_initial_error(ds, 64, inits=3) > 0


def test_hoeffding_rate_below_delta():
    w = SeededRng(1).uniform(-0.01, 0.01, 256)
    assert hoeffding_exceedance(w, 0.1, 20_000, SeededRng(2)) <= 0.1
