"""Gram matrices, convergence constants and distance-from-initialization bounds.

Hidden constants in the asymptotic statements are resolved as follows: the
factor 2 that comes out of integrating ``exp(-lambda0 s / 2)`` is kept, every
other constant absorbed by O(.) or Omega(.) is set to 1.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import SeededRng, Spectrum, active, spectral_extremes
from .network import GeneratorNet, forward_generator, init_generator

CONSTANT_CONVENTION = "integral factor 2 kept; all other O/Omega constants set to 1"


class BoundPreconditionError(ValueError):
    pass


def _inputs(data) -> np.ndarray:
    return data.train_x if hasattr(data, "train_x") else np.asarray(data, dtype=np.float64)


def gram_infinity(data, mc_samples: int = 1_000_000, rng: SeededRng | None = None, shard: int = 100_000) -> np.ndarray:
    """Monte-Carlo estimate of ``E_u[x_i.x_j 1{u.x_i >= 0, u.x_j >= 0}]``, ``u ~ N(0, I)``.

    Shards draw from distinct stream ids and are reduced in shard order, so the
    estimate does not depend on how shards are scheduled.
    """
    if mc_samples < 10_000:
        raise ValueError("mc_samples must be >= 1e4")
    x = _inputs(data)
    rng = rng or SeededRng(0)
    n, d = x.shape
    counts = np.zeros((n, n))
    done, k = 0, 0
    while done < mc_samples:
        size = min(shard, mc_samples - done)
        u = rng.spawn(1000 + k).gaussian((size, d))
        s = active(u @ x.T)
        counts += s.T @ s
        done += size
        k += 1
    H = (x @ x.T) * counts / mc_samples
    return 0.5 * (H + H.T)


def gram_at(net: GeneratorNet, data) -> np.ndarray:
    """``H_ij = x_i.x_j (1/m) sum_r 1{u_r.x_i >= 0, u_r.x_j >= 0}`` at the current hidden weights."""
    x = _inputs(data)
    s = active(x @ net.U.T)
    return (x @ x.T) * (s @ s.T) / net.m


def joint_positivity(theta: float) -> float:
    """Closed-form ``P(u.x_i >= 0, u.x_j >= 0)`` for unit inputs at angle ``theta``."""
    return (math.pi - theta) / (2.0 * math.pi)


@dataclass(frozen=True)
class GramReport:
    H0_spectrum: Spectrum
    Ht_spectrum: Spectrum
    drift_norm: float
    lambda0_hat: float
    kappa_hat: float
    lambda1_inf: float
    violations: tuple = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["violations"] = list(self.violations)
        return d


def gram_stability_report(
    net_t: GeneratorNet,
    net_0: GeneratorNet,
    data,
    lambda0: float | None = None,
    lambda1_inf: float | None = None,
    h_inf: np.ndarray | None = None,
    rng: SeededRng | None = None,
    mc_samples: int = 1_000_000,
) -> GramReport:
    """Spectra of ``H(0)`` and ``H(t)`` plus their drift, checked against

    * ``||H(t) - H(0)||_2 <= lambda0 / 4``
    * ``lambda_min(H(t)) >= lambda0 / 2``
    * ``lambda_max(H(t)) <= lambda1_inf + lambda0 / 2``

    ``lambda0`` and ``lambda1_inf`` default to the spectrum of a Monte-Carlo
    estimate of H-infinity.
    """
    if (net_t.m, net_t.d_in) != (net_0.m, net_0.d_in):
        raise ValueError("networks have different dimensions")
    H0 = gram_at(net_0, data)
    Ht = gram_at(net_t, data)
    s0 = spectral_extremes(H0, max_iters=10**6)
    st = spectral_extremes(Ht, max_iters=10**6)
    diff = Ht - H0
    drift = 0.0 if not np.any(diff) else _spectral_norm(diff)

    if lambda0 is None or lambda1_inf is None:
        if h_inf is None:
            h_inf = gram_infinity(data, mc_samples, rng)
        sinf = spectral_extremes(h_inf, max_iters=10**6)
        lambda0 = sinf.lambda_min if lambda0 is None else lambda0
        lambda1_inf = sinf.lambda_max if lambda1_inf is None else lambda1_inf

    kappa = (2.0 * lambda1_inf + lambda0) / lambda0 if lambda0 > 0 else math.inf
    violations = []
    if drift > lambda0 / 4.0:
        violations.append("drift_norm > lambda0/4")
    if st.lambda_min < lambda0 / 2.0:
        violations.append("lambda_min(H) < lambda0/2")
    if st.lambda_max > lambda1_inf + lambda0 / 2.0:
        violations.append("lambda_max(H) > lambda1_inf + lambda0/2")
    return GramReport(s0, st, float(drift), float(lambda0), float(kappa), float(lambda1_inf), tuple(violations))


def _spectral_norm(M):
    s = spectral_extremes(M, max_iters=10**6)
    return max(abs(s.lambda_min), abs(s.lambda_max))


@dataclass(frozen=True)
class ConstantsReport:
    mu: float
    kappa: float
    lambda1: float
    zeta: float
    hoeffding_bound: float
    L_max: float
    T0: float
    m_min_adversarial: float
    m_min_supervised: float
    convention: str = CONSTANT_CONVENTION
    violations: tuple = field(default=())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["violations"] = list(self.violations)
        return d


def diffusion_magnitude(L: float, n: int, m: int, delta: float) -> float:
    """``mu = L n sqrt(2 log(2/delta)) / sqrt(m)``."""
    return L * n * math.sqrt(2.0 * math.log(2.0 / delta)) / math.sqrt(m)


def init_ball_radius(m: int, d_in: int, delta: float) -> float:
    """Radius ``2 sqrt(m d_in) / (sqrt(2 pi) delta)`` containing ``U(0)`` w.p. at least ``1 - delta``."""
    return 2.0 * math.sqrt(m * d_in) / (math.sqrt(2.0 * math.pi) * delta)


def settling_time(lambda0: float, z0_err: float, kappa_mu: float, epsilon: float) -> float:
    """Time after which the prediction-error envelope is inside ``epsilon``."""
    if not kappa_mu < epsilon:
        raise BoundPreconditionError(f"need kappa*mu < epsilon, got {kappa_mu} >= {epsilon}")
    if not epsilon < z0_err:
        raise BoundPreconditionError(f"need epsilon < ||z(0)-y||, got {epsilon} >= {z0_err}")
    return (2.0 / lambda0) * math.log((z0_err - kappa_mu) / (epsilon - kappa_mu))


def compute_constants(
    n: int,
    m: int,
    d_in: int,
    lambda0: float,
    lambda1_inf: float,
    L: float,
    delta: float,
    epsilon: float,
    z0_err: float,
    strict: bool = True,
) -> ConstantsReport:
    """All closed-form constants for one problem instance.

    With ``strict`` a violated settling-time precondition raises
    :class:`BoundPreconditionError`; otherwise ``T0`` and the adversarial width
    requirement are NaN and the failure is listed in ``violations``.
    """
    if min(n, m, d_in, lambda0, lambda1_inf, L, epsilon, z0_err) <= 0:
        raise ValueError("all inputs must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    mu = diffusion_magnitude(L, n, m, delta)
    lambda1 = 2.0 * (lambda1_inf + lambda0 / 2.0)
    kappa = lambda1 / lambda0
    root = math.sqrt(2.0 * math.log(2.0 / delta))
    violations = []
    try:
        T0 = settling_time(lambda0, z0_err, kappa * mu, epsilon)
    except BoundPreconditionError as exc:
        if strict:
            raise
        violations.append(str(exc))
        T0 = math.nan
    m_adv = (n**3.5 / (lambda0**2 * delta**2) + n**2 * mu * (1.0 + kappa * math.sqrt(n)) * T0 / (lambda0 * delta)) ** 2
    m_sup = n**7 / (lambda0**4 * delta**4)
    return ConstantsReport(
        mu=mu,
        kappa=kappa,
        lambda1=lambda1,
        zeta=init_ball_radius(m, d_in, delta),
        hoeffding_bound=L * root,
        L_max=epsilon * math.sqrt(m) / (kappa * n * root),
        T0=T0,
        m_min_adversarial=m_adv,
        m_min_supervised=m_sup,
        violations=tuple(violations),
    )


def prediction_error_envelope(t, z0_err: float, kappa: float, mu: float, lambda0: float):
    """``(z0_err - kappa mu) exp(-lambda0 t / 2) + kappa mu``."""
    if z0_err < kappa * mu:
        raise BoundPreconditionError("envelope needs z0_err >= kappa*mu")
    t = np.asarray(t, dtype=np.float64)
    out = (z0_err - kappa * mu) * np.exp(-0.5 * lambda0 * t) + kappa * mu
    return float(out) if out.ndim == 0 else out


def _bde_rhs(psi, lambda0, lambda1, mu):
    return -lambda0 * psi + lambda1 * mu * math.sqrt(max(psi, 0.0))


def bde_compare(lambda0: float, lambda1: float, mu: float, psi0: float, t_end: float, steps: int = 10_000) -> float:
    """Max relative gap between RK4 on ``psi' = -lambda0 psi + lambda1 mu sqrt(psi)`` and the closed form.

    The closed form is ``sqrt(psi(t)) = C exp(-lambda0 t / 2) + kappa mu`` with
    ``kappa = lambda1 / lambda0`` and ``C = sqrt(psi0) - kappa mu``.
    """
    if psi0 <= 0:
        raise ValueError("psi0 must be positive")
    kappa = lambda1 / lambda0
    C = math.sqrt(psi0) - kappa * mu
    h = t_end / steps
    psi, worst = psi0, 0.0
    for k in range(1, steps + 1):
        k1 = _bde_rhs(psi, lambda0, lambda1, mu)
        k2 = _bde_rhs(psi + 0.5 * h * k1, lambda0, lambda1, mu)
        k3 = _bde_rhs(psi + 0.5 * h * k2, lambda0, lambda1, mu)
        k4 = _bde_rhs(psi + h * k3, lambda0, lambda1, mu)
        psi += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        exact = C * math.exp(-0.5 * lambda0 * k * h) + kappa * mu
        worst = max(worst, abs(math.sqrt(max(psi, 0.0)) - exact) / abs(exact))
    return worst


def bound_theorem1(n: int, m: int, lambda0: float, delta: float, z0_err: float) -> tuple[float, float]:
    """Distance-from-initialization bounds without an adversary: (per neuron, Frobenius)."""
    frob = 2.0 * math.sqrt(n) * z0_err / (lambda0 * delta)
    return frob / math.sqrt(m), frob


def bound_theorem2(
    n: int, m: int, lambda0: float, delta: float, z0_err: float, mu: float, kappa: float, t: float
) -> tuple[float, float]:
    """Adversarial bounds: the supervised terms plus a drift linear in ``t``."""
    per, frob = bound_theorem1(n, m, lambda0, delta, z0_err)
    slope = mu * (1.0 + kappa * math.sqrt(n))
    return per + slope / math.sqrt(m) * t, frob + slope * t


def theorem3_asymptotics(n: int, m: int, d_in: int, d_out: int) -> dict:
    """Unit-constant orders of the reaction and diffusion terms when both layers train."""
    if min(n, m, d_in, d_out) <= 0:
        raise ValueError("all sizes must be positive")
    r = n * d_in * math.sqrt(d_out / m)
    return {
        "reaction_u": r,
        "diffusion_u": n * m**2 * d_in * d_out**1.5,
        "reaction_v": r,
        "diffusion_v": n * m**2 * d_in * d_out**0.5,
    }


def expected_initial_error(data, m: int, d_out: int | None = None, mode: str = "theory", seed: int = 0, inits: int = 10) -> float:
    """Mean of ``||z(0) - y||`` over independent initializations."""
    x = _inputs(data)
    y = data.train_y
    d_out = d_out or y.shape[1]
    errs = []
    for k in range(inits):
        net = init_generator(m, x.shape[1], d_out, mode, SeededRng(seed, 500 + k))
        errs.append(np.linalg.norm(forward_generator(net, x) - y))
    return float(np.mean(errs))


def hoeffding_exceedance(w: np.ndarray, delta: float, resamples: int, rng: SeededRng) -> float:
    """Fraction of Rademacher draws with ``|sum a_r w_r| > ||w|| sqrt(2 log(2/delta))``."""
    w = np.asarray(w, dtype=np.float64)
    thr = np.linalg.norm(w) * math.sqrt(2.0 * math.log(2.0 / delta))
    hits = 0
    for start in range(0, resamples, 10_000):
        a = rng.rademacher((min(10_000, resamples - start), w.size))
        hits += int(np.sum(np.abs(a @ w) > thr))
    return hits / resamples


BOUND_COLUMNS = (
    "step", "time", "pred_err", "envelope", "max_neuron_dist", "neuron_bound_t1", "neuron_bound_t2",
    "dist_U", "frob_bound_t1", "frob_bound_t2",
)


def bound_comparison(log, n: int, m: int, lambda0: float, delta: float, z0_err: float, mu: float, kappa: float) -> list[dict]:
    """Bounds evaluated at each logged step of a trajectory, for CSV export."""
    rows = []
    for step, t, err, dmax, dU in zip(log["step"], log["time"], log["pred_err"], log["max_neuron_dist"], log["dist_U"]):
        p1, f1 = bound_theorem1(n, m, lambda0, delta, z0_err)
        p2, f2 = bound_theorem2(n, m, lambda0, delta, z0_err, mu, kappa, t)
        env = prediction_error_envelope(t, z0_err, kappa, mu, lambda0) if z0_err >= kappa * mu else math.nan
        rows.append(dict(zip(BOUND_COLUMNS, (int(step), t, err, env, dmax, p1, p2, dU, f1, f2))))
    return rows
