"""Gradient-descent training loops and the instrumentation around them."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .core import ConvergenceError, SeededRng, active, fmt, relu, spectral_extremes
from .network import DiscriminatorNet, GeneratorNet, forward_generator
from .objective import (
    critic_input_gradient,
    discriminator_gradients,
    generator_gradients,
    loss_breakdown,
    project_row_norm,
)
from .theory import gram_at

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    """Training hyperparameters; defaults are plain momentum SGD with one critic step per generator step."""

    mode: str = "supervised"
    learning_rate: float = 1e-2
    momentum: float = 0.9
    batch_size: int | None = None  # None: full batch
    max_epochs: int = 1000
    epsilon_stationary: float = 0.0  # 0 disables the stationarity stop
    disc_steps_per_gen_step: int = 1
    L: float = 0.01
    gp_coeff: float = 0.0
    seed: int = 1
    log_every: int = 1
    critic_learning_rate: float | None = None  # None: same as learning_rate
    train_output_layer: bool = True
    train_critic_output: bool = False
    gram_every: int = 0  # 0: no Gram spectra in the log
    rd_every: int = 0  # 0: reaction/diffusion norms only at logged steps
    divergence_factor: float = 1e6

    def validate(self):
        if self.mode not in ("supervised", "adversarial"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.disc_steps_per_gen_step < 1:
            raise ValueError("disc_steps_per_gen_step must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")
        if self.L <= 0:
            raise ValueError("L must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


LOG_COLUMNS = (
    "step", "time", "sup_loss", "adv_term", "pred_err", "max_neuron_dist", "dist_U", "dist_V",
    "gram_lambda_min", "gram_lambda_max", "reaction_u", "diffusion_u", "reaction_v", "diffusion_v", "max_grad",
)


class TrajectoryLog:
    """Per-step training record with a fixed column order (see ``LOG_COLUMNS``)."""

    def __init__(self):
        self.rows: list[dict] = []
        self.stop_reason: str = ""

    def append(self, row: dict):
        if self.rows and row["step"] <= self.rows[-1]["step"]:
            raise ValueError("log steps must strictly increase")
        self.rows.append({k: row.get(k, math.nan) for k in LOG_COLUMNS})

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, column: str) -> np.ndarray:
        return np.array([r[column] for r in self.rows], dtype=np.float64)

    @classmethod
    def from_csv(cls, path) -> "TrajectoryLog":
        log = cls()
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r, None)
            if header is None or tuple(header) != LOG_COLUMNS:
                raise ValueError(f"{path}: not a trajectory log (unexpected header)")
            for rec in r:
                log.append({"step": int(rec[0]), **{k: float(v) for k, v in zip(LOG_COLUMNS[1:], rec[1:])}})
        return log

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(LOG_COLUMNS)
            for r in self.rows:
                w.writerow([str(int(r["step"]))] + [fmt(r[k]) for k in LOG_COLUMNS[1:]])


@dataclass(frozen=True)
class RDTerms:
    """Per-neuron reaction and diffusion terms; row ``j`` belongs to neuron ``j``."""

    R_u: np.ndarray  # (m, d_in)
    D_u: np.ndarray  # (m, d_in)
    R_v: np.ndarray  # (m, d_out)
    D_v: np.ndarray  # (m, d_out)

    def norms(self) -> dict:
        mean_norm = lambda A: float(np.mean(np.linalg.norm(A, axis=1)))  # noqa: E731
        return {
            "reaction_u": mean_norm(self.R_u),
            "diffusion_u": mean_norm(self.D_u),
            "reaction_v": mean_norm(self.R_v),
            "diffusion_v": mean_norm(self.D_v),
        }


def reaction_diffusion_terms(net: GeneratorNet, disc: DiscriminatorNet | None, data, y=None) -> RDTerms:
    """Split ``du_j/dt`` and ``dv_j/dt`` of the augmented objective into reaction
    (supervised residual) and diffusion (critic) parts, so that
    ``-dL_aug/du_j = R_u[j] + D_u[j]``."""
    x, y = (data.train_x, data.train_y) if y is None else (np.asarray(data), np.asarray(y))
    pre = x @ net.U.T
    h, act = relu(pre), active(pre)
    s = net.scale
    r = y - forward_generator(net, x)
    R_u = s * (act * (r @ net.V)).T @ x
    R_v = s * h.T @ r
    if disc is None:
        return RDTerms(R_u, np.zeros_like(R_u), R_v, np.zeros_like(R_v))
    G = critic_input_gradient(disc, forward_generator(net, x))
    D_u = s * (act * (G @ net.V)).T @ x
    D_v = s * h.T @ G
    return RDTerms(R_u, D_u, R_v, D_v)


def is_epsilon_stationary(
    net: GeneratorNet, disc: DiscriminatorNet | None, data, epsilon: float, y=None, include_v: bool = True
) -> tuple[bool, float]:
    """True iff every generator gradient component is strictly below ``epsilon`` in magnitude."""
    mode = "augmented" if disc is not None else "supervised"
    g = generator_gradients(net, disc, data, y, mode=mode)
    mx = g.max_abs(include_v=include_v)
    return mx < epsilon, mx


def dynamics_residual(net: GeneratorNet, disc: DiscriminatorNet | None, data, learning_rate: float, y=None) -> float:
    """Relative mismatch between one hidden-layer GD step and the prediction ODE.

    Compares ``(z_after - z_before) / eta`` with ``H(t)(y - z) + H(t) grad_z g``
    (critic term dropped when ``disc`` is None), normalized by ``||z_before||``.
    Requires a scalar network whose output weights are all +-1.
    """
    x, y = (data.train_x, data.train_y) if y is None else (np.asarray(data), np.asarray(y))
    if net.d_out != 1:
        raise ValueError("dynamics_residual needs a scalar-output generator")
    H = gram_at(net, x)
    z0 = forward_generator(net, x)[:, 0]
    target = H @ (y[:, 0] - z0)
    mode = "supervised"
    if disc is not None:
        target = target + H @ critic_input_gradient(disc, z0[:, None])[:, 0]
        mode = "augmented"
    grads = generator_gradients(net, disc, x, y, mode=mode)
    stepped = net.copy()
    stepped.U = net.U - learning_rate * grads.dU
    z1 = forward_generator(stepped, x)[:, 0]
    return float(np.linalg.norm((z1 - z0) / learning_rate - target) / np.linalg.norm(z0))


class _Momentum:
    # heavy-ball SGD: buf = mu * buf + grad; p -= lr * buf
    def __init__(self, momentum: float):
        self.momentum = momentum
        self.bufs: dict[str, np.ndarray] = {}

    def step(self, key: str, param: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        if self.momentum:
            buf = self.bufs.get(key)
            buf = grad.copy() if buf is None else self.momentum * buf + grad
            self.bufs[key] = buf
            grad = buf
        return param - lr * grad


def _record(step, cfg, net, disc, x, y, want_gram, want_rd) -> dict:
    snap = net.snapshot
    lb = loss_breakdown(net, disc, x, y)
    z = forward_generator(net, x)
    dU = net.U - snap.U0
    row = {
        "step": step,
        "time": cfg.learning_rate * step,
        "sup_loss": lb.supervised,
        "adv_term": lb.adversarial,
        "pred_err": float(np.linalg.norm(z - y)),
        "max_neuron_dist": float(np.max(np.linalg.norm(dU, axis=1))),
        "dist_U": float(np.linalg.norm(dU)),
        "dist_V": float(np.linalg.norm(net.V - snap.V0)),
    }
    if want_gram:
        try:
            spec = spectral_extremes(gram_at(net, x), tol=1e-10, max_iters=10**6)
            row["gram_lambda_min"], row["gram_lambda_max"] = spec.lambda_min, spec.lambda_max
        except ConvergenceError as exc:
            # a clustered spectrum is a diagnostics problem, not a reason to stop training
            log.warning("step %d: gram spectrum not logged (%s)", step, exc)
    if want_rd:
        row.update(reaction_diffusion_terms(net, disc, x, y).norms())
    _, row["max_grad"] = is_epsilon_stationary(net, disc, x, math.inf, y, include_v=cfg.train_output_layer)
    return row


def run_training(
    config: TrainConfig, dataset, net: GeneratorNet, disc: DiscriminatorNet | None = None
) -> TrajectoryLog:
    """Train ``net`` (and ``disc`` in adversarial mode) in place and return the log.

    One step is one generator update. In adversarial mode each generator update
    is preceded by ``disc_steps_per_gen_step`` critic updates on the same batch,
    each followed by the row-norm projection of W.
    """
    cfg = config
    cfg.validate()
    adversarial = cfg.mode == "adversarial"
    if adversarial and disc is None:
        raise ValueError("adversarial training needs a discriminator")
    if not adversarial:
        disc = None

    x, y = dataset.train_x, dataset.train_y
    n = x.shape[0]
    batch = n if cfg.batch_size is None else min(cfg.batch_size, n)
    per_epoch = math.ceil(n / batch)
    total_steps = cfg.max_epochs * per_epoch
    rng = SeededRng(cfg.seed, 101)
    gen_opt, critic_opt = _Momentum(cfg.momentum), _Momentum(cfg.momentum)
    lr_c = cfg.learning_rate if cfg.critic_learning_rate is None else cfg.critic_learning_rate

    trace = TrajectoryLog()

    def record(step):
        want_gram = cfg.gram_every > 0 and step % cfg.gram_every == 0
        want_rd = cfg.rd_every == 0 or step % cfg.rd_every == 0
        row = _record(step, cfg, net, disc, x, y, want_gram, want_rd)
        trace.append(row)
        return row

    first = record(0)
    guard = cfg.divergence_factor * max(first["sup_loss"], 1e-12)
    step = 0
    trace.stop_reason = "max_epochs"
    for epoch in range(cfg.max_epochs):
        order = np.arange(n) if batch == n else rng.permutation(n)
        for b in range(per_epoch):
            idx = order[b * batch : (b + 1) * batch]
            xb, yb = x[idx], y[idx]
            if adversarial:
                for _ in range(cfg.disc_steps_per_gen_step):
                    fake = forward_generator(net, xb)
                    cg = discriminator_gradients(disc, yb, fake, cfg.gp_coeff, rng)
                    disc.W = project_row_norm(critic_opt.step("W", disc.W, cg.dW, lr_c), disc.L)
                    if cfg.train_critic_output:
                        disc.a = critic_opt.step("a", disc.a, cg.da, lr_c)
            g = generator_gradients(
                net, disc, xb, yb, mode="augmented" if adversarial else "supervised", need_v=cfg.train_output_layer
            )
            net.U = gen_opt.step("U", net.U, g.dU, cfg.learning_rate)
            if cfg.train_output_layer:
                net.V = gen_opt.step("V", net.V, g.dV, cfg.learning_rate)
            step += 1

            if step % cfg.log_every == 0 or step == total_steps:
                row = record(step)
                if not math.isfinite(row["sup_loss"]) or row["sup_loss"] > guard:
                    trace.stop_reason = "diverged"
                    raise TrainingDiverged(
                        f"loss {row['sup_loss']:.3e} at step {step} (initial {first['sup_loss']:.3e}, "
                        f"lr {cfg.learning_rate}); lower the learning rate"
                    )
                if cfg.epsilon_stationary > 0 and row["max_grad"] < cfg.epsilon_stationary:
                    trace.stop_reason = "epsilon_stationary"
                    log.info("epsilon-stationary at step %d (max |grad| %.3e)", step, row["max_grad"])
                    return trace
    return trace


def linear_fit(t: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least-squares line through ``(t, y)``: returns ``(slope, intercept, r_squared)``."""
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    A = np.column_stack([t, np.ones_like(t)])
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * t + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(icpt), r2


def first_stationary_step(log: TrajectoryLog, epsilon: float) -> int | None:
    """First logged step whose max gradient magnitude is below ``epsilon``."""
    for r in log.rows:
        if r["max_grad"] < epsilon:
            return int(r["step"])
    return None
