"""``prdlab`` command line: data, training, theory checks, simulators and feature images.

Every command resolves its configuration as flags > ``--config`` file >
built-in defaults, writes its outputs into ``--out`` (default
``$PRDLAB_OUTPUT_DIR`` or ``./prdlab-out``) and finishes with
``manifest.json``. Passing a previous manifest as ``--config`` replays that
run exactly.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import featviz, rdsim
from .core import SeededRng, fmt
from .data import (
    ManifoldSpec,
    generate_manifold_dataset,
    load_dataset_dir,
    load_idx,
    normalize_unit,
    save_dataset_dir,
)
from .manifest import RunManifest
from .network import (
    GeneratorNet,
    forward_generator,
    init_discriminator,
    init_generator,
    load_network,
    save_discriminator,
    save_generator,
)
from .theory import (
    BOUND_COLUMNS,
    bound_comparison,
    compute_constants,
    diffusion_magnitude,
    gram_infinity,
    gram_stability_report,
)
from .trainer import TrainConfig, TrajectoryLog, run_training

log = logging.getLogger("prdlab")

ENV_OUTPUT_DIR = "PRDLAB_OUTPUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# Built-in defaults per command. Flags use the same names with dashes.
DEFAULTS = {
    "gen-data": {
        "n_total": 320, "n_train": 256, "d_in": 16, "modes": 2, "manifold_dim": 2, "fill_value": 1.0,
        "seed": 1, "label_mode": "onehot", "center_box": 10.0, "cluster_std": 1.0, "normalize": True,
        "idx_images": None, "idx_labels": None, "n_classes": 10, "limit": None,
    },
    "train": {
        **TrainConfig().to_dict(), "data": None, "m": 1024, "init": "theory", "init_seed": 3, "critic_seed": 4,
    },
    "gram": {
        "data": None, "net": None, "m": 1024, "init_seed": 3, "mc_samples": 1_000_000, "mc_seed": 0,
        "lambda0": None, "lambda1_inf": None, "L": 0.01, "delta": 0.1, "epsilon": 0.01,
    },
    "verify-bounds": {
        "data": None, "log": None, "m": None, "L": 0.01, "delta": 0.1, "lambda0": None, "lambda1_inf": None,
        "mc_samples": 1_000_000, "mc_seed": 0,
    },
    "simulate": {
        "model": "turing", "preset": None, "size": 100, "steps": 10_000, "snapshot_every": 1000,
        "stats_every": 100, "amplitude": 0.03, "patch": 5, "seed": 0,
        "a": None, "b": None, "c": None, "d": None, "h": None, "k": None, "mu": None, "nu": None,
        "dt": None, "dx": None, "F": None,
    },
    "featviz": {
        "net": None, "image_height": None, "image_width": None, "top_k": 9, "epsilon": 0.007,
        "step_size": 0.1, "iterations": 100, "seed": 0, "through_relu": False,
    },
}


def _bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {s!r}")


def _opt_int(s: str):
    return None if s.lower() == "none" else int(s)


def _mode(s: str) -> str:
    table = {"sup": "supervised", "supervised": "supervised", "adv": "adversarial", "adversarial": "adversarial"}
    if s not in table:
        raise argparse.ArgumentTypeError("mode must be sup or adv")
    return table[s]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="prdlab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def cmd(name, help):
        sp = sub.add_parser(name, help=help, argument_default=argparse.SUPPRESS)
        sp.add_argument("--out", help=f"output directory (default ${ENV_OUTPUT_DIR} or ./prdlab-out)")
        sp.add_argument("--config", help="JSON config file or a previous manifest.json")
        return sp

    g = cmd("gen-data", "synthetic manifold dataset (or an IDX pair) as CSV")
    for k in ("n_total", "n_train", "d_in", "modes", "manifold_dim", "seed", "n_classes"):
        g.add_argument("--" + k.replace("_", "-"), type=int)
    for k in ("fill_value", "center_box", "cluster_std"):
        g.add_argument("--" + k.replace("_", "-"), type=float)
    g.add_argument("--label-mode", choices=("onehot", "scalar"))
    g.add_argument("--normalize", type=_bool)
    g.add_argument("--idx-images")
    g.add_argument("--idx-labels")
    g.add_argument("--limit", type=_opt_int, help="keep the first N IDX samples")

    t = cmd("train", "supervised or adversarial training with a trajectory log")
    t.add_argument("--data", help="dataset directory written by gen-data")
    t.add_argument("--mode", type=_mode, help="sup or adv")
    for k in ("learning_rate", "momentum", "epsilon_stationary", "L", "gp_coeff", "critic_learning_rate",
              "divergence_factor"):
        t.add_argument("--" + k.replace("_", "-"), type=float)
    for k in ("max_epochs", "disc_steps_per_gen_step", "seed", "log_every", "gram_every", "rd_every", "m",
              "init_seed", "critic_seed"):
        t.add_argument("--" + k.replace("_", "-"), type=int)
    t.add_argument("--batch-size", type=_opt_int)
    t.add_argument("--train-output-layer", type=_bool)
    t.add_argument("--train-critic-output", type=_bool)
    t.add_argument("--init", choices=("theory", "xavier"))

    gr = cmd("gram", "H-infinity and H(t) spectra, stability checks and constants")
    gr.add_argument("--data")
    gr.add_argument("--net", help="generator checkpoint (default: fresh theory-mode init)")
    for k in ("m", "init_seed", "mc_samples", "mc_seed"):
        gr.add_argument("--" + k.replace("_", "-"), type=int)
    for k in ("lambda0", "lambda1_inf", "L", "delta", "epsilon"):
        gr.add_argument("--" + k.replace("_", "-"), type=float)

    vb = cmd("verify-bounds", "distance-from-initialization bounds along a logged trajectory")
    vb.add_argument("--data")
    vb.add_argument("--log", help="trajectory.csv written by train")
    for k in ("m", "mc_samples", "mc_seed"):
        vb.add_argument("--" + k.replace("_", "-"), type=int)
    for k in ("L", "delta", "lambda0", "lambda1_inf"):
        vb.add_argument("--" + k.replace("_", "-"), type=float)

    s = cmd("simulate", "Turing or Gray-Scott grid simulation")
    s.add_argument("--model", choices=("turing", "gs"))
    s.add_argument("--preset", help="turing: paper; gs: gs1..gs4")
    for k in ("size", "steps", "snapshot_every", "stats_every", "patch", "seed"):
        s.add_argument("--" + k.replace("_", "-"), type=int)
    for k in ("amplitude", "a", "b", "c", "d", "h", "k", "mu", "nu", "dt", "dx", "F"):
        s.add_argument("--" + k, type=float)

    f = cmd("featviz", "top-norm filter images, excitation maps and per-neuron variances")
    f.add_argument("--net", help="generator checkpoint")
    for k in ("image_height", "image_width", "top_k", "iterations", "seed"):
        f.add_argument("--" + k.replace("_", "-"), type=int)
    for k in ("epsilon", "step_size"):
        f.add_argument("--" + k.replace("_", "-"), type=float)
    f.add_argument("--through-relu", type=_bool)
    return p


def resolve_config(command: str, flags: dict, config_path: str | None) -> dict:
    cfg = dict(DEFAULTS[command])
    if config_path:
        try:
            raw = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {config_path}: {exc}") from exc
        if "command" in raw and "config" in raw:  # a manifest
            if raw["command"] != command:
                raise UsageError(f"manifest is for {raw['command']!r}, not {command!r}")
            raw = raw["config"]
        unknown = set(raw) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
        cfg.update(raw)
    cfg.update(flags)
    return cfg


def _require(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _write_rows(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([v if isinstance(v, str) else str(v) if isinstance(v, (int, np.integer)) else fmt(v)
                        for v in (r[c] for c in columns)])


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- commands ---------------------------------------------------------------


def cmd_gen_data(cfg, out: Path, man: RunManifest):
    if cfg["idx_images"] or cfg["idx_labels"]:
        _require(cfg, "idx_images", "idx_labels")
        ds = load_idx(cfg["idx_images"], cfg["idx_labels"], cfg["n_classes"])
        man.add_input(cfg["idx_images"])
        man.add_input(cfg["idx_labels"])
        if cfg["limit"] is not None:
            ds = ds.subset(cfg["limit"])
    else:
        spec = ManifoldSpec(**{k: cfg[k] for k in ManifoldSpec.__dataclass_fields__})
        ds = generate_manifold_dataset(spec)
        man.seeds["data"] = cfg["seed"]
    if cfg["normalize"]:
        ds = normalize_unit(ds)
    return save_dataset_dir(ds, out)


def _dataset(cfg, man):
    _require(cfg, "data")
    d = Path(cfg["data"])
    for name in ("train.csv", "test.csv", "dataset.json"):
        man.add_input(d / name)
    return load_dataset_dir(d)


def cmd_train(cfg, out, man):
    ds = _dataset(cfg, man)
    tc = TrainConfig.from_dict({k: cfg[k] for k in TrainConfig().to_dict()})
    net = init_generator(cfg["m"], ds.d_in, ds.d_out, cfg["init"], SeededRng(cfg["init_seed"]))
    disc = None
    if tc.mode == "adversarial":
        disc = init_discriminator(cfg["m"], ds.d_out, tc.L, SeededRng(cfg["critic_seed"]))
    man.seeds.update(init=cfg["init_seed"], critic=cfg["critic_seed"], train=tc.seed)
    trace = run_training(tc, ds, net, disc)
    log.info("stopped: %s after %d logged rows", trace.stop_reason, len(trace))
    files = [out / "trajectory.csv", out / "generator.bin"]
    trace.to_csv(files[0])
    save_generator(net, files[1])
    if disc is not None:
        files.append(out / "discriminator.bin")
        save_discriminator(disc, files[-1])
    _write_json(out / "summary.json", {"stop_reason": trace.stop_reason, "logged_rows": len(trace)})
    return files + [out / "summary.json"]


def _load_generator(path, man) -> GeneratorNet:
    net = load_network(path)
    if not isinstance(net, GeneratorNet):
        raise ValueError(f"{path} holds a discriminator, expected a generator")
    man.add_input(path)
    return net


def cmd_gram(cfg, out, man):
    ds = _dataset(cfg, man)
    if cfg["net"]:
        net = _load_generator(cfg["net"], man)
    else:
        net = init_generator(cfg["m"], ds.d_in, ds.d_out, "theory", SeededRng(cfg["init_seed"]))
        man.seeds["init"] = cfg["init_seed"]
    snap = net.snapshot
    net0 = GeneratorNet(snap.U0, snap.V0, net.mode, net.seed, snap)
    man.seeds["mc"] = cfg["mc_seed"]
    h_inf = None
    if cfg["lambda0"] is None or cfg["lambda1_inf"] is None:
        h_inf = gram_infinity(ds, cfg["mc_samples"], SeededRng(cfg["mc_seed"]))
    rep = gram_stability_report(net, net0, ds, cfg["lambda0"], cfg["lambda1_inf"], h_inf)

    z0 = float(np.linalg.norm(forward_generator(net0, ds.train_x) - ds.train_y))
    const = compute_constants(
        ds.n_train, net.m, ds.d_in, rep.lambda0_hat, rep.lambda1_inf, cfg["L"], cfg["delta"], cfg["epsilon"], z0,
        strict=False,
    )
    rows = [
        ("lambda0", rep.lambda0_hat), ("lambda1_inf", rep.lambda1_inf), ("kappa", rep.kappa_hat),
        ("H0_lambda_min", rep.H0_spectrum.lambda_min), ("H0_lambda_max", rep.H0_spectrum.lambda_max),
        ("Ht_lambda_min", rep.Ht_spectrum.lambda_min), ("Ht_lambda_max", rep.Ht_spectrum.lambda_max),
        ("drift_norm", rep.drift_norm), ("z0_err", z0),
    ] + [(k, v) for k, v in const.to_dict().items() if isinstance(v, float)]
    files = [out / "gram.csv", out / "gram_report.json"]
    _write_rows(files[0], ("quantity", "value"), [{"quantity": k, "value": v} for k, v in rows])
    _write_json(files[1], {"gram": rep.to_dict(), "constants": const.to_dict()})
    if h_inf is not None:
        files.append(out / "h_inf.csv")
        with open(files[-1], "w", newline="") as fh:
            w = csv.writer(fh)
            for row in h_inf:
                w.writerow([fmt(v) for v in row])
    return files


def cmd_verify_bounds(cfg, out, man):
    ds = _dataset(cfg, man)
    _require(cfg, "log", "m")
    trace = TrajectoryLog.from_csv(cfg["log"])
    man.add_input(cfg["log"])
    lam0, lam1 = cfg["lambda0"], cfg["lambda1_inf"]
    if lam0 is None or lam1 is None:
        from .core import spectral_extremes

        man.seeds["mc"] = cfg["mc_seed"]
        s = spectral_extremes(gram_infinity(ds, cfg["mc_samples"], SeededRng(cfg["mc_seed"])), max_iters=10**6)
        lam0 = s.lambda_min if lam0 is None else lam0
        lam1 = s.lambda_max if lam1 is None else lam1
    if not lam0 > 0:
        raise ValueError(f"lambda0 = {lam0} is not positive; bounds are vacuous")
    n = ds.n_train
    mu = diffusion_magnitude(cfg["L"], n, cfg["m"], cfg["delta"])
    kappa = 2.0 * (lam1 + lam0 / 2.0) / lam0
    z0 = float(trace["pred_err"][0])
    rows = bound_comparison(trace, n, cfg["m"], lam0, cfg["delta"], z0, mu, kappa)
    path = out / "bounds.csv"
    _write_rows(path, BOUND_COLUMNS, rows)
    _write_json(out / "bounds_meta.json", {"lambda0": lam0, "lambda1_inf": lam1, "mu": mu, "kappa": kappa,
                                           "z0_err": z0, "n": n, "m": cfg["m"], "delta": cfg["delta"]})
    return [path, out / "bounds_meta.json"]


_TURING_KEYS = ("a", "b", "c", "d", "h", "k", "mu", "nu", "dt", "dx")
_GS_KEYS = ("F", "k", "mu", "nu", "dt", "dx")


def simulation_params(cfg):
    if cfg["model"] == "turing":
        presets, keys, cls = rdsim.TURING_PRESETS, _TURING_KEYS, rdsim.TuringParams
        preset = cfg["preset"] or "paper"
    else:
        presets, keys, cls = rdsim.GRAYSCOTT_PRESETS, _GS_KEYS, rdsim.GrayScottParams
        preset = cfg["preset"] or "gs1"
    if preset not in presets:
        raise UsageError(f"unknown {cfg['model']} preset {preset!r}; choose from {sorted(presets)}")
    base = presets[preset].__dict__.copy()
    base.update({k: cfg[k] for k in keys if cfg.get(k) is not None})
    return cls(**base)


def cmd_simulate(cfg, out, man):
    params = simulation_params(cfg)
    shape = (cfg["size"], cfg["size"])
    if cfg["model"] == "turing":
        grid = rdsim.init_turing(shape, params.h, params.k, cfg["amplitude"], SeededRng(cfg["seed"]))
        man.seeds["init"] = cfg["seed"]
        model = "turing"
    else:
        grid = rdsim.init_grayscott(shape, cfg["patch"])
        model = "grayscott"
    run = rdsim.run_rd(model, params, grid, cfg["steps"], cfg["snapshot_every"], cfg["stats_every"])
    frames = out / "frames"
    frames.mkdir(exist_ok=True)
    files = []
    width = len(str(cfg["steps"]))
    for step, g in run.snapshots:
        for name, field in (("u", g.u), ("v", g.v)):
            files.append(frames / f"{name}_{step:0{width}d}.pgm")
            rdsim.write_pgm(files[-1], field)
    files.append(out / "stats.csv")
    run.write_stats_csv(files[-1])
    _write_json(out / "params.json", {"model": model, **params.__dict__})
    return files + [out / "params.json"]


def cmd_featviz(cfg, out, man):
    _require(cfg, "net")
    net = _load_generator(cfg["net"], man)
    U = net.U
    files = [out / "variances.csv"]
    featviz.write_variances_csv(files[0], featviz.neuron_variances(U))

    hw = (cfg["image_height"], cfg["image_width"])
    if hw == (None, None):
        side = math.isqrt(net.d_in)
        hw = (side, side) if side * side == net.d_in else (1, net.d_in)
    elif None in hw or hw[0] * hw[1] != net.d_in:
        raise UsageError(f"image shape {hw} does not match d_in = {net.d_in}")

    imgdir = out / "filters"
    imgdir.mkdir(exist_ok=True)
    for j, img in featviz.export_weight_images(U, hw[0], hw[1], cfg["top_k"]):
        files.append(imgdir / f"filter_{j:06d}.pgm")
        rdsim.write_pgm(files[-1], img)

    man.seeds["base_input"] = cfg["seed"]
    x0 = featviz.random_base_input(net.d_in, SeededRng(cfg["seed"]))
    acfg = featviz.AscentConfig(cfg["epsilon"], cfg["step_size"], cfg["iterations"])
    rows = []
    for j in featviz.top_rows_by_norm(U, cfg["top_k"]):
        res = featviz.maximize_excitation(U[j], x0, acfg, through_relu=cfg["through_relu"])
        files.append(imgdir / f"excitation_{int(j):06d}.pgm")
        rdsim.write_pgm(files[-1], (x0 + res.delta).reshape(hw))
        rows.append({"neuron": int(j), "initial": res.excitation[0], "final": res.excitation[-1],
                     "gain": res.excitation[-1] - res.excitation[0], "dead": str(res.dead).lower()})
    files.append(out / "excitation.csv")
    _write_rows(files[-1], ("neuron", "initial", "final", "gain", "dead"), rows)
    return files


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "gram": cmd_gram,
    "verify-bounds": cmd_verify_bounds,
    "simulate": cmd_simulate,
    "featviz": cmd_featviz,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "verbose", "out", "config")}
    started = time.perf_counter()
    try:
        cfg = resolve_config(ns.command, flags, getattr(ns, "config", None))
        out = Path(getattr(ns, "out", None) or os.environ.get(ENV_OUTPUT_DIR) or "prdlab-out")
        out.mkdir(parents=True, exist_ok=True)
        man = RunManifest(command=ns.command, config=cfg)
        files = COMMANDS[ns.command](cfg, out, man)
        man.write(out, files, started)
    except UsageError as exc:
        print(f"prdlab {ns.command}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure: report, do not trace
        print(f"prdlab {ns.command}: error: {exc}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
