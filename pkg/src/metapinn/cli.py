"""Command-line interface.

Subcommands: train-full, offline, online, eval, bench, svd.  Exit codes:
0 success, 1 usage error, 2 runtime error.  Every run writes run_meta.json
(config hash, seeds, backend, method-deviation flags) into the output
directory next to its CSV and archive outputs.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import archive, reports
from .config import RunConfig, config_hash, load_config
from .evaluation import (
    eval_grid,
    evaluate_test_set,
    offline_cost,
    svd_decay_report,
    timing_benchmark,
)
from .greedy import GreedyConfig, run_offline
from .kernels import BACKEND
from .mlp import mlp_forward_batch
from .pde import sample_collocation
from .reduced import gpt_predict, init_coeffs, online_train
from .training import train_sa_pinn


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_mu(text):
    try:
        return np.array([float(v) for v in text.split(",")], dtype=np.float64)
    except ValueError:
        raise UsageError(f"cannot parse parameter value {text!r}")


def _write_run_meta(outdir, cfg: RunConfig, subcommand, extra=None):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    meta = {
        "subcommand": subcommand,
        "config_hash": None if cfg is None else config_hash(cfg),
        "seeds": None if cfg is None else {
            "collocation": cfg.collocation.seed,
            "greedy": cfg.greedy.seed,
            "eval": cfg.eval.seed,
        },
        "method_deviations": [] if cfg is None else cfg.deviations(),
        "backend": BACKEND,
    }
    meta.update(extra or {})
    with open(outdir / "run_meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)


def _colloc(cfg: RunConfig, pde):
    c = cfg.collocation
    return sample_collocation(
        pde, (c.n_interior, c.n_boundary, c.n_initial), strategy=c.strategy, seed=c.seed
    )


def _greedy_config(cfg: RunConfig, pde) -> GreedyConfig:
    return GreedyConfig(
        xi=cfg.xi(),
        n_max=cfg.greedy.n_max,
        train=cfg.train_config(),
        online=cfg.online_config(),
        colloc=_colloc(cfg, pde),
        mu1=None if cfg.greedy.mu1 is None else np.asarray(cfg.greedy.mu1, dtype=np.float64),
        tol=cfg.greedy.tol,
        seed=cfg.greedy.seed,
        stiff_filter=cfg.stiff_filter(),
    )


def cmd_train_full(args):
    cfg = load_config(args.config)
    pde = cfg.pde_definition()
    mu = pde.domain.validate(_parse_mu(args.mu))
    colloc = _colloc(cfg, pde)
    pinn = train_sa_pinn(pde, mu, cfg.train_config(), seed=cfg.greedy.seed, colloc=colloc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    archive.save_pinn(pinn, out / "full_pinn.bin")
    reports.write_loss_history(out / "loss_history.csv", pinn.loss_history)
    _write_run_meta(out, cfg, "train-full", {
        "mu": mu.tolist(), "terminal_loss": pinn.terminal_loss,
        "epochs_run": pinn.epochs_run, "wall_time_s": pinn.wall_time,
    })
    return 0


def cmd_offline(args):
    cfg = load_config(args.config)
    pde = cfg.pde_definition()
    model = run_offline(pde, _greedy_config(cfg, pde))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    archive.save_model(model, out / "model.bin")
    reports.write_chosen_params(out / "chosen_params.csv", model)
    reports.write_indicator_scans(out, model)
    for i, pinn in enumerate(model.pinns):
        reports.write_loss_history(out / f"loss_history_neuron_{i + 1}.csv", pinn.loss_history)
    _write_run_meta(out, cfg, "offline", {
        "n_neurons": model.n_neurons, "offline_cost_s": offline_cost(model),
    })
    return 0


def cmd_online(args):
    model = archive.load_model(args.model)
    mu = model.pde.domain.validate(_parse_mu(args.mu))
    cfg = load_config(args.config) if args.config else None
    online_cfg = cfg.online_config() if cfg else None
    grid_shape = tuple(cfg.eval.grid) if cfg else (101, 101)
    if online_cfg is None:
        from .reduced import OnlineConfig

        online_cfg = OnlineConfig()
    t0 = time.perf_counter()
    c, delta = online_train(init_coeffs(mu, model), model, mu, online_cfg)
    t_online = time.perf_counter() - t0
    pts = eval_grid(model.pde, grid_shape)
    values = gpt_predict(c, model, pts)
    out = Path(args.out)
    reports.write_coefficients(out / "coefficients.csv", c)
    reports.write_online_results(out / "online_results.csv", [mu], [delta],
                                 [online_cfg.epochs], [t_online])
    reports.write_prediction_grid(out / "prediction_grid.csv", pts, values)
    _write_run_meta(out, cfg, "online", {"mu": mu.tolist(), "delta": delta})
    return 0


def cmd_eval(args):
    model = archive.load_model(args.model)
    cfg = load_config(args.config)
    pde = cfg.pde_definition()
    rng = np.random.default_rng(cfg.eval.seed)
    sampled = np.asarray(model.mus)
    test = []
    while len(test) < cfg.eval.n_test:
        mu = pde.domain.sample(1, seed=int(rng.integers(1 << 31)))[0]
        if not any(np.array_equal(mu, row) for row in sampled):
            test.append(mu)
    test = np.asarray(test)
    colloc = _colloc(cfg, pde)
    cache = Path(args.out) / "ref_cache"
    cache.mkdir(parents=True, exist_ok=True)
    chash = config_hash(cfg)[:16]
    refs = []
    for i, mu in enumerate(test):
        key = cache / f"ref_{chash}_{i}.bin"
        if key.exists():
            refs.append(archive.load_pinn(key))
        else:
            pinn = train_sa_pinn(pde, mu, cfg.train_config(),
                                 seed=cfg.eval.seed + 1 + i, colloc=colloc)
            archive.save_pinn(pinn, key)
            refs.append(pinn)
    report = evaluate_test_set(model, test, refs, grid_shape=tuple(cfg.eval.grid),
                               online_config=cfg.online_config())
    out = Path(args.out)
    reports.write_test_errors(out / "test_errors.csv", report)
    worst = max(range(len(report.rows)), key=lambda i: report.rows[i].rel_l2)
    row = report.rows[worst]
    pts = eval_grid(pde, tuple(cfg.eval.grid))
    c, _ = online_train(init_coeffs(row.mu, model), model, row.mu, cfg.online_config())
    err = np.abs(gpt_predict(c, model, pts) - mlp_forward_batch(refs[worst].params, pts))
    reports.write_pointwise_error(out / "pointwise_error.csv", pts, err)
    _write_run_meta(out, cfg, "eval", {
        "worst_rel_l2": report.worst_rel_l2, "worst_max_abs": report.worst_max_abs,
    })
    return 0


def cmd_bench(args):
    model = archive.load_model(args.model)
    cfg = load_config(args.config)
    pde = cfg.pde_definition()
    queries = pde.domain.sample(max(1, cfg.eval.n_test), seed=cfg.eval.seed)
    curve = timing_benchmark(model, pde, queries, cfg.train_config(),
                             cfg.online_config(), _colloc(cfg, pde))
    out = Path(args.out)
    reports.write_timing(out / "timing.csv", curve)
    _write_run_meta(out, cfg, "bench", {
        "marginal_ratio": curve.marginal_ratio,
        "breakeven": curve.breakeven,
        "offline_total_s": curve.offline_total,
    })
    return 0


def cmd_svd(args):
    cfg = load_config(args.config)
    pde = cfg.pde_definition()
    n = cfg.eval.svd_snapshots or 30
    mus = pde.domain.sample(n, seed=cfg.eval.seed)
    colloc = _colloc(cfg, pde)
    pts = eval_grid(pde, tuple(cfg.eval.grid))
    solutions, thetas = [], []
    for i, mu in enumerate(mus):
        pinn = train_sa_pinn(pde, mu, cfg.train_config(), seed=cfg.eval.seed + i, colloc=colloc)
        solutions.append(mlp_forward_batch(pinn.params, pts))
        thetas.append(pinn.params.flat())
    out = Path(args.out)
    reports.write_svd(out / "svd.csv", [
        (svd_decay_report(np.column_stack(solutions)), "solution-snapshots"),
        (svd_decay_report(np.column_stack(thetas)), "weight-snapshots"),
    ])
    _write_run_meta(out, cfg, "svd", {"n_snapshots": int(n)})
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="metapinn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-full", help="train one full network")
    p.add_argument("--config", required=True)
    p.add_argument("--mu", required=True, help="comma-separated parameter value")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_full)

    p = sub.add_parser("offline", help="greedy offline stage")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_offline)

    p = sub.add_parser("online", help="coefficient solve at one parameter")
    p.add_argument("--model", required=True)
    p.add_argument("--mu", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_online)

    p = sub.add_parser("eval", help="test-set error report")
    p.add_argument("--model", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="per-query runtime comparison")
    p.add_argument("--model", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("svd", help="snapshot singular-value decay diagnostic")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_svd)
    return parser


def cli_dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli_dispatch(sys.argv[1:]))
