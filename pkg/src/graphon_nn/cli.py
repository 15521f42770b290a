"""Command-line entry point.

Every command reads a flat ``key = value`` config (see :mod:`.config`);
``--set key=value`` overrides any key and ``--seed`` overrides ``seed``.
Exit codes: 0 success, 1 a check failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import propositions as props
from .config import Config, ConfigError, apply_overrides, load_config
from .filters import make_banded_ramp
from .gnn import random_banded_params, save_params
from .graphon import GRAPHON_FAMILIES, SIGNAL_FAMILIES, graphon_family, sample_graph, signal_family
from .spectral import decompose_graph, decompose_graphon, spectrum_rows, write_spectra_csv
from .svg import Series, write_chart
from .training import (
    LOG_COLUMNS,
    TrainConfig,
    consensus_graph,
    consensus_sweep,
    gen_consensus,
    scaled_split,
    summarize,
    train_consensus,
    trend_holds,
)
from .transferability import (
    AssumptionError,
    theorem1_bound,
    theorem4_bound,
    transfer_sweep,
    write_bounds_csv,
)

log = logging.getLogger("graphon_nn")

OUT_ENV = "GRAPHON_NN_OUT"
COMMANDS = ("verify-propositions", "bounds", "consensus", "spectra", "train")
POWERS_4_512 = "4, 8, 16, 32, 64, 128, 256, 512"


class CheckFailed(Exception):
    pass


# ---------------------------------------------------------------------------
# Config helpers
# ---------------------------------------------------------------------------


def _family_params(cfg: Config, prefix: str, reserved) -> dict:
    out = {}
    for key in list(cfg.values):
        if key.startswith(prefix) and key[len(prefix):] not in reserved:
            out[key[len(prefix):]] = cfg.float(key)
    return out


def _graphon(cfg: Config, key="graphon.family", default="product"):
    name = cfg.str(key, default, choices=GRAPHON_FAMILIES)
    params = _family_params(cfg, "graphon.", {"family", "families", "A1"})
    try:
        return graphon_family(name, **params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"graphon {name!r}: {exc}") from None


def _signal(cfg: Config, default="linear"):
    name = cfg.str("signal.family", default, choices=SIGNAL_FAMILIES)
    params = _family_params(cfg, "signal.", {"family", "families", "A3"})
    try:
        return signal_family(name, **params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"signal {name!r}: {exc}") from None


def _train_config(cfg: Config) -> TrainConfig:
    batch = cfg.str("train.batch", "64")
    try:
        return TrainConfig(lr=cfg.float("train.lr", 1e-3), beta1=cfg.float("train.beta1", 0.9),
                           beta2=cfg.float("train.beta2", 0.999),
                           epochs=cfg.int("train.epochs", 40, minimum=0),
                           batch=None if batch == "full" else int(batch),
                           seed=cfg.int("seed", 0),
                           rrmse_selection=cfg.bool("train.rrmse_selection", True))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# Commands: each returns a runner after reading (and validating) its keys
# ---------------------------------------------------------------------------


def plan_verify_propositions(cfg: Config, out: Path, jobs: int):
    families = cfg.list("graphon.families", "product, gaussian, min")
    signals = cfg.list("signal.families", "linear, sine, tent")
    sizes = cfg.sizes("sizes", POWERS_4_512, minimum=1)
    a1 = cfg.optional_float("graphon.A1")
    a3 = cfg.optional_float("signal.A3")
    pairs = cfg.int("perturbation.pairs", 200, minimum=0)
    max_n = cfg.int("perturbation.max_n", 64, minimum=1)
    seed = cfg.int("seed", 0)
    for f in families:
        if f not in GRAPHON_FAMILIES:
            raise ConfigError(f"unknown graphon family {f!r}")
        if graphon_family(f).lipschitz is None:
            raise ConfigError(f"graphon family {f!r} is not Lipschitz; no discretization bound")
    for s in signals:
        if s not in SIGNAL_FAMILIES:
            raise ConfigError(f"unknown signal family {s!r}")

    def run():
        rows = []
        for f in families:
            rows += props.graphon_discretization(graphon_family(f), sizes, a1)
        for s in signals:
            rows += props.signal_discretization(signal_family(s), sizes, a3)
        rows += props.eigenvalue_perturbation(np.random.default_rng(seed), pairs, max_n)
        props.write_rows(out / "propositions.csv", rows)
        failed = [r for r in rows if not r["passed"]]
        for check in ("graphon-discretization", "signal-discretization",
                      "eigenvalue-perturbation"):
            sub = [r for r in rows if r["check"] == check]
            bad = sum(not r["passed"] for r in sub)
            print(f"{check}: {len(sub) - bad}/{len(sub)} passed")
        if failed:
            raise CheckFailed(f"{len(failed)} proposition checks failed")
    return run


def plan_bounds(cfg: Config, out: Path, jobs: int):
    W = _graphon(cfg)
    if W.lipschitz is None:
        raise ConfigError(f"graphon {W.name!r} is not Lipschitz; "
                          "the bounds do not apply")
    X = _signal(cfg)
    c = cfg.float("filter.c", 0.1, lo=1e-12, hi=1.0)
    L = cfg.int("arch.L", 2, minimum=1)
    F = cfg.int("arch.F", 3, minimum=1)
    act = cfg.str("arch.activation", "relu", choices=("relu", "tanh", "identity"))
    sizes = sorted(cfg.sizes("sizes", "64, 128, 256, 512, 1024"))
    ref = cfg.int("reference", 2048, minimum=2)
    theorems = cfg.list("theorems", "t1, t2, t4")
    trunc = cfg.int("truncation_m", 1024, minimum=2)
    seed = cfg.int("seed", 0)
    for t in theorems:
        if t not in ("t1", "t2", "t4"):
            raise ConfigError(f"unknown theorem {t!r} (use t1, t2, t4)")

    def run():
        rng = np.random.default_rng(seed)
        H = random_banded_params(rng, L, F, c, act)
        save_params(out / "params.txt", H)
        plateau, end = rng.uniform(-0.95, 0.95, size=2)
        f4 = make_banded_ramp(c, plateau, (end - plateau) / (1 - c) if c < 1 else 0.0)
        W_spec = decompose_graphon(W, trunc, check_c=c)
        reports, fit = [], None
        if "t1" in theorems:
            reports += [theorem1_bound(H, W, X, n, W_spec=W_spec) for n in sizes]
        if "t4" in theorems:
            reports += [theorem4_bound(f4, W, X, n, W_spec=W_spec) for n in sizes]
        if "t2" in theorems:
            sweep = transfer_sweep(H, W, X, sizes, ref, truncation_m=trunc, W_spec=W_spec)
            reports += sweep.reports
            fit = sweep.fit
            for note in sweep.notes:
                print(note)
        write_bounds_csv(out / "bounds.csv", reports)
        series = []
        for th in ("t1-approximation", "t2-transfer", "t4-convolution"):
            rs = [r for r in reports if r.theorem == th]
            if rs:
                xs = [r.sizes[0] for r in rs]
                series.append(Series(f"{th} error", xs, [r.empirical_error for r in rs]))
                series.append(Series(f"{th} bound", xs, [r.bound_value for r in rs], dashed=True))
        write_chart(out / "bounds.svg", series, title=f"{W.name} / {getattr(X, 'name', '')}",
                    xlabel="n", ylabel="L2 error", logx=True, logy=True)
        if fit is not None:
            print(f"rate fit: slope {fit.slope:.3f} (r2 {fit.r2:.3f})")
        bad = [r for r in reports if not r.satisfied]
        print(f"bounds: {len(reports) - len(bad)}/{len(reports)} satisfied")
        if bad:
            raise CheckFailed(f"{len(bad)} bound evaluations violated")
    return run


def _arch_grid(cfg: Config):
    Fs = cfg.list("arch.F", "8", int)
    Ks = cfg.list("arch.K", "4", int)
    Ls = cfg.list("arch.L", "1", int)
    if min(Fs + Ks + Ls) < 1:
        raise ConfigError("architecture values must be positive")
    return [(F, K, L) for F in Fs for K in Ks for L in Ls]


def plan_consensus(cfg: Config, out: Path, jobs: int):
    archs = _arch_grid(cfg)
    sizes = sorted(cfg.sizes("sizes", "50, 250, 500"))
    N = cfg.int("N", 1000, minimum=2)
    graphs = cfg.int("realizations.graph", 3, minimum=1)
    data = cfg.int("realizations.data", 3, minimum=1)
    scale = cfg.float("split.scale", 0.25, lo=1e-9)
    sampling = cfg.str("graph.sampling", "stochastic", choices=("stochastic", "deterministic"))
    check = cfg.bool("check.trend", False)
    tcfg = _train_config(cfg)

    def run():
        rows, series, ok = [], [], True
        for arch in archs:
            trials = consensus_sweep(arch, sizes, N, tcfg, graphs, data, scale, sampling, jobs)
            F, K, L = arch
            rows += [{"F": F, "K": K, "L": L, **asdict(t)} for t in trials]
            summ = summarize(trials)
            means = [summ[n][0] for n in sizes]
            trend = trend_holds(means) if len(means) > 1 else True
            ok &= trend
            print(f"F={F} K={K} L={L}: " + ", ".join(
                f"n={n} {summ[n][0]:.4f}+-{summ[n][1]:.4f}" for n in sizes)
                + f"; decreasing trend {'holds' if trend else 'fails'}")
            series.append(Series(f"F={F} K={K} L={L}", sizes, means, [summ[n][1] for n in sizes]))
        _write_csv(out / "consensus.csv", ("F", "K", "L", "n", "graph", "data", "rrmse_n",
                                           "rrmse_N", "relative_difference"), rows)
        write_chart(out / "consensus.svg", series, title=f"relative rRMSE difference, N={N}",
                    xlabel="n", ylabel="relative difference")
        if check and not ok:
            raise CheckFailed("relative rRMSE difference is not decreasing in n")
    return run


def plan_spectra(cfg: Config, out: Path, jobs: int):
    W = _graphon(cfg, default="sbm")
    sizes = sorted(cfg.sizes("sizes", "8, 16, 32, 64, 128, 256, 512", minimum=1))
    limit = cfg.int("limit", 8, minimum=1)
    trunc = cfg.int("truncation_m", 1024, minimum=2)

    def run():
        rows = spectrum_rows(decompose_graphon(W, trunc), None, limit)
        for n in sizes:
            spec = decompose_graph(sample_graph(W, n).with_normalization("adjacency-over-n"))
            rows += spectrum_rows(spec, n, limit)
            print(f"n={n}: lambda_1 = {spec.value(1):.6f}")
        write_spectra_csv(out / "spectra.csv", rows)
    return run


def plan_train(cfg: Config, out: Path, jobs: int):
    arch = (cfg.int("arch.F", 8, minimum=1), cfg.int("arch.K", 4, minimum=1),
            cfg.int("arch.L", 1, minimum=1))
    n = cfg.int("n", 50, minimum=2)
    scale = cfg.float("split.scale", 0.25, lo=1e-9)
    sampling = cfg.str("graph.sampling", "deterministic", choices=("stochastic", "deterministic"))
    tcfg = _train_config(cfg)

    def run():
        S = consensus_graph(n, sampling, tcfg.seed)
        ds = gen_consensus(n, scaled_split(scale), tcfg.seed)
        res = train_consensus(arch, n, tcfg, dataset=ds, S=S)
        _write_csv(out / "train_log.csv", LOG_COLUMNS,
                   [{k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in r.items()}
                    for r in res.log])
        save_params(out / "model.txt", res.params)
        first, best = res.log[0], res.log[res.best_epoch]
        print(f"val rRMSE {first['val_rrmse']:.4f} -> {best['val_rrmse']:.4f} "
              f"(best epoch {res.best_epoch})")
    return run


PLANS = {"verify-propositions": plan_verify_propositions, "bounds": plan_bounds,
         "consensus": plan_consensus, "spectra": plan_spectra, "train": plan_train}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="graphon-nn", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./results)")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--jobs", type=int, default=1, help="parallel trials (consensus)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        values = load_config(args.config) if args.config else {}
        values = apply_overrides(values, args.set)
        if args.seed is not None:
            values["seed"] = str(args.seed)
        if args.jobs < 1:
            raise ConfigError("--jobs must be positive")
        cfg = Config(values)
        out = Path(args.out or os.environ.get(OUT_ENV) or "results")
        run = PLANS[args.command](cfg, out, args.jobs)
        unknown = cfg.unused()
        if unknown:
            raise ConfigError(f"unknown keys for {args.command}: {', '.join(unknown)}")
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out}: {exc}") from None
        with open(out / "run_config.txt", "w") as fh:
            fh.write(f"# {args.command}\n")
            fh.writelines(f"{k} = {cfg.values[k]}\n" for k in sorted(cfg.values))
        run()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AssumptionError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
