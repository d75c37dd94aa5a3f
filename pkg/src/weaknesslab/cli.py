"""``weaknesslab`` command line.

Every subcommand takes the ExperimentConfig fields as flags (``--n-train 250``,
``--widths 64,8``, ``--no-measure-hessian``), optionally seeded from
``--config file.json``; explicit flags win over the file.

Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import typing
from pathlib import Path

from . import data_io, fcv, harness, mlp, reparam, stats

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

BETAS = (1.0, 2.0, 5.0, 10.0, 20.0)
GAMMAS = (1.0, 5.0, 20.0)


def _tuple_of(kind):
    def parse(text):
        try:
            return tuple(kind(t) for t in text.split(",") if t.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected comma separated values, got {text!r}") from None
    return parse


def _optional(kind):
    def parse(text):
        return None if text.lower() in ("none", "") else kind(text)
    return parse


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("experiment config")
    g.add_argument("--config", help="JSON config file (schema_version 1)")
    g.add_argument("--data-dir", help=f"dataset root (default ${data_io.DATA_DIR_ENV})")
    hints = typing.get_type_hints(harness.ExperimentConfig)
    for f in dataclasses.fields(harness.ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        hint = hints[f.name]
        if f.name == "widths":
            g.add_argument(flag, type=_tuple_of(int), default=None, metavar="H1,H2")
        elif f.name == "margin_sweep":
            g.add_argument(flag, type=_tuple_of(float), default=None, metavar="E1,E2,...")
        elif hint is bool:
            g.add_argument(flag, action=argparse.BooleanOptionalAction, default=None)
        else:
            args = [a for a in typing.get_args(hint) if a is not type(None)]
            kind = args[0] if args else hint
            g.add_argument(flag, type=_optional(kind) if args else kind, default=None)


def build_config(ns) -> harness.ExperimentConfig:
    base = harness.ExperimentConfig.load(ns.config).to_json() if ns.config else {}
    for f in dataclasses.fields(harness.ExperimentConfig):
        v = getattr(ns, f.name, None)
        if v is not None:
            base[f.name] = list(v) if isinstance(v, tuple) else v
    return harness.ExperimentConfig.from_json(base)


def _print_progress(rec) -> None:
    tail = "" if rec["status"] == "ok" else f" ({rec['error']})"
    print(f"net {rec['index']:4d}  {rec['status']}  train={rec['train_acc']}  test={rec['test_acc']}{tail}",
          file=sys.stderr)


def _pool(ns, stages):
    cfg = build_config(ns)
    recs = harness.run_pool(cfg, ns.data_dir, stages, ns.workers, _print_progress)
    ok = sum(r["status"] == "ok" for r in recs)
    print(f"{ok}/{len(recs)} networks ok; records in {cfg.output_dir}")
    return EXIT_OK


def cmd_train_pool(ns):
    return _pool(ns, ("train",))


def cmd_measure(ns):
    return _pool(ns, ("train", "measure", "agreement"))


def cmd_pairproxy(ns):
    return _pool(ns, ("train", "pairproxy"))


def cmd_reparam_test(ns):
    cfg = build_config(ns)
    root = data_io.data_dir(ns.data_dir)
    data = harness.pool_data(cfg, harness._corpus(cfg.dataset, root))
    seed = harness.mix_seed(cfg.master_seed, ns.index)
    tc = mlp.TrainConfig(widths=cfg.widths, batch_size=cfg.batch_size, learning_rate=harness.learning_rate(cfg, seed),
                         max_epochs=cfg.max_epochs, target_train_accuracy=cfg.target_train_accuracy, seed=seed)
    params, _ = mlp.train(tc, data.train_x, data.train_y)
    n_eval = min(ns.n_eval, len(data.test_y))
    test = (data.test_x[:n_eval], data.test_y[:n_eval])
    specs = [reparam.ReparamSpec("beta", b) for b in BETAS] + [reparam.ReparamSpec("gamma", g) for g in GAMMAS]
    rows = reparam.invariance_report(params, specs, (data.train_x, data.train_y), test, test,
                                     n_probes=cfg.hessian_probes, probe_seed=cfg.hessian_seed)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    reparam.write_report_csv(rows, out / "reparam.csv")
    for spec, row in zip(specs, rows):
        agree = reparam.prediction_agreement(params, reparam.apply(spec, params), test[0])
        print(f"{row.kind}={row.value:g}  hessian={row.hessian:.6g}  l1={row.l1}  l2={row.l2}  agree={agree:.4f}")
    print(f"wrote {out / 'reparam.csv'}")
    return EXIT_OK


def cmd_cross_regime(ns):
    base = build_config(ns)
    rows = []
    for n in ns.scales:
        small, large = harness.regime_configs(base, n, ns.networks_per_regime)
        rs = harness.run_pool(small, ns.data_dir, ("train", "measure"), ns.workers, _print_progress)
        rl = harness.run_pool(large, ns.data_dir, ("train", "measure"), ns.workers, _print_progress)
        if base.min_train_accuracy is not None:
            rs = harness.filter_records(rs, base.min_train_accuracy)
            rl = harness.filter_records(rl, base.min_train_accuracy)
        rows.append(harness.cross_regime(rs, rl, n))
    text = harness.cross_regime_csv(rows)
    out = Path(base.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "cross_regime.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _run_dir_records(ns):
    cfg = build_config(ns)
    run_dir = ns.run_dir or cfg.output_dir
    recs = harness.load_records(run_dir)
    return cfg, run_dir, recs


def cmd_correlate(ns):
    cfg, _, recs = _run_dir_records(ns)
    kept = harness.filter_records(recs, cfg.min_train_accuracy)
    measures = ns.measure or harness.MEASURES
    rows = [harness.correlate(kept, m, ns.method) for m in measures] if ns.measure \
        else harness.correlation_table(kept, measures, ns.method)
    sys.stdout.write(harness.correlation_csv(rows))
    return EXIT_OK


def cmd_report(ns):
    cfg, run_dir, recs = _run_dir_records(ns)
    out = ns.out or str(Path(run_dir) / "report")
    summary = harness.report(recs, out, cfg.min_train_accuracy, ns.method)
    print(json.dumps(summary["correlations"], indent=1))
    print(f"report written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weaknesslab", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        _add_config_flags(p)
        p.set_defaults(fn=fn)
        return p

    for name, fn, help_ in (("train-pool", cmd_train_pool, "train a pool and record accuracies"),
                            ("measure", cmd_measure, "Hessian, norms, regions and ensemble agreement"),
                            ("pairproxy", cmd_pairproxy, "feature-classifier pair proxy per network")):
        add(name, fn, help_).add_argument("--workers", type=int, default=1)
    p = add("reparam-test", cmd_reparam_test, "rescale one trained network and compare measures")
    p.add_argument("--index", type=int, default=0, help="pool index whose seed trains the network")
    p.add_argument("--n-eval", type=int, default=1000, help="test points for predictions and pattern counts")
    p = add("cross-regime", cmd_cross_regime, "small- vs full-batch pools on 784-256-128-10")
    p.add_argument("--scales", type=_tuple_of(int), default=(500, 2000))
    p.add_argument("--networks-per-regime", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    for name, fn, help_ in (("correlate", cmd_correlate, "Spearman of measures against test accuracy"),
                            ("report", cmd_report, "CSV tables, JSON summary and scatter data")):
        p = add(name, fn, help_)
        p.add_argument("--run-dir", help="run directory (default: the config's output_dir)")
        p.add_argument("--method", choices=(stats.T_APPROX, stats.PERMUTATION), default=stats.T_APPROX)
        if name == "correlate":
            p.add_argument("--measure", action="append", choices=harness.MEASURES)
        else:
            p.add_argument("--out", help="output directory (default <run-dir>/report)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.fn(ns)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (harness.DataError, harness.ReportError, data_io.FormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (mlp.NumericError, mlp.TrainingError, fcv.SolverError, fcv.DegeneratePolicyError,
            ArithmeticError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
