"""
Command-line front end.

Subcommands: ``run``, ``synth``, ``sweep {kbest,factors,fs}``, ``fit`` and
``predict``. Exit codes: 0 ok, 2 configuration error, 3 data error,
4 numerical failure. The log level comes from ``RFA_LOG_LEVEL``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import build_dataset, load_config
from .data import save_long_csv, save_outcome_csv, save_wide_csv
from .errors import (
    ConfigError,
    DataFormatError,
    DegenerateInputError,
    DimensionError,
    IllConditionedError,
)
from .experiments import FoldPlan, compare_fs_strategies, run_cv, sweep_factors, sweep_kbest
from .pipelines import FAMILIES, FittedModel, fit_model
from .synthetic import SyntheticSpec, generate_synthetic

log = logging.getLogger("rfa")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

_DEFAULT_FAMILIES = {"kbest": ("fa", "rfa"), "factors": ("rc", "fa", "rfa"), "fs": ("rfa",)}


class _Fail(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _families(text):
    fams = tuple(f.strip() for f in text.split(",") if f.strip())
    bad = [f for f in fams if f not in FAMILIES]
    if bad or not fams:
        raise argparse.ArgumentTypeError(f"families must be a comma list drawn from {FAMILIES}")
    return fams


def _load(args, require_outcome=True):
    """Config (with CLI overrides) and dataset, mapping failures to exit codes."""
    try:
        cfg = load_config(args.config)
        cfg = cfg.with_overrides(seed=args.seed, families=getattr(args, "families", None))
        models = cfg.model_configs()
    except ConfigError as e:
        raise _Fail(EXIT_CONFIG, str(e)) from None
    except ValueError as e:
        raise _Fail(EXIT_CONFIG, f"model: {e}") from None
    try:
        d = build_dataset(cfg, require_outcome=require_outcome)
    except (OSError, DataFormatError, DimensionError, DegenerateInputError, ValueError) as e:
        raise _Fail(EXIT_DATA, _describe(e)) from None
    log.info("dataset: %d instances, groups %s, %d factors", d.n_instances,
             [t.group for t in d.language], d.factors.values.shape[1])
    for source, n in d.dropped:
        if n:
            log.info("align dropped %d ids from %s", n, source)
    return cfg, models, d


def _describe(e):
    if isinstance(e, OSError) and e.filename is not None:
        return f"{e.filename}: {e.strerror}"
    return str(e)


def _plan(cfg, d):
    try:
        return FoldPlan.make(d.instance_ids, cfg.folds, cfg.seed)
    except (DimensionError, ValueError) as e:
        raise _Fail(EXIT_DATA, str(e)) from None


def _write_report(report, cfg, out):
    report.config["run"] = cfg.raw
    report.write(out)
    log.info("wrote %s", Path(out) / "report.json")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_run(args):
    cfg, models, d = _load(args)
    report = run_cv(d, models, _plan(cfg, d), jobs=args.jobs, pairs=cfg.pairs)
    _write_report(report, cfg, args.out)
    sys.stdout.write(report.table())
    return EXIT_OK


def cmd_sweep(args):
    cfg, _, d = _load(args)
    sw = cfg.sweep
    fams = tuple(getattr(args, "families", None) or sw.get("families")
                 or _DEFAULT_FAMILIES[args.kind])
    base = cfg.model_config("rfa")
    plan = _plan(cfg, d)
    if args.kind == "kbest":
        group = sw.get("group", "ngrams")
        width = d.group(group).values.shape[1]
        ks = sw.get("ks") or _kbest_grid(base.n_components, width)
        report = sweep_kbest(d, ks, fams, base, plan, group=group, jobs=args.jobs)
    elif args.kind == "factors":
        report = sweep_factors(d, sw.get("factor_method", "pca"), sw.get("factor_counts"), fams,
                               sw.get("use_interactions", False), base, plan, jobs=args.jobs)
    else:
        kw = {"strategies": tuple(sw["strategies"])} if "strategies" in sw else {}
        report = compare_fs_strategies(d, fams, base, plan, jobs=args.jobs, **kw)
    _write_report(report, cfg, args.out)
    sys.stdout.write(report.table())
    return EXIT_OK


def _kbest_grid(start, width, n=6):
    """Roughly even grid of k values from `start` to the group width."""
    start = min(start, width)
    return sorted({int(round(k)) for k in np.linspace(start, width, n)})


def cmd_fit(args):
    cfg, models, d = _load(args)
    if len(models) != 1:
        raise _Fail(EXIT_CONFIG, "families: fit needs exactly one family (use --families)")
    model = fit_model(d, models[0])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model.json")
    log.info("wrote %s", out / "model.json")
    return EXIT_OK


def cmd_predict(args):
    try:
        model = FittedModel.load(args.model)
    except OSError as e:
        raise _Fail(EXIT_DATA, _describe(e)) from None
    except (ValueError, KeyError) as e:
        raise _Fail(EXIT_DATA, f"{args.model}: not a model file ({e})") from None
    cfg, _, d = _load(args, require_outcome=False)
    if model.design is not None:
        # features a table lacks are zero by the long-format convention
        lang = [t.reindex(model.design.group_names[t.group])
                if t.group in model.design.group_names else t for t in d.language]
        d = d.with_language(lang)
    try:
        pred = model.predict(d)
    except DimensionError as e:
        raise _Fail(EXIT_DATA, str(e)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "predictions.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group_id", "prediction"])
        for gid, p in zip(d.instance_ids, pred):
            w.writerow([gid, repr(float(p))])
    log.info("wrote %s", out / "predictions.csv")
    return EXIT_OK


def _toml_str(s):
    return json.dumps(str(s))


def cmd_synth(args):
    try:
        if args.config is not None:
            cfg = load_config(args.config)
            if "synthetic" not in cfg.raw:
                raise ConfigError("synthetic: section required for synth")
            spec = cfg.synthetic_spec()
        else:
            spec = SyntheticSpec()
    except ConfigError as e:
        raise _Fail(EXIT_CONFIG, str(e)) from None
    if args.seed is not None:
        spec = spec.with_seed(args.seed)
    d = generate_synthetic(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lang = {}
    for t in d.language:
        save_long_csv(t, out / f"{t.group}.csv")
        lang[t.group] = f"{t.group}.csv"
    save_wide_csv(d.factors, out / "factors.csv")
    save_outcome_csv(d.outcome, out / "outcome.csv")
    save_outcome_csv(d.metadata["word_counts"], out / "wordcounts.csv")
    meta = {
        "schema": "rfa.synthetic/1",
        "spec": spec.to_dict(),
        "factor_names": list(d.factors.feature_names),
        "beta": d.metadata["beta"].tolist(),
        "gamma": d.metadata["gamma"].tolist(),
        "delta": d.metadata["delta"].tolist(),
    }
    (out / "metadata.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    lines = ["seed = 0", "folds = 10", "", "[data]", 'factors = "factors.csv"',
             'outcome = "outcome.csv"', 'wordcounts = "wordcounts.csv"', "", "[data.language]"]
    lines += [f"{g} = {_toml_str(p)}" for g, p in lang.items()]
    (out / "run.toml").write_text("\n".join(lines) + "\n")
    log.info("wrote synthetic dataset (%d instances) to %s", d.n_instances, out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="rfa", description="Residualized factor adaptation models.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True, families=True):
        sp.add_argument("--config", required=config_required, help="TOML run configuration")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, help="override the configured seed")
        sp.add_argument("--jobs", type=int, default=1, help="worker threads (default 1)")
        if families:
            sp.add_argument("--families", type=_families,
                            help="comma list overriding the configured families")

    common(sub.add_parser("run", help="cross-validate the configured families"))
    sw = sub.add_parser("sweep", help="k-best, factor-count or feature-selection sweep")
    sw.add_argument("kind", choices=("kbest", "factors", "fs"))
    common(sw)
    common(sub.add_parser("fit", help="fit one family on all rows and save model.json"))
    pr = sub.add_parser("predict", help="predict with a saved model")
    pr.add_argument("--model", required=True, help="model.json written by fit")
    common(pr, families=False)
    common(sub.add_parser("synth", help="write a synthetic benchmark as CSV files"),
           config_required=False, families=False)
    return p


_COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "fit": cmd_fit, "predict": cmd_predict,
             "synth": cmd_synth}


def main(argv=None):
    level = os.environ.get("RFA_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("rfa: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](args)
    except _Fail as e:
        print(f"rfa: error: {e}", file=sys.stderr)
        return e.code
    except ConfigError as e:
        print(f"rfa: error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (IllConditionedError, DegenerateInputError, ArithmeticError,
            np.linalg.LinAlgError) as e:
        print(f"rfa: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataFormatError, DimensionError, OSError) as e:
        print(f"rfa: error: {_describe(e)}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
