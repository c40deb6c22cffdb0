"""Command-line interface: ``kddselect {gain,select,eval,experiment,synth}``."""

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .dataset import (
    RANDOM_SPLIT, TWO_FILES, Category, SplitSpec, corrected_extension, is_canonical_header,
    min_max_stats, normalize, parse_kdd_file, read_dataset, read_extension_table, sample,
    split, write_dataset, write_kdd_file,
)
from .entropy import EQUAL_FREQUENCY, EQUAL_WIDTH, DiscretizationSpec, build_gain_table
from .knn import EUCLIDEAN, INVERSE_DISTANCE, MANHATTAN, UNIFORM, KnnConfig, evaluate
from .report import (
    DEFAULT_SIZES, EVAL_HOLDOUT, EVAL_MODES, EVAL_TEST, EVAL_TRAIN, ExperimentPlan,
    SyntheticSpec, emit_comparison, emit_gain_report, generate_synthetic, run_experiment,
    synthetic_dictionary, write_document,
)
from .wrapper import ASCENDING, DESCENDING, WrapperConfig, compare_full_vs_selected, select_features

log = logging.getLogger("kddselect")

DATA_DIR_ENV = "KDDSELECT_DATA_DIR"


class UsageError(Exception):
    pass


class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    def _get_help_string(self, action):
        if "(default:" in (action.help or ""):
            return action.help
        return super()._get_help_string(action)


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _non_negative(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return value


# ---------------------------------------------------------------------------
#  Parser
# ---------------------------------------------------------------------------

def _data_flags(test=True, sample_size=True):
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("data")
    g.add_argument("--train", required=True, metavar="PATH",
                   help=f"training records (KDD format or canonical CSV); relative paths also "
                        f"resolve against ${DATA_DIR_ENV}")
    if test:
        g.add_argument("--test", metavar="PATH", default=None, help="separate test records (default: none)")
    if sample_size:
        g.add_argument("--sample-size", type=_positive, default=None,
                       help="draw this many training records at random before anything else")
    g.add_argument("--seed", type=_non_negative, default=0, help="seed for every random choice")
    g.add_argument("--label-mode", choices=["strict", "permissive"], default="strict",
                   help="strict: unknown attack names are an error; permissive: map them to "
                        "--fallback-category")
    g.add_argument("--fallback-category", default="R2L", choices=[c.label for c in Category],
                   help="category for unknown attack names in permissive mode")
    g.add_argument("--extension", metavar="PATH|corrected", default=None,
                   help="extra attack_name,category table; 'corrected' loads the bundled table "
                        "for the corrected test file (default: none)")
    g.add_argument("--normalize", action="store_true",
                   help="min-max scale features using training-set statistics")
    g.add_argument("--threads", type=_positive, default=1,
                   help="worker threads (outputs do not depend on it)")
    return p


def _disc_flags():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("discretization")
    g.add_argument("--discretization", choices=[EQUAL_FREQUENCY, EQUAL_WIDTH], default=EQUAL_FREQUENCY,
                   help="binning of continuous features for the gain computation")
    g.add_argument("--bins", type=int, default=10, help="bins per continuous feature")
    return p


def _knn_flags():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("knn")
    g.add_argument("--k", type=_positive, default=10, help="neighbours per vote")
    g.add_argument("--metric", choices=[EUCLIDEAN, MANHATTAN], default=EUCLIDEAN, help="distance")
    g.add_argument("--weighting", choices=[UNIFORM, INVERSE_DISTANCE], default=UNIFORM,
                   help="neighbour vote weighting")
    return p


def _wrapper_flags():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("wrapper")
    g.add_argument("--wrapper-eval", choices=list(EVAL_MODES), default=EVAL_HOLDOUT,
                   help="where candidate subsets are scored: holdout part of the training data, "
                        "the test file, or the training data itself")
    g.add_argument("--holdout-fraction", type=float, default=0.3,
                   help="share of training rows held out for scoring in holdout mode")
    g.add_argument("--order", choices=[DESCENDING, ASCENDING], default=DESCENDING,
                   help="gain order in which candidates are tried")
    g.add_argument("--epsilon", type=float, default=0.0,
                   help="minimum accuracy improvement for accepting a candidate")
    g.add_argument("--max-features", type=_positive, default=None, help="cap on selected features (default: no cap)")
    g.add_argument("--patience", type=_positive, default=None,
                   help="stop after this many consecutive rejections (default: never)")
    return p


def build_parser():
    fmt = _HelpFormatter
    parser = argparse.ArgumentParser(
        prog="kddselect", formatter_class=fmt,
        description="Information-gain filter and KNN wrapper feature selection for KDD Cup 99 records.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("gain", formatter_class=fmt, parents=[_data_flags(test=False), _disc_flags()],
                       help="rank features by information gain")
    p.add_argument("--out", default="-", help="gain CSV, feature order ('-' for stdout)")
    p.add_argument("--ranking-out", default=None, help="same table in rank order (default: not written)")

    p = sub.add_parser("select", formatter_class=fmt,
                       parents=[_data_flags(), _disc_flags(), _knn_flags(), _wrapper_flags()],
                       help="run the filter and the wrapper; print the selected features")
    p.add_argument("--out", default=None, help="selection trace as JSON (default: not written)")
    p.add_argument("--log", action="store_true", help="print the step log to stderr")

    p = sub.add_parser("eval", formatter_class=fmt, parents=[_data_flags(), _knn_flags()],
                       help="KNN accuracy of a feature subset")
    p.add_argument("--split", choices=[TWO_FILES, RANDOM_SPLIT], default=None,
                   help="two-files needs --test; random-split divides --train "
                        "(default: two-files when --test is given, else random-split)")
    p.add_argument("--train-fraction", type=float, default=0.7, help="train share in random-split mode")
    p.add_argument("--features", type=_int_list, default=None,
                   help="comma-separated 1-based feature indices (default: all)")
    p.add_argument("--out", default=None, help="evaluation report as JSON (default: stdout)")
    p.add_argument("--csv", action="store_true", help="print a one-line CSV row instead of JSON")
    p.add_argument("--timings", action="store_true", help="include wall-clock time in the report")

    p = sub.add_parser("experiment", formatter_class=fmt,
                       parents=[_data_flags(sample_size=False), _disc_flags(), _knn_flags(),
                                _wrapper_flags()],
                       help="size sweep comparing all features against the selected subset")
    p.add_argument("--sizes", type=_int_list, default=list(DEFAULT_SIZES), help="sample sizes")
    p.add_argument("--seeds", type=_int_list, default=None, help="seed list (default: the value of --seed)")
    p.add_argument("--test-size", type=_positive, default=None,
                   help="test rows drawn per cell when --test is given (default: the cell size, "
                        "capped by the test file)")
    p.add_argument("--train-fraction", type=float, default=0.7,
                   help="train share of each sample when no --test is given")
    p.add_argument("--plan", default=None, help="experiment plan JSON; replaces the plan flags (default: build the plan from flags)")
    p.add_argument("--out-dir", required=True,
                   help="directory for experiment.json, comparison.csv and plot.dat")
    p.add_argument("--timings", action="store_true", help="record per-cell wall-clock time")

    p = sub.add_parser("synth", formatter_class=fmt, help="write a synthetic labelled dataset")
    p.add_argument("--rows", type=_positive, default=2000, help="records")
    p.add_argument("--informative", type=_non_negative, default=3, help="class-dependent features")
    p.add_argument("--noise", type=_non_negative, default=7, help="class-independent features")
    p.add_argument("--proportions", type=_float_list, default=[0.2] * 5,
                   help="Normal,DOS,Probe,R2L,U2R shares")
    p.add_argument("--separation", type=float, default=4.0, help="class-mean spacing")
    p.add_argument("--noise-scale", type=float, default=2.0, help="noise feature spread")
    p.add_argument("--kdd-layout", action="store_true", help="41 columns with the KDD schema")
    p.add_argument("--format", choices=["canonical", "kdd"], default="canonical",
                   help="output format; kdd requires --kdd-layout")
    p.add_argument("--seed", type=_non_negative, default=0, help="generator seed")
    p.add_argument("--out", default="-", help="output file ('-' for stdout)")
    return parser


# ---------------------------------------------------------------------------
#  Helpers
# ---------------------------------------------------------------------------

def _resolve(path):
    p = Path(path)
    if p.exists():
        return p
    base = os.environ.get(DATA_DIR_ENV)
    if base and not p.is_absolute() and (Path(base) / p).exists():
        return Path(base) / p
    raise UsageError(f"no such file: {path}")


def _load(path, dictionary, args):
    path = _resolve(path)
    with open(path) as fh:
        first = fh.readline()
    if is_canonical_header(first):
        return read_dataset(path), dictionary
    extension = None
    if args.extension == "corrected":
        extension = corrected_extension()
    elif args.extension:
        extension = read_extension_table(_resolve(args.extension))
    fallback = Category.parse(args.fallback_category) if args.label_mode == "permissive" else None
    return parse_kdd_file(path, dictionary=dictionary, extension=extension, fallback=fallback)


def _load_pair(args, need_test=False):
    train, dictionary = _load(args.train, None, args)
    test = None
    if getattr(args, "test", None):
        test, _ = _load(args.test, dictionary, args)
        if test.schema != train.schema:
            raise UsageError("--train and --test have different feature layouts")
    elif need_test:
        raise UsageError("--test is required here")
    log.info("loaded %d training rows%s", len(train), f", {len(test)} test rows" if test is not None else "")
    return train, test


def _config(factory, *args, **kwargs):
    try:
        return factory(*args, **kwargs)
    except ValueError as exc:
        raise UsageError(str(exc))


def _disc(args):
    return _config(DiscretizationSpec, args.discretization, args.bins)


def _knn(args):
    return _config(KnnConfig, args.k, args.metric, args.weighting, args.threads)


def _wrapper(args):
    return _config(WrapperConfig, knn=_knn(args), max_features=args.max_features, epsilon=args.epsilon,
                   holdout_fraction=args.holdout_fraction, seed=args.seed, order=args.order,
                   patience=args.patience)


def _sink(path):
    return sys.stdout if path in (None, "-") else path


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ---------------------------------------------------------------------------
#  Commands
# ---------------------------------------------------------------------------

def cmd_gain(args):
    train, _ = _load_pair(args)
    if args.sample_size:
        train = sample(train, min(args.sample_size, len(train)), args.seed)
    gains = build_gain_table(train, _disc(args), args.threads)
    emit_gain_report(gains, _sink(args.out), args.ranking_out)


def cmd_select(args):
    train, test = _load_pair(args, need_test=args.wrapper_eval == EVAL_TEST)
    if args.sample_size:
        train = sample(train, min(args.sample_size, len(train)), args.seed)
    if args.normalize:
        stats = min_max_stats(train)
        train = normalize(train, stats)
        test = normalize(test, stats) if test is not None else None
    gains = build_gain_table(train, _disc(args), args.threads)
    validation = {EVAL_TEST: test, EVAL_TRAIN: train}.get(args.wrapper_eval)
    trace = select_features(train, gains, _wrapper(args), validation)
    if args.log:
        for line in trace.log_lines():
            print(line, file=sys.stderr)
    if args.out:
        doc = {"gains": gains.to_dict(), "trace": trace.to_dict()}
        if test is not None:
            doc["comparison"] = compare_full_vs_selected(train, test, trace, _wrapper(args)).to_dict(timing=False)
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(trace.subset_text())


def cmd_eval(args):
    mode = args.split or (TWO_FILES if args.test else RANDOM_SPLIT)
    if mode == RANDOM_SPLIT and args.test:
        raise UsageError("--test cannot be combined with --split random-split")
    if mode == TWO_FILES and not args.test:
        raise UsageError("--split two-files needs --test")
    spec = _config(SplitSpec, mode, args.train_fraction, args.seed, args.sample_size)
    data, test = _load_pair(args)
    train, test = split(data, spec, test)
    if args.normalize:
        stats = min_max_stats(train)
        train, test = normalize(train, stats), normalize(test, stats)
    subset = args.features or train.schema.indices
    report = evaluate(train, test, subset, _knn(args))
    if args.csv:
        _write_text(args.out, report.CSV_HEADER + "\n" + report.csv_row() + "\n")
    else:
        _write_text(args.out, report.to_json(timing=args.timings) + "\n")


def cmd_experiment(args):
    if args.plan:
        plan = ExperimentPlan.from_json(_resolve(args.plan).read_text())
    else:
        plan = _config(ExperimentPlan, sizes=args.sizes, seeds=args.seeds or [args.seed],
                       discretization=_disc(args), wrapper=_wrapper(args),
                       train_fraction=args.train_fraction, test_size=args.test_size,
                       eval_mode=args.wrapper_eval, normalize=args.normalize)
    if plan.eval_mode == EVAL_TEST and not args.test:
        raise UsageError("--wrapper-eval test needs --test")
    train, test = _load_pair(args)
    if args.threads > 1:
        plan = replace(plan, wrapper=replace(plan.wrapper, knn=replace(plan.knn, threads=args.threads)))
    doc = run_experiment(plan, train, test, timings=args.timings)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_document(doc, out / "experiment.json")
    emit_comparison(doc, out / "comparison.csv", out / "plot.dat")
    sys.stdout.write((out / "comparison.csv").read_text())
    failed = [c for c in doc["cells"] if c["status"] != "ok"]
    for c in failed:
        print(f"cell size={c['size']} seed={c['seed']} failed: {c['error']}", file=sys.stderr)


def cmd_synth(args):
    spec = _config(SyntheticSpec, args.rows, args.informative, args.noise, args.proportions, args.seed,
                   args.separation, args.noise_scale, args.kdd_layout)
    if args.format == "kdd" and not args.kdd_layout:
        raise UsageError("--format kdd needs --kdd-layout")
    ds = generate_synthetic(spec)
    if args.format == "kdd":
        if args.out in (None, "-"):
            raise UsageError("--format kdd needs --out")
        write_kdd_file(ds, args.out, synthetic_dictionary())
    else:
        write_dataset(ds, _sink(args.out))


COMMANDS = {
    "gain": cmd_gain,
    "select": cmd_select,
    "eval": cmd_eval,
    "experiment": cmd_experiment,
    "synth": cmd_synth,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"kddselect {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"kddselect {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())
