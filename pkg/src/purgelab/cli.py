"""Command-line driver: ``purgelab {filter,run,measures,cod,noise}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import shutil
import sys
from pathlib import Path

import numpy as np

from .datakit import CVProtocol, DataError, Dataset, inject_label_noise, load_dataset, make_blobs, write_csv
from .diversity import agglomerate, cod_matrix, cut, dendrogram_text, merges_csv, representatives
from .evalstats import (Condition, ExperimentPlan, default_comparisons, results_csv, run_experiment, summarize,
                        summary_json)
from .filters import FilterOutcome, FlagMode, adaptive_filter, apply_outcome, ensemble_filter, flag_misclassified
from .learners import BUILTIN_IDS, LearnerSpec
from .measures import COMPLEXITY_COLUMNS, HARDNESS_COLUMNS, complexity_measures, hardness_profile, noisy_instances

log = logging.getLogger("purgelab")

EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 1, 2, 3
SEED_ENV = "PURGELAB_SEED"
CONFIG_KEYS = {"datasets", "learners", "conditions", "filter_learners", "flag_mode", "repeats", "folds", "seed",
               "jobs", "out", "compare", "adaptive_folds", "validation_fraction", "label_column"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _split_list(text: str | None) -> list[str]:
    return [p.strip() for p in (text or "").split(",") if p.strip()]


def _learner_specs(items, seed: int) -> list[LearnerSpec]:
    """Accept ``all``, comma lists and repeated values; unknown ids are usage errors."""
    if isinstance(items, str):
        items = [items]
    names = [p for item in items for p in _split_list(item)]
    if not names:
        raise UsageError("no learners given")
    out = []
    for name in names:
        if name == "all":
            out.extend(LearnerSpec(i, {}, seed) for i in BUILTIN_IDS)
            continue
        try:
            out.append(LearnerSpec.parse(name, seed))
        except (KeyError, ValueError) as exc:
            raise UsageError(f"bad learner {name!r}: {exc.args[0] if exc.args else exc}") from None
    return out


def _flag_mode(text: str, seed: int) -> FlagMode:
    try:
        return FlagMode.parse(text, seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _threshold(value: float) -> float:
    if not 0 < value <= 1:
        raise UsageError(f"threshold {value} outside (0, 1]")
    return value


def _positive(name: str, value: int, low: int = 1) -> int:
    if value < low:
        raise UsageError(f"--{name} must be >= {low}")
    return value


def _label_column(text: str | None):
    if text is None:
        return -1
    try:
        return int(text)
    except ValueError:
        return text


def _load(path: str, label_column=-1) -> Dataset:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"no such dataset file: {path}")
    return load_dataset(p, label_column)


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# ---- filter -----------------------------------------------------------------

def _kept_rows_text(path: Path, kept: np.ndarray) -> str:
    """The input file with only the kept data rows, other lines copied verbatim."""
    keep = set(int(i) for i in kept)
    if path.suffix.lower() == ".arff":
        out, in_data, row = [], False, 0
        for raw in path.read_text(encoding="utf-8").splitlines(keepends=True):
            line = raw.strip()
            if in_data and line and not line.startswith("%"):
                if row in keep:
                    out.append(raw)
                row += 1
                continue
            if line.lower().startswith("@data"):
                in_data = True
            out.append(raw)
        return "".join(out)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(rows[0])
    for i, r in enumerate(rows[1:]):
        if i in keep:
            w.writerow(r)
    return buf.getvalue()


def cmd_filter(args) -> int:
    seed = args.seed
    threshold = _threshold(args.threshold)
    paths = _split_list(args.data)
    if len(paths) != 1:
        raise UsageError("filter takes exactly one --data file")
    learners = _learner_specs(args.learners or ["all"], seed)
    ds = _load(paths[0], _label_column(args.label_column))
    matrix = None
    if args.mode == "biased":
        target = _learner_specs(args.learner or "knn", seed)[0]
        mode = _flag_mode(args.flag_mode or "all", seed)
        matrix = flag_misclassified([target], ds, mode)
        outcome = FilterOutcome.from_mask(matrix.flags[0], {"filter": "biased"})
    elif args.mode == "ensemble":
        mode = _flag_mode(args.flag_mode or "all", seed)
        matrix = flag_misclassified(learners, ds, mode)
        outcome = ensemble_filter(matrix, threshold)
    else:
        target = _learner_specs(args.learner or "knn", seed)[0]
        mode = _flag_mode(args.flag_mode or "cv:5", seed)
        trace = adaptive_filter(learners, target, ds, threshold, mode, seed=seed)
        print(f"adaptive filter set: {', '.join(trace.chosen) or '(empty)'}; "
              f"validation accuracies: {', '.join(f'{a:.4f}' for a in trace.accuracies)}")
        if trace.chosen_index:
            matrix = flag_misclassified([learners[i] for i in trace.chosen_index], ds, mode)
            outcome = ensemble_filter(matrix, threshold)
        else:
            outcome = FilterOutcome(np.arange(len(ds)), np.array([], dtype=np.int64), {"filter": "adaptive"})
    _, fell_back = apply_outcome(ds, outcome)
    removed = np.array([], dtype=np.int64) if fell_back else outcome.removed
    if fell_back:
        print("warning: filtering would leave fewer than two instances or drop a class; nothing removed",
              file=sys.stderr)

    src = Path(paths[0])
    out = _out_dir(args.out)
    target_file = out / f"{src.stem}.filtered{src.suffix}"
    if removed.size == 0:
        shutil.copyfile(src, target_file)
    else:
        kept = np.setdiff1d(np.arange(len(ds)), removed)
        _write(target_file, _kept_rows_text(src, kept))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    ids = list(matrix.learner_ids) if matrix is not None else []
    w.writerow(["index", "label"] + ids)
    for i in removed:
        w.writerow([int(i), ds.class_names[ds.y[i]]] + [int(f) for f in matrix.flags[:, i]])
    report = out / f"{src.stem}.removed.csv"
    _write(report, buf.getvalue())
    print(f"seed {seed}: kept {len(ds) - removed.size} of {len(ds)} instances -> {target_file}; report {report}")
    return 0


# ---- run --------------------------------------------------------------------

def _dataset_from_config(entry, base: Path, label_column, seed: int) -> Dataset:
    if isinstance(entry, str):
        entry = {"path": entry}
    if not isinstance(entry, dict):
        raise UsageError(f"bad dataset entry {entry!r}")
    entry = dict(entry)
    noise = float(entry.pop("noise", 0.0))
    noise_seed = int(entry.pop("noise_seed", seed))
    name = entry.pop("name", None)
    if entry.get("type", "file") == "blobs":
        try:
            ds = make_blobs(int(entry.get("classes", 2)), int(entry.get("per_class", 100)),
                            int(entry.get("dimension", 2)), float(entry.get("spread", 0.4)),
                            int(entry.get("seed", seed)), name=name)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad blobs entry: {exc}") from None
    else:
        if "path" not in entry:
            raise UsageError(f"dataset entry {entry!r} needs a path")
        p = Path(entry["path"])
        ds = _load(str(p if p.is_absolute() else base / p), entry.get("label_column", label_column))
        if name:
            ds = Dataset(name, ds.attributes, ds.class_names, ds.X, ds.y)
    if noise:
        if not 0 <= noise <= 1:
            raise UsageError(f"noise rate {noise} outside [0, 1]")
        ds, _ = inject_label_noise(ds, noise, noise_seed)
        ds = Dataset(f"{ds.name}+noise{noise:g}", ds.attributes, ds.class_names, ds.X, ds.y)
    return ds


def _run_settings(args) -> dict:
    cfg: dict = {}
    base = Path.cwd()
    if args.config:
        p = Path(args.config)
        try:
            cfg = json.loads(p.read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config} is not valid JSON: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        unknown = set(cfg) - CONFIG_KEYS
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        base = p.parent
    # command-line flags override config keys
    for key in ("repeats", "folds", "jobs", "out", "flag_mode", "label_column"):
        v = getattr(args, key)
        if v is not None:
            cfg[key] = v
    if args.seed_given:
        cfg["seed"] = args.seed
    cfg.setdefault("seed", args.seed)
    if args.data:
        cfg["datasets"] = _split_list(args.data)
        base = Path.cwd()
    if args.learners:
        cfg["learners"] = args.learners
    if args.conditions:
        cfg["conditions"] = [c for item in args.conditions for c in _split_list(item)]
    if args.compare:
        cfg["compare"] = [c.split(",") for c in args.compare]
    cfg["_base"] = base
    return cfg


def cmd_run(args) -> int:
    cfg = _run_settings(args)
    try:
        seed = int(cfg["seed"])
        repeats = _positive("repeats", int(cfg.get("repeats", 5)))
        folds = _positive("folds", int(cfg.get("folds", 10)), 2)
        jobs = _positive("jobs", int(cfg.get("jobs", 1)))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad numeric setting: {exc}") from None
    entries = cfg.get("datasets") or []
    if not entries:
        raise UsageError("no datasets given")
    learners = _learner_specs(cfg.get("learners", "all"), seed)
    filter_learners = _learner_specs(cfg.get("filter_learners", "all"), seed)
    try:
        conditions = [Condition.parse(c) for c in cfg.get("conditions", ["none"])]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    flag_mode = _flag_mode(str(cfg.get("flag_mode", "all")), seed)
    datasets = [_dataset_from_config(e, cfg["_base"], _label_column(cfg.get("label_column")), seed) for e in entries]
    try:
        plan = ExperimentPlan(tuple(datasets), tuple(learners), tuple(conditions), repeats, folds, seed,
                              tuple(filter_learners), flag_mode, int(cfg.get("adaptive_folds", 5)),
                              float(cfg.get("validation_fraction", 0.2)))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    compare = cfg.get("compare")
    if compare is not None:
        if not all(isinstance(c, (list, tuple)) and len(c) == 2 for c in compare):
            raise UsageError("compare entries must be [baseline, comparison] pairs")
        known = {c.id for c in conditions}
        for pair in compare:
            for c in pair:
                if c not in known and not c.endswith(":max"):
                    raise UsageError(f"compare names unknown condition {c!r}")
        compare = [tuple(c) for c in compare]
    print(f"seed {seed}")
    result = run_experiment(plan, jobs)
    out = _out_dir(cfg.get("out") or "results")
    pairs = compare if compare is not None else default_comparisons(result)
    _write(out / "results.csv", results_csv(result))
    _write(out / "summary.json", summary_json(result, pairs))
    for base, comp in pairs:
        print(summarize(result, base, comp).text())
    failed = result.failed_cells()
    if failed:
        print(f"{len(failed)} cells failed; see summary.json", file=sys.stderr)
    for w in result.warnings:
        log.info(w)
    print(f"wrote {out / 'results.csv'} and {out / 'summary.json'}")
    return 0


# ---- measures ---------------------------------------------------------------

def cmd_measures(args) -> int:
    seed = args.seed
    paths = _split_list(args.data)
    if not paths:
        raise UsageError("no datasets given")
    learners = _learner_specs(args.learners or ["all"], seed)
    folds = _positive("folds", args.folds if args.folds is not None else 10, 2)
    out = _out_dir(args.out)
    print(f"seed {seed}")
    for path in paths:
        ds = _load(path, _label_column(args.label_column))
        profile = hardness_profile(ds, learners, CVProtocol(folds, 1, seed), k=args.k, seed=seed)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "label"] + list(HARDNESS_COLUMNS))
        for i, row in enumerate(profile.rows()):
            w.writerow([i, ds.class_names[ds.y[i]]] + [repr(float(row[c])) for c in HARDNESS_COLUMNS])
        stem = Path(path).stem
        _write(out / f"{stem}.hardness.csv", buf.getvalue())
        cx = complexity_measures(ds).as_dict()
        report = noisy_instances(profile.IH, args.cutoff)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dataset"] + list(COMPLEXITY_COLUMNS) + ["noisy_percent"])
        w.writerow([ds.name] + [repr(float(cx[c])) for c in COMPLEXITY_COLUMNS] + [repr(float(report.percent))])
        _write(out / f"{stem}.complexity.csv", buf.getvalue())
        print(f"{ds.name}: {len(report.indices)} instances with IH > {args.cutoff} ({report.percent:.2f}%)")
    return 0


# ---- cod --------------------------------------------------------------------

def cmd_cod(args) -> int:
    seed = args.seed
    paths = _split_list(args.data)
    if not paths:
        raise UsageError("no datasets given")
    if args.cut < 0:
        raise UsageError("--cut must be non-negative")
    learners = _learner_specs(args.learners or ["all"], seed)
    if len(learners) < 2:
        raise UsageError("cod needs at least two learners")
    folds = _positive("folds", args.folds if args.folds is not None else 10, 2)
    repeats = _positive("repeats", args.repeats if args.repeats is not None else 1)
    datasets = [_load(p, _label_column(args.label_column)) for p in paths]
    print(f"seed {seed}")
    matrix = cod_matrix(learners, datasets, CVProtocol(folds, repeats, seed))
    tree = agglomerate(matrix)
    groups = cut(tree, args.cut)
    reps = representatives(groups, matrix)
    out = _out_dir(args.out)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["learner"] + list(matrix.learner_ids))
    for name, row in zip(matrix.learner_ids, matrix.distances):
        w.writerow([name] + [repr(float(v)) for v in row])
    _write(out / "cod.csv", buf.getvalue())
    _write(out / "merges.csv", merges_csv(tree))
    _write(out / "dendrogram.txt", dendrogram_text(tree))
    lines = [f"clusters at cut {args.cut:g}:"]
    for k, (g, rep) in enumerate(zip(groups, reps)):
        lines.append(f"  {k}: {', '.join(matrix.learner_ids[i] for i in g)} (representative {rep})")
    text = "\n".join(lines) + "\n"
    _write(out / "clusters.txt", text)
    sys.stdout.write(dendrogram_text(tree) + text)
    return 0


# ---- noise ------------------------------------------------------------------

def cmd_noise(args) -> int:
    seed = args.seed
    if args.rate is None or not 0 <= args.rate <= 1:
        raise UsageError("--rate must be in [0, 1]")
    paths = _split_list(args.data)
    if len(paths) != 1:
        raise UsageError("noise takes exactly one --data file")
    ds = _load(paths[0], _label_column(args.label_column))
    noisy, idx = inject_label_noise(ds, args.rate, seed)
    out = _out_dir(args.out)
    stem = Path(paths[0]).stem
    write_csv(noisy, out / f"{stem}.noisy.csv")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "original", "noisy"])
    for i in idx:
        w.writerow([int(i), ds.class_names[ds.y[i]], ds.class_names[noisy.y[i]]])
    _write(out / f"{stem}.noise-indices.csv", buf.getvalue())
    print(f"seed {seed}: relabelled {idx.size} of {len(ds)} instances -> {out / (stem + '.noisy.csv')}")
    return 0


# ---- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"master seed (default ${SEED_ENV} or 0)")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--label-column", default=None, help="label column name or index for CSV input")
    common.add_argument("--verbose", "-v", action="count", default=0)

    parser = _Parser(prog="purgelab", description="Misclassification filtering experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("filter", parents=[common], help="filter one dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=("biased", "ensemble", "adaptive"), default="ensemble")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--flag-mode", default=None, help="'all' (train on all) or 'cv:<folds>'")
    p.add_argument("--learners", nargs="+", default=None, help="filter learners (default all)")
    p.add_argument("--learner", default=None, help="target learner for biased/adaptive (default knn)")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("run", parents=[common], help="run an experiment grid")
    p.add_argument("--config", default=None, help="JSON run config")
    p.add_argument("--data", default=None, help="comma-separated dataset paths")
    p.add_argument("--learners", "--learner", nargs="+", default=None)
    p.add_argument("--conditions", "--mode", nargs="+", default=None,
                   help="e.g. none ensemble:0.5 adaptive biased voting fvoting:0.9")
    p.add_argument("--flag-mode", default=None)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--compare", action="append", default=None, help="baseline,comparison (repeatable)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("measures", parents=[common], help="hardness and complexity measures")
    p.add_argument("--data", required=True)
    p.add_argument("--learners", nargs="+", default=None, help="learners for instance hardness (default all)")
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--cutoff", type=float, default=0.9, help="IH cutoff for the noisy percentage (strict >)")
    p.set_defaults(func=cmd_measures)

    p = sub.add_parser("cod", parents=[common], help="learner diversity clustering")
    p.add_argument("--data", required=True)
    p.add_argument("--learners", nargs="+", default=None)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--cut", type=float, default=0.18)
    p.set_defaults(func=cmd_cod)

    p = sub.add_parser("noise", parents=[common], help="inject label noise")
    p.add_argument("--data", required=True)
    p.add_argument("--rate", type=float, required=True)
    p.set_defaults(func=cmd_noise)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.seed_given = args.seed is not None
        if args.seed is None:
            args.seed = _default_seed()
        if args.out is None:
            args.out = None if args.command == "run" else "."
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"purgelab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"purgelab: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"purgelab: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # anything else is a bug
        logging.getLogger("purgelab").debug("internal error", exc_info=True)
        print(f"purgelab: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
