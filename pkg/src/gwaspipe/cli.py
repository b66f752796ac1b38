"""Command-line pipeline runner.

Every command writes into ``--out`` (a directory). Values come from, in
order of precedence: command-line flags, a ``--config`` file of flat
``key = value`` lines, built-in defaults.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import evaluation as ev
from . import forest as rf
from . import mtd
from .dataset import (
    DatasetError,
    as_categorical,
    as_real,
    load_dataset,
    synthesize_gwas,
    write_categorical_matrix,
    write_genotype_matrix,
    write_real_matrix,
)
from .knn import Norm
from .pipeline import (
    ForestSettings,
    NoFeaturesError,
    ProjectionSettings,
    default_train_rows,
    fmt,
    project_dataset,
    run_approach1,
    run_approach2,
    run_crossval,
)
from .projection import distortion_audit

log = logging.getLogger("gwaspipe")


class UsageError(Exception):
    pass


def _z_value(text):
    text = str(text).strip().lower()
    if text in (rf.ALL, rf.SQRT):
        return text
    return int(text)


def _norm_value(text):
    return Norm.parse(text).value


def _classifier(text):
    text = str(text).strip().lower()
    if text not in ("knn", "forest"):
        raise ValueError(f"classifier must be knn or forest, got {text!r}")
    return text


@dataclass(frozen=True)
class Opt:
    flag: str
    type: object
    default: object
    help: str
    multiple: bool = False

    @property
    def dest(self):
        return self.flag.lstrip("-").replace("-", "_")


COMMON = [
    Opt("--seed", int, 0, "master random seed"),
    Opt("--workers", int, 1, "parallel workers for projection, forest and k-NN"),
]

COMMANDS = {
    "synth": [
        Opt("--n", int, 2000, "observations"),
        Opt("--m", int, 500, "SNPs"),
        Opt("--informative", int, 10, "SNPs carrying class signal"),
        Opt("--effect", float, 0.8, "class separation of informative SNPs, in [0, 1]"),
        Opt("--balance", float, 0.5, "expected fraction of label-1 rows"),
    ],
    "discretize": [],
    "project": [
        Opt("--mprime", int, None, "target dimension (default: from --jl-c and --epsilon)"),
        Opt("--jl-c", float, 4.0, "constant C in m' = ceil(C ln n / eps^2)"),
        Opt("--epsilon", float, 0.25, "distortion target"),
        Opt("--blocks", int, 1, "column blocks of the parallel product"),
    ],
    "mtd-score": [
        Opt("--alpha", float, [], "report selected-feature counts at this threshold", multiple=True),
    ],
    "approach1": [
        Opt("--k", int, [1, 3, 5, 7, 9, 11, 13, 15, 17, 19], "neighbour counts", multiple=True),
        Opt("--norm", _norm_value, ["l1", "l2"], "l1, l2 or linf", multiple=True),
        Opt("--mprime", int, None, "target dimension (default: from --jl-c and --epsilon)"),
        Opt("--jl-c", float, 4.0, "constant C in m' = ceil(C ln n / eps^2)"),
        Opt("--epsilon", float, 0.25, "distortion target"),
        Opt("--blocks", int, 1, "column blocks of the parallel product"),
        Opt("--train-rows", int, None, "holdout training rows (default: 2880/3907 of n)"),
        Opt("--grid", int, ev.DEFAULT_GRID, "ROC threshold grid size"),
    ],
    "approach2": [
        Opt("--alpha", float, [0.2, 0.3, 0.4, 0.5], "MTD selection threshold", multiple=True),
        Opt("--trees", int, 500, "trees per forest"),
        Opt("--z", _z_value, rf.SQRT, "features tried per node: count, sqrt or all"),
        Opt("--min-gain", float, 0.0, "minimum information gain to split"),
        Opt("--train-rows", int, None, "holdout training rows (default: 2880/3907 of n)"),
        Opt("--grid", int, ev.DEFAULT_GRID, "ROC threshold grid size"),
    ],
    "crossval": [
        Opt("--classifier", _classifier, "knn", "knn or forest"),
        Opt("--folds", int, 5, "fold count t"),
        Opt("--k", int, 5, "neighbours (knn)"),
        Opt("--norm", _norm_value, "l2", "l1, l2 or linf (knn)"),
        Opt("--mprime", int, None, "project to this dimension first (knn)"),
        Opt("--jl-c", float, 4.0, "constant C for the default target dimension"),
        Opt("--epsilon", float, 0.25, "distortion target"),
        Opt("--blocks", int, 1, "column blocks of the parallel product"),
        Opt("--project", bool, False, "project before k-NN even without --mprime"),
        Opt("--alpha", float, 0.3, "MTD selection threshold (forest)"),
        Opt("--trees", int, 500, "trees per forest"),
        Opt("--z", _z_value, rf.SQRT, "features tried per node: count, sqrt or all"),
        Opt("--min-gain", float, 0.0, "minimum information gain to split"),
        Opt("--grid", int, ev.DEFAULT_GRID, "ROC threshold grid size"),
    ],
    "roc": [
        Opt("--grid", int, ev.DEFAULT_GRID, "ROC threshold grid size"),
    ],
}

HELP = {
    "synth": "generate a synthetic genotype dataset with planted signal",
    "discretize": "map genotype triples to HM/He/Hm symbols",
    "project": "random-project a real or genotype matrix",
    "mtd-score": "score every feature by MTD",
    "approach1": "holdout: random projection + k-NN",
    "approach2": "holdout: MTD selection on training rows + random forest",
    "crossval": "t-fold cross validation of k-NN or MTD + forest",
    "roc": "ROC curve and AUC from a score,label CSV",
}

TAKES_INPUT = {"discretize", "project", "mtd-score", "approach1", "approach2", "crossval", "roc"}


def build_parser():
    parser = argparse.ArgumentParser(prog="gwaspipe", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for name, opts in COMMANDS.items():
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        if name in TAKES_INPUT:
            p.add_argument("input", help="input CSV")
        p.add_argument("--out", default=None, help="output directory (default: current directory)")
        p.add_argument("--config", default=None, help="flat key = value config file")
        p.add_argument("--no-plots", action="store_true", help="skip PNG figures")
        p.add_argument("-v", "--verbose", action="store_true")
        for opt in COMMON + opts:
            kw = dict(default=None, dest=opt.dest, help=opt.help)
            if opt.type is bool:
                p.add_argument(opt.flag, action="store_const", const=True, **kw)
            elif opt.multiple:
                p.add_argument(opt.flag, action="append", type=str, **kw)
            else:
                p.add_argument(opt.flag, type=opt.type, **kw)
    return parser


def read_config(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _convert(opt, raw, source):
    try:
        if opt.type is bool:
            if isinstance(raw, bool):
                return raw
            return str(raw).strip().lower() in ("1", "true", "yes", "on")
        if opt.multiple:
            items = raw if isinstance(raw, list) else [raw]
            return [opt.type(tok.strip()) for item in items for tok in str(item).split(",") if tok.strip()]
        return opt.type(raw)
    except ValueError as exc:
        raise UsageError(f"{opt.flag} ({source}): {exc}") from None


def resolve(args):
    """Merge flags over config over defaults into a plain dict."""
    config = read_config(args.config) if args.config else {}
    opts = COMMON + COMMANDS[args.command]
    known = {o.dest for o in opts} | {"out", "input"}
    unknown = sorted(set(config) - known)
    if unknown:
        raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
    values = {}
    for opt in opts:
        cli = getattr(args, opt.dest)
        if cli is not None:
            values[opt.dest] = _convert(opt, cli, "flag") if opt.multiple else cli
        elif opt.dest in config:
            values[opt.dest] = _convert(opt, config[opt.dest], "config")
        else:
            values[opt.dest] = list(opt.default) if isinstance(opt.default, list) else opt.default
    values["out"] = Path(args.out or config.get("out") or ".")
    values["plots"] = not args.no_plots
    if hasattr(args, "input"):
        values["input"] = args.input
    return values


# ---------------------------------------------------------------------------
# validation


def _require(cond, message):
    if not cond:
        raise UsageError(message)


def _validate_common(v):
    _require(v["seed"] >= 0, f"--seed must be non-negative, got {v['seed']}")
    _require(v["workers"] >= 1, f"--workers must be at least 1, got {v['workers']}")
    if "grid" in v:
        _require(v["grid"] >= 2, f"--grid must be at least 2, got {v['grid']}")


def _validate_projection(v, n, m):
    _require(0 < v["epsilon"] < 0.5, f"--epsilon must lie in (0, 0.5), got {v['epsilon']}")
    _require(v["jl_c"] > 0, f"--jl-c must be positive, got {v['jl_c']}")
    if v["mprime"] is not None:
        _require(v["mprime"] >= 1, f"--mprime must be positive, got {v['mprime']}")
    _require(1 <= v["blocks"] <= max(m, 1), f"--blocks must lie in [1, {m}], got {v['blocks']}")
    _require(n >= 2 or v["mprime"] is not None, "need at least 2 rows to pick a target dimension")


def _validate_train_rows(v, n):
    tr = v["train_rows"] if v["train_rows"] is not None else default_train_rows(n)
    _require(1 < tr < n, f"--train-rows must satisfy 1 < rows < {n}, got {tr}")
    return tr


def _validate_forest(v, m):
    _require(v["trees"] >= 1, f"--trees must be at least 1, got {v['trees']}")
    _require(v["min_gain"] >= 0, f"--min-gain must be non-negative, got {v['min_gain']}")
    z = v["z"]
    if not isinstance(z, str):
        _require(1 <= z <= m, f"--z must lie in [1, {m}] (features available), got {z}")


def _load(v):
    try:
        return load_dataset(v["input"])
    except FileNotFoundError:
        raise DatasetError(f"no such file: {v['input']}") from None


# ---------------------------------------------------------------------------
# commands


def _write(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_synth(v):
    _require(v["n"] >= 2, f"--n must be at least 2, got {v['n']}")
    _require(v["m"] >= 1, f"--m must be at least 1, got {v['m']}")
    _require(0 <= v["informative"] <= v["m"],
             f"--informative must lie in [0, --m={v['m']}], got {v['informative']}")
    _require(0 <= v["effect"] <= 1, f"--effect must lie in [0, 1], got {v['effect']}")
    _require(0 < v["balance"] < 1, f"--balance must lie in (0, 1), got {v['balance']}")
    g, truth = synthesize_gwas(v["n"], v["m"], v["informative"], v["effect"], v["balance"], v["seed"])
    out = v["out"]
    out.mkdir(parents=True, exist_ok=True)
    write_genotype_matrix(g, out / "genotypes.csv")
    (out / "planted.json").write_text(truth.to_json() + "\n", encoding="utf-8")
    print(f"wrote {g.rows}x{g.cols} genotypes and {len(truth.informative_indices)} planted SNPs to {out}")


def cmd_discretize(v):
    d = as_categorical(_load(v))
    v["out"].mkdir(parents=True, exist_ok=True)
    write_categorical_matrix(d, v["out"] / "categorical.csv")
    print(f"wrote {d.rows}x{d.cols} categorical matrix to {v['out'] / 'categorical.csv'}")


def cmd_project(v):
    d = as_real(_load(v))
    _validate_projection(v, d.rows, d.cols)
    settings = ProjectionSettings(v["mprime"], v["epsilon"], v["jl_c"], v["blocks"])
    p = project_dataset(d, settings, v["seed"], v["workers"])
    out = v["out"]
    out.mkdir(parents=True, exist_ok=True)
    write_real_matrix(p, out / "projected.csv", names=False)
    rep = distortion_audit(d, p, v["epsilon"])
    lines = [
        f"m={d.cols} m_prime={p.cols} rows={d.rows} seed={v['seed']} blocks={v['blocks']}",
        f"epsilon={fmt(rep.epsilon)} pairs_checked={rep.pairs_checked} "
        f"pairs_within={rep.pairs_within} worst_ratio={fmt(rep.worst_ratio)}",
    ]
    _write(out / "distortion.txt", lines)
    print("\n".join(lines))


def cmd_mtd_score(v):
    d = as_categorical(_load(v))
    scores = mtd.score_all(d)
    out = v["out"]
    out.mkdir(parents=True, exist_ok=True)
    mtd.write_scores(scores, out / "scores.csv")
    lines = ["alpha,n_selected"]
    for a in v["alpha"]:
        _require(a >= 0, f"--alpha must be non-negative, got {a}")
        lines.append(f"{a:g},{len(mtd.select_features(scores, a))}")
    if v["alpha"]:
        _write(out / "selected.csv", lines)
    if v["plots"]:
        from .plotting import plot_scores

        plot_scores(scores, out / "scores.png", alphas=v["alpha"])
    top = scores.top(min(10, len(scores)))
    print("top features: " + ", ".join(f"{scores.feature_names[j]}={fmt(scores.scores[j])}" for j in top))


def _metric_fields(m):
    c = m.confusion
    return [str(c.tp), str(c.fp), str(c.fn), str(c.tn),
            fmt(m.accuracy), fmt(m.precision), fmt(m.recall), fmt(m.f_measure), fmt(m.auc)]


METRIC_HEADER = "tp,fp,fn,tn,accuracy,precision,recall,f_measure,auc"


def cmd_approach1(v):
    data = _load(v)
    real = as_real(data)
    _validate_projection(v, real.rows, real.cols)
    n_train = _validate_train_rows(v, real.rows)
    for k in v["k"]:
        _require(1 <= k <= n_train, f"--k must lie in [1, {n_train}], got {k}")
    _require(v["k"] and v["norm"], "need at least one --k and one --norm")
    settings = ProjectionSettings(v["mprime"], v["epsilon"], v["jl_c"], v["blocks"])
    res = run_approach1(real, ks=v["k"], norms=v["norm"], projection=settings, train_rows=n_train,
                        seed=v["seed"], workers=v["workers"], grid=v["grid"])
    out = v["out"]
    (out / "roc").mkdir(parents=True, exist_ok=True)
    lines = ["k,norm," + METRIC_HEADER]
    for row in res.rows:
        lines.append(f"{row.k},{row.norm.value}," + ",".join(_metric_fields(row.metrics)))
        if row.metrics.roc is not None:
            ev.write_roc(row.metrics.roc, out / "roc" / f"roc_k{row.k}_{row.norm.value}.csv")
    _write(out / "metrics.csv", lines)
    _write(out / "summary.txt", [
        f"approach1 rows={real.rows} m={real.cols} m_prime={res.m_prime} seed={v['seed']}",
        f"train={res.n_train} test={res.n_test}",
    ])
    if v["plots"]:
        from .plotting import plot_roc

        for norm in v["norm"]:
            curves = {f"k={r.k}": r.metrics.roc for r in res.rows
                      if r.norm.value == norm and r.metrics.roc is not None}
            if curves:
                plot_roc(curves, out / f"roc_{norm}.png", title=f"k-NN, {norm} norm")
    print("\n".join(lines))


def cmd_approach2(v):
    data = _load(v)
    cat = as_categorical(data)
    n_train = _validate_train_rows(v, cat.rows)
    _require(v["alpha"], "need at least one --alpha")
    for a in v["alpha"]:
        _require(a >= 0, f"--alpha must be non-negative, got {a}")
    _validate_forest(v, cat.cols)
    forest = ForestSettings(v["trees"], v["z"], v["min_gain"])
    res = run_approach2(cat, alphas=v["alpha"], forest=forest, train_rows=n_train, seed=v["seed"],
                        workers=v["workers"], grid=v["grid"])
    out = v["out"]
    (out / "roc").mkdir(parents=True, exist_ok=True)
    mtd.write_scores(res.scores, out / "train_scores.csv")
    lines = ["alpha,n_selected," + METRIC_HEADER]
    selected = ["alpha,n_selected,features"]
    curves = {}
    for row in res.rows:
        lines.append(f"{row.alpha:g},{len(row.selected)}," + ",".join(_metric_fields(row.metrics)))
        names = "|".join(res.scores.feature_names[j] for j in row.selected)
        selected.append(f"{row.alpha:g},{len(row.selected)},{names}")
        if row.metrics.roc is not None:
            ev.write_roc(row.metrics.roc, out / "roc" / f"roc_alpha{row.alpha:g}.csv")
            curves[f"alpha={row.alpha:g} ({len(row.selected)} SNPs)"] = row.metrics.roc
    _write(out / "metrics.csv", lines)
    _write(out / "selected.csv", selected)
    _write(out / "summary.txt", [
        f"approach2 rows={cat.rows} m={cat.cols} trees={v['trees']} z={v['z']} seed={v['seed']}",
        f"train={res.n_train} test={res.n_test} (MTD scores from training rows only)",
    ])
    if v["plots"]:
        from .plotting import plot_roc, plot_scores

        if curves:
            plot_roc(curves, out / "roc.png", title="MTD selection + random forest")
        plot_scores(res.scores, out / "train_scores.png", alphas=v["alpha"])
    print("\n".join(lines))


def cmd_crossval(v):
    data = _load(v)
    if v["classifier"] == "knn":
        d = as_real(data)
        projection = None
        if v["mprime"] is not None or v["project"]:
            _validate_projection(v, d.rows, d.cols)
            projection = ProjectionSettings(v["mprime"], v["epsilon"], v["jl_c"], v["blocks"])
        n = d.rows
        _require(2 <= v["folds"] <= n, f"--folds must lie in [2, {n}], got {v['folds']}")
        min_train = n - -(-n // v["folds"])
        _require(1 <= v["k"] <= min_train, f"--k must lie in [1, {min_train}], got {v['k']}")
    else:
        d = as_categorical(data)
        projection = None
        n = d.rows
        _require(2 <= v["folds"] <= n, f"--folds must lie in [2, {n}], got {v['folds']}")
        _require(v["alpha"] >= 0, f"--alpha must be non-negative, got {v['alpha']}")
        _validate_forest(v, d.cols)
    forest = ForestSettings(v["trees"], v["z"], v["min_gain"])
    res = run_crossval(d, classifier=v["classifier"], folds=v["folds"], seed=v["seed"], k=v["k"],
                       norm=v["norm"], projection=projection, alpha=v["alpha"], forest=forest,
                       workers=v["workers"], grid=v["grid"])
    out = v["out"]
    out.mkdir(parents=True, exist_ok=True)
    lines = ["fold,n_test," + METRIC_HEADER]
    for row in res.rows:
        lines.append(f"{row.fold},{row.n_test}," + ",".join(_metric_fields(row.metrics)))
    _write(out / "folds.csv", lines)
    coverage = "every row tested exactly once" if res.coverage_ok else "COVERAGE VIOLATED"
    summary = [
        f"crossval classifier={res.classifier} folds={v['folds']} rows={n} seed={v['seed']}",
        f"mean_accuracy={fmt(res.mean_accuracy)}",
        f"fold coverage: {coverage}",
    ]
    _write(out / "summary.txt", summary)
    if v["plots"]:
        from .plotting import plot_fold_scores

        plot_fold_scores([r.metrics.accuracy for r in res.rows], out / "folds.png",
                         title=f"{v['folds']}-fold cross validation")
    print("\n".join(lines + summary))
    if not res.coverage_ok:
        raise RuntimeError("fold coverage violated")


def read_scores(path):
    """Load a ``score,label`` CSV (header optional)."""
    scores, labels = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            parts = [s.strip() for s in line.split(",")]
            if lineno == 1 and parts[0].lower() == "score":
                continue
            if len(parts) != 2:
                raise DatasetError(f"{path}:{lineno}: expected 'score,label'")
            try:
                scores.append(float(parts[0]))
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: malformed score {parts[0]!r}") from None
            if parts[1] not in ("0", "1"):
                raise DatasetError(f"{path}:{lineno}: label {parts[1]!r} outside {{0,1}}")
            labels.append(int(parts[1]))
    return np.array(scores), np.array(labels)


def cmd_roc(v):
    try:
        scores, labels = read_scores(v["input"])
    except FileNotFoundError:
        raise DatasetError(f"no such file: {v['input']}") from None
    curve = ev.roc_curve(scores, labels, v["grid"])
    area = ev.auc(curve)
    out = v["out"]
    out.mkdir(parents=True, exist_ok=True)
    ev.write_roc(curve, out / "roc.csv")
    if v["plots"]:
        from .plotting import plot_roc

        plot_roc({"scores": curve}, out / "roc.png", title=f"AUC {area:.4f}")
    print(f"auc={fmt(area)} points={curve.grid_size}")


RUNNERS = {
    "synth": cmd_synth,
    "discretize": cmd_discretize,
    "project": cmd_project,
    "mtd-score": cmd_mtd_score,
    "approach1": cmd_approach1,
    "approach2": cmd_approach2,
    "crossval": cmd_crossval,
    "roc": cmd_roc,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    # output is plain text; NO_COLOR needs no handling beyond never emitting colour
    os.environ.get("NO_COLOR")
    try:
        values = resolve(args)
        _validate_common(values)
        RUNNERS[args.command](values)
    except UsageError as exc:
        print(f"gwaspipe {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (DatasetError, NoFeaturesError, OSError, ValueError, RuntimeError) as exc:
        print(f"gwaspipe {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
