"""Command-line front end.

Every run writes ``manifest.json`` (sorted keys) next to its outputs. The
manifest holds the resolved configuration, toolkit version and seed; running
``tschar replay <manifest> --out DIR`` regenerates byte-identical outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import FORMATS, LabeledDataset, FeatureMatrix, format_float, load_dataset, zscore_dataset
from .dictionary import SymbolicParams, bag_of_patterns, histogram_distance
from .distances import KINDS, DistanceSpec, pairwise_matrix
from .errors import TscharError, UnknownCommandError
from .features import (
    DEFAULT_ALPHA_GRID,
    FEATURE_SETS,
    FeatureSpec,
    exp_smoothing_fit,
    exp_smoothing_forecast,
    extract_features,
    feature_set,
)
from .intervals import temporal_importance, train_forest
from .learn import (
    REPRESENTATIONS,
    cross_validate,
    ensemble_predict,
    fit_ensemble,
    greedy_select,
    make_classifier,
    rank_features,
)
from .shapelets import shapelet_transform

logger = logging.getLogger("tschar")

COMMANDS = ("featurize", "distances", "shapelet", "tsf", "bop", "classify", "rank", "forecast", "replay")


class _UsageError(TscharError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_square(path: Path, ids, matrix: np.ndarray) -> None:
    FeatureMatrix(ids, ids, matrix).to_csv(path)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load(args) -> LabeledDataset:
    ds = load_dataset(args.input, args.format)
    return zscore_dataset(ds) if getattr(args, "zscore", False) else ds


def _specs(args) -> tuple:
    if getattr(args, "spec_file", None):
        return tuple(FeatureSpec.from_dict(d) for d in json.loads(Path(args.spec_file).read_text()))
    return feature_set(args.set)


# --- commands ---------------------------------------------------------------


def cmd_featurize(args, out: Path) -> None:
    extract_features(_load(args), _specs(args)).to_csv(out / "features.csv")


def cmd_distances(args, out: Path) -> None:
    ds = _load(args)
    spec = DistanceSpec(
        args.kind,
        window=args.window,
        feature_specs=_specs(args) if args.kind == "feature" else None,
    )
    _write_square(out / "distances.csv", ds.ids, pairwise_matrix(ds, spec))


def cmd_shapelet(args, out: Path) -> None:
    ds = _load(args)
    l_min = args.l_min
    l_max = args.l_max if args.l_max is not None else l_min
    st = shapelet_transform(ds, args.k, l_min, l_max, args.stride, args.normalize)
    _write_json(out / "shapelets.json", [s.to_dict() for s in st.shapelets])
    st.features.to_csv(out / "transform.csv")


def cmd_tsf(args, out: Path) -> None:
    ds = _load(args)
    forest = train_forest(ds, args.n_trees, args.seed)
    temporal_importance(forest).to_csv(out / "importance.csv")
    report = {"n_trees": args.n_trees, "seed": args.seed, "classes": list(forest.classes)}
    if args.test:
        test = load_dataset(args.test, args.format)
        preds = [forest.predict(x) for x in test.series]
        report["test_accuracy"] = float(np.mean([p == y for p, y in zip(preds, test.labels)]))
        with open(out / "predictions.csv", "w") as fh:
            fh.write("id,label,predicted\n")
            for x, y, p in zip(test.series, test.labels, preds):
                fh.write(f"{x.id},{y},{p}\n")
    _write_json(out / "tsf.json", report)


def _safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", text)


def cmd_bop(args, out: Path) -> None:
    ds = _load(args)
    params = SymbolicParams(args.w, args.l, args.a)
    hists = [bag_of_patterns(x, params, not args.no_reduction) for x in ds.series]
    hdir = out / "histograms"
    hdir.mkdir(exist_ok=True)
    for i, (x, h) in enumerate(zip(ds.series, hists)):
        with open(hdir / f"{i:04d}_{_safe_name(x.id)}.csv", "w") as fh:
            fh.write("word,count\n")
            for word, count in h.counts.items():
                fh.write(f"{word},{count}\n")
    n = len(hists)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = histogram_distance(hists[i], hists[j])
    _write_square(out / "bop_distances.csv", ds.ids, d)


def _classifier_config(args) -> dict:
    if args.method == "knn":
        return {"method": "knn", "distance": args.distance, "window": args.window, "k": args.k}
    if args.method == "forest":
        return {"method": "forest", "n_trees": args.n_trees, "seed": args.seed}
    return {"method": args.method}


def cmd_classify(args, out: Path) -> None:
    ds = _load(args)
    report = {"method": args.method, "folds": args.folds, "seed": args.seed}
    if args.method == "ensemble":
        configs = {"interval-forest": {"n_trees": args.n_trees, "seed": args.seed}}
        members = fit_ensemble(ds, REPRESENTATIONS, args.folds, args.seed, configs)
        report["weights"] = {m.name: m.weight for m in members}
        if args.test:
            test = load_dataset(args.test, args.format)
            votes = [ensemble_predict(members, x) for x in test.series]
            report["test_accuracy"] = float(np.mean([v.label == y for v, y in zip(votes, test.labels)]))
            report["predictions"] = [
                {"id": x.id, "label": v.label, "shares": v.shares} for x, v in zip(test.series, votes)
            ]
    else:
        config = _classifier_config(args)
        report["cv"] = cross_validate(ds, config, args.folds, args.seed).to_dict()
        if args.test:
            model = make_classifier(config).fit(ds)
            test = load_dataset(args.test, args.format)
            preds = [model.predict(x) for x in test.series]
            report["test_accuracy"] = float(np.mean([p == y for p, y in zip(preds, test.labels)]))
            report["predictions"] = [{"id": x.id, "label": p} for x, p in zip(test.series, preds)]
    _write_json(out / "classify.json", report)


def cmd_rank(args, out: Path) -> None:
    ds = load_dataset(args.input, args.format)
    if args.matrix:
        fm = FeatureMatrix.from_csv(args.matrix)
        by_id = dict(zip(ds.ids, ds.labels))
        labels = [by_id[r] for r in fm.row_ids]
    else:
        fm = extract_features(ds, _specs(args))
        labels = list(ds.labels)
    ranked = rank_features(fm, labels)
    selected = greedy_select(fm, labels, args.max_features, args.folds, args.seed)
    _write_json(
        out / "rank.json",
        {
            "ranked": [{"name": r.name, "score": r.score, "rank": r.rank, "coverage": r.coverage} for r in ranked],
            "selected": selected,
        },
    )


def cmd_forecast(args, out: Path) -> None:
    ds = _load(args)
    grid = DEFAULT_ALPHA_GRID if args.alpha_grid is None else tuple(float(a) for a in args.alpha_grid.split(","))
    with open(out / "forecast.csv", "w") as fh:
        fh.write("id,alpha," + ",".join(f"h{i}" for i in range(1, args.horizon + 1)) + "\n")
        for x in ds.series:
            alpha = args.alpha if args.alpha is not None else exp_smoothing_fit(x, grid).alpha_opt
            pred = exp_smoothing_forecast(x, alpha, args.horizon)
            fh.write(f"{x.id},{format_float(alpha)}," + ",".join(format_float(v) for v in pred) + "\n")


HANDLERS = {
    "featurize": cmd_featurize,
    "distances": cmd_distances,
    "shapelet": cmd_shapelet,
    "tsf": cmd_tsf,
    "bop": cmd_bop,
    "classify": cmd_classify,
    "rank": cmd_rank,
    "forecast": cmd_forecast,
}


# --- argument parsing ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tschar", description="Feature-based time-series characterization.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--in", dest="input", required=True, help="input dataset")
        p.add_argument("--format", choices=FORMATS, default="wide-csv")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
        return p

    def feature_args(p):
        p.add_argument("--set", default="standard-22", choices=sorted(FEATURE_SETS))
        p.add_argument("--spec-file", default=None, help="JSON list of {name, op, params}")

    p = command("featurize", "global feature matrix")
    feature_args(p)
    p.add_argument("--zscore", action="store_true")

    p = command("distances", "pairwise distance matrix")
    p.add_argument("--kind", choices=KINDS, default="euclidean")
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--zscore", action="store_true")
    feature_args(p)

    p = command("shapelet", "shapelet discovery and transform")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--l-min", type=int, required=True)
    p.add_argument("--l-max", type=int, default=None)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--normalize", action="store_true", help="z-normalize each window")
    p.add_argument("--zscore", action="store_true")

    p = command("tsf", "interval forest and temporal importance")
    p.add_argument("--n-trees", type=int, default=100)
    p.add_argument("--test", default=None)

    p = command("bop", "bag-of-patterns histograms")
    p.add_argument("--w", type=int, required=True)
    p.add_argument("--l", type=int, default=4)
    p.add_argument("--a", type=int, default=4)
    p.add_argument("--no-reduction", action="store_true")

    p = command("classify", "cross-validated classification")
    p.add_argument("--method", choices=["knn", "features", "shapelet", "forest", "bop", "ensemble"], default="knn")
    p.add_argument("--distance", choices=KINDS, default="euclidean")
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--n-trees", type=int, default=100)
    p.add_argument("--test", default=None)
    p.add_argument("--zscore", action="store_true")

    p = command("rank", "feature ranking and greedy selection")
    feature_args(p)
    p.add_argument("--matrix", default=None, help="feature matrix CSV (labels come from --in)")
    p.add_argument("--max-features", type=int, default=5)
    p.add_argument("--folds", type=int, default=5)

    p = command("forecast", "exponential smoothing forecasts")
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--alpha", type=float, default=None, help="fixed smoothing parameter")
    p.add_argument("--alpha-grid", default=None, help="comma-separated grid (default 0.01..1.00)")

    p = sub.add_parser("replay", help="re-run a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    return parser


def _manifest(args) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("out",)}
    inputs = {}
    for key in ("input", "test", "matrix", "spec_file"):
        path = config.get(key)
        if path:
            inputs[key] = {"path": path, "sha256": _sha256(path)}
    return {"command": args.command, "config": config, "inputs": inputs, "seed": args.seed, "version": __version__}


def _execute(args) -> None:
    if args.command == "replay":
        manifest = json.loads(Path(args.manifest).read_text())
        if manifest.get("command") not in HANDLERS:
            raise UnknownCommandError(f"manifest names unknown command {manifest.get('command')!r}")
        args = argparse.Namespace(**manifest["config"], out=args.out)
    if args.seed is None:
        args.seed = 0
        logger.info("no --seed given; using seed 0")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    HANDLERS[args.command](args, out)
    _write_json(out / "manifest.json", _manifest(args))


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if not argv or argv[0] not in COMMANDS and not argv[0].startswith("-"):
            name = argv[0] if argv else ""
            raise UnknownCommandError(f"unknown command {name!r}; expected one of {', '.join(COMMANDS)}")
        _execute(build_parser().parse_args(argv))
    except (ValueError, OSError, KeyError) as err:
        print(f"error: {type(err).__name__}: {err}".replace("\n", " "), file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001
        print(f"internal error: {type(err).__name__}: {err}".replace("\n", " "), file=sys.stderr)
        return 1
    return 0


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run())
