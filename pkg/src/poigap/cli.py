"""Command line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
violation. Every subcommand accepts ``--config FILE`` with flat ``key=value``
lines (keys are the long flag names); flags given on the command line win.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import pipeline as pl
from .boosting import BoostParams, GbdtModel
from .clustering import block_profiles, cluster_blocks
from .core_data import DataError, InvariantError
from .selection import similarity_report
from .synth import SynthConfig, generate, write_city

EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 1, 2, 3

log = logging.getLogger("poigap")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off", ""):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.replace(" ", "").split(",") if v]


def _str_list(text: str) -> list[str]:
    return [v for v in text.replace(" ", "").split(",") if v]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file with defaults for any flag")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_data(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--data", required=required, help="directory with orders.tsv, poi.txt, blocks.tsv, calendar.tsv")


def _add_synth(p: argparse.ArgumentParser, prefix: str = "") -> None:
    d = SynthConfig()
    p.add_argument(f"--{prefix}blocks", type=int, default=d.blocks)
    p.add_argument(f"--{prefix}days", type=int, default=d.days)
    p.add_argument(f"--{prefix}categories", type=int, default=d.categories)
    p.add_argument(f"--{prefix}planted", type=int, default=d.planted)
    p.add_argument(f"--{prefix}base-rate", type=float, default=d.base_rate)
    p.add_argument(f"--{prefix}poi-effect", type=float, default=d.poi_effect)
    p.add_argument(f"--{prefix}noise", type=float, default=d.noise)
    p.add_argument(f"--{prefix}holiday-scale", type=float, default=d.holiday_scale)
    p.add_argument(f"--{prefix}archetypes", type=int, default=None)
    if prefix:
        p.add_argument(f"--{prefix}seed", type=int, default=None, help="defaults to --seed")


def _synth_config(args, prefix: str = "") -> SynthConfig:
    pre = prefix.replace("-", "_")
    get = lambda name: getattr(args, pre + name)  # noqa: E731
    seed = get("seed") if prefix else args.seed
    if seed is None:
        seed = args.seed
    return SynthConfig(blocks=get("blocks"), days=get("days"), categories=get("categories"),
                       planted=get("planted"), base_rate=get("base_rate"), poi_effect=get("poi_effect"),
                       noise=get("noise"), holiday_scale=get("holiday_scale"), seed=seed,
                       archetypes=get("archetypes"))


def _add_cluster(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--single-regime", action="store_true", help="144-dim profiles over all days")
    p.add_argument("--train-days", type=int, default=None)


def _add_selection(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=pl.METHODS, default="ppce")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--tier", choices=("max", "med", "min"), default="max")
    p.add_argument("--first-pc-only", action="store_true")


def _add_boost(p: argparse.ArgumentParser) -> None:
    d = BoostParams()
    p.add_argument("--rounds", type=int, default=d.rounds)
    p.add_argument("--learning-rate", type=float, default=d.learning_rate)
    p.add_argument("--max-depth", type=int, default=d.max_depth)
    p.add_argument("--lambda", dest="reg_lambda", type=float, default=d.reg_lambda)
    p.add_argument("--gamma", type=float, default=d.gamma)
    p.add_argument("--min-child-weight", type=float, default=d.min_child_weight)
    p.add_argument("--subsample", type=float, default=d.subsample)
    p.add_argument("--boost-seed", type=int, default=d.seed)
    p.add_argument("--lag-count", type=int, default=3)


def _add_metrics(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hit-tolerance", type=float, default=1.0)
    p.add_argument("--shortage-threshold", type=float, default=1.0)


def _boost(args) -> BoostParams:
    return BoostParams(rounds=args.rounds, learning_rate=args.learning_rate, max_depth=args.max_depth,
                       reg_lambda=args.reg_lambda, gamma=args.gamma, min_child_weight=args.min_child_weight,
                       seed=args.boost_seed, subsample=args.subsample)


def _run_config(args, out_dir: Optional[str]) -> pl.RunConfig:
    synth = None if args.data else _synth_config(args, "synth-")
    return pl.RunConfig(
        data_dir=args.data, synth=synth, lag_count=args.lag_count, k=args.k, max_iter=args.max_iter,
        tol=args.tol, standardize=args.standardize, single_regime=args.single_regime, method=args.method,
        n=0 if args.method == "none" else args.n, tier=args.tier, first_pc_only=args.first_pc_only,
        boost=_boost(args), hit_tolerance=args.hit_tolerance, shortage_threshold=args.shortage_threshold,
        train_days=args.train_days, seed=args.seed, repeat=getattr(args, "repeat", 1),
        best=getattr(args, "best", 1), out_dir=out_dir, ledger=getattr(args, "ledger", None))


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="poigap", description="POI selection for ride-hailing supply-demand gap estimation")
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub: dict[str, argparse.ArgumentParser] = {}

    p = sub["synth"] = subs.add_parser("synth", help="generate a synthetic city")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_synth(p)

    p = sub["ingest"] = subs.add_parser("ingest", help="parse and validate input files")
    _add_common(p)
    _add_data(p)
    p.add_argument("--lenient", action="store_true", help="skip malformed order lines instead of aborting")

    p = sub["gap"] = subs.add_parser("gap", help="export the gap tensor as CSV")
    _add_common(p)
    _add_data(p)
    p.add_argument("--out", required=True)

    p = sub["cluster"] = subs.add_parser("cluster", help="cluster blocks by gap profile")
    _add_common(p)
    _add_data(p)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_cluster(p)

    for name, helptext in (("select-poi", "rank POI categories"), ("train", "train a boosted model"),
                           ("pipeline", "full pipeline with evaluation"), ("sweep", "pipeline over methods and n")):
        p = sub[name] = subs.add_parser(name, help=helptext)
        _add_common(p)
        _add_data(p, required=False)
        _add_synth(p, prefix="synth-")
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=0)
        _add_cluster(p)
        _add_selection(p)
        _add_boost(p)
        _add_metrics(p)
    sub["pipeline"].add_argument("--repeat", type=int, default=1)
    sub["pipeline"].add_argument("--best", type=int, default=1)
    for name in ("pipeline", "sweep"):
        sub[name].add_argument("--ledger", default=None, help="run ledger CSV (default OUT/ledger.csv)")
    sub["sweep"].add_argument("--n-list", type=_int_list, default=list(range(1, 11)))
    sub["sweep"].add_argument("--methods", type=_str_list, default=["ppce"])

    p = sub["eval"] = subs.add_parser("eval", help="evaluate a saved model")
    _add_common(p)
    _add_data(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", default=None, help="report JSON path (default stdout)")
    _add_metrics(p)
    return parser, sub


def read_config_file(path: str) -> dict[str, str]:
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        out[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return out


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser, sub = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        sp = sub[args.command]
        actions = {a.dest: a for a in sp._actions}
        defaults = {}
        for key, value in read_config_file(args.config).items():
            if key not in actions:
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            act = actions[key]
            if isinstance(act, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                defaults[key] = _bool(value)
            else:
                defaults[key] = value  # string defaults go through the action's type
        sp.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def cmd_synth(args) -> int:
    city = generate(_synth_config(args))
    for path in write_city(city, Path(args.out)):
        print(path)
    return 0


def cmd_ingest(args) -> int:
    inputs = pl.load_inputs(args.data, strict=not args.lenient)
    summary = {
        "blocks": len(inputs.blocks), "days": inputs.n_days, "start": inputs.start.isoformat(),
        "orders": len(inputs.orders), "unanswered": sum(r.driver_id is None for r in inputs.orders),
        "poi_categories": inputs.poi.n_categories, "holidays": int(inputs.calendar.holiday_mask().sum()),
        "lines": inputs.stats.lines, "skipped": inputs.stats.skipped,
    }
    print(json.dumps(summary, indent=1))
    return 0


def cmd_gap(args) -> int:
    inputs = pl.load_inputs(args.data)
    gap = pl.compute_gap_tensor(inputs.orders, len(inputs.blocks), inputs.n_days, inputs.start)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(gap.to_csv(), encoding="utf-8")
    return 0


def cmd_cluster(args) -> int:
    inputs = pl.load_inputs(args.data)
    gap = pl.compute_gap_tensor(inputs.orders, len(inputs.blocks), inputs.n_days, inputs.start)
    days = (0, args.train_days) if args.train_days else None
    profiles = block_profiles(gap, inputs.calendar, days, single_regime=args.single_regime)
    clu = cluster_blocks(profiles, args.k, args.seed, args.max_iter, args.tol, scale=args.standardize)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "clustering.csv").write_text(clu.to_csv(), encoding="utf-8")
    (out / "centroids.csv").write_text(clu.centroids_csv(), encoding="utf-8")
    (out / "similarity.csv").write_text(similarity_report(clu.assignment, inputs.poi).to_csv(), encoding="utf-8")
    print(json.dumps({"k": clu.k, "sizes": clu.sizes().tolist(), "inertia": clu.inertia, "iterations": clu.n_iter}))
    return 0


def cmd_select_poi(args) -> int:
    cfg = _run_config(args, args.out)
    prep = pl.prepare(cfg)
    ranking = pl.rank(cfg, prep, cfg.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if ranking is None:
        raise UsageError("method 'none' produces no ranking")
    (out / "ranking.csv").write_text(ranking.to_csv(prep.inputs.poi.categories), encoding="utf-8")
    if prep.clustering is not None:
        (out / "clustering.csv").write_text(prep.clustering.to_csv(), encoding="utf-8")
        (out / "similarity.csv").write_text(
            similarity_report(prep.clustering.assignment, prep.inputs.poi).to_csv(), encoding="utf-8")
    labels = [prep.inputs.poi.categories[j] for j in pl.select(cfg, ranking)]
    print(json.dumps({"method": cfg.method, "selected": labels, "fallback": ranking.fallback}))
    return 0


def cmd_train(args) -> int:
    cfg = _run_config(args, args.out)
    prep = pl.prepare(cfg)
    ranking = pl.rank(cfg, prep, cfg.seed)
    selected = pl.select(cfg, ranking)
    model, report = pl.fit_and_score(cfg, prep, selected, cfg.boost)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "model.json").write_text(model.to_json() + "\n", encoding="utf-8")
    print(out / "model.json")
    return 0


def cmd_eval(args) -> int:
    try:
        model = GbdtModel.from_json(Path(args.model).read_text(encoding="utf-8"))
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot load model {args.model}: {exc}") from None
    inputs = pl.load_inputs(args.data)
    report = pl.evaluate_model(model, inputs, args.hit_tolerance, args.shortage_threshold)
    text = report.to_json() + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_pipeline(args) -> int:
    cfg = _run_config(args, args.out)
    pl.run_to_disk(cfg)
    sys.stdout.write((Path(args.out) / "report.json").read_text(encoding="utf-8"))
    return 0


def cmd_sweep(args) -> int:
    cfg = _run_config(args, args.out)
    for m in args.methods:
        if m not in pl.METHODS:
            raise UsageError(f"unknown method {m!r}")
    print(pl.sweep(cfg, args.n_list, args.methods))
    return 0


COMMANDS = {
    "synth": cmd_synth, "ingest": cmd_ingest, "gap": cmd_gap, "cluster": cmd_cluster,
    "select-poi": cmd_select_poi, "train": cmd_train, "eval": cmd_eval, "pipeline": cmd_pipeline,
    "sweep": cmd_sweep,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"poigap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"poigap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except pl.StageError as exc:
        print(f"poigap: {exc}", file=sys.stderr)
        return _code(exc.cause)
    except Exception as exc:  # noqa: BLE001
        code = _code(exc)
        if code == EXIT_INVARIANT and not isinstance(exc, InvariantError):
            log.exception("internal error")
        print(f"poigap: {exc}", file=sys.stderr)
        return code


def _code(exc: BaseException) -> int:
    if isinstance(exc, InvariantError):
        return EXIT_INVARIANT
    if isinstance(exc, (DataError, OSError)):
        return EXIT_DATA
    if isinstance(exc, ValueError):
        return EXIT_USAGE
    return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
