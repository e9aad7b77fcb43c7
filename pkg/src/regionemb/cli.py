"""Command-line entry point: generate | train | embed | evaluate | benchmark | ablate.

Machine-readable output (JSON summaries) goes to stdout; logs go to stderr.
Exit codes: 0 success, 1 usage, 2 data validation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .data import DataValidationError, Dataset, generate_city, load_dataset, save_dataset
from .evaluation import clustering_report, kfold_regress
from .fusion import scaling_benchmark
from .graphs import VIEWS, build_graphs, cleanse, trip_counts
from .training import (
    AblationFlags,
    Model,
    NumericalError,
    TrainConfig,
    ablation_from_name,
    load_checkpoint,
    read_embeddings_csv,
    save_checkpoint,
    train,
    write_embeddings_csv,
    write_embeddings_json,
    write_loss_log,
)

logger = logging.getLogger("regionemb")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload) + "\n")


def _require_dir(path: str, role: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise UsageError(f"{role} directory {path!r} does not exist")
    return p


def _dataset_paths(data_dir: Path) -> dict[str, Path]:
    return {name: data_dir / f"{name}.csv" for name in
            ("regions", "trips", "poi", "checkins", "targets")}


def _load_dir(data_dir: Path) -> Dataset:
    paths = _dataset_paths(data_dir)
    for role, p in paths.items():
        if not p.is_file():
            raise DataValidationError(f"missing {role} file: {p}")
    with paths["regions"].open("r", encoding="utf-8") as f:
        n_regions = sum(1 for line in f if line.strip()) - 1
    return load_dataset(
        paths["trips"], paths["poi"], paths["checkins"], paths["targets"],
        n_regions=n_regions, regions_path=paths["regions"],
    )


def _train_config(args) -> TrainConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    for flag, key in (
        ("seed", "seed"),
        ("epochs", "epochs"),
        ("dim", "dim"),
        ("heads", "heads"),
        ("memory", "memory_slots"),
        ("beta", "beta"),
        ("lr", "lr"),
        ("weight_decay", "weight_decay"),
    ):
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = v
    known = set(TrainConfig.__dataclass_fields__)
    unknown = set(values) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    config = TrainConfig(**values)
    config.validate()
    return config


def _resolve_dataset(args) -> Dataset:
    gen_flags = [args.gen_regions, args.gen_districts]
    if args.data is not None and any(v is not None for v in gen_flags):
        raise UsageError("give either --data or generator flags, not both")
    if args.data is not None:
        return _load_dir(_require_dir(args.data, "data"))
    if args.gen_regions is None or args.gen_districts is None:
        raise UsageError("need --data DIR, or --gen-regions and --gen-districts")
    return generate_city(
        n_regions=args.gen_regions,
        n_districts=args.gen_districts,
        n_poi_cats=args.gen_poi_cats,
        n_checkin_cats=args.gen_checkin_cats,
        n_trips=args.gen_trips,
        noise_level=args.gen_noise,
        seed=args.seed if args.seed is not None else 0,
        deterministic_trips=args.gen_deterministic,
    )


def cmd_generate(args) -> int:
    out = _require_dir(args.out, "output")
    ds = generate_city(
        n_regions=args.regions,
        n_districts=args.districts,
        n_poi_cats=args.poi_cats,
        n_checkin_cats=args.checkin_cats,
        n_trips=args.trips,
        noise_level=args.noise,
        seed=args.seed,
        deterministic_trips=args.deterministic_trips,
    )
    paths = save_dataset(ds, out)
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps({"generator": ds.meta}), encoding="utf-8")
    _emit({
        "command": "generate",
        "files": sorted(str(p) for p in [*paths.values(), manifest]),
        "generator": ds.meta,
    })
    return 0


def _dump_graphs(out: Path, dataset: Dataset, model: Model) -> None:
    graphs = build_graphs(dataset)
    for view in VIEWS:
        np.savetxt(out / f"graph_{view}.csv", graphs[view].matrix, delimiter=",")
        tau = model.params.get(f"threshold/{view}")
        if tau is not None:
            graphs[view].threshold = float(tau.data)
            np.savetxt(
                out / f"graph_{view}_cleansed.csv",
                cleanse(graphs[view]).matrix,
                delimiter=",",
            )


def cmd_train(args) -> int:
    out = _require_dir(args.out, "output")
    config = _train_config(args)
    ablation = ablation_from_name(args.ablate) if args.ablate else AblationFlags()
    dataset = _resolve_dataset(args)
    result = train(dataset, config, ablation)
    save_checkpoint(out / "checkpoint.json", result)
    write_loss_log(out / "loss_log.csv", result.log)
    write_embeddings_csv(out / "embeddings.csv", result.embeddings)
    write_embeddings_json(out / "embeddings.json", result.embeddings)
    if args.dump_graphs:
        _dump_graphs(out, dataset, result.model)
    _emit({
        "command": "train",
        "epochs": config.epochs,
        "n_regions": result.model.n,
        "n_parameters": result.model.parameter_count(),
        "final_losses": result.final_losses,
        "config": asdict(config),
        "ablation": asdict(result.ablation),
        "out": str(out),
    })
    return 0


def cmd_embed(args) -> int:
    out = _require_dir(args.out, "output")
    config, ablation, params = load_checkpoint(args.checkpoint)
    dataset = _load_dir(_require_dir(args.data, "data"))
    graphs = build_graphs(dataset)
    counts = trip_counts(dataset.trips, dataset.regions.n)
    model = Model(graphs, counts, config, ablation)
    model.load_params(params)
    embeddings = model.embeddings()
    write_embeddings_csv(out / "embeddings.csv", embeddings)
    write_embeddings_json(out / "embeddings.json", embeddings)
    _emit({
        "command": "embed",
        "n_regions": model.n,
        "config": asdict(config),
        "ablation": asdict(ablation),
        "out": str(out),
    })
    return 0


def _load_targets_aligned(path: Path, ids: np.ndarray):
    from .data import _read_rows  # same validation rules as the loader

    header, rows = _read_rows(path, ["region_id", "checkin_total"])
    rcol = header.index("region_id")
    ccol = header.index("checkin_total")
    kcol = header.index("crime_count") if "crime_count" in header else None
    table = {}
    for lineno, row in rows:
        table[int(row[rcol])] = (
            float(row[ccol]),
            float(row[kcol]) if kcol is not None else None,
        )
    missing = [int(i) for i in ids if int(i) not in table]
    if missing:
        raise DataValidationError(f"{path}: no targets for regions {missing[:5]}")
    checkin = np.array([table[int(i)][0] for i in ids])
    crime = None
    if kcol is not None:
        crime = np.array([table[int(i)][1] for i in ids])
    return checkin, crime


def _load_districts(path: Path, ids: np.ndarray) -> np.ndarray | None:
    from .data import _read_rows

    header, rows = _read_rows(path, ["id", "name"])
    if "district" not in header:
        return None
    dcol = header.index("district")
    labels = {i: int(row[dcol]) for i, (_, row) in enumerate(rows)}
    missing = [int(i) for i in ids if int(i) not in labels]
    if missing:
        raise DataValidationError(f"{path}: no district for regions {missing[:5]}")
    return np.array([labels[int(i)] for i in ids])


def cmd_evaluate(args) -> int:
    out = _require_dir(args.out, "output")
    ids, X, spans = read_embeddings_csv(args.embeddings)
    if args.view != "all":
        if args.view not in spans:
            raise UsageError(f"view {args.view!r} not present in embeddings file")
        X = X[:, spans[args.view]]
    checkin, crime = _load_targets_aligned(Path(args.targets), ids)
    districts = _load_districts(Path(args.regions), ids) if args.regions else None

    warnings = []
    reports = []
    reports.append(kfold_regress(X, checkin, k=args.folds, seed=args.seed, task="checkin"))
    if crime is not None:
        reports.append(kfold_regress(X, crime, k=args.folds, seed=args.seed, task="crime"))
    else:
        warnings.append("targets file has no crime_count column; crime task skipped")
    cluster_rep = None
    if districts is not None:
        k = args.clusters or len(np.unique(districts))
        cluster_rep = clustering_report(X, districts, k, seed=args.seed)
    else:
        k = args.clusters or 12
        warnings.append("no district labels; land-use report has no ground truth")

    payload = {
        "command": "evaluate",
        "view": args.view,
        "seed": args.seed,
        "folds": args.folds,
        "reports": [r.to_dict() for r in reports],
        "warnings": warnings,
    }
    if cluster_rep is not None:
        payload["reports"].append(cluster_rep.to_dict())
        if args.assignments:
            with (out / "assignments.csv").open("w", encoding="utf-8") as f:
                f.write("region_id,cluster\n")
                for i, c in zip(ids, cluster_rep.assignments):
                    f.write(f"{int(i)},{int(c)}\n")
    for rep in payload["reports"]:
        name = rep["task"]
        report = {**rep, "seed": args.seed, "view": args.view}
        (out / f"report_{name}.json").write_text(json.dumps(report), encoding="utf-8")
    _emit(payload)
    return 0


def cmd_benchmark(args) -> int:
    sizes = tuple(int(s) for s in args.sizes.split(","))
    if len(sizes) < 2:
        raise UsageError("need at least two sizes to compare scaling")
    result = scaling_benchmark(
        sizes=sizes, runs=args.runs, dim=args.dim, slots=args.memory, seed=args.seed
    )
    _emit({"command": "benchmark", **result})
    return 0


def cmd_ablate(args) -> int:
    out = _require_dir(args.out, "output")
    config = _train_config(args)
    dataset = _resolve_dataset(args)
    runs = {}
    for name in ["full", *sorted(["gcl", "mgam", "afm", "dsgf"])]:
        ablation = AblationFlags() if name == "full" else ablation_from_name(name)
        result = train(dataset, config, ablation)
        save_checkpoint(out / f"checkpoint_{name}.json", result)
        runs[name] = result.final_losses
        logger.info("ablation %s: final total loss %.6f", name, result.final_losses["total"])
    _emit({
        "command": "ablate",
        "final_losses": runs,
        "config": asdict(config),
        "out": str(out),
    })
    return 0


def _add_train_flags(p: _Parser) -> None:
    p.add_argument("--config", help="JSON config file; CLI flags override it")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--heads", type=int, default=None)
    p.add_argument("--memory", type=int, default=None, help="memory slots in the fusion stage")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--weight-decay", dest="weight_decay", type=float, default=None)
    p.add_argument("--data", help="directory with regions/trips/poi/checkins/targets CSVs")
    p.add_argument("--gen-regions", type=int, default=None)
    p.add_argument("--gen-districts", type=int, default=None)
    p.add_argument("--gen-poi-cats", type=int, default=12)
    p.add_argument("--gen-checkin-cats", type=int, default=16)
    p.add_argument("--gen-trips", type=int, default=500)
    p.add_argument("--gen-noise", type=float, default=0.1)
    p.add_argument("--gen-deterministic", action="store_true")
    p.add_argument("--out", required=True, help="existing output directory")


def build_parser() -> _Parser:
    parser = _Parser(prog="regionemb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic city to CSV files")
    g.add_argument("--out", required=True)
    g.add_argument("--regions", type=int, required=True)
    g.add_argument("--districts", type=int, required=True)
    g.add_argument("--poi-cats", type=int, default=12)
    g.add_argument("--checkin-cats", type=int, default=16)
    g.add_argument("--trips", type=int, default=500)
    g.add_argument("--noise", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--deterministic-trips", action="store_true")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train and write checkpoint/losses/embeddings")
    _add_train_flags(t)
    t.add_argument("--ablate", default=None, help="gcl | mgam | afm | dsgf")
    t.add_argument("--dump-graphs", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("embed", help="recompute embeddings from a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_embed)

    v = sub.add_parser("evaluate", help="downstream regression and clustering reports")
    v.add_argument("--embeddings", required=True)
    v.add_argument("--targets", required=True)
    v.add_argument("--regions", default=None, help="regions.csv with district labels")
    v.add_argument("--out", required=True)
    v.add_argument("--view", default="all", choices=["all", *VIEWS])
    v.add_argument("--clusters", type=int, default=None)
    v.add_argument("--folds", type=int, default=5)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--assignments", action="store_true", help="also write assignments.csv")
    v.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("benchmark", help="linear vs quadratic fusion timing")
    b.add_argument("--sizes", default="256,1024")
    b.add_argument("--runs", type=int, default=5)
    b.add_argument("--dim", type=int, default=32)
    b.add_argument("--memory", type=int, default=32)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_benchmark)

    a = sub.add_parser("ablate", help="train the full model and all four ablations")
    _add_train_flags(a)
    a.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataValidationError as e:
        logger.error("data validation failed: %s", e)
        return 2
    except NumericalError as e:
        logger.error("numerical failure: %s", e)
        return 3
    except (UsageError, ValueError, OSError) as e:
        logger.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
