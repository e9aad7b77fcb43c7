"""Region/trip/feature types, CSV ingestion, and a synthetic-city generator.

File formats (UTF-8, header row, comma-separated):
    regions.csv   id,name[,district]
    trips.csv     origin_id,dest_id          (one row per trip)
    poi.csv       region_id,category,count
    checkins.csv  region_id,category,count
    targets.csv   region_id,checkin_total[,crime_count]
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "DataValidationError",
    "RegionSet",
    "TripSet",
    "FeatureTable",
    "TaskTargets",
    "Dataset",
    "generate_city",
    "cyclic_destination_map",
    "save_dataset",
    "load_dataset",
]


class DataValidationError(ValueError):
    """Raised when an input file or generator parameter fails validation."""


@dataclass
class RegionSet:
    n: int
    names: list[str]
    districts: np.ndarray | None = None  # int label per region, when known

    def __post_init__(self):
        if self.n <= 0:
            raise DataValidationError("region count must be positive")
        if len(self.names) != self.n:
            raise DataValidationError("region name count does not match N")
        if self.districts is not None:
            self.districts = np.asarray(self.districts, dtype=np.int64)
            if self.districts.shape != (self.n,):
                raise DataValidationError("district labels must cover all regions")


@dataclass
class TripSet:
    origins: np.ndarray  # int region ids
    dests: np.ndarray
    n_regions: int

    def __post_init__(self):
        self.origins = np.asarray(self.origins, dtype=np.int64)
        self.dests = np.asarray(self.dests, dtype=np.int64)
        if self.origins.shape != self.dests.shape or self.origins.ndim != 1:
            raise DataValidationError("origins and destinations must be equal-length vectors")
        if self.size < 1:
            raise DataValidationError("a trip set needs at least one trip")
        for arr, role in ((self.origins, "origin"), (self.dests, "destination")):
            bad = (arr < 0) | (arr >= self.n_regions)
            if bad.any():
                i = int(np.argmax(bad))
                raise DataValidationError(
                    f"trip {i}: {role} id {arr[i]} outside 0..{self.n_regions - 1}"
                )

    @property
    def size(self) -> int:
        return int(self.origins.shape[0])


@dataclass
class FeatureTable:
    counts: np.ndarray  # N x C, non-negative
    categories: list[str]

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.float64)
        if self.counts.ndim != 2:
            raise DataValidationError("feature counts must be a 2-D matrix")
        if self.counts.shape[1] != len(self.categories):
            raise DataValidationError("column count does not match category names")
        if (self.counts < 0).any():
            raise DataValidationError("feature counts must be non-negative")

    @property
    def n_regions(self) -> int:
        return int(self.counts.shape[0])


@dataclass
class TaskTargets:
    checkin: np.ndarray
    crime: np.ndarray | None = None
    districts: np.ndarray | None = None

    def __post_init__(self):
        self.checkin = np.asarray(self.checkin, dtype=np.float64)
        if self.crime is not None:
            self.crime = np.asarray(self.crime, dtype=np.float64)
            if self.crime.shape != self.checkin.shape:
                raise DataValidationError("crime targets must cover all regions")
        if self.districts is not None:
            self.districts = np.asarray(self.districts, dtype=np.int64)


@dataclass
class Dataset:
    regions: RegionSet
    trips: TripSet
    poi: FeatureTable
    checkins: FeatureTable
    targets: TaskTargets
    meta: dict = field(default_factory=dict)


def _district_assignment(n_regions: int, n_districts: int) -> np.ndarray:
    # contiguous blocks: regions 0..k-1 in district 0, etc.
    return (np.arange(n_regions) * n_districts) // n_regions


def _district_profiles(n_districts: int, n_cats: int) -> np.ndarray:
    """One peaked category profile per district; cores are disjoint mod D."""
    profiles = np.full((n_districts, n_cats), 0.5)
    for d in range(n_districts):
        profiles[d, np.arange(n_cats) % n_districts == d] += 10.0
    return profiles / profiles.sum(axis=1, keepdims=True)


def cyclic_destination_map(districts: np.ndarray) -> np.ndarray:
    """Each region's fixed destination: the next region in its district, cyclically."""
    districts = np.asarray(districts)
    dest = np.empty_like(districts)
    for d in np.unique(districts):
        members = np.flatnonzero(districts == d)
        dest[members] = np.roll(members, -1)
    return dest


def _sample_counts(
    rng: np.random.Generator,
    districts: np.ndarray,
    profiles: np.ndarray,
    noise_level: float,
    per_region_total: float,
) -> np.ndarray:
    n = districts.shape[0]
    n_cats = profiles.shape[1]
    counts = np.empty((n, n_cats), dtype=np.int64)
    for i in range(n):
        idio = rng.dirichlet(np.ones(n_cats))
        mix = (1.0 - noise_level) * profiles[districts[i]] + noise_level * idio
        counts[i] = rng.poisson(per_region_total * mix)
    return counts


def generate_city(
    n_regions: int,
    n_districts: int,
    n_poi_cats: int = 12,
    n_checkin_cats: int = 16,
    n_trips: int = 500,
    noise_level: float = 0.1,
    seed: int = 0,
    deterministic_trips: bool = False,
) -> Dataset:
    """Synthetic city with planted district structure.

    Each district gets a distinct POI/check-in category profile; trips stay
    inside the origin's district with probability 1 - noise_level (or follow a
    fixed cyclic per-region destination when deterministic_trips is set);
    regression targets are linear in the region's raw feature rows plus
    Gaussian noise at a 10:1 signal-to-noise ratio. Deterministic per seed.
    """
    if n_regions <= 0 or n_trips <= 0:
        raise DataValidationError("n_regions and n_trips must be positive")
    if not (0 < n_districts <= n_regions):
        raise DataValidationError("need 0 < n_districts <= n_regions")
    if not (0.0 <= noise_level <= 1.0):
        raise DataValidationError("noise_level must lie in [0, 1]")
    if n_poi_cats < n_districts or n_checkin_cats < n_districts:
        raise DataValidationError("need at least one feature category per district")

    rng = np.random.default_rng(seed)
    districts = _district_assignment(n_regions, n_districts)
    poi_counts = _sample_counts(
        rng, districts, _district_profiles(n_districts, n_poi_cats), noise_level, 200.0
    )
    checkin_counts = _sample_counts(
        rng, districts, _district_profiles(n_districts, n_checkin_cats), noise_level, 300.0
    )

    if deterministic_trips:
        dest_map = cyclic_destination_map(districts)
        origins = np.arange(n_trips, dtype=np.int64) % n_regions
        dests = dest_map[origins]
    else:
        origins = rng.integers(0, n_regions, size=n_trips)
        dests = np.empty(n_trips, dtype=np.int64)
        members_by_district = [np.flatnonzero(districts == d) for d in range(n_districts)]
        for t in range(n_trips):
            if rng.random() < noise_level:
                dests[t] = rng.integers(0, n_regions)
            else:
                local = members_by_district[districts[origins[t]]]
                dests[t] = local[rng.integers(0, local.shape[0])]

    features = np.concatenate(
        [poi_counts.astype(np.float64), checkin_counts.astype(np.float64)], axis=1
    )
    targets = {}
    for task in ("checkin", "crime"):
        w = rng.normal(size=features.shape[1])
        signal = features @ w
        sigma = float(signal.std()) / 10.0
        targets[task] = signal + rng.normal(0.0, 1.0, size=n_regions) * sigma

    regions = RegionSet(
        n=n_regions,
        names=[f"region_{i:03d}" for i in range(n_regions)],
        districts=districts,
    )
    meta = {
        "n_regions": n_regions,
        "n_districts": n_districts,
        "n_poi_cats": n_poi_cats,
        "n_checkin_cats": n_checkin_cats,
        "n_trips": n_trips,
        "noise_level": noise_level,
        "seed": seed,
        "deterministic_trips": deterministic_trips,
    }
    return Dataset(
        regions=regions,
        trips=TripSet(origins, dests, n_regions),
        poi=FeatureTable(poi_counts, [f"poi_{k:03d}" for k in range(n_poi_cats)]),
        checkins=FeatureTable(
            checkin_counts, [f"checkin_{k:03d}" for k in range(n_checkin_cats)]
        ),
        targets=TaskTargets(targets["checkin"], targets["crime"], districts),
        meta=meta,
    )


def _fmt(x) -> str:
    """Round-trippable text for a cell value."""
    if float(x) == int(x):
        return str(int(x))
    return repr(float(x))


def save_dataset(dataset: Dataset, outdir: str | Path) -> dict[str, Path]:
    """Write the five CSV files; returns the paths keyed by role."""
    outdir = Path(outdir)
    paths = {name: outdir / f"{name}.csv" for name in
             ("regions", "trips", "poi", "checkins", "targets")}

    with paths["regions"].open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        districts = dataset.regions.districts
        if districts is not None:
            w.writerow(["id", "name", "district"])
            for i, name in enumerate(dataset.regions.names):
                w.writerow([i, name, int(districts[i])])
        else:
            w.writerow(["id", "name"])
            for i, name in enumerate(dataset.regions.names):
                w.writerow([i, name])

    with paths["trips"].open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["origin_id", "dest_id"])
        for o, d in zip(dataset.trips.origins, dataset.trips.dests):
            w.writerow([int(o), int(d)])

    for role, table in (("poi", dataset.poi), ("checkins", dataset.checkins)):
        with paths[role].open("w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["region_id", "category", "count"])
            # zero rows included so the loaded table has identical shape
            for i in range(table.n_regions):
                for k, cat in enumerate(table.categories):
                    w.writerow([i, cat, _fmt(table.counts[i, k])])

    with paths["targets"].open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        if dataset.targets.crime is not None:
            w.writerow(["region_id", "checkin_total", "crime_count"])
            for i in range(dataset.regions.n):
                w.writerow(
                    [i, _fmt(dataset.targets.checkin[i]), _fmt(dataset.targets.crime[i])]
                )
        else:
            w.writerow(["region_id", "checkin_total"])
            for i in range(dataset.regions.n):
                w.writerow([i, _fmt(dataset.targets.checkin[i])])

    return paths


def _read_rows(path: str | Path, required: list[str]) -> tuple[list[str], list[tuple[int, list[str]]]]:
    path = Path(path)
    with path.open("r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataValidationError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        for col in required:
            if col not in header:
                raise DataValidationError(f"{path}: missing required column {col!r}")
        rows = [(lineno, row) for lineno, row in enumerate(reader, start=2) if row]
    return header, rows


def _resolve(
    raw: str, id_map: dict[str, int] | None, n: int, path: Path | str, lineno: int
) -> int:
    if id_map is not None:
        if raw not in id_map:
            raise DataValidationError(f"{path}:{lineno}: unknown region id {raw!r}")
        return id_map[raw]
    try:
        idx = int(raw)
    except ValueError:
        raise DataValidationError(
            f"{path}:{lineno}: region id {raw!r} is not an integer"
        ) from None
    if not (0 <= idx < n):
        raise DataValidationError(
            f"{path}:{lineno}: region id {idx} outside 0..{n - 1}"
        )
    return idx


def _load_feature_table(
    path: str | Path, n_regions: int, id_map: dict[str, int] | None
) -> FeatureTable:
    header, rows = _read_rows(path, ["region_id", "category", "count"])
    rcol, ccol, ncol = (header.index(c) for c in ("region_id", "category", "count"))
    acc: dict[tuple[int, str], float] = {}
    for lineno, row in rows:
        idx = _resolve(row[rcol], id_map, n_regions, path, lineno)
        cat = row[ccol]
        try:
            cnt = float(row[ncol])
        except ValueError:
            raise DataValidationError(f"{path}:{lineno}: count {row[ncol]!r} is not a number") from None
        if cnt < 0:
            raise DataValidationError(f"{path}:{lineno}: negative count {cnt}")
        acc[(idx, cat)] = acc.get((idx, cat), 0.0) + cnt
    categories = sorted({cat for _, cat in acc})
    counts = np.zeros((n_regions, len(categories)))
    cat_index = {c: k for k, c in enumerate(categories)}
    for (idx, cat), cnt in acc.items():
        counts[idx, cat_index[cat]] = cnt
    return FeatureTable(counts, categories)


def load_dataset(
    trips_path: str | Path,
    poi_path: str | Path,
    checkin_path: str | Path,
    targets_path: str | Path,
    n_regions: int,
    regions_path: str | Path | None = None,
) -> Dataset:
    """Load and validate a dataset from the CSV files.

    Without regions.csv, region ids must be dense integers 0..N-1. With it,
    ids may be arbitrary strings, mapped to indices in file order; a district
    column, when present, supplies land-use ground truth.
    """
    id_map: dict[str, int] | None = None
    names = [f"region_{i:03d}" for i in range(n_regions)]
    districts = None
    if regions_path is not None:
        header, rows = _read_rows(regions_path, ["id", "name"])
        icol, ncol = header.index("id"), header.index("name")
        dcol = header.index("district") if "district" in header else None
        if len(rows) != n_regions:
            raise DataValidationError(
                f"{regions_path}: {len(rows)} regions listed, expected {n_regions}"
            )
        id_map = {}
        names = []
        dists = []
        for lineno, row in rows:
            raw = row[icol]
            if raw in id_map:
                raise DataValidationError(f"{regions_path}:{lineno}: duplicate id {raw!r}")
            id_map[raw] = len(names)
            names.append(row[ncol])
            if dcol is not None:
                dists.append(int(row[dcol]))
        if dcol is not None:
            districts = np.asarray(dists, dtype=np.int64)

    header, rows = _read_rows(trips_path, ["origin_id", "dest_id"])
    ocol, dcol2 = header.index("origin_id"), header.index("dest_id")
    origins, dests = [], []
    for lineno, row in rows:
        origins.append(_resolve(row[ocol], id_map, n_regions, trips_path, lineno))
        dests.append(_resolve(row[dcol2], id_map, n_regions, trips_path, lineno))
    if not origins:
        raise DataValidationError(f"{trips_path}: no trips")
    trips = TripSet(np.asarray(origins), np.asarray(dests), n_regions)

    poi = _load_feature_table(poi_path, n_regions, id_map)
    checkins = _load_feature_table(checkin_path, n_regions, id_map)

    header, rows = _read_rows(targets_path, ["region_id", "checkin_total"])
    rcol, ccol = header.index("region_id"), header.index("checkin_total")
    kcol = header.index("crime_count") if "crime_count" in header else None
    checkin_y = np.full(n_regions, np.nan)
    crime_y = np.full(n_regions, np.nan) if kcol is not None else None
    for lineno, row in rows:
        idx = _resolve(row[rcol], id_map, n_regions, targets_path, lineno)
        checkin_y[idx] = float(row[ccol])
        if crime_y is not None:
            crime_y[idx] = float(row[kcol])
    if np.isnan(checkin_y).any():
        missing = int(np.argmax(np.isnan(checkin_y)))
        raise DataValidationError(f"{targets_path}: no target row for region {missing}")

    regions = RegionSet(n=n_regions, names=names, districts=districts)
    targets = TaskTargets(checkin_y, crime_y, districts)
    return Dataset(regions=regions, trips=trips, poi=poi, checkins=checkins, targets=targets)
