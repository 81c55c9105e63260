"""Experiment orchestration: balanced splits, repeated trials, confidence
intervals and CSV reporting for the two dictionary studies.

The cross-base experiment builds dictionaries over one corpus and evaluates
classification on another (and natively, on the target's own dictionaries);
the diversity sweep builds dictionaries from nested class subsets of growing
size. All randomness is derived from per-run integer seeds by fixed offsets,
so one integer reproduces a run end to end.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .classifier import TrainConfig, accuracy, train_ovr
from .codebook import Codebook, build_random_codebook
from .corpus import DatasetManifest, ManifestEntry, load_image, select_classes
from .encoding import BowVector, EncodingParams, encode_image
from .features import (
    DescriptorSet,
    GridParams,
    cache_path,
    extract_dense_sift,
    load_descriptor_cache,
    save_descriptor_cache,
)

logger = logging.getLogger(__name__)

# seed derivations from the per-run seed; distinct primes keep the streams apart
DICT_SEED_OFFSET = 9973
SPLIT_SEED_OFFSET = 104729
TRAIN_SEED_OFFSET = 1299709
CLASS_SEED_OFFSET = 15485863

CSV_COLUMNS = [
    "experiment",
    "dict_source",
    "dict_classes",
    "target",
    "n_train",
    "k",
    "sigma",
    "assignment",
    "pooling",
    "n_runs",
    "mean_acc",
    "ci_low",
    "ci_high",
]

# two-sided Student-t critical values t_{1-alpha/2, df} for df = 1..30;
# the "inf" entry is the normal-limit value used beyond the table
_T_TABLE = {
    0.10: (
        6.3138, 2.9200, 2.3534, 2.1318, 2.0150, 1.9432, 1.8946, 1.8595,
        1.8331, 1.8125, 1.7959, 1.7823, 1.7709, 1.7613, 1.7531, 1.7459,
        1.7396, 1.7341, 1.7291, 1.7247, 1.7207, 1.7171, 1.7139, 1.7109,
        1.7081, 1.7056, 1.7033, 1.7011, 1.6991, 1.6973,
    ),
    0.05: (
        12.7062, 4.3027, 3.1824, 2.7764, 2.5706, 2.4469, 2.3646, 2.3060,
        2.2622, 2.2281, 2.2010, 2.1788, 2.1604, 2.1448, 2.1314, 2.1199,
        2.1098, 2.1009, 2.0930, 2.0860, 2.0796, 2.0739, 2.0687, 2.0639,
        2.0595, 2.0555, 2.0518, 2.0484, 2.0452, 2.0423,
    ),
    0.01: (
        63.6567, 9.9248, 5.8409, 4.6041, 4.0321, 3.7074, 3.4995, 3.3554,
        3.2498, 3.1693, 3.1058, 3.0545, 3.0123, 2.9768, 2.9467, 2.9208,
        2.8982, 2.8784, 2.8609, 2.8453, 2.8314, 2.8188, 2.8073, 2.7969,
        2.7874, 2.7787, 2.7707, 2.7633, 2.7564, 2.7500,
    ),
}
_T_INF = {0.10: 1.6449, 0.05: 1.9600, 0.01: 2.5758}


@dataclass(frozen=True)
class SplitSpec:
    """Balanced-validation protocol: images per class in training, and the
    per-run seeds (one independent dictionary+split per seed)."""

    n_train_per_class: int
    run_seeds: tuple[int, ...] = (0, 1, 2, 3, 4)

    def __post_init__(self) -> None:
        if self.n_train_per_class < 1:
            raise ValueError("n_train_per_class must be >= 1")
        if len(self.run_seeds) < 1:
            raise ValueError("need at least one run seed")


@dataclass(frozen=True)
class TrialResult:
    accuracy: float
    seed: int
    n_train: int
    dictionary_id: str


@dataclass(frozen=True)
class SummaryRow:
    experiment: str
    dict_source: str
    dict_classes: str
    target: str
    n_train: int
    k: int
    sigma: float
    assignment: str
    pooling: str
    n_runs: int
    mean_acc: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class PipelineParams:
    """Everything a trial needs besides the data: extraction, codebook size,
    encoding and training settings."""

    grid: GridParams = GridParams()
    encoding: EncodingParams = EncodingParams()
    k: int = 1000
    c_reg: float = 1.0
    epochs: int = 50
    alpha: float = 0.05
    workers: int = 1

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


class DescriptorStore:
    """Memoized dense-SIFT extraction per (manifest entry, grid params).

    Optionally persists per-image cache files so repeated CLI runs skip
    extraction. Warm the store before handing it to concurrent trials.
    """

    def __init__(self, grid: GridParams, cache_dir: str | Path | None = None):
        self.grid = grid
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        if self.cache_dir is not None:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self._memory: dict[Path, DescriptorSet] = {}

    def get(self, manifest: DatasetManifest, entry: ManifestEntry) -> DescriptorSet:
        path = manifest.resolve(entry)
        ds = self._memory.get(path)
        if ds is not None:
            return ds
        if self.cache_dir is not None:
            cpath = cache_path(self.cache_dir, path, self.grid)
            if cpath.is_file():
                ds = load_descriptor_cache(cpath, self.grid, source_image=entry.path)
                self._memory[path] = ds
                return ds
        image = load_image(path)
        logger.debug("extracting %s (%dx%d)", path, image.width, image.height)
        ds = extract_dense_sift(image, self.grid, source=entry.path)
        if self.cache_dir is not None:
            save_descriptor_cache(cache_path(self.cache_dir, path, self.grid), ds, self.grid)
        self._memory[path] = ds
        return ds

    def pool(self, manifest: DatasetManifest) -> list[DescriptorSet]:
        """Descriptor sets for every entry, in manifest order."""
        return [self.get(manifest, e) for e in manifest.entries]


def split_balanced(
    manifest: DatasetManifest, n_train: int, seed: int
) -> tuple[DatasetManifest, DatasetManifest]:
    """Seeded balanced split: exactly n_train images per class in train,
    every remaining image in test. Entry order follows the manifest."""
    if n_train < 1:
        raise ValueError("n_train must be >= 1")
    rng = np.random.default_rng(seed)
    train_idx: set[int] = set()
    by_class: dict[str, list[int]] = {}
    for i, e in enumerate(manifest.entries):
        by_class.setdefault(e.label, []).append(i)
    for label in sorted(by_class):
        idxs = by_class[label]
        if len(idxs) < n_train + 1:
            raise ValueError(
                f"class '{label}' has {len(idxs)} images; "
                f"need more than n_train={n_train}"
            )
        perm = rng.permutation(len(idxs))
        train_idx.update(idxs[p] for p in perm[:n_train])
    train_entries = tuple(e for i, e in enumerate(manifest.entries) if i in train_idx)
    test_entries = tuple(e for i, e in enumerate(manifest.entries) if i not in train_idx)
    train = DatasetManifest(manifest.name, train_entries, base_dir=manifest.base_dir)
    test = DatasetManifest(manifest.name, test_entries, base_dir=manifest.base_dir)
    return train, test


def _encode_manifest(
    manifest: DatasetManifest,
    cb: Codebook,
    params: PipelineParams,
    store: DescriptorStore,
) -> tuple[list[BowVector], list[str]]:
    bows = [encode_image(store.get(manifest, e), cb, params.encoding) for e in manifest.entries]
    return bows, [e.label for e in manifest.entries]


def run_trial(
    dictionary: Codebook,
    target: DatasetManifest,
    n_train: int,
    run_seed: int,
    params: PipelineParams,
    store: DescriptorStore,
) -> TrialResult:
    """Encode the target with the given dictionary (native or foreign),
    train on a balanced split and return test accuracy."""
    train_m, test_m = split_balanced(target, n_train, run_seed + SPLIT_SEED_OFFSET)
    train_bows, train_labels = _encode_manifest(train_m, dictionary, params, store)
    test_bows, test_labels = _encode_manifest(test_m, dictionary, params, store)
    cfg = TrainConfig(c_reg=params.c_reg, epochs=params.epochs, seed=run_seed + TRAIN_SEED_OFFSET)
    model = train_ovr(train_bows, train_labels, cfg)
    acc = accuracy(model, test_bows, test_labels)
    logger.info(
        "trial seed=%d n_train=%d dict=%s acc=%.4f",
        run_seed, n_train, dictionary.codebook_id, acc,
    )
    return TrialResult(accuracy=acc, seed=run_seed, n_train=n_train,
                       dictionary_id=dictionary.codebook_id)


def confidence_interval(
    values: Sequence[float], alpha: float = 0.05
) -> tuple[float, float, float]:
    """Mean with a two-sided Student-t confidence interval.

    Returns (mean, low, high) = mean -/+ t_{1-alpha/2, n-1} * s / sqrt(n)
    with the sample standard deviation s. Critical values come from the
    embedded table (df 1..30; the normal limit beyond that).
    """
    if len(values) < 2:
        raise ValueError("need at least 2 values for a confidence interval")
    if alpha not in _T_TABLE:
        raise ValueError(f"alpha must be one of {sorted(_T_TABLE)}")
    arr = np.asarray(values, dtype=np.float64)
    n = len(arr)
    if np.all(arr == arr[0]):
        v = float(arr[0])
        return v, v, v
    mean = float(arr.mean())
    s = float(arr.std(ddof=1))
    df = n - 1
    t = _T_TABLE[alpha][df - 1] if df <= 30 else _T_INF[alpha]
    half = t * s / np.sqrt(n)
    return mean, mean - half, mean + half


def _dictionaries_for_runs(
    source: DatasetManifest,
    run_seeds: Sequence[int],
    params: PipelineParams,
    store: DescriptorStore,
    class_note: str = "all",
) -> dict[int, Codebook]:
    pool = store.pool(source)
    out = {}
    for seed in run_seeds:
        out[seed] = build_random_codebook(
            pool,
            params.k,
            seed + DICT_SEED_OFFSET,
            source_name=source.name,
            source_classes=source.class_labels,
        )
        logger.info(
            "dictionary %s from %s (%s classes)", out[seed].codebook_id, source.name, class_note
        )
    return out


def _run_trials(
    jobs: list[tuple[Codebook, DatasetManifest, int, int]],
    params: PipelineParams,
    store: DescriptorStore,
) -> list[TrialResult]:
    if params.workers > 1:
        with ThreadPoolExecutor(max_workers=params.workers) as pool:
            futures = [
                pool.submit(run_trial, cb, target, n_train, seed, params, store)
                for cb, target, n_train, seed in jobs
            ]
            return [f.result() for f in futures]
    return [run_trial(cb, target, n_train, seed, params, store) for cb, target, n_train, seed in jobs]


def _summarize(
    experiment: str,
    dict_source: str,
    dict_classes: str,
    target: str,
    n_train: int,
    params: PipelineParams,
    trials: Sequence[TrialResult],
) -> SummaryRow:
    accs = [t.accuracy for t in sorted(trials, key=lambda t: t.seed)]
    if len(accs) >= 2:
        mean, low, high = confidence_interval(accs, params.alpha)
    else:
        mean = low = high = accs[0]
    return SummaryRow(
        experiment=experiment,
        dict_source=dict_source,
        dict_classes=dict_classes,
        target=target,
        n_train=n_train,
        k=params.k,
        sigma=params.encoding.sigma,
        assignment=params.encoding.assignment,
        pooling=params.encoding.pooling,
        n_runs=len(accs),
        mean_acc=mean,
        ci_low=low,
        ci_high=high,
    )


def cross_base_experiment(
    dict_source: DatasetManifest,
    target: DatasetManifest,
    n_train_values: Sequence[int],
    spec: SplitSpec,
    params: PipelineParams,
    store: DescriptorStore | None = None,
    include_native: bool = True,
) -> list[SummaryRow]:
    """Paired dictionary-generalizability curves on one target corpus.

    For every n_train and run seed, the target is encoded with a dictionary
    built either over its own images ("native") or over ``dict_source``
    ("cross"), then classified on a balanced split. One fresh dictionary is
    built per run seed and reused across training sizes. Rows are ordered by
    (configuration, n_train).
    """
    store = store if store is not None else DescriptorStore(params.grid)
    # warm extraction up front so trials only read
    store.pool(dict_source)
    store.pool(target)
    configs: list[tuple[str, DatasetManifest]] = []
    if include_native:
        configs.append(("native", target))
    configs.append(("cross", dict_source))

    rows: list[SummaryRow] = []
    for _, source in configs:
        dicts = _dictionaries_for_runs(source, spec.run_seeds, params, store)
        for n_train in n_train_values:
            jobs = [(dicts[seed], target, n_train, seed) for seed in spec.run_seeds]
            trials = _run_trials(jobs, params, store)
            rows.append(
                _summarize("crossbase", source.name, "all", target.name, n_train, params, trials)
            )
    return rows


def diversity_sweep(
    source: DatasetManifest,
    class_counts: Sequence[int],
    target: DatasetManifest,
    n_train: int,
    spec: SplitSpec,
    params: PipelineParams,
    store: DescriptorStore | None = None,
    class_seed: int | None = None,
) -> list[SummaryRow]:
    """Dictionary quality as a function of source class diversity.

    Class subsets are nested: the classes used at each count contain those
    used at every smaller count (same seeded permutation throughout).
    """
    if list(class_counts) != sorted(class_counts):
        raise ValueError("class_counts must be sorted ascending")
    if class_counts[-1] > len(source.class_labels):
        raise ValueError(
            f"class_counts max {class_counts[-1]} exceeds "
            f"{len(source.class_labels)} classes in {source.name}"
        )
    store = store if store is not None else DescriptorStore(params.grid)
    if class_seed is None:
        class_seed = spec.run_seeds[0] + CLASS_SEED_OFFSET
    store.pool(source)
    store.pool(target)

    rows: list[SummaryRow] = []
    for count in class_counts:
        sub = select_classes(source, count, class_seed)
        logger.info("sweep count=%d classes=%s", count, ",".join(sub.class_labels))
        dicts = _dictionaries_for_runs(sub, spec.run_seeds, params, store, class_note=str(count))
        jobs = [(dicts[seed], target, n_train, seed) for seed in spec.run_seeds]
        trials = _run_trials(jobs, params, store)
        rows.append(
            _summarize("sweep", source.name, str(count), target.name, n_train, params, trials)
        )
    return rows


def write_summary_csv(rows: Iterable[SummaryRow], path: str | Path) -> None:
    """Append rows to a results CSV, writing the header only when the file
    does not yet exist (or is empty). Every row carries its configuration."""
    path = Path(path)
    fresh = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.experiment,
                    row.dict_source,
                    row.dict_classes,
                    row.target,
                    row.n_train,
                    row.k,
                    repr(float(row.sigma)),
                    row.assignment,
                    row.pooling,
                    row.n_runs,
                    repr(float(row.mean_acc)),
                    repr(float(row.ci_low)),
                    repr(float(row.ci_high)),
                ]
            )
