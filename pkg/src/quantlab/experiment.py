"""End-to-end experiment runner.

For every (dataset, method, learner, selection loss) combination: split the
labelled pool 60/40 stratified, grid-search the learner on prevalence-grid
validation samples, then evaluate the winning model on prevalence-grid test
samples drawn from the held-out test pool.  Methods that estimate their own
parameters are repeated ``repetitions`` times with re-derived inner-split and
sampling seeds; everything else runs once.

All seeds derive from the master seed through a stable hash, keyed so that
every method and loss at the same repetition index sees bit-identical
validation and test samples (comparisons stay paired).  Completed
combinations persist as per-combination CSV parts keyed on
(dataset, method, learner, loss, repetition); an interrupted run resumes by
skipping existing parts.
"""

from __future__ import annotations

import hashlib
import json
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import __version__
from .datasets import DATASET_FORMATS, load_dataset, synthetic_corpus, write_tsv_corpus
from .learners import LEARNER_KINDS
from .prevalence import absolute_error, prevalence_from_labels, relative_absolute_error
from .quantifiers import (
    CASE1_METHODS,
    METHOD_KINDS,
    MaximumLikelihoodPrevalenceEstimator,
)
from .report import ResultRow, read_rows_csv, sort_key, write_all_reports, write_rows_csv
from .sampling import (
    DEFAULT_PREVALENCE_GRID,
    RNG_DESCRIPTION,
    ProtocolPlan,
    derive_seed,
    protocol_samples,
    stratified_split,
)
from .selection import SelectionLoss, grid_for, select
from .stopwords import STOP_WORDS_VERSION
from .text import Corpus, build_vocabulary, vectorize

CACHE_DIR_ENV = "QUANTLAB_CACHE_DIR"


@dataclass(frozen=True)
class PlanConfig:
    """n/m/q of a sampling plan; the grid defaults to the 21-point grid."""

    samples_per_point: int
    sample_size: int
    grid: tuple[float, ...] = DEFAULT_PREVALENCE_GRID

    def to_plan(self, master_seed: int) -> ProtocolPlan:
        return ProtocolPlan(
            grid=self.grid,
            samples_per_point=self.samples_per_point,
            sample_size=self.sample_size,
            master_seed=master_seed,
        )


@dataclass(frozen=True)
class SyntheticSpec:
    train_size: int
    test_size: int
    positive_prevalence: float
    vocabulary_size: int = 400
    mean_doc_length: int = 30
    separation: float = 1.0


@dataclass(frozen=True)
class DatasetConfig:
    """Either a pair of dataset file paths or an inline synthetic generator spec."""

    name: str
    train_path: str | None = None
    test_path: str | None = None
    format: str = "tsv"
    synthetic: SyntheticSpec | None = None

    def __post_init__(self) -> None:
        has_paths = self.train_path is not None and self.test_path is not None
        if has_paths == (self.synthetic is not None):
            raise ValueError(
                f"dataset {self.name!r} needs either train_path+test_path or synthetic"
            )
        if self.format not in DATASET_FORMATS:
            raise ValueError(f"dataset {self.name!r}: unknown format {self.format!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple[DatasetConfig, ...]
    methods: tuple[str, ...]
    learners: tuple[str, ...]
    selection_losses: tuple[str, ...]
    validation_plan: PlanConfig
    test_plan: PlanConfig
    master_seed: int
    output_dir: str
    repetitions: int = 10
    min_term_count: int = 5
    train_fraction: float = 0.6
    jobs: int = 1

    def __post_init__(self) -> None:
        if not self.datasets:
            raise ValueError("config lists no datasets")
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise ValueError("dataset names must be unique")
        for method in self.methods:
            if method not in METHOD_KINDS:
                raise ValueError(f"unknown method {method!r}")
        for learner in self.learners:
            if learner not in LEARNER_KINDS:
                raise ValueError(f"unknown learner {learner!r}")
        for loss in self.selection_losses:
            SelectionLoss(loss)
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        def plan(entry: dict) -> PlanConfig:
            return PlanConfig(
                samples_per_point=int(entry["samples_per_point"]),
                sample_size=int(entry["sample_size"]),
                grid=tuple(entry.get("grid", DEFAULT_PREVALENCE_GRID)),
            )

        datasets = []
        for entry in raw["datasets"]:
            synthetic = entry.get("synthetic")
            datasets.append(
                DatasetConfig(
                    name=entry["name"],
                    train_path=entry.get("train_path"),
                    test_path=entry.get("test_path"),
                    format=entry.get("format", "tsv"),
                    synthetic=SyntheticSpec(**synthetic) if synthetic else None,
                )
            )
        return cls(
            datasets=tuple(datasets),
            methods=tuple(raw["methods"]),
            learners=tuple(raw["learners"]),
            selection_losses=tuple(raw["selection_losses"]),
            validation_plan=plan(raw["validation_plan"]),
            test_plan=plan(raw["test_plan"]),
            master_seed=int(raw["master_seed"]),
            output_dir=raw["output_dir"],
            repetitions=int(raw.get("repetitions", 10)),
            min_term_count=int(raw.get("min_term_count", 5)),
            train_fraction=float(raw.get("train_fraction", 0.6)),
            jobs=int(raw.get("jobs", 1)),
        )

    @classmethod
    def from_json_file(cls, path: str | os.PathLike) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))

    def cache_dir(self) -> str:
        return os.environ.get(CACHE_DIR_ENV) or os.path.join(self.output_dir, "cache")


@dataclass(frozen=True)
class Combo:
    """One unit of work and persistence."""

    dataset: str
    method: str
    learner: str
    loss: str
    repetition: int

    def key(self) -> str:
        return (
            f"{self.dataset}__{self.method}__{self.learner}"
            f"__{self.loss}__rep{self.repetition:03d}"
        )


def enumerate_combos(config: ExperimentConfig) -> list[Combo]:
    combos = []
    for ds in config.datasets:
        for method in config.methods:
            if method == "mlpe":
                combos.append(Combo(ds.name, "mlpe", "none", "none", 0))
                continue
            reps = config.repetitions if method in CASE1_METHODS else 1
            for learner in config.learners:
                for loss in config.selection_losses:
                    for rep in range(reps):
                        combos.append(Combo(ds.name, method, learner, loss, rep))
    return sorted(combos, key=lambda c: (c.dataset, c.method, c.learner, c.loss, c.repetition))


@dataclass(frozen=True)
class PreparedDataset:
    """Vectorized splits of one dataset: everything a combo needs."""

    name: str
    X_train: sp.csr_matrix = field(repr=False)
    y_train: np.ndarray = field(repr=False)
    X_val: sp.csr_matrix = field(repr=False)
    y_val: np.ndarray = field(repr=False)
    X_test: sp.csr_matrix = field(repr=False)
    y_test: np.ndarray = field(repr=False)
    vocabulary_size: int
    outer_split_seed: int


def _dataset_digest(config: ExperimentConfig, ds: DatasetConfig) -> str:
    payload = {
        "dataset": {
            "name": ds.name,
            "train_path": ds.train_path,
            "test_path": ds.test_path,
            "format": ds.format,
            "synthetic": None if ds.synthetic is None else vars(ds.synthetic).copy(),
        },
        "master_seed": config.master_seed,
        "min_term_count": config.min_term_count,
        "train_fraction": config.train_fraction,
        "stop_words_version": STOP_WORDS_VERSION,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _load_corpora(config: ExperimentConfig, ds: DatasetConfig) -> tuple[Corpus, Corpus]:
    if ds.synthetic is not None:
        spec = ds.synthetic
        # train and test must come from the same world: shared distributions,
        # independent document draws
        world = derive_seed(config.master_seed, ds.name, "synthetic-world")
        train = synthetic_corpus(
            f"{ds.name}-train",
            spec.train_size,
            spec.positive_prevalence,
            vocabulary_size=spec.vocabulary_size,
            mean_doc_length=spec.mean_doc_length,
            separation=spec.separation,
            seed=derive_seed(config.master_seed, ds.name, "synthetic-train"),
            world_seed=world,
        )
        test = synthetic_corpus(
            f"{ds.name}-test",
            spec.test_size,
            spec.positive_prevalence,
            vocabulary_size=spec.vocabulary_size,
            mean_doc_length=spec.mean_doc_length,
            separation=spec.separation,
            seed=derive_seed(config.master_seed, ds.name, "synthetic-test"),
            world_seed=world,
        )
        return train, test
    return (
        load_dataset(ds.train_path, ds.format, f"{ds.name}-train"),
        load_dataset(ds.test_path, ds.format, f"{ds.name}-test"),
    )


def prepare_dataset(
    config: ExperimentConfig, ds: DatasetConfig, use_cache: bool = True
) -> PreparedDataset:
    """Load (or generate), split, vectorize, and optionally disk-cache a dataset."""
    cache_root = os.path.join(config.cache_dir(), f"{ds.name}-{_dataset_digest(config, ds)}")
    marker = os.path.join(cache_root, "meta.json")
    if use_cache and os.path.exists(marker):
        return _load_cached(cache_root, ds.name)

    train_corpus, test_corpus = _load_corpora(config, ds)
    outer_seed = derive_seed(config.master_seed, ds.name, "outer-split")
    train_part, val_part = stratified_split(
        train_corpus.labels, config.train_fraction, seed=outer_seed
    )
    vocab = build_vocabulary(train_corpus, config.min_term_count)
    corpus_tr = train_corpus.subset(train_part.indices)
    corpus_va = train_corpus.subset(val_part.indices)
    prepared = PreparedDataset(
        name=ds.name,
        X_train=vectorize(corpus_tr, vocab),
        y_train=corpus_tr.labels,
        X_val=vectorize(corpus_va, vocab),
        y_val=corpus_va.labels,
        X_test=vectorize(test_corpus, vocab),
        y_test=test_corpus.labels,
        vocabulary_size=len(vocab),
        outer_split_seed=outer_seed,
    )
    if use_cache:
        _store_cached(cache_root, prepared, config, ds)
        if ds.synthetic is not None:
            # materialize the generated corpora for inspection and reuse
            write_tsv_corpus(train_corpus, os.path.join(cache_root, "train.tsv"))
            write_tsv_corpus(test_corpus, os.path.join(cache_root, "test.tsv"))
    return prepared


def _store_cached(
    root: str, prepared: PreparedDataset, config: ExperimentConfig, ds: DatasetConfig
) -> None:
    os.makedirs(root, exist_ok=True)
    sp.save_npz(os.path.join(root, "X_train.npz"), prepared.X_train)
    sp.save_npz(os.path.join(root, "X_val.npz"), prepared.X_val)
    sp.save_npz(os.path.join(root, "X_test.npz"), prepared.X_test)
    np.savez(
        os.path.join(root, "labels.npz"),
        y_train=prepared.y_train,
        y_val=prepared.y_val,
        y_test=prepared.y_test,
    )
    meta = {
        "name": prepared.name,
        "vocabulary_size": prepared.vocabulary_size,
        "outer_split_seed": prepared.outer_split_seed,
        "rng": RNG_DESCRIPTION,
        "quantlab_version": __version__,
        "digest": _dataset_digest(config, ds),
    }
    tmp = os.path.join(root, "meta.json.tmp")
    with open(tmp, "w", encoding="utf-8") as handle:
        json.dump(meta, handle, indent=2)
    os.replace(tmp, os.path.join(root, "meta.json"))


def _load_cached(root: str, name: str) -> PreparedDataset:
    with open(os.path.join(root, "meta.json"), encoding="utf-8") as handle:
        meta = json.load(handle)
    labels = np.load(os.path.join(root, "labels.npz"))
    return PreparedDataset(
        name=name,
        X_train=sp.load_npz(os.path.join(root, "X_train.npz")),
        y_train=labels["y_train"],
        X_val=sp.load_npz(os.path.join(root, "X_val.npz")),
        y_val=labels["y_val"],
        X_test=sp.load_npz(os.path.join(root, "X_test.npz")),
        y_test=labels["y_test"],
        vocabulary_size=int(meta["vocabulary_size"]),
        outer_split_seed=int(meta["outer_split_seed"]),
    )


_prepared_memo: dict[tuple, PreparedDataset] = {}


def _prepared(config: ExperimentConfig, dataset_name: str) -> PreparedDataset:
    ds = next(d for d in config.datasets if d.name == dataset_name)
    key = (_dataset_digest(config, ds), dataset_name)
    cached = _prepared_memo.get(key)
    if cached is None:
        cached = prepare_dataset(config, ds)
        _prepared_memo[key] = cached
    return cached


def run_combo(config: ExperimentConfig, combo: Combo):
    """Execute one combination; returns (rows, selection report dict or None)."""
    prepared = _prepared(config, combo.dataset)
    master = config.master_seed
    report_dict = None

    if combo.method == "mlpe":
        model = MaximumLikelihoodPrevalenceEstimator().fit(prepared.X_train, prepared.y_train)
    else:
        val_plan = config.validation_plan.to_plan(
            derive_seed(master, combo.dataset, "validation-samples", combo.repetition)
        )
        inner_seed = derive_seed(master, combo.dataset, "inner-split", combo.repetition)
        model, selection_report = select(
            combo.method,
            grid_for(combo.learner),
            prepared.X_train,
            prepared.y_train,
            prepared.X_val,
            prepared.y_val,
            val_plan,
            SelectionLoss(combo.loss),
            random_state=inner_seed,
        )
        report_dict = selection_report.to_dict()

    test_plan = config.test_plan.to_plan(
        derive_seed(master, combo.dataset, "test-samples", combo.repetition)
    )
    samples = protocol_samples(prepared.y_test, test_plan)
    rows: list[ResultRow] = []
    for grid_prevalence, sample_list in samples:
        for sample_id, sample in enumerate(sample_list):
            estimate = model.quantify(prepared.X_test[sample.indices])
            truth = prevalence_from_labels(prepared.y_test[sample.indices])
            rows.append(
                ResultRow(
                    method=combo.method,
                    learner=combo.learner,
                    optimized_for=combo.loss,
                    dataset=combo.dataset,
                    grid_prevalence=grid_prevalence,
                    sample_id=sample_id,
                    repetition_id=combo.repetition,
                    true_prevalence=truth.pos,
                    estimated_prevalence=estimate.pos,
                    ae=absolute_error(truth, estimate),
                    rae=relative_absolute_error(truth, estimate, len(sample)),
                )
            )
    return rows, report_dict


def _run_combo_for_pool(args):
    config, combo = args
    try:
        rows, report_dict = run_combo(config, combo)
        return combo, rows, report_dict, None
    except Exception:  # noqa: BLE001 - per-combination failures must not kill the run
        return combo, [], None, traceback.format_exc()


def run_protocol(config: ExperimentConfig, resume: bool = True):
    """Run every combination, persisting incrementally; returns (rows, failures).

    Failures are (combo key, traceback) pairs; the run continues past them.
    Output files: parts/<combo>.csv, reports/<combo>.json, raw.csv,
    summary.csv, summary.txt, ttests.csv, manifest.json.
    """
    out_dir = config.output_dir
    parts_dir = os.path.join(out_dir, "parts")
    reports_dir = os.path.join(out_dir, "reports")
    os.makedirs(parts_dir, exist_ok=True)
    os.makedirs(reports_dir, exist_ok=True)

    combos = enumerate_combos(config)
    pending = []
    all_rows: list[ResultRow] = []
    for combo in combos:
        part_path = os.path.join(parts_dir, combo.key() + ".csv")
        if resume and os.path.exists(part_path):
            all_rows.extend(read_rows_csv(part_path))
        else:
            pending.append(combo)

    failures: list[tuple[str, str]] = []

    def persist(combo: Combo, rows, report_dict, error) -> None:
        if error is not None:
            failures.append((combo.key(), error))
            return
        part_path = os.path.join(parts_dir, combo.key() + ".csv")
        tmp = part_path + ".tmp"
        write_rows_csv(rows, tmp)
        os.replace(tmp, part_path)
        if report_dict is not None:
            with open(os.path.join(reports_dir, combo.key() + ".json"), "w",
                      encoding="utf-8") as handle:
                json.dump(report_dict, handle, indent=2)
        all_rows.extend(rows)

    if pending and config.jobs > 1:
        # prime the memo so forked workers inherit prepared datasets
        for name in sorted({c.dataset for c in pending}):
            _prepared(config, name)
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            for combo, rows, report_dict, error in pool.map(
                _run_combo_for_pool, [(config, c) for c in pending]
            ):
                persist(combo, rows, report_dict, error)
    else:
        for combo in pending:
            persist(combo, *_run_combo_for_pool((config, combo))[1:])

    all_rows.sort(key=sort_key)
    if all_rows:
        write_all_reports(all_rows, out_dir)
    manifest = {
        "quantlab_version": __version__,
        "rng": RNG_DESCRIPTION,
        "master_seed": config.master_seed,
        "combos": [c.key() for c in combos],
        "failed": [key for key, _ in failures],
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2)
    if failures:
        with open(os.path.join(out_dir, "failures.json"), "w", encoding="utf-8") as handle:
            json.dump(
                [{"combo": key, "traceback": tb} for key, tb in failures],
                handle,
                indent=2,
            )
    return all_rows, failures
