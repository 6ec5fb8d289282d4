"""End-to-end orchestration: transform, pre-train, prune, retrain, report.

A full experiment repeats the pre-train / optimize / post-train cycle over
several runs. Run r uses seed ``base_seed + r``; from that one seed the
kernel bank, the optimizer, and the baseline draws get independent
sub-seeds, so any single run can be reproduced in isolation.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .classifier import (
    Metrics,
    RidgeModel,
    compute_metrics,
    default_alpha_grid,
    fit,
    model_from_dict,
    model_to_dict,
    predict,
)
from .data import Dataset, load_dataset, normalize_split, labels_array
from .errors import SRocketError
from .optimizer import (
    OptConfig,
    OptHistory,
    objective_value,
    run as run_optimizer,
    save_state,
    save_state_sidecar,
)
from .transform import KernelBank, init_kernel_bank, transform_dataset

DEFAULT_ALPHA_GRID = tuple(float(a) for a in default_alpha_grid())


class PipelineError(SRocketError):
    pass


class BadDensityError(PipelineError):
    pass


class TimingInvariantError(PipelineError):
    pass


@dataclass
class RunConfig:
    """Everything needed to reproduce an experiment."""

    data_dir: str
    dataset: str
    out_dir: str | None = None
    num_kernels: int = 10000
    runs: int = 10
    seed: int = 0
    normalize: bool = True
    threads: int | None = None
    opt: OptConfig = field(default_factory=OptConfig)
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHA_GRID

    def to_dict(self) -> dict:
        return {
            "data": self.data_dir,
            "dataset": self.dataset,
            "out": self.out_dir,
            "seed": self.seed,
            "kernels": self.num_kernels,
            "pop": self.opt.pop_size,
            "mutation": self.opt.mutation,
            "crossover": self.opt.crossover,
            "epochs": self.opt.n_epochs,
            "runs": self.runs,
            "normalize": self.normalize,
            "threads": self.threads,
            "alpha_grid": list(self.alpha_grid),
        }


@dataclass
class RunResult:
    """Outcome of one pre-train / optimize / post-train cycle."""

    run_index: int
    seed: int
    full_metrics: Metrics
    full_ofv: float
    pruned_metrics: Metrics
    pruned_ofv: float
    density: float
    active_kernels: int
    epochs_run: int
    converged: bool
    random_metrics: Metrics
    l1_metrics: Metrics
    timings: dict

    def to_dict(self) -> dict:
        return {
            "run": self.run_index,
            "seed": self.seed,
            "full": {
                "accuracy": self.full_metrics.accuracy,
                "mcc": self.full_metrics.mcc,
                "ofv": self.full_ofv,
            },
            "pruned": {
                "accuracy": self.pruned_metrics.accuracy,
                "mcc": self.pruned_metrics.mcc,
                "ofv": self.pruned_ofv,
                "density": self.density,
                "active_kernels": self.active_kernels,
                "epochs_run": self.epochs_run,
                "converged": self.converged,
            },
            "baselines": {
                "random": {
                    "accuracy": self.random_metrics.accuracy,
                    "mcc": self.random_metrics.mcc,
                },
                "l1_norm": {
                    "accuracy": self.l1_metrics.accuracy,
                    "mcc": self.l1_metrics.mcc,
                },
            },
            "timings": self.timings,
        }


@dataclass
class RunArtifacts:
    """In-memory objects from one run, kept for evaluation and timing."""

    bank: KernelBank
    model_full: RidgeModel
    model_pruned: RidgeModel
    best_state: np.ndarray
    active: np.ndarray
    history: OptHistory


@dataclass
class RunReport:
    dataset: str
    num_classes: int
    train_size: int
    test_size: int
    series_length: int
    config: RunConfig
    results: list[RunResult]
    warnings: list[str]

    def averages(self) -> dict:
        def mean(values):
            return sum(values) / len(values)

        r = self.results
        return {
            "full_accuracy": mean([x.full_metrics.accuracy for x in r]),
            "full_mcc": mean([x.full_metrics.mcc for x in r]),
            "full_ofv": mean([x.full_ofv for x in r]),
            "pruned_accuracy": mean([x.pruned_metrics.accuracy for x in r]),
            "pruned_mcc": mean([x.pruned_metrics.mcc for x in r]),
            "pruned_ofv": mean([x.pruned_ofv for x in r]),
            "density": mean([x.density for x in r]),
            "random_accuracy": mean([x.random_metrics.accuracy for x in r]),
            "random_mcc": mean([x.random_metrics.mcc for x in r]),
            "l1_accuracy": mean([x.l1_metrics.accuracy for x in r]),
            "l1_mcc": mean([x.l1_metrics.mcc for x in r]),
        }

    def to_dict(self) -> dict:
        per_stage = {}
        for key in self.results[0].timings:
            per_stage[key] = sum(x.timings[key] for x in self.results) / len(self.results)
        return {
            "dataset": self.dataset,
            "num_classes": self.num_classes,
            "train_size": self.train_size,
            "test_size": self.test_size,
            "series_length": self.series_length,
            "config": self.config.to_dict(),
            "runs": [x.to_dict() for x in self.results],
            "averages": self.averages(),
            "timings_mean": per_stage,
            "warnings": self.warnings,
        }


def derive_seeds(run_seed: int) -> tuple[int, int, int]:
    """Independent sub-seeds (bank, optimizer, baseline) from one run seed."""
    master = np.random.default_rng(run_seed)
    vals = master.integers(0, 2**63, size=3)
    return int(vals[0]), int(vals[1]), int(vals[2])


def load_run_dataset(cfg: RunConfig) -> Dataset:
    dataset = load_dataset(cfg.data_dir, cfg.dataset)
    if cfg.normalize:
        dataset.train = normalize_split(dataset.train)
        dataset.test = normalize_split(dataset.test)
    return dataset


def select_random_kernels(num_kernels: int, keep: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly chosen kernel indices, sorted, without replacement."""
    return np.sort(rng.choice(num_kernels, size=keep, replace=False))


def select_l1_kernels(bank: KernelBank, keep: int) -> np.ndarray:
    """Indices of the kernels with the largest weight l1 norms.

    Ties keep the lower index; the result is sorted for column slicing.
    """
    norms = np.array([np.sum(np.abs(k.weights)) for k in bank.kernels])
    order = np.argsort(-norms, kind="stable")[:keep]
    return np.sort(order)


def _keep_count(density: float, num_kernels: int) -> int:
    if not 0.0 < density <= 1.0:
        raise BadDensityError(f"density must lie in (0, 1], got {density}")
    return max(1, int(round(density * num_kernels)))


def _retrain_on_subset(indices: np.ndarray, train_features, train_labels,
                       test_features, test_labels, num_classes: int,
                       alpha_grid) -> Metrics:
    model = fit(train_features[:, indices], train_labels, alpha_grid)
    predictions = predict(model, test_features[:, indices])
    return compute_metrics(predictions, test_labels, num_classes)


def baseline_random(density: float, train_features, train_labels, test_features,
                    test_labels, num_classes: int, *, seed: int = 0,
                    alpha_grid=None) -> Metrics:
    """Retrain on a uniformly random kernel subset of the given density."""
    num_kernels = train_features.shape[1]
    keep = _keep_count(density, num_kernels)
    rng = np.random.default_rng(seed)
    indices = select_random_kernels(num_kernels, keep, rng)
    return _retrain_on_subset(indices, train_features, train_labels,
                              test_features, test_labels, num_classes, alpha_grid)


def baseline_l1norm(density: float, bank: KernelBank, train_features, train_labels,
                    test_features, test_labels, num_classes: int, *,
                    alpha_grid=None) -> Metrics:
    """Retrain on the kernels with the largest weight l1 norms."""
    keep = _keep_count(density, bank.num_kernels)
    indices = select_l1_kernels(bank, keep)
    return _retrain_on_subset(indices, train_features, train_labels,
                              test_features, test_labels, num_classes, alpha_grid)


def _fit_intercept_only(train_labels: np.ndarray, num_classes: int) -> RidgeModel:
    # Degenerate retrain for an all-zeros state: prediction falls back to the
    # class-frequency intercepts, matching fit() with zero feature columns.
    n = train_labels.size
    Y = -np.ones((n, num_classes))
    Y[np.arange(n), train_labels] = 1.0
    return RidgeModel(
        weights=np.empty((0, num_classes)),
        intercepts=Y.mean(axis=0),
        alpha=0.0,
        scaler_mean=np.empty(0),
        scaler_std=np.empty(0),
        num_classes=num_classes,
    )


def _fit_subset(train_features, active, train_labels, num_classes, alpha_grid) -> RidgeModel:
    if active.size == 0:
        return _fit_intercept_only(train_labels, num_classes)
    return fit(train_features[:, active], train_labels, alpha_grid)


def _single_run(dataset: Dataset, cfg: RunConfig, run_index: int) -> tuple[RunResult, RunArtifacts]:
    run_seed = cfg.seed + run_index
    bank_seed, de_seed, baseline_seed = derive_seeds(run_seed)
    y_train = labels_array(dataset.train)
    y_test = labels_array(dataset.test)
    num_classes = dataset.num_classes
    alpha_grid = np.asarray(cfg.alpha_grid)
    timings = {}

    t0 = time.perf_counter()
    bank = init_kernel_bank(cfg.num_kernels, dataset.series_length, bank_seed)
    train_features = transform_dataset(dataset.train, bank)
    timings["init_convolution"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    model_full = fit(train_features, y_train, alpha_grid)
    timings["pretrain"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    test_features = transform_dataset(dataset.test, bank)
    pred_full = predict(model_full, test_features)
    timings["inference_full"] = time.perf_counter() - t0
    full_metrics = compute_metrics(pred_full, y_test, num_classes)
    full_ofv = objective_value(1.0, full_metrics.accuracy)

    opt_cfg = OptConfig(
        pop_size=cfg.opt.pop_size,
        mutation=cfg.opt.mutation,
        crossover=cfg.opt.crossover,
        n_epochs=cfg.opt.n_epochs,
        seed=de_seed,
    )
    t0 = time.perf_counter()
    best_state, history = run_optimizer(train_features, y_train, model_full, opt_cfg)
    timings["optimization_total"] = time.perf_counter() - t0
    timings["optimization_per_epoch"] = timings["optimization_total"] / max(history.epochs_run, 1)

    active = np.flatnonzero(best_state)
    density = active.size / cfg.num_kernels

    t0 = time.perf_counter()
    model_pruned = _fit_subset(train_features, active, y_train, num_classes, alpha_grid)
    timings["posttrain"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    pruned_test = transform_dataset(dataset.test, bank, active=active)
    pred_pruned = predict(model_pruned, pruned_test)
    timings["inference_pruned"] = time.perf_counter() - t0
    pruned_metrics = compute_metrics(pred_pruned, y_test, num_classes)
    pruned_ofv = objective_value(density, pruned_metrics.accuracy)

    baseline_density = max(density, 1.0 / cfg.num_kernels)
    random_metrics = baseline_random(
        baseline_density, train_features, y_train, test_features, y_test,
        num_classes, seed=baseline_seed, alpha_grid=alpha_grid,
    )
    l1_metrics = baseline_l1norm(
        baseline_density, bank, train_features, y_train, test_features, y_test,
        num_classes, alpha_grid=alpha_grid,
    )

    result = RunResult(
        run_index=run_index,
        seed=run_seed,
        full_metrics=full_metrics,
        full_ofv=full_ofv,
        pruned_metrics=pruned_metrics,
        pruned_ofv=pruned_ofv,
        density=density,
        active_kernels=int(active.size),
        epochs_run=history.epochs_run,
        converged=history.converged,
        random_metrics=random_metrics,
        l1_metrics=l1_metrics,
        timings=timings,
    )
    artifacts = RunArtifacts(
        bank=bank,
        model_full=model_full,
        model_pruned=model_pruned,
        best_state=best_state,
        active=active,
        history=history,
    )
    return result, artifacts


def save_model_artifact(model: RidgeModel, path: str | Path, bank: KernelBank,
                        active: np.ndarray | None = None) -> None:
    """Model JSON with the bank reference needed to rebuild its features."""
    payload = {
        "model": model_to_dict(model),
        "bank": {
            "seed": bank.seed,
            "num_kernels": bank.num_kernels,
            "input_length": bank.input_length,
        },
        "active_indices": None if active is None else [int(i) for i in active],
        "version": __version__,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_model_artifact(path: str | Path) -> tuple[RidgeModel, dict, np.ndarray | None]:
    payload = json.loads(Path(path).read_text())
    model = model_from_dict(payload["model"])
    active = payload.get("active_indices")
    if active is not None:
        active = np.asarray(active, dtype=np.int64)
    return model, payload["bank"], active


def _write_run_outputs(out_dir: Path, run_index: int, result: RunResult,
                       artifacts: RunArtifacts, cfg: RunConfig) -> None:
    from .transform import save_bank

    save_bank(artifacts.bank, out_dir / f"bank_run{run_index}.json")
    save_model_artifact(artifacts.model_full, out_dir / f"model_full_run{run_index}.json",
                        artifacts.bank)
    save_model_artifact(artifacts.model_pruned, out_dir / f"model_pruned_run{run_index}.json",
                        artifacts.bank, active=artifacts.active)
    save_state(artifacts.best_state, out_dir / f"best_state_run{run_index}.txt")
    save_state_sidecar(out_dir / f"best_state_run{run_index}.json",
                       result.density, result.seed, cfg.opt)
    artifacts.history.write_csv(out_dir / f"history_run{run_index}.csv")


def write_report(report: RunReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


def run_srocket(cfg: RunConfig, keep_artifacts: bool = False):
    """Run the full experiment; returns the report (and last run's artifacts).

    When cfg.out_dir is set, per-run artifacts are flushed as each run
    completes, so partial results survive a failure mid-experiment.
    """
    if cfg.runs < 1:
        raise PipelineError("runs must be >= 1")
    dataset = load_run_dataset(cfg)
    out_dir = None
    if cfg.out_dir is not None:
        out_dir = Path(cfg.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    results = []
    last_artifacts = None
    for run_index in range(cfg.runs):
        result, artifacts = _single_run(dataset, cfg, run_index)
        results.append(result)
        if out_dir is not None:
            _write_run_outputs(out_dir, run_index, result, artifacts, cfg)
        last_artifacts = artifacts

    report = RunReport(
        dataset=dataset.name,
        num_classes=dataset.num_classes,
        train_size=len(dataset.train),
        test_size=len(dataset.test),
        series_length=dataset.series_length,
        config=cfg,
        results=results,
        warnings=list(dataset.warnings),
    )
    if out_dir is not None:
        write_report(report, out_dir / "report.json")
    if keep_artifacts:
        return report, last_artifacts
    return report


@dataclass
class DensitySummary:
    """Accuracy distribution of random masks at one density."""

    density: float
    trials: int
    mean: float
    median: float
    q1: float
    q3: float
    whisker_lo: float
    whisker_hi: float
    outliers: list[float]

    def to_dict(self) -> dict:
        return {
            "density": self.density,
            "trials": self.trials,
            "mean": self.mean,
            "median": self.median,
            "q1": self.q1,
            "q3": self.q3,
            "whisker_lo": self.whisker_lo,
            "whisker_hi": self.whisker_hi,
            "outliers": self.outliers,
        }


def monte_carlo(densities, trials: int, features: np.ndarray, labels: np.ndarray,
                model: RidgeModel, seed: int = 0) -> list[DensitySummary]:
    """Accuracy of the masked pre-trained model under random masks.

    For each density, draws ``trials`` masks with exactly that many active
    kernels and scores them on the given (typically test) features. Whiskers
    follow the 1.5 IQR convention; points beyond them are listed as outliers.
    """
    if trials < 1:
        raise PipelineError("trials must be >= 1")
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    num_kernels = model.num_features
    rng = np.random.default_rng(seed)
    # standardize once; masked scores reuse the same formula as predict_masked
    Z = model.standardize(features)
    from .classifier import masked_scores

    summaries = []
    for density in densities:
        keep = _keep_count(float(density), num_kernels)
        accs = np.empty(trials)
        for t in range(trials):
            mask = np.zeros(num_kernels)
            mask[rng.choice(num_kernels, size=keep, replace=False)] = 1.0
            scores = masked_scores(Z, model.weights, model.intercepts, mask)
            accs[t] = np.mean(np.argmax(scores, axis=1) == labels)
        q1, median, q3 = np.percentile(accs, [25.0, 50.0, 75.0])
        iqr = q3 - q1
        lo_fence = q1 - 1.5 * iqr
        hi_fence = q3 + 1.5 * iqr
        inside = accs[(accs >= lo_fence) & (accs <= hi_fence)]
        outliers = accs[(accs < lo_fence) | (accs > hi_fence)]
        summaries.append(DensitySummary(
            density=float(density),
            trials=trials,
            mean=float(accs.mean()),
            median=float(median),
            q1=float(q1),
            q3=float(q3),
            whisker_lo=float(inside.min()),
            whisker_hi=float(inside.max()),
            outliers=[float(v) for v in np.sort(outliers)],
        ))
    return summaries


@dataclass
class StageTable:
    """Wall-clock seconds per pipeline stage for one run."""

    dataset: str
    num_kernels: int
    active_kernels: int
    density: float
    init_convolution: float
    pretrain: float
    optimization_total: float
    optimization_per_epoch: float
    posttrain: float
    inference_full: float
    inference_pruned: float
    pruned_faster: bool

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "num_kernels": self.num_kernels,
            "active_kernels": self.active_kernels,
            "density": self.density,
            "init_convolution": self.init_convolution,
            "pretrain": self.pretrain,
            "optimization_total": self.optimization_total,
            "optimization_per_epoch": self.optimization_per_epoch,
            "posttrain": self.posttrain,
            "inference_full": self.inference_full,
            "inference_pruned": self.inference_pruned,
            "pruned_faster": self.pruned_faster,
        }


def _best_of(n_reps: int, fn) -> float:
    best = float("inf")
    for _ in range(n_reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def time_stages(cfg: RunConfig) -> StageTable:
    """Time each stage of a single run and check the pruning speedup.

    Inference is re-timed with best-of-3 repeats to damp scheduler noise.
    Raises TimingInvariantError if a strictly pruned model is not faster at
    inference than the full one.
    """
    dataset = load_run_dataset(cfg)
    result, artifacts = _single_run(dataset, cfg, 0)

    def infer_full():
        predict(artifacts.model_full, transform_dataset(dataset.test, artifacts.bank))

    def infer_pruned():
        predict(artifacts.model_pruned,
                transform_dataset(dataset.test, artifacts.bank, active=artifacts.active))

    full_time = _best_of(3, infer_full)
    pruned_time = _best_of(3, infer_pruned)
    pruned_faster = pruned_time < full_time
    if result.density < 1.0 and not pruned_faster:
        raise TimingInvariantError(
            f"pruned inference ({pruned_time:.4f}s at density {result.density:.2f}) "
            f"was not faster than full inference ({full_time:.4f}s)"
        )
    return StageTable(
        dataset=dataset.name,
        num_kernels=cfg.num_kernels,
        active_kernels=result.active_kernels,
        density=result.density,
        init_convolution=result.timings["init_convolution"],
        pretrain=result.timings["pretrain"],
        optimization_total=result.timings["optimization_total"],
        optimization_per_epoch=result.timings["optimization_per_epoch"],
        posttrain=result.timings["posttrain"],
        inference_full=full_time,
        inference_pruned=pruned_time,
        pruned_faster=pruned_faster,
    )
