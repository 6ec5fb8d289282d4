"""Binary differential evolution over kernel activation masks.

A state is a 0/1 vector saying which kernels stay active. The objective
trades the active fraction against the train accuracy of the pre-trained
classifier under that mask:

    L = (density - accuracy + 1) / 2,   0 <= L <= 1, lower is better.

The pool evolves generationally: every member builds a trial via binary
mutation and crossover, trials replace parents when their objective is no
worse, and the run stops when the best objective equals the pool mean (to
within a fixed tolerance) or the epoch budget runs out.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classifier import LengthMismatchError, RidgeModel, accuracy, masked_scores, predict_masked
from .errors import SRocketError

# The best-vs-mean gap is never positive; this close to zero counts as converged.
CONVERGENCE_TOL = 1e-12


class OptimizerError(SRocketError):
    pass


class BadPoolSizeError(OptimizerError):
    pass


class PoolTooSmallError(OptimizerError):
    pass


class PoolNotEvaluatedError(OptimizerError):
    pass


@dataclass
class OptConfig:
    """Differential-evolution settings."""

    pop_size: int = 8
    mutation: float = 0.9
    crossover: float = 0.9
    n_epochs: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.pop_size < 4 or self.pop_size % 2 != 0:
            raise BadPoolSizeError(f"pool size must be even and >= 4, got {self.pop_size}")
        if not 0.0 <= self.mutation <= 1.0:
            raise ValueError(f"mutation factor must lie in [0, 1], got {self.mutation}")
        if not 0.0 <= self.crossover <= 1.0:
            raise ValueError(f"crossover rate must lie in [0, 1], got {self.crossover}")
        if self.n_epochs < 0:
            raise ValueError("epoch budget must be >= 0")


@dataclass
class StatePool:
    """Candidate states with their cached objective values."""

    states: np.ndarray              # (pop_size, num_kernels) of 0/1
    ofvs: np.ndarray                # (pop_size,), NaN until evaluated
    accuracies: np.ndarray
    densities: np.ndarray

    @property
    def size(self) -> int:
        return self.states.shape[0]


@dataclass
class OptHistory:
    """Per-epoch trace of the run (epoch 0 is the initial pool)."""

    epochs: list[int] = field(default_factory=list)
    best_ofv: list[float] = field(default_factory=list)
    best_acc: list[float] = field(default_factory=list)
    best_density: list[float] = field(default_factory=list)
    mean_ofv: list[float] = field(default_factory=list)
    delta_l: list[float] = field(default_factory=list)
    converged: bool = False

    def append(self, epoch, best_ofv, best_acc, best_density, mean_ofv, delta_l):
        self.epochs.append(int(epoch))
        self.best_ofv.append(float(best_ofv))
        self.best_acc.append(float(best_acc))
        self.best_density.append(float(best_density))
        self.mean_ofv.append(float(mean_ofv))
        self.delta_l.append(float(delta_l))

    @property
    def epochs_run(self) -> int:
        return self.epochs[-1] if self.epochs else 0

    def write_csv(self, path: str | Path) -> None:
        lines = ["epoch,best_ofv,best_acc,best_density,mean_ofv,delta_l"]
        for row in zip(self.epochs, self.best_ofv, self.best_acc,
                       self.best_density, self.mean_ofv, self.delta_l):
            lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
        Path(path).write_text("\n".join(lines) + "\n")


def objective_value(density: float, acc: float) -> float:
    """Scalar objective from active-kernel fraction and accuracy."""
    return (density - acc + 1.0) / 2.0


def init_pool(pop_size: int, num_kernels: int, rng: np.random.Generator) -> StatePool:
    """Half the pool is Bernoulli(0.5) per bit, the other half all ones."""
    if pop_size < 4 or pop_size % 2 != 0:
        raise BadPoolSizeError(f"pool size must be even and >= 4, got {pop_size}")
    if num_kernels < 1:
        raise ValueError("num_kernels must be >= 1")
    states = np.empty((pop_size, num_kernels), dtype=np.uint8)
    states[: pop_size // 2] = rng.integers(0, 2, size=(pop_size // 2, num_kernels), dtype=np.uint8)
    states[pop_size // 2 :] = 1
    nan = np.full(pop_size, np.nan)
    return StatePool(states=states, ofvs=nan.copy(), accuracies=nan.copy(), densities=nan.copy())


def evaluate_objective(state: np.ndarray, features: np.ndarray, model: RidgeModel,
                       labels: np.ndarray) -> tuple[float, float, float]:
    """Objective of one state on the given split: (L, density, accuracy)."""
    state = np.asarray(state)
    density = float(np.mean(state))
    predictions = predict_masked(model, features, state)
    acc = accuracy(predictions, np.asarray(labels))
    return objective_value(density, acc), density, acc


def mutate(pool: StatePool, index: int, mutation: float, rng: np.random.Generator) -> np.ndarray:
    """Binary difference mutation from three distinct other pool members.

    Where donors 2 and 3 disagree and the per-bit draw falls below the
    mutation factor, the base member's bit flips; everywhere else the base
    bit is kept.
    """
    size = pool.size
    if size < 4:
        raise PoolTooSmallError(f"mutation needs at least 4 pool members, got {size}")
    candidates = np.delete(np.arange(size), index)
    i1, i2, i3 = rng.choice(candidates, size=3, replace=False)
    s1, s2, s3 = pool.states[i1], pool.states[i2], pool.states[i3]
    r = rng.random(pool.states.shape[1])
    flip = (s2 != s3) & (r < mutation)
    return np.where(flip, 1 - s1, s1).astype(np.uint8)


def crossover(mutant: np.ndarray, parent: np.ndarray, cr: float,
              rng: np.random.Generator) -> np.ndarray:
    """Per-bit binomial crossover; draws at or below the rate take the mutant bit."""
    mutant = np.asarray(mutant)
    parent = np.asarray(parent)
    if mutant.shape != parent.shape:
        raise LengthMismatchError(
            f"mutant shape {mutant.shape} != parent shape {parent.shape}"
        )
    r = rng.random(mutant.shape[0])
    return np.where(r <= cr, mutant, parent).astype(np.uint8)


def select(trial: np.ndarray, parent: np.ndarray, trial_ofv: float,
           parent_ofv: float) -> np.ndarray:
    """Greedy survivor selection; ties go to the trial."""
    return trial if trial_ofv <= parent_ofv else parent


def best_state(pool: StatePool) -> tuple[int, np.ndarray, float]:
    """Index, copy, and objective of the best pool member (ties: lowest index)."""
    if np.any(np.isnan(pool.ofvs)):
        raise PoolNotEvaluatedError("pool has unevaluated members")
    b = int(np.argmin(pool.ofvs))
    return b, pool.states[b].copy(), float(pool.ofvs[b])


def convergence_gap(pool: StatePool) -> float:
    """Best objective minus pool mean; never positive."""
    if np.any(np.isnan(pool.ofvs)):
        raise PoolNotEvaluatedError("pool has unevaluated members")
    return float(np.min(pool.ofvs) - np.mean(pool.ofvs))


def run(features: np.ndarray, labels: np.ndarray, model: RidgeModel,
        cfg: OptConfig) -> tuple[np.ndarray, OptHistory]:
    """Optimize the activation mask against the pre-trained model.

    All evaluations reuse one standardized copy of the training features, so
    they agree bit for bit with evaluate_objective. Returns the best state
    seen across the whole run and the per-epoch history.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    num_kernels = model.num_features
    rng = np.random.default_rng(cfg.seed)

    Z = model.standardize(features)
    weights = model.weights
    intercepts = model.intercepts

    def evaluate_rows(states: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = states.shape[0]
        ofvs = np.empty(n)
        accs = np.empty(n)
        densities = np.empty(n)
        for i in range(n):
            scores = masked_scores(Z, weights, intercepts, states[i])
            acc = float(np.mean(np.argmax(scores, axis=1) == labels))
            density = float(np.mean(states[i]))
            ofvs[i] = objective_value(density, acc)
            accs[i] = acc
            densities[i] = density
        return ofvs, accs, densities

    pool = init_pool(cfg.pop_size, num_kernels, rng)
    pool.ofvs, pool.accuracies, pool.densities = evaluate_rows(pool.states)

    history = OptHistory()
    b, best, best_ofv = best_state(pool)
    best_acc = float(pool.accuracies[b])
    best_density = float(pool.densities[b])
    gap = convergence_gap(pool)
    history.append(0, best_ofv, best_acc, best_density, float(np.mean(pool.ofvs)), gap)

    for epoch in range(1, cfg.n_epochs + 1):
        trials = np.empty_like(pool.states)
        # trials are built from the unmodified previous generation
        for i in range(pool.size):
            mutant = mutate(pool, i, cfg.mutation, rng)
            trials[i] = crossover(mutant, pool.states[i], cfg.crossover, rng)
        trial_ofvs, trial_accs, trial_densities = evaluate_rows(trials)

        improved = trial_ofvs <= pool.ofvs
        pool.states[improved] = trials[improved]
        pool.ofvs[improved] = trial_ofvs[improved]
        pool.accuracies[improved] = trial_accs[improved]
        pool.densities[improved] = trial_densities[improved]

        b = int(np.argmin(pool.ofvs))
        if pool.ofvs[b] < best_ofv:
            best_ofv = float(pool.ofvs[b])
            best = pool.states[b].copy()
            best_acc = float(pool.accuracies[b])
            best_density = float(pool.densities[b])
        gap = convergence_gap(pool)
        history.append(epoch, best_ofv, best_acc, best_density,
                       float(np.mean(pool.ofvs)), gap)
        if abs(gap) <= CONVERGENCE_TOL:
            history.converged = True
            break

    return best, history


def save_state(state: np.ndarray, path: str | Path) -> None:
    """Write a state as one line of '0'/'1' characters."""
    bits = "".join("1" if int(v) else "0" for v in np.asarray(state))
    Path(path).write_text(bits + "\n")


def load_state(path: str | Path) -> np.ndarray:
    text = Path(path).read_text().strip()
    if not text or set(text) - {"0", "1"}:
        raise OptimizerError(f"state file {path} must contain only '0'/'1' characters")
    return np.array([1 if c == "1" else 0 for c in text], dtype=np.uint8)


def save_state_sidecar(path: str | Path, density: float, seed: int, cfg: OptConfig) -> None:
    payload = {
        "density": float(density),
        "seed": int(seed),
        "config": {
            "pop_size": cfg.pop_size,
            "mutation": cfg.mutation,
            "crossover": cfg.crossover,
            "n_epochs": cfg.n_epochs,
        },
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
