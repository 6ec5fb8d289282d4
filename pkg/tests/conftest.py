"""Shared fixtures: local UCR data discovery and synthetic datasets.

Real UCR datasets are optional. Tests that need them look under $SROCKET_DATA
or ./data and skip loudly when the files are absent; everything else runs on
synthetic data generated here.
"""

import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from srocket.data import TimeSeries, save_ucr_split


def ucr_root():
    env = os.environ.get("SROCKET_DATA")
    candidates = []
    if env:
        candidates.append(Path(env))
    candidates.append(Path(__file__).resolve().parent.parent / "data")
    for c in candidates:
        if c.is_dir():
            return c
    return None


def require_ucr(name: str) -> Path:
    root = ucr_root()
    if root is None or not (root / name).is_dir():
        pytest.skip(
            f"UCR dataset {name!r} not found; set SROCKET_DATA or fetch it "
            f"with scripts/fetch_ucr.py"
        )
    return root


def make_wave_split(n_per_class: int, length: int, seed: int) -> list[TimeSeries]:
    """Two classes of noisy sinusoids separated by frequency."""
    rng = np.random.default_rng(seed)
    out = []
    for label, freq in ((0, 3.0), (1, 7.0)):
        for _ in range(n_per_class):
            phase = rng.uniform(0.0, 2.0 * np.pi)
            t = np.arange(length) / length
            x = np.sin(2.0 * np.pi * freq * t + phase) + 0.3 * rng.standard_normal(length)
            out.append(TimeSeries(values=x, label=label))
    rng.shuffle(out)
    return out


@pytest.fixture(scope="session")
def wave_dataset(tmp_path_factory):
    """A small on-disk synthetic dataset in the UCR layout: (root, name)."""
    root = tmp_path_factory.mktemp("synthetic_ucr")
    name = "FreqWaves"
    (root / name).mkdir()
    save_ucr_split(make_wave_split(15, 128, seed=1), root / name / f"{name}_TRAIN.tsv")
    save_ucr_split(make_wave_split(15, 128, seed=2), root / name / f"{name}_TEST.tsv")
    return root, name


def informative_features(seed: int = 123, n_informative: int = 5, n_noise: int = 45,
                         group: int = 24, regular: int = 40):
    """Feature matrix where the first n_informative columns determine labels.

    Each informative column owns a block of samples whose other informative
    columns sit at the neutral value, so dropping any single informative
    column costs train accuracy on that block. Noise columns are uniform.
    """
    rng = np.random.default_rng(seed)
    n = n_informative * group + regular
    y = np.empty(n, dtype=np.int64)
    X = rng.uniform(0.0, 1.0, size=(n, n_informative + n_noise))
    for d in range(n_informative):
        rows = np.arange(d * group, (d + 1) * group)
        labels = np.tile([0, 1], group // 2)
        y[rows] = labels
        X[np.ix_(rows, np.arange(n_informative))] = 0.5
        X[rows, d] = np.where(labels == 1, 0.9, 0.1)
    rest = np.arange(n_informative * group, n)
    labels = np.tile([0, 1], regular // 2)
    y[rest] = labels
    for d in range(n_informative):
        X[rest, d] = np.where(labels == 1, 0.9, 0.1)
    return X, y
