"""Loading, validation and normalization of UCR-style time series files.

A split file holds one series per line: the class label first, then the
observations, separated by tabs (``.tsv``) or commas (``.txt``). All series in
a dataset must have equal length. Labels may be arbitrary integers (or floats
with integral value); they are remapped to dense ids ``0..C-1`` in ascending
order of the original values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SRocketError

# Standard deviations below this are treated as zero when normalizing.
ZNORM_EPS = 1e-12


class DataError(SRocketError):
    """Base class for dataset loading and validation failures."""


class MissingFileError(DataError):
    pass


class EmptyFileError(DataError):
    pass


class MalformedLineError(DataError):
    pass


class NonFiniteValueError(DataError):
    pass


@dataclass(frozen=True)
class TimeSeries:
    """A univariate series with a dense integer class id."""

    values: np.ndarray
    label: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("series must be 1-dimensional with at least 2 observations")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "label", int(self.label))

    def __len__(self) -> int:
        return self.values.size


@dataclass
class Dataset:
    """Train and test splits sharing one label mapping."""

    name: str
    train: list[TimeSeries]
    test: list[TimeSeries]
    num_classes: int
    label_map: dict[int, int]
    warnings: list[str] = field(default_factory=list)

    @property
    def series_length(self) -> int:
        return len(self.train[0])


def _parse_label(token: str, path: Path, lineno: int) -> int:
    try:
        raw = float(token)
    except ValueError:
        raise MalformedLineError(f"{path}:{lineno}: label {token!r} is not numeric") from None
    if not raw.is_integer():
        raise MalformedLineError(f"{path}:{lineno}: label {token!r} is not a whole number")
    return int(raw)


def _parse_split_file(path: Path) -> tuple[list[np.ndarray], list[int]]:
    """Parse one split file into raw value rows and original labels."""
    if not path.is_file():
        raise MissingFileError(f"split file not found: {path}")
    sep = "\t" if path.suffix == ".tsv" else ","
    rows: list[np.ndarray] = []
    labels: list[int] = []
    n_fields = None
    for lineno, raw_line in enumerate(path.read_text().splitlines(), start=1):
        line = raw_line.strip()
        if not line:
            continue
        tokens = [t.strip() for t in line.split(sep)]
        # tolerate a trailing separator, nothing more
        if tokens and tokens[-1] == "":
            tokens = tokens[:-1]
        if n_fields is None:
            n_fields = len(tokens)
            if n_fields < 3:
                raise MalformedLineError(
                    f"{path}:{lineno}: need a label plus at least 2 observations, got {n_fields} fields"
                )
        elif len(tokens) != n_fields:
            raise MalformedLineError(
                f"{path}:{lineno}: expected {n_fields} fields, got {len(tokens)}"
            )
        labels.append(_parse_label(tokens[0], path, lineno))
        try:
            values = np.array([float(t) for t in tokens[1:]], dtype=np.float64)
        except ValueError:
            raise MalformedLineError(f"{path}:{lineno}: non-numeric observation") from None
        if not np.all(np.isfinite(values)):
            raise NonFiniteValueError(f"{path}:{lineno}: NaN or infinite observation")
        rows.append(values)
    if not rows:
        raise EmptyFileError(f"no series found in {path}")
    return rows, labels


def _find_split(data_dir: Path, name: str, split: str) -> Path:
    tried = []
    for ext in (".tsv", ".txt"):
        candidate = data_dir / name / f"{name}_{split}{ext}"
        if candidate.is_file():
            return candidate
        tried.append(str(candidate))
    raise MissingFileError(f"no {split} file for dataset {name!r}; tried: " + ", ".join(tried))


def split_paths(data_dir: str | Path, name: str) -> tuple[Path, Path]:
    """Resolved (train, test) file paths for a dataset."""
    data_dir = Path(data_dir)
    return _find_split(data_dir, name, "TRAIN"), _find_split(data_dir, name, "TEST")


def load_ucr_split(path: str | Path) -> list[TimeSeries]:
    """Load a single split file, remapping labels found in this file alone."""
    rows, labels = _parse_split_file(Path(path))
    label_map = {orig: dense for dense, orig in enumerate(sorted(set(labels)))}
    return [TimeSeries(values=v, label=label_map[l]) for v, l in zip(rows, labels)]


def load_dataset(data_dir: str | Path, name: str) -> Dataset:
    """Load TRAIN and TEST splits with a shared label mapping.

    The mapping covers the union of labels from both splits. A label that
    appears only in the test split is allowed but recorded as a warning.
    """
    data_dir = Path(data_dir)
    train_rows, train_labels = _parse_split_file(_find_split(data_dir, name, "TRAIN"))
    test_rows, test_labels = _parse_split_file(_find_split(data_dir, name, "TEST"))

    all_labels = sorted(set(train_labels) | set(test_labels))
    if len(all_labels) < 2:
        raise DataError(f"dataset {name!r} has fewer than 2 classes")
    label_map = {orig: dense for dense, orig in enumerate(all_labels)}

    warnings = []
    test_only = sorted(set(test_labels) - set(train_labels))
    for orig in test_only:
        warnings.append(f"label {orig} appears only in the test split")

    train = [TimeSeries(values=v, label=label_map[l]) for v, l in zip(train_rows, train_labels)]
    test = [TimeSeries(values=v, label=label_map[l]) for v, l in zip(test_rows, test_labels)]
    if len(train[0]) != len(test[0]):
        raise DataError(
            f"dataset {name!r}: train series length {len(train[0])} != test series length {len(test[0])}"
        )
    return Dataset(
        name=name,
        train=train,
        test=test,
        num_classes=len(all_labels),
        label_map=label_map,
        warnings=warnings,
    )


def znormalize(series: TimeSeries) -> TimeSeries:
    """Return a copy scaled to zero mean and unit (population) variance.

    Constant series (std below ZNORM_EPS) map to all zeros instead of
    dividing by a vanishing denominator.
    """
    values = series.values
    mean = values.mean()
    std = values.std()
    if std < ZNORM_EPS:
        normalized = np.zeros_like(values)
    else:
        normalized = (values - mean) / std
    return TimeSeries(values=normalized, label=series.label)


def normalize_split(split: list[TimeSeries]) -> list[TimeSeries]:
    return [znormalize(s) for s in split]


def save_ucr_split(split: list[TimeSeries], path: str | Path) -> None:
    """Write series in the tab-separated on-disk format (dense labels as-is)."""
    path = Path(path)
    sep = "\t" if path.suffix == ".tsv" else ","
    lines = []
    for s in split:
        fields = [str(s.label)] + [repr(float(v)) for v in s.values]
        lines.append(sep.join(fields))
    path.write_text("\n".join(lines) + "\n")


def labels_array(split: list[TimeSeries]) -> np.ndarray:
    return np.array([s.label for s in split], dtype=np.int64)
