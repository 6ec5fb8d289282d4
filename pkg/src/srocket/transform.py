"""Random dilated convolution kernels and PPV feature extraction.

A bank of D random kernels turns each series into a D-vector of PPV features
(the fraction of strictly positive convolution outputs). Kernel parameters
follow the standard random-kernel recipe: length drawn from {7, 9, 11},
weights i.i.d. standard normal, bias uniform on [-1, 1], dilation 2^a with
the exponent uniform over the range that keeps the dilated kernel no longer
than the input, and zero padding applied with probability one half. Stride
is always 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit, prange

from .errors import SRocketError

KERNEL_LENGTHS = (7, 9, 11)

# Shortest usable input: the smallest kernel must fit at dilation 1.
MIN_INPUT_LENGTH = KERNEL_LENGTHS[0] + 1


class TransformError(SRocketError):
    pass


class InputTooShortError(TransformError):
    pass


class KernelTooLargeForInputError(TransformError):
    pass


class EmptyFeatureError(TransformError):
    pass


@dataclass(frozen=True)
class Kernel:
    """One random convolution kernel (stride fixed at 1)."""

    weights: np.ndarray
    bias: float
    dilation: int
    padding: bool

    def __post_init__(self):
        # generated banks only use lengths from KERNEL_LENGTHS, but hand-built
        # kernels of any positive length are legal for convolve
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.ndim != 1 or weights.size < 1:
            raise ValueError("kernel weights must be a non-empty 1-d sequence")
        if int(self.dilation) < 1:
            raise ValueError("dilation must be >= 1")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "dilation", int(self.dilation))
        object.__setattr__(self, "padding", bool(self.padding))

    @property
    def span(self) -> int:
        """Distance covered by the dilated kernel minus one."""
        return (self.weights.size - 1) * self.dilation

    @property
    def pad_width(self) -> int:
        return self.span // 2 if self.padding else 0


@dataclass
class KernelBank:
    """D kernels generated from one seed for a fixed input length.

    Regenerating with the same (seed, num_kernels, input_length) reproduces
    the bank exactly, so serialized banks store the seed alongside the
    explicit kernel list.
    """

    kernels: list[Kernel]
    seed: int
    input_length: int

    @property
    def num_kernels(self) -> int:
        return len(self.kernels)

    def packed(self, indices: np.ndarray | None = None) -> tuple[np.ndarray, ...]:
        """Flat arrays for the compiled feature kernel (optionally a subset)."""
        kernels = self.kernels if indices is None else [self.kernels[i] for i in indices]
        lengths = np.array([k.weights.size for k in kernels], dtype=np.int64)
        offsets = np.zeros(len(kernels), dtype=np.int64)
        if len(kernels) > 1:
            offsets[1:] = np.cumsum(lengths[:-1])
        weights = np.concatenate([k.weights for k in kernels]) if kernels else np.empty(0)
        biases = np.array([k.bias for k in kernels], dtype=np.float64)
        dilations = np.array([k.dilation for k in kernels], dtype=np.int64)
        pads = np.array([k.pad_width for k in kernels], dtype=np.int64)
        return weights, offsets, lengths, biases, dilations, pads


def init_kernel_bank(num_kernels: int, input_length: int, seed: int) -> KernelBank:
    """Draw a bank of random kernels from one seeded generator.

    Per kernel the draw order is fixed: length, weights, bias, dilation
    exponent, padding flag. The dilation exponent range is clamped at zero so
    the dilation is always at least 1; kernels whose dilated span exceeds the
    input remain valid when they carry padding.
    """
    if num_kernels < 1:
        raise ValueError("num_kernels must be >= 1")
    if input_length < MIN_INPUT_LENGTH:
        raise InputTooShortError(
            f"input length {input_length} is below the minimum of {MIN_INPUT_LENGTH}"
        )
    rng = np.random.default_rng(seed)
    kernels = []
    for _ in range(num_kernels):
        length = KERNEL_LENGTHS[rng.integers(0, len(KERNEL_LENGTHS))]
        weights = rng.standard_normal(length)
        bias = rng.uniform(-1.0, 1.0)
        high = np.log2((input_length - 1) / (length - 1))
        exponent = rng.uniform(0.0, max(high, 0.0))
        dilation = int(2.0 ** exponent)
        padding = bool(rng.integers(0, 2))
        kernels.append(Kernel(weights=weights, bias=bias, dilation=dilation, padding=padding))
    return KernelBank(kernels=kernels, seed=int(seed), input_length=int(input_length))


def convolve(x: np.ndarray, kernel: Kernel) -> np.ndarray:
    """Dilated convolution of one series with one kernel.

    Output index i is ``bias + sum_j x[i + j*dilation] * w[j]`` over the
    (zero-padded) input. Without padding the output has length
    ``len(x) - span``; with padding, exactly ``len(x)``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("input series must be 1-dimensional")
    span = kernel.span
    if kernel.padding:
        xp = np.pad(x, kernel.pad_width)
    else:
        if x.size < span + 1:
            raise KernelTooLargeForInputError(
                f"kernel span {span + 1} exceeds input length {x.size} and padding is off"
            )
        xp = x
    n_out = xp.size - span
    starts = np.arange(n_out)[:, None] + np.arange(kernel.weights.size)[None, :] * kernel.dilation
    return xp[starts] @ kernel.weights + kernel.bias


def ppv(feature_map: np.ndarray) -> float:
    """Fraction of strictly positive entries of a convolution output."""
    feature_map = np.asarray(feature_map, dtype=np.float64)
    if feature_map.size == 0:
        raise EmptyFeatureError("cannot take the positive fraction of an empty feature map")
    return float(np.count_nonzero(feature_map > 0.0) / feature_map.size)


@njit(cache=True, parallel=True, fastmath=False)
def _ppv_features(X, weights, offsets, lengths, biases, dilations, pads):  # pragma: no cover
    n_samples, n_steps = X.shape
    n_kernels = lengths.size
    out = np.empty((n_samples, n_kernels), dtype=np.float64)
    for d in prange(n_kernels):
        w0 = offsets[d]
        w_len = lengths[d]
        dilation = dilations[d]
        pad = pads[d]
        bias = biases[d]
        span = (w_len - 1) * dilation
        out_len = n_steps + 2 * pad - span
        for n in range(n_samples):
            positive = 0
            for start in range(-pad, n_steps + pad - span):
                acc = bias
                idx = start
                for j in range(w_len):
                    # indices falling outside the series read as zero padding
                    if idx >= 0 and idx < n_steps:
                        acc += weights[w0 + j] * X[n, idx]
                    idx += dilation
                if acc > 0.0:
                    positive += 1
            out[n, d] = positive / out_len
    return out


def _as_matrix(series) -> np.ndarray:
    if isinstance(series, np.ndarray):
        X = np.asarray(series, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("expected a 2-d array of shape (n_samples, n_steps)")
        return X
    values = [np.asarray(s.values, dtype=np.float64) for s in series]
    if not values:
        raise ValueError("no series to transform")
    length = values[0].size
    if any(v.size != length for v in values):
        raise ValueError("all series must have equal length")
    return np.stack(values)


def transform_dataset(series, bank: KernelBank, active: np.ndarray | None = None) -> np.ndarray:
    """PPV features for a batch of equal-length series.

    Accepts a list of TimeSeries or a 2-d float array. With ``active`` set,
    only the selected kernels are applied (columns keep that order), which is
    how a pruned model transforms at reduced cost.
    """
    X = _as_matrix(series)
    n_steps = X.shape[1]
    if active is not None:
        active = np.asarray(active, dtype=np.int64)
        if active.size == 0:
            return np.empty((X.shape[0], 0), dtype=np.float64)
    weights, offsets, lengths, biases, dilations, pads = bank.packed(active)
    spans = (lengths - 1) * dilations
    too_large = (pads == 0) & (spans + 1 > n_steps)
    if np.any(too_large):
        d = int(np.flatnonzero(too_large)[0])
        d_orig = d if active is None else int(active[d])
        raise KernelTooLargeForInputError(
            f"kernel {d_orig} (span {int(spans[d]) + 1}, no padding) does not fit input length {n_steps}"
        )
    return _ppv_features(X, weights, offsets, lengths, biases, dilations, pads)


def bank_to_dict(bank: KernelBank) -> dict:
    return {
        "seed": bank.seed,
        "num_kernels": bank.num_kernels,
        "input_length": bank.input_length,
        "kernels": [
            {
                "weights": [float(w) for w in k.weights],
                "bias": k.bias,
                "dilation": k.dilation,
                "padding": k.padding,
            }
            for k in bank.kernels
        ],
    }


def bank_from_dict(payload: dict) -> KernelBank:
    kernels = [
        Kernel(
            weights=np.array(k["weights"], dtype=np.float64),
            bias=k["bias"],
            dilation=k["dilation"],
            padding=k["padding"],
        )
        for k in payload["kernels"]
    ]
    return KernelBank(
        kernels=kernels,
        seed=int(payload["seed"]),
        input_length=int(payload["input_length"]),
    )


def save_bank(bank: KernelBank, path: str | Path) -> None:
    """Serialize a bank as JSON; equal banks produce byte-identical files."""
    Path(path).write_text(json.dumps(bank_to_dict(bank), indent=2, sort_keys=True) + "\n")


def load_bank(path: str | Path) -> KernelBank:
    return bank_from_dict(json.loads(Path(path).read_text()))
