"""Independent reference implementations used to pin expected values.

These are written to be obviously correct, not fast: plain Python loops for
the convolution and dense normal equations for the ridge solve. Test modules
compare the package's optimized paths against these.
"""

import numpy as np

STD_FLOOR = 1e-8


def naive_convolve(x, weights, bias, dilation, padding):
    """Triple-loop dilated convolution with explicit zero padding."""
    x = [float(v) for v in x]
    w = [float(v) for v in weights]
    pad = (len(w) - 1) * dilation // 2 if padding else 0
    xp = [0.0] * pad + x + [0.0] * pad
    span = (len(w) - 1) * dilation
    out = []
    for start in range(len(xp) - span):
        acc = float(bias)
        for j in range(len(w)):
            acc += xp[start + j * dilation] * w[j]
        out.append(acc)
    return out


def naive_ppv(values):
    count = 0
    for v in values:
        if v > 0.0:
            count += 1
    return count / len(values)


def normal_equation_ridge(X, y, alpha):
    """Dense one-vs-rest ridge fit: standardize, center targets, solve.

    Returns (weights, intercepts) from (Z'Z + alpha I) W = Z' Yc, the
    textbook normal-equation form, regardless of problem shape.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    mean = X.mean(axis=0)
    std = np.maximum(X.std(axis=0), STD_FLOOR)
    Z = (X - mean) / std
    num_classes = int(y.max()) + 1
    Y = -np.ones((X.shape[0], num_classes))
    Y[np.arange(X.shape[0]), y] = 1.0
    intercepts = Y.mean(axis=0)
    Yc = Y - intercepts
    W = np.linalg.solve(Z.T @ Z + alpha * np.eye(X.shape[1]), Z.T @ Yc)
    return W, intercepts


def naive_mcc(predictions, truth, num_classes):
    """Multiclass Matthews correlation straight from the covariance form."""
    cm = [[0] * num_classes for _ in range(num_classes)]
    for p, t in zip(predictions, truth):
        cm[int(t)][int(p)] += 1
    s = sum(sum(row) for row in cm)
    c = sum(cm[k][k] for k in range(num_classes))
    t_k = [sum(cm[k]) for k in range(num_classes)]
    p_k = [sum(cm[r][k] for r in range(num_classes)) for k in range(num_classes)]
    cov = c * s - sum(p * t for p, t in zip(p_k, t_k))
    denom_sq = (s * s - sum(p * p for p in p_k)) * (s * s - sum(t * t for t in t_k))
    if denom_sq <= 0:
        return 0.0
    return cov / denom_sq ** 0.5
