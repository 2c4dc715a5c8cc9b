"""Pure numpy kernel sums; fallback when the compiled extension is unavailable.

Both backends expose the same two functions with the same argument
conventions:

``gram(X, Y, kind, param, symmetric)``
    Dense kernel matrix ``K[i, j] = k(X[i], Y[j])``.
``weighted_sum(X, a, Y, b, kind, param, symmetric)``
    The bilinear form ``a' K(X, Y) b`` evaluated without storing ``K``.

``kind`` is one of the integer codes below. ``param`` is the degree for the
polynomial kernel, ``1 / (2 sigma^2)`` for the Gaussian kernel and the
overflow cap on ``x'y`` for the exponential kernel. Gaussian entries with
``|x - y|^2 * param >= 708`` are exactly 0 rather than subnormal. ``symmetric=True``
promises that ``X`` and ``Y`` are the same point set.
"""

import numpy as np

NAME = "python"

LINEAR = 0
POLYNOMIAL = 1
GAUSSIAN = 2
EXPONENTIAL = 3

# exp(-708) is about the smallest normal double; beyond it entries are set to 0
GAUSS_CUTOFF = 708.0

# cap on entries of one temporary kernel block
_BLOCK_ENTRIES = 1 << 21


def _rows_per_block(m):
    return max(1, min(1024, _BLOCK_ENTRIES // max(m, 1)))


def _block(X, Y, kind, param):
    if kind == GAUSSIAN:
        sq = np.zeros((X.shape[0], Y.shape[0]))
        for k in range(X.shape[1]):
            diff = X[:, k, None] - Y[None, :, k]
            sq += diff * diff
        arg = param * sq
        # same cutoff as the compiled core: results below exp(-708) are exactly 0
        return np.where(arg < GAUSS_CUTOFF, np.exp(-np.minimum(arg, GAUSS_CUTOFF)), 0.0)
    dot = X @ Y.T
    if kind == LINEAR:
        return dot
    if kind == POLYNOMIAL:
        return (dot + 1.0) ** int(param)
    if kind == EXPONENTIAL:
        if dot.size and dot.max() > param:
            raise OverflowError("exponential kernel argument exceeds cap %g" % param)
        return np.exp(dot)
    raise ValueError("unknown kernel code %r" % kind)


def gram(X, Y, kind, param, symmetric=False):
    n = X.shape[0]
    out = np.empty((n, Y.shape[0]))
    step = _rows_per_block(Y.shape[0])
    for lo in range(0, n, step):
        out[lo:lo + step] = _block(X[lo:lo + step], Y, kind, param)
    if symmetric:
        upper = np.triu(out)
        out = upper + np.triu(out, 1).T
    return out


def weighted_sum(X, a, Y, b, kind, param, symmetric=False):
    total = 0.0
    step = _rows_per_block(Y.shape[0])
    for lo in range(0, X.shape[0], step):
        K = _block(X[lo:lo + step], Y, kind, param)
        total += float(a[lo:lo + step] @ (K @ b))
    return total
