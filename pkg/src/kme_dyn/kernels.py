"""Positive-definite kernels on R^d and Gram-matrix assembly.

Four kernels are provided::

    Linear()             k(x, y) = x'y
    Polynomial(p)        k(x, y) = (x'y + 1)^p
    Gaussian(sigma)      k(x, y) = exp(-|x - y|^2 / (2 sigma^2))
    Exponential()        k(x, y) = exp(x'y)

Note the Gaussian bandwidth convention: ``sigma`` enters as ``2 sigma^2`` in
the denominator, so ``Gaussian(1.0)`` has unit standard deviation as a
density shape.

Point sets are ``(n, d)`` float arrays. A 1-D array passed where a point set
is expected is read as ``n`` scalar points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import ClassVar

import numpy as np

from . import _backend, _pykernels

__all__ = [
    "KernelError",
    "KernelOverflowError",
    "KernelSpec",
    "Linear",
    "Polynomial",
    "Gaussian",
    "Exponential",
    "kernel_from_config",
    "eval_kernel",
    "gram",
    "as_points",
    "as_point",
]

# explicit polynomial features are used only while they stay this small
MAX_FEATURES = 512


class KernelError(ValueError):
    """Invalid kernel specification or kernel input."""


class KernelOverflowError(KernelError):
    """Exponential kernel argument above the configured cap."""


def as_point(x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.size == 0:
        raise KernelError("a point must be a non-empty 1-D vector, got shape %s" % (x.shape,))
    if not np.all(np.isfinite(x)):
        raise KernelError("point has non-finite coordinates")
    return x


def as_points(X, name="points") -> np.ndarray:
    """Validate a point set and return it as a C-contiguous ``(n, d)`` array."""
    try:
        X = np.asarray(X, dtype=float)
    except ValueError as exc:  # ragged nested lists
        raise KernelError("%s have mixed dimensions" % name) from exc
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise KernelError("%s must be a 2-D array, got shape %s" % (name, X.shape))
    if X.shape[0] == 0:
        raise KernelError("%s are empty" % name)
    if X.shape[1] == 0:
        raise KernelError("%s have zero dimension" % name)
    if not np.all(np.isfinite(X)):
        raise KernelError("%s contain non-finite values" % name)
    return np.ascontiguousarray(X)


@dataclass(frozen=True)
class KernelSpec:
    """Base class; subclasses are immutable and hashable."""

    kind: ClassVar[str] = ""
    _code: ClassVar[int] = -1

    @property
    def _param(self) -> float:
        return 0.0

    @property
    def label(self) -> str:
        return self.kind

    def to_config(self) -> dict:
        return {"kind": self.kind}

    def __call__(self, x, y) -> float:
        return eval_kernel(self, x, y)

    def _eval(self, x: np.ndarray, y: np.ndarray) -> float:
        raise NotImplementedError

    def features(self, X: np.ndarray) -> np.ndarray | None:
        """Explicit finite feature map with k(x, y) = phi(x)'phi(y), or None."""
        return None


@dataclass(frozen=True)
class Linear(KernelSpec):
    kind: ClassVar[str] = "linear"
    _code: ClassVar[int] = _pykernels.LINEAR

    def _eval(self, x, y):
        return float(np.dot(x, y))

    def features(self, X):
        return X


@dataclass(frozen=True)
class Polynomial(KernelSpec):
    degree: int = 2
    kind: ClassVar[str] = "polynomial"
    _code: ClassVar[int] = _pykernels.POLYNOMIAL

    def __post_init__(self):
        if isinstance(self.degree, bool) or int(self.degree) != self.degree or self.degree < 1:
            raise KernelError("polynomial degree must be an integer >= 1, got %r" % (self.degree,))
        object.__setattr__(self, "degree", int(self.degree))

    @property
    def _param(self):
        return float(self.degree)

    @property
    def label(self):
        return "polynomial(%d)" % self.degree

    def to_config(self):
        return {"kind": self.kind, "degree": self.degree}

    def _eval(self, x, y):
        return float((np.dot(x, y) + 1.0) ** self.degree)

    def features(self, X):
        d, p = X.shape[1], self.degree
        if math.comb(d + p, p) > MAX_FEATURES:
            return None
        # (x'y + 1)^p = sum over monomials x^a of multinomial(p; p-|a|, a) x^a y^a
        cols = [np.ones(X.shape[0])]
        for order in range(1, p + 1):
            for combo in combinations_with_replacement(range(d), order):
                counts = np.bincount(combo, minlength=d)
                coef = math.factorial(p) / math.factorial(p - order)
                for c in counts:
                    coef /= math.factorial(int(c))
                cols.append(math.sqrt(coef) * np.prod(X[:, list(combo)], axis=1))
        return np.column_stack(cols)


@dataclass(frozen=True)
class Gaussian(KernelSpec):
    bandwidth: float = 1.0
    kind: ClassVar[str] = "gaussian"
    _code: ClassVar[int] = _pykernels.GAUSSIAN

    def __post_init__(self):
        bw = float(self.bandwidth)
        if not (math.isfinite(bw) and bw > 0):
            raise KernelError("gaussian bandwidth must be positive, got %r" % (self.bandwidth,))
        object.__setattr__(self, "bandwidth", bw)

    @property
    def _param(self):
        return 1.0 / (2.0 * self.bandwidth**2)

    @property
    def label(self):
        return "gaussian(%g)" % self.bandwidth

    def to_config(self):
        return {"kind": self.kind, "bandwidth": self.bandwidth}

    def _eval(self, x, y):
        diff = x - y
        return math.exp(-float(np.dot(diff, diff)) * self._param)


@dataclass(frozen=True)
class Exponential(KernelSpec):
    # largest admissible x'y; exp(709.8) overflows double precision
    cap: float = 700.0
    kind: ClassVar[str] = "exponential"
    _code: ClassVar[int] = _pykernels.EXPONENTIAL

    def __post_init__(self):
        if not (float(self.cap) > 0 and float(self.cap) <= 709.0):
            raise KernelError("exponential cap must lie in (0, 709], got %r" % (self.cap,))
        object.__setattr__(self, "cap", float(self.cap))

    @property
    def _param(self):
        return self.cap

    def to_config(self):
        cfg = {"kind": self.kind}
        if self.cap != 700.0:
            cfg["cap"] = self.cap
        return cfg

    def _eval(self, x, y):
        dot = float(np.dot(x, y))
        if dot > self.cap:
            raise KernelOverflowError("x'y = %g exceeds exponential kernel cap %g" % (dot, self.cap))
        return math.exp(dot)


_KINDS = {cls.kind: cls for cls in (Linear, Polynomial, Gaussian, Exponential)}


def kernel_from_config(cfg: dict | KernelSpec) -> KernelSpec:
    """Build a kernel from ``{"kind": "gaussian", "bandwidth": 0.5}`` style records."""
    if isinstance(cfg, KernelSpec):
        return cfg
    cfg = dict(cfg)
    kind = str(cfg.pop("kind", "")).lower()
    if kind not in _KINDS:
        raise KernelError("unknown kernel kind %r (expected one of %s)" % (kind, sorted(_KINDS)))
    try:
        return _KINDS[kind](**cfg)
    except TypeError as exc:
        raise KernelError("bad parameters for %s kernel: %s" % (kind, exc)) from exc


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Evaluate ``k(x, y)`` for two points of equal dimension."""
    x, y = as_point(x), as_point(y)
    if x.shape != y.shape:
        raise KernelError("dimension mismatch: %d vs %d" % (x.size, y.size))
    return spec._eval(x, y)


def gram(spec: KernelSpec, X, Y=None) -> np.ndarray:
    """Kernel matrix ``K[i, j] = k(X[i], Y[j])``.

    With ``Y`` omitted (or the very same array passed twice) only the upper
    triangle is computed and mirrored, so the result is exactly symmetric.
    """
    symmetric = Y is None or Y is X
    X = as_points(X, "X")
    Y = X if symmetric else as_points(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise KernelError("dimension mismatch: %d vs %d" % (X.shape[1], Y.shape[1]))
    try:
        return _backend.gram(X, Y, spec._code, spec._param, symmetric)
    except OverflowError as exc:
        raise KernelOverflowError(str(exc)) from exc
