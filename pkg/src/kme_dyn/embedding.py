"""Kernel mean embeddings as finite weighted expansions, and RKHS distances.

An :class:`Expansion` stands for the RKHS element ``sum_i w_i k(x_i, .)``.
Uniform weights ``1/N`` give the usual empirical embedding of a sample;
signed weights appear after reduced-set compression.

Distances use the biased (V-statistic) form, i.e. the squared RKHS norm of
the difference of two expansions::

    |mu_a - mu_b|^2 = a'K_aa a - 2 a'K_ab b + b'K_bb b
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _backend
from .kernels import KernelError, KernelOverflowError, KernelSpec, as_points, kernel_from_config

logger = logging.getLogger(__name__)

__all__ = [
    "Expansion",
    "embed_uniform",
    "embed_weighted",
    "inner",
    "rkhs_norm_sq",
    "rkhs_dist_sq",
    "mmd",
    "mmd_over_time",
]

# squared distances below this are reported as a conditioning problem
NEGATIVE_WARN = -1e-9


@dataclass(frozen=True, eq=False)
class Expansion:
    """Weighted kernel expansion ``sum_i weights[i] * k(points[i], .)``."""

    kernel: KernelSpec
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = as_points(self.points, "expansion points")
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.shape[0] != pts.shape[0]:
            raise KernelError("%d weights for %d points" % (w.shape[0], pts.shape[0]))
        if not np.all(np.isfinite(w)):
            raise KernelError("expansion weights must be finite")
        pts = pts.copy()
        pts.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def to_config(self) -> dict:
        return {
            "kernel": self.kernel.to_config(),
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "Expansion":
        return cls(kernel_from_config(cfg["kernel"]), cfg["points"], cfg["weights"])

    def __repr__(self):
        return "Expansion(%s, size=%d, dim=%d, mass=%.6g)" % (
            self.kernel.label, self.size, self.dim, self.mass)


def embed_uniform(samples, kernel: KernelSpec) -> Expansion:
    """Empirical embedding: every sample gets weight ``1/N``."""
    pts = as_points(samples, "samples")
    return Expansion(kernel, pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))


def embed_weighted(samples, weights, kernel: KernelSpec) -> Expansion:
    return Expansion(kernel, samples, weights)


def _check_pair(a: Expansion, b: Expansion):
    if a.kernel != b.kernel:
        raise KernelError("kernel mismatch: %s vs %s" % (a.kernel.label, b.kernel.label))
    if a.dim != b.dim:
        raise KernelError("dimension mismatch: %d vs %d" % (a.dim, b.dim))


def _same_points(a: Expansion, b: Expansion) -> bool:
    return a.points is b.points or (
        a.points.shape == b.points.shape and np.array_equal(a.points, b.points))


def inner(a: Expansion, b: Expansion) -> float:
    """RKHS inner product ``<mu_a, mu_b> = a' K(X_a, X_b) b``."""
    _check_pair(a, b)
    k = a.kernel
    try:
        if _same_points(a, b):
            return _backend.weighted_sum(a.points, a.weights, a.points, b.weights,
                                         k._code, k._param, True)
        return _backend.weighted_sum(a.points, a.weights, b.points, b.weights,
                                     k._code, k._param, False)
    except OverflowError as exc:
        raise KernelOverflowError(str(exc)) from exc


def _mean_feature(e: Expansion):
    phi = e.kernel.features(e.points)
    if phi is None:
        return None
    return e.weights @ phi


def rkhs_norm_sq(a: Expansion) -> float:
    feat = _mean_feature(a)
    if feat is not None:
        return float(feat @ feat)
    return max(inner(a, a), 0.0)


def rkhs_dist_sq(a: Expansion, b: Expansion, method: str = "auto") -> float:
    """Squared RKHS distance between two expansions.

    ``method="auto"`` uses the explicit feature map when the kernel has a
    small one (linear, low-degree polynomial): the difference of mean feature
    vectors is formed first, which avoids the cancellation of the three-term
    Gram form and costs O(N). ``method="gram"`` forces the kernel-sum form.
    Small negative results from round-off are clamped to zero.
    """
    _check_pair(a, b)
    if method not in ("auto", "gram"):
        raise ValueError("method must be 'auto' or 'gram'")
    if method == "auto":
        fa, fb = _mean_feature(a), _mean_feature(b)
        if fa is not None:
            diff = fa - fb
            return float(diff @ diff)
    value = inner(a, a) - 2.0 * inner(a, b) + inner(b, b)
    if value < 0.0:
        if value < NEGATIVE_WARN:
            logger.warning("negative squared RKHS distance %.3g clamped to 0; "
                           "Gram matrices are badly conditioned", value)
        value = 0.0
    return value


def mmd(samples_a, samples_b, kernel: KernelSpec) -> float:
    """RKHS distance (not squared) between the uniform embeddings of two samples."""
    return float(np.sqrt(rkhs_dist_sq(embed_uniform(samples_a, kernel),
                                      embed_uniform(samples_b, kernel))))


def mmd_over_time(ens_a, ens_b, kernel: KernelSpec, indices=None):
    """Distance between two trajectory ensembles at each shared time.

    Returns a list of ``(time, distance)`` pairs. Ensemble weights, when
    present, are used in place of the uniform ``1/N``. ``indices`` restricts
    the evaluation to a subset of time indices.
    """
    if not np.array_equal(ens_a.times, ens_b.times):
        raise ValueError("ensembles are on different time grids")
    if indices is None:
        indices = range(len(ens_a.times))
    out = []
    for t in indices:
        d2 = rkhs_dist_sq(ens_a.embedding(t, kernel), ens_b.embedding(t, kernel))
        out.append((float(ens_a.times[t]), float(np.sqrt(d2))))
    return out
