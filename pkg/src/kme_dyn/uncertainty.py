"""Seeded samplers for parameter and disturbance laws.

Every law can carry an optional deterministic time shift, added after the
base draw: ``UniformBox([-0.5], [0.5], shift=LinearDrift([0.1]))`` draws
``U(-0.5, 0.5) + 0.1 t``.

Randomness is never taken from global state. Callers pass either an integer
seed or a ``numpy.random.Generator``; :func:`rng_for` derives independent
sub-streams from ``(seed, key, key, ...)`` so that, for example, step ``t``
of a propagation always sees the same draws regardless of what ran before.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "UncertaintyError",
    "rng_for",
    "derive_seed",
    "LinearDrift",
    "UncertaintySpec",
    "Gaussian",
    "GMM",
    "UniformBox",
    "EllipsoidUniform",
    "PointMass",
    "sample",
    "spec_from_config",
    "moment_match_gaussian",
]


class UncertaintyError(ValueError):
    """Invalid uncertainty description."""


def rng_for(seed, *keys: int) -> np.random.Generator:
    """Independent generator for the sub-stream ``(seed, *keys)``."""
    if isinstance(seed, np.random.Generator):
        if keys:
            raise TypeError("sub-stream keys need an integer seed, not a Generator")
        return seed
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise UncertaintyError("seed must be a 64-bit unsigned integer, got %d" % seed)
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed, *keys: int) -> int:
    """Integer seed for the sub-stream ``(seed, *keys)``; for handing to nested runs."""
    return int(rng_for(seed, *keys).integers(0, 2**63))


def _vector(v, name) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.ndim != 1 or v.size == 0 or not np.all(np.isfinite(v)):
        raise UncertaintyError("%s must be a finite non-empty vector" % name)
    return v


def _spd_factor(M, dim, name) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.shape != (dim, dim):
        raise UncertaintyError("%s must be %dx%d, got shape %s" % (name, dim, dim, M.shape))
    if not np.allclose(M, M.T, rtol=1e-12, atol=1e-14):
        raise UncertaintyError("%s must be symmetric" % name)
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise UncertaintyError("%s is not positive definite" % name) from exc


@dataclass(frozen=True)
class LinearDrift:
    """Time shift ``rate * t``."""

    rate: tuple

    def __post_init__(self):
        object.__setattr__(self, "rate", tuple(float(r) for r in _vector(self.rate, "drift rate")))

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self.rate) * t


@dataclass(frozen=True, eq=False)
class UncertaintySpec:
    shift: Callable[[float], np.ndarray] | None = field(default=None, kw_only=True)

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def _draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def sample(self, n: int, seed, t: float | None = None) -> np.ndarray:
        return sample(self, n, seed, t)

    def _base_config(self) -> dict:
        raise NotImplementedError

    def to_config(self) -> dict:
        cfg = self._base_config()
        if self.shift is not None:
            if not isinstance(self.shift, LinearDrift):
                raise UncertaintyError("only linear drifts can be serialized")
            cfg["drift"] = list(self.shift.rate)
        return cfg


@dataclass(frozen=True, eq=False)
class Gaussian(UncertaintySpec):
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _vector(self.mean, "mean")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "_chol", _spd_factor(self.cov, mean.size, "covariance"))
        object.__setattr__(self, "cov", np.asarray(self.cov, dtype=float).reshape(mean.size, mean.size))

    @property
    def dim(self):
        return self.mean.size

    def _draw(self, n, rng):
        z = rng.standard_normal((n, self.dim))
        return self.mean + z @ self._chol.T

    def _base_config(self):
        return {"kind": "gaussian", "mean": self.mean.tolist(), "cov": self.cov.tolist()}


@dataclass(frozen=True, eq=False)
class GMM(UncertaintySpec):
    """Finite Gaussian mixture with positive weights summing to one."""

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = _vector(self.weights, "mixture weights")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise UncertaintyError("mixture weights must be positive and sum to 1")
        means = np.asarray(self.means, dtype=float)
        if means.ndim == 1:
            means = means.reshape(-1, 1)
        if means.shape[0] != w.size:
            raise UncertaintyError("%d means for %d components" % (means.shape[0], w.size))
        d = means.shape[1]
        covs = np.asarray(self.covs, dtype=float).reshape(w.size, d, d)
        chols = np.stack([_spd_factor(c, d, "component covariance") for c in covs])
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)
        object.__setattr__(self, "_chols", chols)

    @property
    def dim(self):
        return self.means.shape[1]

    @property
    def n_components(self):
        return self.weights.size

    def _draw(self, n, rng):
        comp = rng.choice(self.n_components, size=n, p=self.weights)
        z = rng.standard_normal((n, self.dim))
        return self.means[comp] + np.einsum("nij,nj->ni", self._chols[comp], z)

    def _base_config(self):
        return {
            "kind": "gmm",
            "components": [
                {"weight": float(w), "mean": m.tolist(), "cov": c.tolist()}
                for w, m, c in zip(self.weights, self.means, self.covs)
            ],
        }


@dataclass(frozen=True, eq=False)
class UniformBox(UncertaintySpec):
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo, hi = _vector(self.lower, "lower"), _vector(self.upper, "upper")
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise UncertaintyError("box needs lower < upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return self.lower.size

    def _draw(self, n, rng):
        return rng.uniform(self.lower, self.upper, size=(n, self.dim))

    def _base_config(self):
        return {"kind": "uniform", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True, eq=False)
class EllipsoidUniform(UncertaintySpec):
    """Uniform law on ``{center + L u : |u| <= 1}`` where ``shape = L L'``."""

    center: np.ndarray
    shape: np.ndarray

    def __post_init__(self):
        c = _vector(self.center, "center")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "_chol", _spd_factor(self.shape, c.size, "ellipsoid shape"))
        object.__setattr__(self, "shape", np.asarray(self.shape, dtype=float).reshape(c.size, c.size))

    @property
    def dim(self):
        return self.center.size

    def _draw(self, n, rng):
        # uniform in the unit ball: isotropic direction, radius U^(1/d)
        d = self.dim
        z = rng.standard_normal((n, d))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        r = rng.random(n) ** (1.0 / d)
        return self.center + (z * r[:, None]) @ self._chol.T

    def boundary(self, n: int = 64) -> np.ndarray:
        """Points on the ellipsoid surface (exact for d <= 2, random directions otherwise)."""
        d = self.dim
        if d == 1:
            u = np.array([[-1.0], [1.0]])
        elif d == 2:
            ang = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
            u = np.column_stack([np.cos(ang), np.sin(ang)])
        else:
            u = np.random.default_rng(0).standard_normal((n, d))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
        return self.center + u @ self._chol.T

    def _base_config(self):
        return {"kind": "ellipsoid", "center": self.center.tolist(), "shape": self.shape.tolist()}


@dataclass(frozen=True, eq=False)
class PointMass(UncertaintySpec):
    """Degenerate law; stands in for point estimates and noise-free models."""

    value: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "value", _vector(self.value, "value"))

    @property
    def dim(self):
        return self.value.size

    def _draw(self, n, rng):
        return np.tile(self.value, (n, 1))

    def _base_config(self):
        return {"kind": "point", "value": self.value.tolist()}


def sample(spec: UncertaintySpec, n: int, seed, t: float | None = None) -> np.ndarray:
    """Draw ``n`` i.i.d. samples as an ``(n, dim)`` array.

    The configured time shift, if any, is evaluated at ``t`` (``t=None`` is
    read as ``t=0``).
    """
    n = int(n)
    if n < 1:
        raise UncertaintyError("need n >= 1 samples, got %d" % n)
    rng = rng_for(seed)
    x = spec._draw(n, rng)
    if spec.shift is not None:
        x = x + np.asarray(spec.shift(0.0 if t is None else t), dtype=float)
    return x


def spec_from_config(cfg: dict | UncertaintySpec) -> UncertaintySpec:
    """Build a law from a tagged record such as ``{"kind": "ellipsoid", ...}``."""
    if isinstance(cfg, UncertaintySpec):
        return cfg
    cfg = dict(cfg)
    kind = str(cfg.pop("kind", "")).lower()
    drift = cfg.pop("drift", None)
    shift = LinearDrift(drift) if drift is not None else None
    try:
        if kind == "gaussian":
            return Gaussian(cfg["mean"], cfg["cov"], shift=shift)
        if kind == "gmm":
            comps = cfg["components"]
            return GMM([c["weight"] for c in comps], [c["mean"] for c in comps],
                       [c["cov"] for c in comps], shift=shift)
        if kind == "uniform":
            return UniformBox(cfg["lower"], cfg["upper"], shift=shift)
        if kind == "ellipsoid":
            return EllipsoidUniform(cfg["center"], cfg["shape"], shift=shift)
        if kind == "point":
            return PointMass(cfg["value"], shift=shift)
    except KeyError as exc:
        raise UncertaintyError("%s law is missing field %s" % (kind, exc)) from exc
    raise UncertaintyError("unknown uncertainty kind %r" % kind)


def moment_match_gaussian(gmm: GMM) -> Gaussian:
    """Scalar Gaussian with the same first two raw moments as a scalar mixture."""
    if not isinstance(gmm, GMM):
        raise UncertaintyError("moment matching expects a GMM")
    if gmm.dim != 1:
        raise UncertaintyError("moment matching is implemented for scalar mixtures only")
    w = gmm.weights
    m = gmm.means[:, 0]
    s2 = gmm.covs[:, 0, 0]
    mean = float(w @ m)
    var = float(w @ (s2 + m**2)) - mean**2
    if not var > 0:
        raise UncertaintyError("degenerate mixture: matched variance %g <= 0" % var)
    return Gaussian([mean], [[var]], shift=gmm.shift)
