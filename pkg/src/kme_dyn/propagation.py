"""Propagating embedded uncertainty through dynamics.

Two schemes:

* :func:`propagate_direct` samples N realizations of the uncertainty, evolves
  each one deterministically and embeds the resulting states with weights
  ``1/N``. For discrete-time systems the i-th trajectory uses the i-th draw at
  every step (the diagonal estimator).
* :func:`propagate_reduced` keeps a fixed-size weighted expansion. Each step
  pushes every expansion point through ``N_xi`` shared noise draws
  (:func:`ustat_step`), then compresses the ``N_R * N_xi`` resulting points
  back to ``N_R`` by subsampling expansion points and re-solving the weights
  that minimise the RKHS residual (:func:`reduce`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dynamics import ContinuousSystem, DiscreteSystem, DynamicsError, TrajectoryEnsemble, _check
from .dynamics import integrate_batch, iterate_batch
from .embedding import Expansion, rkhs_dist_sq
from .kernels import KernelSpec, gram
from .uncertainty import UncertaintySpec, rng_for, sample

__all__ = [
    "ReductionError",
    "ReducedSetConfig",
    "propagate_direct",
    "ustat_step",
    "merge_duplicates",
    "fit_weights",
    "reduce",
    "propagate_reduced",
    "approximation_error",
]

# sub-stream keys under the user seed
PARAM_STREAM = 0
NOISE_STREAM = 1
SELECT_STREAM = 2

# ridge used when the unregularised system turns out singular
FALLBACK_RIDGE = 1e-10


class ReductionError(RuntimeError):
    """The reduced-set weight system could not be solved."""


@dataclass(frozen=True)
class ReducedSetConfig:
    """Settings for recursive reduced-set propagation.

    ``ridge=None`` selects ``1e-8 * trace(K_ZZ) / N_R``. ``selection`` is
    ``"uniform"`` (default) or ``"weighted"``, which samples expansion points
    with probability proportional to ``|weight|``.
    """

    target_size: int
    noise_draws: int
    ridge: float | None = None
    selection: str = "uniform"

    def __post_init__(self):
        if int(self.target_size) != self.target_size or self.target_size < 1:
            raise ValueError("target_size must be a positive integer")
        if int(self.noise_draws) != self.noise_draws or self.noise_draws < 1:
            raise ValueError("noise_draws must be a positive integer")
        if self.ridge is not None and not self.ridge >= 0:
            raise ValueError("ridge must be nonnegative")
        if self.selection not in ("uniform", "weighted"):
            raise ValueError("selection must be 'uniform' or 'weighted'")


def _stream(seed, *keys):
    if isinstance(seed, np.random.Generator):
        return seed
    return rng_for(seed, *keys)


def _noise_paths(law: UncertaintySpec, horizon: int, n: int, seed, redraw: str) -> np.ndarray:
    if redraw == "once":
        w = sample(law, n, rng_for(seed, NOISE_STREAM, 0), t=0)
        return np.broadcast_to(w, (horizon,) + w.shape)
    return np.stack([sample(law, n, rng_for(seed, NOISE_STREAM, t), t=t) for t in range(horizon)])


def propagate_direct(sys, x0, law: UncertaintySpec | None, n: int, seed) -> TrajectoryEnsemble:
    """Monte Carlo propagation of ``n`` realizations (uniform weights).

    For a :class:`ContinuousSystem`, ``law`` is the parameter law and each
    draw is held constant while integrating. For a :class:`DiscreteSystem`,
    ``law`` overrides the system's per-step noise law when given.
    """
    n = int(n)
    if n < 1:
        raise ValueError("need at least one realization")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if isinstance(sys, ContinuousSystem):
        if law is None:
            raise ValueError("continuous systems need a parameter law")
        params = sample(law, n, rng_for(seed, PARAM_STREAM))
        times, states = integrate_batch(sys, x0, params)
    elif isinstance(sys, DiscreteSystem):
        paths = _noise_paths(law or sys.noise, sys.horizon, n, seed, sys.redraw)
        times, states = iterate_batch(sys, x0, paths)
    else:
        raise TypeError("unsupported system type %s" % type(sys).__name__)
    return TrajectoryEnsemble(times, states)


def ustat_step(current: Expansion, sys: DiscreteSystem, t: int, n_xi: int, seed) -> Expansion:
    """Push every expansion point through the same ``n_xi`` noise draws of step ``t``.

    Point ``f(x_i, w_j)`` gets weight ``alpha_i / n_xi``, so total mass is kept.
    """
    n_xi = int(n_xi)
    if n_xi < 1:
        raise ValueError("n_xi must be >= 1")
    W = sample(sys.noise, n_xi, _stream(seed, NOISE_STREAM, t), t=t)
    m = current.size
    X = np.repeat(current.points, n_xi, axis=0)
    Xn = np.asarray(sys.map(t, X, np.tile(W, (m, 1))), dtype=float)
    _check(Xn, t + 1)
    return Expansion(current.kernel, Xn, np.repeat(current.weights, n_xi) / n_xi)


def merge_duplicates(e: Expansion) -> Expansion:
    """Combine exactly repeated points into one, summing their weights.

    The represented RKHS element is unchanged. First-occurrence order is kept.
    """
    _, first, inverse = np.unique(e.points, axis=0, return_index=True, return_inverse=True)
    if first.size == e.size:
        return e
    inverse = inverse.reshape(-1)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    w = np.bincount(rank[inverse], weights=e.weights, minlength=first.size)
    return Expansion(e.kernel, e.points[first[order]], w)


def fit_weights(full: Expansion, Z, ridge: float | None = None) -> np.ndarray:
    """Weights on points ``Z`` minimising ``|sum_i a_i k(z_i,.) - mu_full|``.

    Solves ``(K_ZZ + ridge I) a = K_ZF beta``. A singular system with a ridge
    below ``1e-10`` is retried once with ``1e-10``.
    """
    kern = full.kernel
    Kzz = gram(kern, Z)
    rhs = gram(kern, Z, full.points) @ full.weights
    n = Kzz.shape[0]
    lam = 1e-8 * np.trace(Kzz) / n if ridge is None else float(ridge)
    attempts = [lam] if lam >= FALLBACK_RIDGE else [lam, FALLBACK_RIDGE]
    for value in attempts:
        try:
            factor = scipy.linalg.cho_factor(Kzz + value * np.eye(n), lower=True)
        except np.linalg.LinAlgError:
            continue
        alpha = scipy.linalg.cho_solve(factor, rhs)
        if np.all(np.isfinite(alpha)):
            return alpha
    raise ReductionError("reduced-set system is singular (ridge tried: %s)" % attempts)


def reduce(full: Expansion, n_r: int, ridge: float | None = None, seed=0,
           selection: str = "uniform") -> Expansion:
    """Compress ``full`` to at most ``n_r`` points.

    Exact duplicates are merged first; if no more than ``n_r`` distinct points
    remain, the merged expansion is returned unchanged. Otherwise ``n_r``
    distinct points are subsampled without replacement and their weights are
    re-solved with :func:`fit_weights`. Weights are unconstrained (may be signed).
    """
    n_r = int(n_r)
    if not 1 <= n_r <= full.size:
        raise ValueError("n_r must lie in [1, %d], got %d" % (full.size, n_r))
    merged = merge_duplicates(full)
    m = merged.size
    if n_r >= m:
        return merged
    rng = _stream(seed, SELECT_STREAM)
    if selection == "uniform":
        idx = rng.choice(m, size=n_r, replace=False)
    elif selection == "weighted":
        p = np.abs(merged.weights)
        if np.count_nonzero(p) < n_r:
            p = p + p.sum() / m
        idx = rng.choice(m, size=n_r, replace=False, p=p / p.sum())
    else:
        raise ValueError("unknown selection %r" % selection)
    Z = merged.points[np.sort(idx)]
    return Expansion(full.kernel, Z, fit_weights(merged, Z, ridge))


def propagate_reduced(sys: DiscreteSystem, x0, cfg: ReducedSetConfig, horizon: int | None,
                      kernel: KernelSpec, seed) -> list[Expansion]:
    """Recursive reduced-set propagation from the point mass at ``x0``.

    Returns ``horizon + 1`` expansions; entry ``t`` embeds the state at step
    ``t`` (entry 0 is ``{(x0, 1)}``). Every entry has at most
    ``cfg.target_size`` points.
    """
    if not isinstance(sys, DiscreteSystem):
        raise TypeError("reduced-set propagation is defined for discrete-time systems")
    if sys.redraw != "step":
        raise ValueError("reduced-set propagation needs per-step noise draws")
    T = sys.horizon if horizon is None else int(horizon)
    current = Expansion(kernel, np.atleast_1d(np.asarray(x0, dtype=float))[None, :], [1.0])
    out = [current]
    for t in range(T):
        try:
            full = ustat_step(current, sys, t, cfg.noise_draws, seed)
            current = reduce(full, min(cfg.target_size, full.size), cfg.ridge,
                             rng_for(seed, SELECT_STREAM, t), cfg.selection)
        except DynamicsError as exc:
            raise DynamicsError("step %d: %s" % (t, exc), time=t + 1, index=exc.index) from exc
        except ReductionError as exc:
            raise ReductionError("step %d: %s" % (t, exc)) from exc
        out.append(current)
    return out


def approximation_error(candidate: Expansion, reference: Expansion) -> float:
    """Squared RKHS distance of ``candidate`` to ``reference``."""
    return rkhs_dist_sq(candidate, reference)
