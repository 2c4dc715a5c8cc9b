"""System models and their deterministic evolution for fixed uncertainty realizations.

Right-hand sides and maps are written for batches: ``rhs(t, X, P)`` receives
states ``X`` of shape ``(N, d)`` and parameters ``P`` of shape ``(N, p)`` and
returns ``(N, d)``. A single realization is a batch of one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .embedding import Expansion, embed_uniform, embed_weighted
from .uncertainty import EllipsoidUniform, Gaussian, LinearDrift, PointMass, UncertaintySpec, UniformBox

__all__ = [
    "DynamicsError",
    "ContinuousSystem",
    "DiscreteSystem",
    "TrajectoryEnsemble",
    "integrate",
    "integrate_batch",
    "iterate",
    "iterate_batch",
    "linear_ode",
    "builtin_arx",
    "random_walk_drift",
    "arx_spectral_radius",
    "check_arx_stability",
    "SineInput",
]

BLOWUP_NORM = 1e12


class DynamicsError(RuntimeError):
    """Non-finite or diverging state during evolution."""

    def __init__(self, message, time=None, index=None):
        super().__init__(message)
        self.time = time
        self.index = index


@dataclass(frozen=True)
class ContinuousSystem:
    """``dx/dt = rhs(t, x, xi)`` on the grid ``t0 + i*step``, ``i = 0..n_steps``."""

    rhs: Callable
    t0: float = 0.0
    t_end: float = 1.0
    step: float = 0.01
    method: str = "rk4"
    name: str = "custom"

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.method not in ("euler", "rk4"):
            raise ValueError("method must be 'euler' or 'rk4', got %r" % self.method)
        ratio = (self.t_end - self.t0) / self.step
        n = round(ratio)
        if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
            raise ValueError("(t_end - t0) / step = %g is not a positive integer" % ratio)

    @property
    def n_steps(self) -> int:
        return round((self.t_end - self.t0) / self.step)

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_steps + 1) * self.step


@dataclass(frozen=True)
class DiscreteSystem:
    """``x[t+1] = map(t, x[t], w[t])`` for ``t = 0..horizon-1``.

    ``redraw="step"`` draws a fresh ``w`` at every step; ``"once"`` draws one
    per trajectory and holds it.
    """

    map: Callable
    horizon: int
    noise: UncertaintySpec
    redraw: str = "step"
    name: str = "custom"

    def __post_init__(self):
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError("horizon must be a positive integer")
        if self.redraw not in ("step", "once"):
            raise ValueError("redraw must be 'step' or 'once'")

    def times(self) -> np.ndarray:
        return np.arange(self.horizon + 1, dtype=float)


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    """States of N realizations on a shared time grid.

    ``states`` has shape ``(len(times), N, d)``; optional ``weights`` (one per
    realization) replace the uniform ``1/N`` when embedding.
    """

    times: np.ndarray
    states: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if states.ndim == 2:
            states = states[:, :, None]
        if states.ndim != 3 or states.shape[0] != times.size:
            raise ValueError("states must be (n_times, n_realizations, dim) matching times")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (states.shape[1],):
                raise ValueError("need one weight per realization")
            object.__setattr__(self, "weights", w)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def n_realizations(self) -> int:
        return self.states.shape[1]

    @property
    def dim(self) -> int:
        return self.states.shape[2]

    def embedding(self, index: int, kernel) -> Expansion:
        if self.weights is None:
            return embed_uniform(self.states[index], kernel)
        return embed_weighted(self.states[index], self.weights, kernel)

    def time_index(self, t: float) -> int:
        idx = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[idx], t, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError("time %g is not on the ensemble grid" % t)
        return idx


def _check(x, t, offset=0):
    norms = np.sqrt(np.einsum("ij,ij->i", x, x))
    bad = ~(norms <= BLOWUP_NORM)  # catches NaN as well
    if bad.any():
        i = int(np.argmax(bad))
        raise DynamicsError("state diverged at t=%g (realization %d, |x|=%g)"
                            % (t, i + offset, norms[i]), time=t, index=i + offset)


def _as_batch(x, n=None):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = np.tile(x, (n or 1, 1))
    return x


def integrate_batch(sys: ContinuousSystem, x0, params):
    """Integrate all realizations together; returns ``(times, states[T, N, d])``."""
    P = np.asarray(params, dtype=float)
    if P.ndim == 1:
        P = P.reshape(-1, 1)
    X = _as_batch(x0, P.shape[0]).copy()
    if X.shape[0] != P.shape[0]:
        raise ValueError("%d initial states for %d parameter draws" % (X.shape[0], P.shape[0]))
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(P))):
        raise ValueError("initial state and parameters must be finite")
    times = sys.times()
    h = sys.step
    out = np.empty((times.size,) + X.shape)
    out[0] = X
    f = sys.rhs
    for i in range(sys.n_steps):
        t = times[i]
        if sys.method == "euler":
            X = X + h * f(t, X, P)
        else:
            k1 = f(t, X, P)
            k2 = f(t + 0.5 * h, X + 0.5 * h * k1, P)
            k3 = f(t + 0.5 * h, X + 0.5 * h * k2, P)
            k4 = f(t + h, X + h * k3, P)
            X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check(X, times[i + 1])
        out[i + 1] = X
    return times, out


def integrate(sys: ContinuousSystem, x0, xi):
    """Single-realization trajectory; returns ``(times, states[T, d])``."""
    times, states = integrate_batch(sys, np.atleast_1d(np.asarray(x0, dtype=float)),
                                    np.atleast_1d(np.asarray(xi, dtype=float)).reshape(1, -1))
    return times, states[:, 0, :]


def iterate_batch(sys: DiscreteSystem, x0, noise_paths):
    """Evolve N realizations under given noise paths of shape ``(horizon, N, q)``."""
    W = np.asarray(noise_paths, dtype=float)
    if W.ndim == 2:
        W = W[:, :, None]
    if W.shape[0] != sys.horizon:
        raise ValueError("noise path has %d steps, horizon is %d" % (W.shape[0], sys.horizon))
    X = _as_batch(x0, W.shape[1]).copy()
    if not np.all(np.isfinite(X)):
        raise ValueError("initial state must be finite")
    out = np.empty((sys.horizon + 1,) + X.shape)
    out[0] = X
    for t in range(sys.horizon):
        X = np.asarray(sys.map(t, X, W[t]), dtype=float)
        _check(X, t + 1)
        out[t + 1] = X
    return sys.times(), out


def iterate(sys: DiscreteSystem, x0, noise_path):
    """Single realization; ``noise_path`` has one row per step. Returns all horizon+1 states."""
    W = np.asarray(noise_path, dtype=float)
    W = W.reshape(W.shape[0], 1, -1)
    steps, states = iterate_batch(sys, np.atleast_1d(np.asarray(x0, dtype=float)), W)
    return steps, states[:, 0, :]


# built-in systems ----------------------------------------------------------

def _linear_rhs(t, x, xi):
    return xi[:, :1] * x


def linear_ode(t_end: float = 3.0, step: float = 0.01, method: str = "euler", t0: float = 0.0):
    """``dx/dt = xi * x`` with scalar uncertain rate ``xi``."""
    return ContinuousSystem(_linear_rhs, t0=t0, t_end=t_end, step=step, method=method,
                            name="linear_ode")


@dataclass(frozen=True)
class SineInput:
    """Exogenous input ``amplitude * sin(frequency * k)``."""

    amplitude: float = 1.0
    frequency: float = 0.1

    def __call__(self, k):
        return self.amplitude * np.sin(self.frequency * k)


@dataclass(frozen=True)
class _ARXMap:
    a1: float
    u: Callable

    def __call__(self, t, X, W):
        # state (y_t, y_{t-1}); parameters w = (a2, b1)
        y_next = self.a1 * X[:, 0] + W[:, 0] * X[:, 1] + W[:, 1] * self.u(t)
        return np.column_stack([y_next, X[:, 0]])


def builtin_arx(a1: float, w, u: Callable | None = None, horizon: int = 600,
                redraw: str = "step") -> DiscreteSystem:
    """Second-order ARX model ``y[k] = a1 y[k-1] + a2 y[k-2] + b1 u[k-1]``.

    The state is ``(y[k], y[k-1])``. ``w = (a2, b1)`` is either a fixed
    parameter point or an uncertainty law sampled as the per-step noise.
    """
    law = w if isinstance(w, UncertaintySpec) else PointMass(w)
    if law.dim != 2:
        raise ValueError("ARX parameter law must be 2-D (a2, b1)")
    return DiscreteSystem(_ARXMap(float(a1), u or SineInput()), horizon, law, redraw=redraw,
                          name="arx2")


def arx_spectral_radius(a1: float, a2) -> np.ndarray:
    """Spectral radius of the companion matrix ``[[a1, a2], [1, 0]]`` for each a2."""
    a2 = np.atleast_1d(np.asarray(a2, dtype=float))
    disc = np.sqrt((a1 * a1 + 4.0 * a2).astype(complex))
    return np.maximum(np.abs((a1 + disc) / 2.0), np.abs((a1 - disc) / 2.0))


def _law_extremes(law: UncertaintySpec) -> np.ndarray:
    if isinstance(law, EllipsoidUniform):
        return law.boundary(64)
    if isinstance(law, Gaussian):
        probe = EllipsoidUniform(law.mean, 9.0 * law.cov)  # 3-sigma contour
        return probe.boundary(64)
    if isinstance(law, UniformBox):
        lo, hi = law.lower, law.upper
        return np.array([[lo[0], lo[1]], [lo[0], hi[1]], [hi[0], lo[1]], [hi[0], hi[1]]])
    if isinstance(law, PointMass):
        return law.value[None, :]
    raise ValueError("cannot probe stability for %s" % type(law).__name__)


def check_arx_stability(a1: float, law: UncertaintySpec) -> float:
    """Largest frozen-parameter spectral radius over the law's extreme points.

    Raises ``ValueError`` when it reaches 1.
    """
    rho = float(arx_spectral_radius(a1, _law_extremes(law)[:, 0]).max())
    if rho >= 1.0:
        raise ValueError("ARX model unstable over parameter set (spectral radius %.4f)" % rho)
    return rho


def _random_walk_map(t, X, W):
    return X + W


def random_walk_drift(horizon: int = 10, lower: float = -0.5, upper: float = 0.5,
                      drift: float = 0.1) -> DiscreteSystem:
    """``x[t+1] = x[t] + w[t]`` with ``w[t] ~ U(lower, upper) + drift * t``."""
    noise = UniformBox([lower], [upper], shift=LinearDrift([drift]) if drift else None)
    return DiscreteSystem(_random_walk_map, horizon, noise, name="random_walk_drift")
