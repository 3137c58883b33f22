"""Runge-Kutta integration with event localization.

The flows in this package are smooth and non-stiff, but regression against
published transfer times requires tight local error control, so the adaptive
driver uses the embedded Dormand-Prince 5(4) pair with proportional step
control. Event times are found by bracketing a sign change of the event
function across accepted steps and bisecting the bracket (re-integrating
short segments) until the crossing time is pinned down to ``event_tol``.

Everything is deterministic: identical inputs produce bit-identical output.
All times are in units of 1/Omega_0 with Omega_0 = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "EventHit",
    "StepUnderflow",
    "integrate",
    "propagate",
    "locate_event",
    "rk4",
]

#: Hard floor for the adaptive step; reaching it signals stiffness or a
#: singularity in the right-hand side.
MIN_STEP = 1e-14

Rhs = Callable[[float, np.ndarray], np.ndarray]


class StepUnderflow(RuntimeError):
    """Adaptive step fell below MIN_STEP."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and step limits for the adaptive integrator.

    ``max_step`` bounds the spacing of the reported trajectory nodes (the
    sampling density available to later linear interpolation); ``event_tol``
    is the width, in time, to which an event crossing is localized.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_step: float = 1e-2
    event_tol: float = 1e-10

    def __post_init__(self) -> None:
        for name in ("abs_tol", "rel_tol", "max_step", "event_tol"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.max_step <= self.event_tol:
            raise ValueError("max_step must exceed event_tol")


@dataclass
class Trajectory:
    """Sampled solution: ``states[i]`` is the state at ``times[i]``."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states)
        if self.times.ndim != 1 or len(self.states) != len(self.times):
            raise ValueError("times and states must have matching leading length")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


@dataclass
class EventHit:
    """First event crossing: time, state there, and the path leading to it."""

    t: float
    y: np.ndarray
    trajectory: Trajectory


# Dormand-Prince 5(4) tableau. The propagating solution is 5th order; the
# last row of _A doubles as its weights (FSAL: stage 7 is reused as stage 1
# of the next step). _E holds the 5th-minus-4th order error weights.
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_A71, _A73, _A74, _A75, _A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


def _as_state(y0) -> np.ndarray:
    y = np.array(y0, copy=True)
    if not np.issubdtype(y.dtype, np.inexact):
        y = y.astype(float)
    return y


def _error_norm(err: np.ndarray, y_old: np.ndarray, y_new: np.ndarray, cfg: IntegratorConfig) -> float:
    scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y_old), np.abs(y_new))
    q = np.abs(err) / scale
    return float(np.sqrt(np.mean(q * q)))


def _steps(rhs: Rhs, t0: float, y0: np.ndarray, t1: float, cfg: IntegratorConfig) -> Iterator[tuple[float, np.ndarray]]:
    """Yield accepted (t, y) nodes strictly after t0, ending at t1."""
    t = t0
    y = y0
    h = min(cfg.max_step, t1 - t0)
    k1 = np.asarray(rhs(t, y))
    while True:
        remaining = t1 - t
        if remaining <= MIN_STEP:
            return
        h = min(h, remaining)
        if h < MIN_STEP:
            raise StepUnderflow(f"step size {h:.3e} below {MIN_STEP:.0e} at t={t!r}")
        k2 = np.asarray(rhs(t + _C2 * h, y + h * (_A21 * k1)))
        k3 = np.asarray(rhs(t + _C3 * h, y + h * (_A31 * k1 + _A32 * k2)))
        k4 = np.asarray(rhs(t + _C4 * h, y + h * (_A41 * k1 + _A42 * k2 + _A43 * k3)))
        k5 = np.asarray(rhs(t + _C5 * h, y + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4)))
        k6 = np.asarray(rhs(t + h, y + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5)))
        y_new = y + h * (_A71 * k1 + _A73 * k3 + _A74 * k4 + _A75 * k5 + _A76 * k6)
        k7 = np.asarray(rhs(t + h, y_new))
        err = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
        enorm = _error_norm(err, y, y_new, cfg)
        if enorm <= 1.0:
            t = t1 if (t1 - (t + h)) <= MIN_STEP else t + h
            y = y_new
            k1 = k7
            yield t, y
            factor = 5.0 if enorm == 0.0 else min(5.0, max(0.2, 0.9 * enorm ** -0.2))
        else:
            factor = max(0.2, 0.9 * enorm ** -0.2)
        h = min(cfg.max_step, h * factor)


def integrate(rhs: Rhs, y0, t_span: tuple[float, float], cfg: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Integrate ``dy/dt = rhs(t, y)`` over ``t_span``, storing every accepted node.

    Raises StepUnderflow if the controller drives the step below MIN_STEP.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if t1 < t0:
        raise ValueError("t_span must be non-decreasing")
    y = _as_state(y0)
    times = [t0]
    states = [y]
    for t, yt in _steps(rhs, t0, y, t1, cfg):
        times.append(t)
        states.append(yt)
    return Trajectory(np.asarray(times), np.asarray(states))


def propagate(rhs: Rhs, y0, t_span: tuple[float, float], cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """Like integrate() but returns only the final state."""
    t0, t1 = float(t_span[0]), float(t_span[1])
    if t1 < t0:
        raise ValueError("t_span must be non-decreasing")
    y = _as_state(y0)
    for _, y in _steps(rhs, t0, y, t1, cfg):
        pass
    return y


def locate_event(
    rhs: Rhs,
    y0,
    t_span: tuple[float, float],
    event: Callable[[np.ndarray], float],
    cfg: IntegratorConfig = IntegratorConfig(),
) -> EventHit | None:
    """Locate the first sign change of ``event`` along the trajectory.

    The crossing bracket found while stepping is narrowed by bisection in
    time (each probe re-integrates from the left bracket point) until its
    width is below ``cfg.event_tol``. Returns None when the event keeps its
    sign throughout ``t_span``.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    y = _as_state(y0)
    e_prev = float(event(y))
    if e_prev == 0.0:
        return EventHit(t0, y, Trajectory(np.asarray([t0]), np.asarray([y])))
    times = [t0]
    states = [y]
    t_prev = t0
    y_prev = y
    for t, yt in _steps(rhs, t0, y, t1, cfg):
        e_new = float(event(yt))
        if e_new == 0.0 or (e_new > 0.0) != (e_prev > 0.0):
            t_hit, y_hit = _bisect_event(rhs, t_prev, y_prev, e_prev, t, event, cfg)
            times.append(t_hit)
            states.append(y_hit)
            return EventHit(t_hit, y_hit, Trajectory(np.asarray(times), np.asarray(states)))
        times.append(t)
        states.append(yt)
        t_prev, y_prev, e_prev = t, yt, e_new
    return None


def _bisect_event(rhs, ta, ya, ea, tb, event, cfg):
    """Narrow [ta, tb] (sign change inside) to event_tol; return right edge."""
    while tb - ta > cfg.event_tol:
        tm = 0.5 * (ta + tb)
        ym = propagate(rhs, ya, (ta, tm), cfg)
        em = float(event(ym))
        if em != 0.0 and (em > 0.0) == (ea > 0.0):
            ta, ya, ea = tm, ym, em
        else:
            tb = tm
    return tb, propagate(rhs, ya, (ta, tb), cfg)


def rk4(rhs: Rhs, y0, t_span: tuple[float, float], h: float) -> Trajectory:
    """Fixed-step classical RK4 with a uniform grid of spacing <= h."""
    t0, t1 = float(t_span[0]), float(t_span[1])
    if t1 <= t0:
        raise ValueError("t_span must be increasing")
    if h <= 0.0:
        raise ValueError("h must be positive")
    n = max(1, math.ceil((t1 - t0) / h))
    dt = (t1 - t0) / n
    y = _as_state(y0)
    times = np.linspace(t0, t1, n + 1)
    states = np.empty((n + 1,) + y.shape, dtype=y.dtype)
    states[0] = y
    for i in range(n):
        t = times[i]
        k1 = np.asarray(rhs(t, y))
        k2 = np.asarray(rhs(t + 0.5 * dt, y + 0.5 * dt * k1))
        k3 = np.asarray(rhs(t + 0.5 * dt, y + 0.5 * dt * k2))
        k4 = np.asarray(rhs(t + dt, y + dt * k3))
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[i + 1] = y
    return Trajectory(times, states)
