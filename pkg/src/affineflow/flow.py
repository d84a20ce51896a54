"""Time integration of the p-flow in the Gauss parametrization.

The support function evolves by

    d s / dt = -s^{1+3a} r^a,      a = -p/(p+2),   r = s'' + s,

a degenerate quasilinear parabolic equation on the circle.  It is advanced
with classical RK4, spectral evaluation of r at every stage, and step-doubling
error control.  Closed-form self-similar solutions (circles and centred
ellipses) serve as oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import Extinct, NonConvex, UnsupportedExponent
from .geometry import SupportProfile, _symmetrize, area, require_valid, spectral_derivative
from .normalize import EllipseSpec

__all__ = [
    "FlowParams",
    "TrajectoryPoint",
    "Trajectory",
    "speed",
    "step",
    "simulate",
    "stable_dt",
    "radius_rate",
    "sigma_rate",
    "sigma_evolution_rhs",
    "sigma_transport",
    "circle_closed_form",
    "circle_extinction_time",
    "ellipse_closed_form",
    "ellipse_extinction_time",
    "TERMINATIONS",
]

TERMINATIONS = ("reached_t_end", "area_floor", "convexity_loss", "step_underflow")
DT_MIN = 1e-14
# RK4 stability interval on the negative real axis
_RK4_STABILITY = 2.785


@dataclass(frozen=True)
class FlowParams:
    """Flow exponent and integrator controls.

    ``stop_area=None`` means 1e-3 times the initial area.  ``backward`` exists
    only so that requests for backward integration can be rejected loudly.
    """

    p: float
    dt_init: float = 1e-4
    dt_safety: float = 0.8
    tol_step: float = 1e-8
    t_end: Optional[float] = None
    stop_area: Optional[float] = None
    backward: bool = False

    def __post_init__(self):
        if not math.isfinite(self.p) or self.p < 1:
            raise UnsupportedExponent(f"p < 1 unsupported (got p={self.p})")
        if self.backward:
            raise ValueError("backward time integration is refused: the flow is parabolic")
        if not 0 < self.dt_safety < 1:
            raise ValueError("dt_safety must lie in (0, 1)")
        if self.tol_step <= 0 or self.dt_init <= 0:
            raise ValueError("tol_step and dt_init must be positive")
        if self.t_end is not None and self.t_end <= 0:
            raise ValueError("t_end must be positive")

    @property
    def alpha(self) -> float:
        return -self.p / (self.p + 2.0)

    @property
    def s_exponent(self) -> float:
        """1 + 3 alpha = 1 - 3p/(p+2)."""
        return 1.0 - 3.0 * self.p / (self.p + 2.0)

    @property
    def harnack_exponent(self) -> float:
        """Time exponent alpha/(alpha-1) = p/(2p+2)."""
        return self.p / (2.0 * self.p + 2.0)


def _speed_values(values: np.ndarray, params: FlowParams) -> tuple[np.ndarray, np.ndarray]:
    r = spectral_derivative(values, 2) + values
    if not (np.all(r > 0) and np.all(values > 0)):
        raise NonConvex("flow state left the strictly convex bodies containing the origin")
    return values ** params.s_exponent * r ** params.alpha, r


def speed(s: SupportProfile, params: FlowParams) -> np.ndarray:
    """Inward normal speed s^{1+3a} r^a."""
    require_valid(s)
    return _speed_values(s.values, params)[0]


def stable_dt(s: SupportProfile, params: FlowParams) -> float:
    """Explicit-RK4 step ceiling from the linearized diffusion coefficient.

    Linearizing the speed in r gives d(ds)/dt ~ D (ds)'' with
    D = |a| s^{1+3a} r^{a-1}; the Nyquist mode then needs
    dt <= 2.785 / (max D (n/2)^2), scaled by ``dt_safety``.
    """
    f, r = _speed_values(s.values, params)
    diffusion = abs(params.alpha) * f / r
    return params.dt_safety * _RK4_STABILITY * 4.0 / (s.n ** 2 * float(diffusion.max()))


def _rk4(values: np.ndarray, params: FlowParams, dt: float) -> np.ndarray:
    k1 = _speed_values(values, params)[0]
    k2 = _speed_values(values - 0.5 * dt * k1, params)[0]
    k3 = _speed_values(values - 0.5 * dt * k2, params)[0]
    k4 = _speed_values(values - dt * k3, params)[0]
    out = _symmetrize(values - dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    _speed_values(out, params)
    return out


def step(s: SupportProfile, params: FlowParams, dt: float) -> SupportProfile:
    """One classical RK4 step of the support-function equation.

    Raises
    ------
    NonConvex
        If any stage (or the result) is not strictly convex with s > 0;
        callers retry with a smaller ``dt``.
    """
    if dt < 0:
        raise ValueError("backward time integration is refused: the flow is parabolic")
    if dt == 0:
        return s
    return s.with_values(_rk4(np.asarray(s.values), params, dt))


# --------------------------------------------------------------------------
# trajectories
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TrajectoryPoint:
    t: float
    state: SupportProfile
    record: "object"  # monitors.InvariantRecord
    dt: float  # last accepted step before this record (0 at the start)
    local_error: float  # summed relative step-error estimates since the previous record


@dataclass(eq=False)
class Trajectory:
    params: FlowParams
    points: list = field(default_factory=list)
    termination: str = ""
    steps: int = 0
    rejected: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.array([pt.t for pt in self.points])

    @property
    def states(self) -> list:
        return [pt.state for pt in self.points]

    @property
    def records(self) -> list:
        return [pt.record for pt in self.points]

    @property
    def final(self) -> TrajectoryPoint:
        return self.points[-1]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(pt.record, name) for pt in self.points])

    def __len__(self):
        return len(self.points)


def simulate(
    s0: SupportProfile,
    params: FlowParams,
    monitor_every: int = 1,
    max_steps: Optional[int] = None,
) -> Trajectory:
    """Integrate the flow from ``s0`` with adaptive step doubling.

    Each attempt compares one step of size dt with two of size dt/2; the
    relative difference / 15 is the local error estimate.  Accepted steps keep
    the two-half-step result.  A NonConvex stage halves dt.  The run ends at
    ``t_end``, when the area drops to ``stop_area``, or when dt underflows
    1e-14 (reported as ``convexity_loss`` if the last rejection was a
    convexity failure, ``step_underflow`` otherwise).  An
    :class:`InvariantRecord` is stored at the start, every ``monitor_every``
    accepted steps, and at the final state.
    """
    from .monitors import compute_record

    if monitor_every < 1:
        raise ValueError("monitor_every must be >= 1")
    require_valid(s0, symmetric=True)
    s = s0.symmetrized()
    a0 = area(s)
    stop_area = params.stop_area if params.stop_area is not None else 1e-3 * a0
    traj = Trajectory(params)
    t = 0.0
    record = compute_record(s, params, t)
    traj.points.append(TrajectoryPoint(t, s, record, 0.0, 0.0))

    dt = min(params.dt_init, stable_dt(s, params))
    since_record = 0
    err_acc = 0.0
    last_dt = 0.0
    last_fail_convexity = False
    values = np.asarray(s.values)
    reason = ""
    while True:
        if params.t_end is not None:
            remaining = params.t_end - t
            if remaining <= 1e-15 * max(1.0, params.t_end):
                reason = "reached_t_end"
                break
            dt = min(dt, remaining)
        if max_steps is not None and traj.steps >= max_steps:
            reason = "step_underflow"
            break
        if dt < DT_MIN:
            reason = "convexity_loss" if last_fail_convexity else "step_underflow"
            break
        try:
            full = _rk4(values, params, dt)
            half = _rk4(_rk4(values, params, 0.5 * dt), params, 0.5 * dt)
        except NonConvex:
            traj.rejected += 1
            last_fail_convexity = True
            dt *= 0.5
            continue
        err = float(np.max(np.abs(half - full))) / (15.0 * float(np.max(np.abs(half))))
        if err > params.tol_step:
            traj.rejected += 1
            last_fail_convexity = False
            dt *= max(0.2, 0.9 * (params.tol_step / err) ** 0.2)
            continue
        t_new = t + dt
        if params.t_end is not None and params.t_end - t_new <= 1e-15 * max(1.0, params.t_end):
            t_new = params.t_end
        t = t_new
        values = half
        traj.steps += 1
        since_record += 1
        err_acc += err
        last_dt = dt
        last_fail_convexity = False

        current = s.with_values(values)
        a_now = area(current)
        done_t = params.t_end is not None and t >= params.t_end
        done_a = a_now <= stop_area
        if since_record >= monitor_every or done_t or done_a:
            prev = traj.points[-1].record
            traj.points.append(
                TrajectoryPoint(t, current, compute_record(current, params, t, prev), last_dt, err_acc)
            )
            since_record = 0
            err_acc = 0.0
        if done_t:
            reason = "reached_t_end"
            break
        if done_a:
            reason = "area_floor"
            break

        growth = 2.0 if err == 0 else min(2.0, 0.9 * (params.tol_step / err) ** 0.2)
        dt = min(dt * max(growth, 0.2), stable_dt(current, params))

    if traj.points[-1].t != t:
        current = s.with_values(values)
        prev = traj.points[-1].record
        traj.points.append(
            TrajectoryPoint(t, current, compute_record(current, params, t, prev), last_dt, err_acc)
        )
    traj.termination = reason
    return traj


# --------------------------------------------------------------------------
# pointwise evolution identities
# --------------------------------------------------------------------------


def radius_rate(s: SupportProfile, params: FlowParams) -> np.ndarray:
    """d r / dt at fixed normal angle: -(F'' + F) with F the speed."""
    f = speed(s, params)
    return -(spectral_derivative(f, 2) + f)


def sigma_rate(s: SupportProfile, params: FlowParams) -> np.ndarray:
    """d sigma / dt at fixed normal angle, from the equations for s and r."""
    f = speed(s, params)
    r = require_valid(s)
    r_t = -(spectral_derivative(f, 2) + f)
    return -np.cbrt(r) * f + s.values * r_t / (3.0 * np.cbrt(r) ** 2)


def _sigma_parts(s: SupportProfile):
    r = require_valid(s)
    g = np.cbrt(r) ** 2
    sigma = s.values * np.cbrt(r)
    d = lambda v: spectral_derivative(v, 1) / g
    return sigma, g, d


def sigma_evolution_rhs(s: SupportProfile, params: FlowParams) -> np.ndarray:
    """d sigma / dt along the affine-normal parametrization X_t = sigma^e n.

    sigma^e (-4/3 + (p/(p+2) + 1) e sigma_s^2 / sigma + p/(p+2) sigma_ss),
    e = 1 - 3p/(p+2), derivatives in affine arclength.
    """
    sigma, g, d = _sigma_parts(s)
    e = params.s_exponent
    q = params.p / (params.p + 2.0)
    sigma_s = d(sigma)
    sigma_ss = d(sigma_s)
    return sigma ** e * (-4.0 / 3.0 + (q + 1.0) * e * sigma_s ** 2 / sigma + q * sigma_ss)


def sigma_transport(s: SupportProfile, params: FlowParams) -> np.ndarray:
    """sigma_s (sigma^e)_s: difference between the affine-normal and Gauss time derivatives."""
    sigma, g, d = _sigma_parts(s)
    return d(sigma) * d(sigma ** params.s_exponent)


# --------------------------------------------------------------------------
# closed-form self-similar solutions
# --------------------------------------------------------------------------


def _check_p(p: float):
    if p < 1:
        raise UnsupportedExponent(f"p < 1 unsupported (got p={p})")


def circle_extinction_time(c0: float, p: float) -> float:
    _check_p(p)
    return c0 ** (4.0 * p / (p + 2.0)) * (p + 2.0) / (4.0 * p)


def circle_closed_form(c0: float, p: float, t: float) -> float:
    """Radius at time t of the shrinking circle of initial radius c0.

    c(t) = (c0^{4p/(p+2)} - 4p/(p+2) t)^{(p+2)/(4p)}; negative t is allowed
    (the solution is ancient).
    """
    if c0 <= 0:
        raise ValueError("c0 must be positive")
    big_t = circle_extinction_time(c0, p)
    if t >= big_t:
        raise Extinct(f"t={t} is past the extinction time {big_t}")
    k = 4.0 * p / (p + 2.0)
    return (c0 ** k - k * t) ** (1.0 / k)


def ellipse_extinction_time(a0: float, b0: float, p: float) -> float:
    _check_p(p)
    alpha = -p / (p + 2.0)
    return (p + 2.0) / (4.0 * p) * (a0 * b0) ** (-2.0 * alpha)


def ellipse_closed_form(a0: float, b0: float, p: float, t: float, phi: float = 0.0) -> EllipseSpec:
    """Self-similar centred ellipse: axes scale by lambda(t) with
    lambda^{4p/(p+2)} = 1 - 4p/(p+2) (a0 b0)^{2a} t."""
    if a0 <= 0 or b0 <= 0:
        raise ValueError("semi-axes must be positive")
    big_t = ellipse_extinction_time(a0, b0, p)
    if t >= big_t:
        raise Extinct(f"t={t} is past the extinction time {big_t}")
    alpha = -p / (p + 2.0)
    k = 4.0 * p / (p + 2.0)
    lam = (1.0 - k * (a0 * b0) ** (2.0 * alpha) * t) ** (1.0 / k)
    return EllipseSpec(lam * a0, lam * b0, phi)
