"""Instantaneous functionals and monotonicity checks along flow trajectories.

Every check returns a :class:`CheckReport`.  Margins are dimensionless: the
allowed slack minus the observed violation, divided by the natural scale of
the monitored quantity, so ``worst_margin >= 0`` exactly when the check
passes.

Tolerance rule for monotone quantities: a decrease is tolerated up to
1e-8 |Q| + 100 |Q| eps, where eps is the summed relative local-error estimate
of the integrator steps taken between the two records.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .affine import affine_integral, perimeter_exponent
from .flow import FlowParams, Trajectory, ellipse_closed_form, sigma_evolution_rhs
from .geometry import SupportProfile, area, polar_area, require_valid, spectral_derivative

__all__ = [
    "InvariantRecord",
    "HarnackState",
    "CheckReport",
    "EllipseFamily",
    "SigmaRatioSeries",
    "NormalizedSeries",
    "compute_record",
    "harnack_quantities",
    "harnack_monotone_quantity",
    "omega_l",
    "omega_l_rate",
    "omega2_rate_bound",
    "check_area_law",
    "check_harnack",
    "check_monotone",
    "check_omega_l_evolution",
    "ellipse_family",
    "check_ancient_inequalities",
    "sigma_ratio_diagnostic",
    "ellipse_residual",
    "normalized_diagnostics",
]

MONOTONE_QUANTITIES = ("AAstar", "ratio_p", "Omega_2")
REL_FLOOR = 1e-8
ERR_FACTOR = 100.0


@dataclass(frozen=True)
class InvariantRecord:
    t: float
    A: float
    A_star: float
    AAstar: float
    Omega_1: float
    Omega_2: float
    Omega_p: float
    ratio_p: float
    sigma_max: float
    sigma_min: float
    harnack_R_max: float
    monotone_flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class HarnackState:
    Q: np.ndarray
    P: np.ndarray
    R: np.ndarray


@dataclass
class CheckReport:
    name: str
    passed: bool
    worst_margin: float
    per_record: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "worst_margin": float(self.worst_margin),
            "failures": int(sum(1 for ok in self.per_record if not ok)),
            "checked": len(self.per_record),
            "details": _jsonable(self.details),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


# --------------------------------------------------------------------------
# instantaneous functionals
# --------------------------------------------------------------------------


def _sigma(s: SupportProfile):
    r = require_valid(s)
    g = np.cbrt(r) ** 2
    sigma = s.values * np.cbrt(r)
    return sigma, g, r


def omega_l(s: SupportProfile, l: float) -> float:
    sigma, g, _ = _sigma(s)
    return float(2.0 * np.pi * np.mean(sigma ** perimeter_exponent(l) * g))


def harnack_quantities(s: SupportProfile, params: FlowParams, t_elapsed: float) -> HarnackState:
    """Q = F'' + F, P = -dF/dt through its spatial formula, R = t P - a/(a-1) F.

    F = s^{1+3a} r^a is the speed; t_elapsed is the time since the run began.
    """
    if t_elapsed < 0:
        raise ValueError("t_elapsed must be non-negative")
    r = require_valid(s)
    a = params.alpha
    sv = s.values
    f = sv ** (1 + 3 * a) * r ** a
    q = spectral_derivative(f, 2) + f
    p_ = (1 + 3 * a) * sv ** (1 + 6 * a) * r ** (2 * a) + a * sv ** (1 + 3 * a) * r ** (a - 1) * q
    rr = t_elapsed * p_ - a / (a - 1) * f
    return HarnackState(Q=q, P=p_, R=rr)


def harnack_monotone_quantity(s: SupportProfile, params: FlowParams, t_elapsed: float) -> np.ndarray:
    """s^{1-3p/(p+2)} r^{-p/(p+2)} t^{p/(2p+2)}, pointwise."""
    r = require_valid(s)
    return s.values ** params.s_exponent * r ** params.alpha * t_elapsed ** params.harnack_exponent


def compute_record(
    s: SupportProfile,
    params: FlowParams,
    t: float,
    previous: Optional[InvariantRecord] = None,
) -> InvariantRecord:
    sigma, g, r = _sigma(s)
    p = params.p
    a_ = float(np.pi * np.mean(s.values * r))
    a_star = polar_area(s)
    om = lambda e: float(2.0 * np.pi * np.mean(sigma ** e * g))
    omega_1 = om(perimeter_exponent(1.0))
    omega_2 = om(perimeter_exponent(2.0))
    omega_p = om(perimeter_exponent(p))
    h = harnack_quantities(s, params, t)
    rec = dict(
        t=float(t),
        A=a_,
        A_star=a_star,
        AAstar=a_ * a_star,
        Omega_1=omega_1,
        Omega_2=omega_2,
        Omega_p=omega_p,
        ratio_p=omega_p ** (p + 2.0) / a_ ** (2.0 - p),
        sigma_max=float(sigma.max()),
        sigma_min=float(sigma.min()),
        harnack_R_max=float(h.R.max()),
    )
    flags = {}
    if previous is not None:
        for name in MONOTONE_QUANTITIES:
            old = getattr(previous, name)
            flags[name] = bool(rec[name] - old >= -REL_FLOOR * abs(rec[name]))
    return InvariantRecord(**rec, monotone_flags=flags)


# --------------------------------------------------------------------------
# trajectory checks
# --------------------------------------------------------------------------


def _require_records(traj: Trajectory, k: int):
    if len(traj) < k:
        raise ValueError(f"trajectory needs at least {k} records, has {len(traj)}")


def _fd(traj: Trajectory, values: np.ndarray) -> np.ndarray:
    # second-order accurate on non-uniform record spacing
    return np.gradient(values, traj.times)


def check_area_law(traj: Trajectory, params: FlowParams, rel_tol: float = 1e-3) -> CheckReport:
    """|dA/dt + Omega_p| <= rel_tol Omega_p at interior records."""
    _require_records(traj, 3)
    a_ = traj.column("A")
    om = traj.column("Omega_p")
    resid = np.abs(_fd(traj, a_) + om)[1:-1] / om[1:-1]
    margins = rel_tol - resid
    return CheckReport(
        "area_law",
        bool(np.all(margins >= 0)),
        float(margins.min()),
        [bool(m >= 0) for m in margins],
        {"max_rel_residual": float(resid.max()), "rel_tol": rel_tol},
    )


def check_harnack(traj: Trajectory, params: FlowParams, tol_rel: float = 1e-8) -> CheckReport:
    """R <= tol_rel * scale at every record, and the Harnack quantity never decreases.

    ``scale`` is max |a/(a-1) F|, the size of R at t = 0.  The monotone
    quantity is tested through its spatial minimum (as a function of time)
    and also pointwise at every fixed normal angle.
    """
    a = params.alpha
    ok = []
    r_margins = []
    mins = []
    pointwise = []
    for pt in traj.points:
        h = harnack_quantities(pt.state, params, pt.t)
        # R - t P = -a/(a-1) F
        scale = float(np.max(np.abs(h.R - pt.t * h.P)))
        margin = (tol_rel * scale - float(h.R.max())) / scale
        r_margins.append(margin)
        ok.append(margin >= 0)
        hq = harnack_monotone_quantity(pt.state, params, pt.t)
        pointwise.append(hq)
        mins.append(float(hq.min()))
    mono_margins = []
    point_margins = []
    for i in range(1, len(traj)):
        scale = max(float(np.max(np.abs(pointwise[i]))), 1e-300)
        tol = REL_FLOOR * scale + ERR_FACTOR * scale * traj.points[i].local_error
        mono_margins.append((mins[i] - mins[i - 1] + tol) / scale)
        point_margins.append(float(np.min(pointwise[i] - pointwise[i - 1]) + tol) / scale)
        ok[i] = ok[i] and mono_margins[-1] >= 0 and point_margins[-1] >= 0
    worst = min(r_margins + mono_margins + point_margins)
    return CheckReport(
        "harnack",
        bool(all(ok)),
        float(worst),
        [bool(x) for x in ok],
        {
            "max_R": float(max(pt.record.harnack_R_max for pt in traj.points)),
            "worst_R_margin": float(min(r_margins)),
            "worst_min_increment_margin": float(min(mono_margins)) if mono_margins else 0.0,
            "worst_pointwise_increment_margin": float(min(point_margins)) if point_margins else 0.0,
            "monotone_min_series": mins,
        },
    )


def omega2_rate_bound(s: SupportProfile, params: FlowParams) -> float:
    """(9p/(4(p+2))) int sigma^{-3p/(p+2)-3/2} sigma_s^2 d s_aff."""
    sigma, g, _ = _sigma(s)
    p = params.p
    sigma_s = spectral_derivative(sigma, 1) / g
    integrand = sigma ** (-3 * p / (p + 2) - 1.5) * sigma_s ** 2
    return 9 * p / (4 * (p + 2)) * float(2.0 * np.pi * np.mean(integrand * g))


def check_monotone(traj: Trajectory, params: FlowParams, deriv_rel_tol: float = 1e-3) -> CheckReport:
    """A A*, the p-affine isoperimetric ratio and Omega_2 never decrease;
    dOmega_2/dt (finite differences) respects its lower bound.

    The derivative bound is allowed a slack of ``deriv_rel_tol`` relative to
    the bound plus the record-to-record roundoff floor 1e-8 Omega_2 / dt.
    """
    _require_records(traj, 3)
    n = len(traj)
    ok = [True] * n
    worst = math.inf
    per_quantity = {}
    for name in MONOTONE_QUANTITIES:
        vals = traj.column(name)
        margins = []
        for i in range(1, n):
            q = abs(vals[i])
            tol = REL_FLOOR * q + ERR_FACTOR * q * traj.points[i].local_error
            m = (vals[i] - vals[i - 1] + tol) / q
            margins.append(m)
            ok[i] = ok[i] and m >= 0
        per_quantity[name] = {
            "worst_margin": float(min(margins)),
            "relative_spread": float(np.ptp(vals) / abs(vals[0])),
            "net_change": float(vals[-1] - vals[0]),
        }
        worst = min(worst, min(margins))

    om2 = traj.column("Omega_2")
    times = traj.times
    fd = _fd(traj, om2)
    d_margins = []
    for i in range(1, n - 1):
        bound = omega2_rate_bound(traj.points[i].state, params)
        dt = min(times[i] - times[i - 1], times[i + 1] - times[i])
        tol = deriv_rel_tol * abs(bound) + REL_FLOOR * om2[i] / dt
        scale = abs(bound) + om2[i] / dt * REL_FLOOR + 1e-300
        m = (fd[i] - bound + tol) / scale
        d_margins.append(m)
        ok[i] = ok[i] and m >= 0
    per_quantity["Omega_2_rate_bound"] = {"worst_margin": float(min(d_margins))}
    worst = min(worst, min(d_margins))
    return CheckReport("monotone", bool(all(ok)), float(worst), ok, per_quantity)


def omega_l_rate(s: SupportProfile, params: FlowParams, l: float) -> float:
    """Right-hand side of the evolution equation of Omega_l (l >= 2)."""
    sigma, g, _ = _sigma(s)
    p = params.p
    sigma_s = spectral_derivative(sigma, 1) / g
    ep = 3 * p / (p + 2)
    el = 3 * l / (l + 2)
    first = 2 * (l - 2) / (l + 2) * np.mean(sigma ** (1 - ep - el) * g)
    second = 18 * p * l / ((l + 2) ** 2 * (p + 2)) * np.mean(sigma ** (-ep - el) * sigma_s ** 2 * g)
    return float(2.0 * np.pi * (first + second))


def check_omega_l_evolution(
    traj: Trajectory, params: FlowParams, l: float, rel_tol: float = 1e-3
) -> CheckReport:
    """Finite-difference dOmega_l/dt against the evolution formula at interior records.

    The residual is normalized by max(|rhs|, Omega_l Omega_p / A): the second
    term is the natural rate of the flow and keeps the ratio meaningful when
    the right side vanishes (l = 2 on ellipses).
    """
    if l < 2:
        raise ValueError("the Omega_l evolution formula needs l >= 2")
    _require_records(traj, 3)
    vals = np.array([omega_l(st, l) for st in traj.states])
    fd = _fd(traj, vals)
    a_ = traj.column("A")
    om_p = traj.column("Omega_p")
    resid = []
    for i in range(1, len(traj) - 1):
        rhs = omega_l_rate(traj.points[i].state, params, l)
        denom = max(abs(rhs), vals[i] * om_p[i] / a_[i])
        resid.append(abs(fd[i] - rhs) / denom)
    resid = np.array(resid)
    margins = rel_tol - resid
    return CheckReport(
        f"omega_l:{l:g}",
        bool(np.all(margins >= 0)),
        float(margins.min()),
        [bool(m >= 0) for m in margins],
        {"l": l, "max_rel_residual": float(resid.max()), "rel_tol": rel_tol},
    )


@dataclass(eq=False)
class EllipseFamily:
    a0: float
    b0: float
    phi: float
    p: float
    times: np.ndarray
    profiles: list


def ellipse_family(
    a0: float, b0: float, p: float, times: Sequence[float], n: int = 256, phi: float = 0.0
) -> EllipseFamily:
    """Samples of the self-similar ellipse solution (times may be negative)."""
    times = np.asarray(times, dtype=float)
    profiles = [ellipse_closed_form(a0, b0, p, t, phi).profile(n) for t in times]
    return EllipseFamily(a0, b0, phi, p, times, profiles)


def check_ancient_inequalities(family: EllipseFamily, params: FlowParams) -> CheckReport:
    """Ancient-solution inequalities on the self-similar ellipse family.

    Checks d/dt(s r^{1/3}) <= 0 (finite differences in time at fixed normal
    angle) and d sigma/dt <= -(3p/(p+2) - 1) sigma_s^2 sigma^{-3p/(p+2)}
    with the left side from the evolution formula, evaluated spectrally.
    """
    p = params.p
    sig = np.array([_sigma(s)[0] for s in family.profiles])
    fd = np.gradient(sig, family.times, axis=0)
    ok = []
    lhs_max = []
    gap_max = []
    rhs_absmax = []
    for i, s in enumerate(family.profiles):
        sigma, g, _ = _sigma(s)
        sigma_s = spectral_derivative(sigma, 1) / g
        rhs = -(3 * p / (p + 2) - 1) * sigma_s ** 2 * sigma ** (-3 * p / (p + 2))
        lhs = sigma_evolution_rhs(s, params)
        lhs_max.append(float(lhs.max()))
        gap_max.append(float(np.max(lhs - rhs)))
        rhs_absmax.append(float(np.max(np.abs(rhs))))
        ok.append(bool(fd[i].max() < 0 and lhs.max() < 0 and np.all(lhs <= rhs)))
    margins = [-max(float(fd[i].max()), lhs_max[i], gap_max[i]) for i in range(len(ok))]
    return CheckReport(
        "ancient",
        bool(all(ok)),
        float(min(margins)),
        ok,
        {
            "max_dt_s_r13": float(fd.max()),
            "max_dt_sigma": float(max(lhs_max)),
            "max_rhs_abs": float(max(rhs_absmax)),
            "max_lhs_minus_rhs": float(max(gap_max)),
        },
    )


@dataclass
class SigmaRatioSeries:
    times: np.ndarray
    ratio: np.ndarray
    growing: bool

    @property
    def decreased(self) -> bool:
        return bool(self.ratio[-1] < self.ratio[0])


def sigma_ratio_diagnostic(traj: Trajectory) -> SigmaRatioSeries:
    """sigma_max / sigma_min per record; ``growing`` flags net growth over the run."""
    ratio = traj.column("sigma_max") / traj.column("sigma_min")
    return SigmaRatioSeries(traj.times, ratio, bool(ratio[-1] > ratio[0] * (1 + REL_FLOOR)))


def ellipse_residual(s: SupportProfile) -> float:
    """Relative spread of s^3 r about its mean; zero exactly on centred ellipses."""
    r = require_valid(s)
    m = s.values ** 3 * r
    mean = float(np.mean(m))
    return float(np.max(np.abs(m - mean)) / mean)


@dataclass
class NormalizedSeries:
    times: np.ndarray
    ellipse_residual: np.ndarray
    sigma_ratio: np.ndarray
    distance_to_disk: np.ndarray
    omega1_cubed_over_area: np.ndarray

    @property
    def omega1_floor(self) -> float:
        return float(self.omega1_cubed_over_area.min())


def normalized_diagnostics(traj: Trajectory, max_samples: int = 40) -> NormalizedSeries:
    """John-normalize a subsample of records (always first and last) and
    collect the round-out diagnostics of the normalized solution."""
    from .normalize import john_normalize

    n = len(traj)
    idx = sorted(set(np.linspace(0, n - 1, min(n, max_samples)).round().astype(int).tolist()))
    times, res, ratio, dist, floor = [], [], [], [], []
    for i in idx:
        ns = john_normalize(traj.points[i].state)
        st = ns.state
        sigma, g, _ = _sigma(st)
        times.append(traj.points[i].t)
        res.append(ellipse_residual(st))
        ratio.append(float(sigma.max() / sigma.min()))
        dist.append(float(np.max(np.abs(st.values - 1.0))))
        floor.append(float(2.0 * np.pi * np.mean(g)) ** 3 / area(st))
    return NormalizedSeries(*(np.array(v) for v in (times, res, ratio, dist, floor)))
