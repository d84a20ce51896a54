"""Area renormalization and SL(2) normalization through the John ellipse.

For an origin-symmetric body K the maximal-area inscribed ellipse is
E = M B with M symmetric positive definite.  Containment E in K is the family
of second-order cone constraints |M u| <= s(u), one per sampled direction, so
the John ellipse solves

    maximize log det M   subject to   |M u_k|^2 < s_k^2,

which is solved here by a logarithmic-barrier method with Newton centering
on the three free entries of M.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OptimFail, SandwichViolation
from .geometry import LinearMap2, SupportProfile, apply_linear_map, area, require_valid, trig_interpolate

__all__ = [
    "EllipseSpec",
    "NormalizedState",
    "JohnSolverInfo",
    "rescale_to_area",
    "john_ellipse",
    "john_solve",
    "john_normalize",
    "distance_to_disk",
]

SQRT2 = math.sqrt(2.0)
SANDWICH_EPS = 1e-6


@dataclass(frozen=True)
class EllipseSpec:
    """Origin-centred ellipse with semi-axes a >= b > 0, major axis at angle phi."""

    a: float
    b: float
    phi: float = 0.0

    def __post_init__(self):
        a, b, phi = float(self.a), float(self.b), float(self.phi)
        if not (a > 0 and b > 0):
            raise ValueError(f"semi-axes must be positive, got ({a}, {b})")
        if a < b:
            a, b, phi = b, a, phi + math.pi / 2
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "phi", phi % math.pi)

    @property
    def matrix(self) -> np.ndarray:
        """SPD matrix M with E = M B."""
        c, s = math.cos(self.phi), math.sin(self.phi)
        rot = np.array([[c, -s], [s, c]])
        return rot @ np.diag([self.a, self.b]) @ rot.T

    @property
    def area(self) -> float:
        return math.pi * self.a * self.b

    def profile(self, n: int = 256) -> SupportProfile:
        return SupportProfile.ellipse(self.a, self.b, self.phi, n)

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "phi": self.phi}


@dataclass(frozen=True, eq=False)
class NormalizedState:
    state: SupportProfile
    map: LinearMap2
    scale: float
    john: EllipseSpec


def rescale_to_area(s: SupportProfile, target: float = math.pi) -> SupportProfile:
    """Dilate the body so that it encloses area ``target``."""
    if target <= 0:
        raise ValueError("target area must be positive")
    return s.scaled(math.sqrt(target / area(s)))


# --------------------------------------------------------------------------
# barrier solver
# --------------------------------------------------------------------------


@dataclass
class JohnSolverInfo:
    matrix: np.ndarray
    newton_steps: int
    outer_iterations: int
    gap: float
    grad_norm: float
    min_slack: float = field(default=float("nan"))


_HESS_DET = np.array([[0.0, 0.0, 1.0], [0.0, -2.0, 0.0], [1.0, 0.0, 0.0]])


def _barrier_parts(x, u, h2, weight):
    """Value, gradient, Hessian of -log det M - weight * sum log(h^2 - |M u|^2)."""
    a, b, c = x
    det = a * c - b * b
    if a <= 0 or det <= 0:
        return None
    v0 = a * u[:, 0] + b * u[:, 1]
    v1 = b * u[:, 0] + c * u[:, 1]
    slack = h2 - (v0 * v0 + v1 * v1)
    if np.any(slack <= 0):
        return None
    grad_det = np.array([c, -2.0 * b, a])
    value = -math.log(det) - weight * np.sum(np.log(slack))
    grad = -grad_det / det
    hess = -_HESS_DET / det + np.outer(grad_det, grad_det) / det ** 2
    # dq/dx for q = |M u|^2 with x = (m11, m12, m22)
    dq = 2.0 * np.column_stack([v0 * u[:, 0], v0 * u[:, 1] + v1 * u[:, 0], v1 * u[:, 1]])
    w = 1.0 / slack
    grad = grad + weight * (dq.T @ w)
    # d2q/dx2 = 2 J^t J with J = [[u0, u1, 0], [0, u0, u1]]
    u0, u1 = u[:, 0], u[:, 1]
    jtj = np.array(
        [
            [np.sum(w * u0 * u0), np.sum(w * u0 * u1), 0.0],
            [np.sum(w * u0 * u1), np.sum(w * (u0 * u0 + u1 * u1)), np.sum(w * u0 * u1)],
            [0.0, np.sum(w * u0 * u1), np.sum(w * u1 * u1)],
        ]
    )
    hess = hess + weight * (2.0 * jtj + (dq * (w * w)[:, None]).T @ dq)
    return value, grad, hess, float(slack.min())


def john_solve(
    directions: np.ndarray,
    support: np.ndarray,
    grad_tol: float = 1e-10,
    gap_tol: float = 1e-9,
    max_newton: int = 200,
) -> JohnSolverInfo:
    """Maximal log det M with |M u_k| < h_k, via barrier path following.

    Each centering problem ``-log det M - w sum log(h^2 - |M u|^2)`` is
    minimized by damped Newton with step 1/(1 + lambda) (the barrier is
    self-concordant after division by w, so no function-value line search is
    needed; with many active constraints the value decrease falls below
    roundoff long before the iterate stops improving).  Centering ends when
    the gradient norm is below ``grad_tol``, when lambda^2 < 1e-20, or when
    lambda^2 < 1e-4 has stopped decreasing (roundoff floor of the slacks; the
    objective is then within about w lambda^2 of the central value).
    The weight w shrinks tenfold until the duality gap m w is below ``gap_tol``.

    Raises
    ------
    OptimFail
        If a centering problem needs more than ``max_newton`` Newton steps.
    """
    u = np.asarray(directions, dtype=float)
    h2 = np.asarray(support, dtype=float) ** 2
    m = len(h2)
    r0 = 0.5 * math.sqrt(h2.min())
    x = np.array([r0, 0.0, r0])
    weight = 1.0
    total = 0
    outer = 0
    while True:
        outer += 1
        history: list[float] = []
        for it in range(max_newton + 1):
            parts = _barrier_parts(x, u, h2, weight)
            if parts is None:
                raise OptimFail("barrier iterate left the feasible set")
            _, grad, hess, _ = parts
            try:
                step = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError as exc:
                raise OptimFail(f"singular barrier Hessian: {exc}") from exc
            lam2 = float(-grad @ step) / weight
            history.append(lam2)
            if np.linalg.norm(grad) < grad_tol or lam2 < 1e-20:
                break
            if lam2 < 1e-4 and len(history) > 5 and lam2 > 0.5 * history[-6]:
                break
            if it == max_newton:
                raise OptimFail(
                    f"Newton centering did not converge in {max_newton} iterations "
                    f"(barrier weight {weight:.1e}, lambda^2 {lam2:.2e})"
                )
            lam = math.sqrt(max(lam2, 0.0))
            x = x + (1.0 if lam < 0.25 else 1.0 / (1.0 + lam)) * step
            total += 1
        if m * weight <= gap_tol:
            break
        weight /= 10.0
    a, b, c = x
    final = _barrier_parts(x, u, h2, weight)
    return JohnSolverInfo(
        matrix=np.array([[a, b], [b, c]]),
        newton_steps=total,
        outer_iterations=outer,
        gap=m * weight,
        grad_norm=float(np.linalg.norm(final[1])),
        min_slack=final[3],
    )


def _violations(s: SupportProfile, m: np.ndarray, oversample: int = 8, rel_tol: float = 1e-13) -> np.ndarray:
    """Directions in [0, pi) where the ellipse M B pokes out of the interpolated body.

    Local minima of f = s^2 - |M u|^2 are bracketed on a fine grid and
    polished by Newton steps on f'; |M u|^2 = c0 + c1 cos 2t + c2 sin 2t.
    """
    nn = m @ m
    c0, c1, c2 = 0.5 * (nn[0, 0] + nn[1, 1]), 0.5 * (nn[0, 0] - nn[1, 1]), nn[0, 1]
    fine = np.pi * np.arange(oversample * s.n // 2) / (oversample * s.n // 2)
    h = trig_interpolate(s.values, fine)
    f = h * h - (c0 + c1 * np.cos(2 * fine) + c2 * np.sin(2 * fine))
    is_min = (f <= np.roll(f, 1)) & (f <= np.roll(f, -1))
    x = fine[is_min]
    step = np.pi / (oversample * s.n // 2)
    for _ in range(6):
        h0 = trig_interpolate(s.values, x)
        h1 = trig_interpolate(s.values, x, order=1)
        h2 = trig_interpolate(s.values, x, order=2)
        d1 = 2 * h0 * h1 + 2 * c1 * np.sin(2 * x) - 2 * c2 * np.cos(2 * x)
        d2 = 2 * h1 * h1 + 2 * h0 * h2 + 4 * c1 * np.cos(2 * x) + 4 * c2 * np.sin(2 * x)
        x = x - np.clip(np.where(d2 > 0, d1 / np.where(d2 > 0, d2, 1.0), 0.0), -step, step)
    h0 = trig_interpolate(s.values, x)
    f = h0 * h0 - (c0 + c1 * np.cos(2 * x) + c2 * np.sin(2 * x))
    return np.mod(x[f < -rel_tol * h0 * h0], np.pi)


def _contact(s: SupportProfile, x: np.ndarray, theta: float) -> tuple[float, float, np.ndarray]:
    """Local minimum of s(t) - |M u(t)| near ``theta``: (angle, value, gradient in x).

    The gradient follows from the envelope theorem: only the explicit
    dependence of |M u| on x = (m11, m12, m22) counts at the minimizer.
    """
    a, b, c = x
    m = np.array([[a, b], [b, c]])
    for _ in range(30):
        u = np.array([math.cos(theta), math.sin(theta)])
        du = np.array([-u[1], u[0]])
        v, dv = m @ u, m @ du
        nv = math.sqrt(v @ v)
        d1 = float(trig_interpolate(s.values, [theta], order=1)[0]) - (v @ dv) / nv
        q2 = (dv @ dv - v @ v) / nv - (v @ dv) ** 2 / nv ** 3
        d2 = float(trig_interpolate(s.values, [theta], order=2)[0]) - q2
        if d2 <= 0:
            break
        delta = -d1 / d2
        theta += delta
        if abs(delta) < 1e-15:
            break
    u = np.array([math.cos(theta), math.sin(theta)])
    v = m @ u
    nv = math.sqrt(v @ v)
    value = float(trig_interpolate(s.values, [theta])[0]) - nv
    grad = -np.array([v[0] * u[0], v[0] * u[1] + v[1] * u[0], v[1] * u[1]]) / nv
    return theta, value, grad


def _logdet_grad(x: np.ndarray) -> np.ndarray:
    a, b, c = x
    return np.array([c, -2.0 * b, a]) / (a * c - b * b)


def _polish_contacts(s: SupportProfile, m: np.ndarray, rel_gap: float = 1e-6):
    """Newton on the optimality conditions of the active contacts, or None.

    Near-contacts are the local minima of s - |M u| within ``rel_gap`` of
    zero.  Three contact pairs fix M through phi_i(M) = 0; two pairs need
    in addition that grad log det M lies in the span of the two contact
    gradients.  Any other count (an ellipse touches everywhere) is left to
    the barrier result.
    """
    fine = np.pi * np.arange(4 * s.n) / (4 * s.n)
    h = trig_interpolate(s.values, fine)
    f = h - np.linalg.norm(np.column_stack([np.cos(fine), np.sin(fine)]) @ m, axis=1)
    x = np.array([m[0, 0], m[0, 1], m[1, 1]])
    thetas = []
    for th in fine[(f <= np.roll(f, 1)) & (f <= np.roll(f, -1))]:
        th, value, _ = _contact(s, x, th)
        if value < rel_gap * float(np.max(h)):
            thetas.append(th)
    if len(thetas) not in (2, 3):
        return None

    def residual(x, thetas):
        out = [_contact(s, x, th) for th in thetas]
        thetas[:] = [o[0] for o in out]
        vals = [o[1] for o in out]
        grads = [o[2] for o in out]
        if len(out) == 2:
            vals.append(np.linalg.det(np.array([_logdet_grad(x), grads[0], grads[1]])))
        return np.array(vals), np.array(grads)

    for _ in range(40):
        res, grads = residual(x, thetas)
        if np.max(np.abs(res)) < 1e-15:
            break
        jac = np.empty((3, 3))
        jac[: len(grads)] = grads
        if len(grads) == 2:
            eps = 1e-7
            for j in range(3):
                e = np.zeros(3)
                e[j] = eps
                tp, tm = list(thetas), list(thetas)
                jac[2, j] = (residual(x + e, tp)[0][2] - residual(x - e, tm)[0][2]) / (2 * eps)
        try:
            x = x - np.linalg.solve(jac, res)
        except np.linalg.LinAlgError:
            return None
    res, grads = residual(x, thetas)
    if np.max(np.abs(res)) > 1e-12 or x[0] * x[2] - x[1] ** 2 <= 0:
        return None
    # multipliers: grad log det = -sum lam_i grad phi_i with lam_i >= 0
    lam, *_ = np.linalg.lstsq(-grads.T, _logdet_grad(x), rcond=None)
    if np.any(lam < 0):
        return None
    return np.array([[x[0], x[1]], [x[1], x[2]]])


def john_ellipse(s: SupportProfile, max_rounds: int = 8) -> EllipseSpec:
    """Maximal-area origin-centred ellipse inside the (interpolated) body.

    Containment starts from the first n/2 grid directions (antipodal
    constraints coincide for symmetric bodies).  Boundary contact between
    grid angles would leave an O(h^2) error, so directions where the
    interpolated boundary dips inside the current ellipse are added and the
    program is re-solved.  The first time, a cluster of directions at spacing
    h/16 over two grid cells on either side of each contact is added (lone
    cutting planes zigzag around the contact and converge slowly); later
    rounds add single directions, up to ``max_rounds`` solves in total.
    Finally the active contacts are polished by Newton on the optimality
    conditions, since for nearly osculating contacts the barrier gap alone
    leaves M accurate only to about the square root of the gap.
    """
    require_valid(s, symmetric=True)
    angles = np.asarray(s.theta[: s.n // 2])
    h = np.asarray(s.values[: s.n // 2])
    cluster = s.grid.spacing / 16.0 * np.arange(-32, 33)
    clustered = False
    for _ in range(max_rounds):
        u = np.column_stack([np.cos(angles), np.sin(angles)])
        info = john_solve(u, h)
        extra = _violations(s, info.matrix)
        if extra.size == 0:
            break
        if not clustered:
            extra = np.mod((extra[:, None] + cluster[None, :]).ravel(), np.pi)
            clustered = True
        angles = np.concatenate([angles, extra])
        h = np.concatenate([h, trig_interpolate(s.values, extra)])
    m = info.matrix
    polished = _polish_contacts(s, m)
    if (
        polished is not None
        # the barrier iterate may overshoot between sampled directions by
        # ~1e-11, so it is not a strict lower bound on the feasible optimum
        and np.linalg.det(polished) >= np.linalg.det(m) * (1 - 1e-8)
        and _violations(s, polished, rel_tol=1e-12).size == 0
    ):
        m = polished
    return _ellipse_from_matrix(m)


def _ellipse_from_matrix(m: np.ndarray) -> EllipseSpec:
    evals, evecs = np.linalg.eigh(m)
    b, a = evals
    v = evecs[:, 1]
    return EllipseSpec(a, b, math.atan2(v[1], v[0]))


def john_normalize(s: SupportProfile) -> NormalizedState:
    """Area-pi body whose John ellipse is a disk.

    The body is rescaled to area pi, mapped by the SL(2) element
    sqrt(det M) M^{-1} that sends its John ellipse M B to a disk, and rescaled
    to area pi again (a roundoff-level correction).

    Raises
    ------
    SandwichViolation
        If the result leaves the annulus 1/sqrt(2) <= s <= sqrt(2) by more than 1e-6.
    """
    a0 = area(s)
    s1 = s.scaled(math.sqrt(math.pi / a0))
    john = john_ellipse(s1)
    m = john.matrix
    t_mat = np.linalg.inv(m) * math.sqrt(np.linalg.det(m))
    t_mat /= math.sqrt(np.linalg.det(t_mat))
    T = LinearMap2.from_matrix(t_mat)
    s2 = apply_linear_map(s1, T)
    a2 = area(s2)
    out = s2.scaled(math.sqrt(math.pi / a2))
    lo, hi = float(out.values.min()), float(out.values.max())
    if lo < 1.0 / SQRT2 - SANDWICH_EPS or hi > SQRT2 + SANDWICH_EPS:
        raise SandwichViolation(f"normalized support range [{lo:.8f}, {hi:.8f}] escapes the John bounds")
    return NormalizedState(
        state=out,
        map=T,
        scale=math.sqrt(math.pi / a0) * math.sqrt(math.pi / a2),
        john=john,
    )


def distance_to_disk(s: SupportProfile) -> float:
    """max |s' - 1| for the John-normalized body s'."""
    return float(np.max(np.abs(john_normalize(s).state.values - 1.0)))
