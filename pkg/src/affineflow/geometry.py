"""Support-function calculus on the unit circle.

A convex body K containing the origin is stored through its support function
s(theta) sampled on a uniform grid of outer-normal angles.  Derivatives are
taken in Fourier space, integrals with the trapezoidal rule (spectrally
accurate for smooth periodic data), and off-grid values come from the
trigonometric interpolant of the samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InvalidProfile, NonConvex, Singular

__all__ = [
    "AngularGrid",
    "SupportProfile",
    "CurveEmbedding",
    "LinearMap2",
    "ValidationReport",
    "spectral_derivative",
    "spectral_antiderivative",
    "trig_interpolate",
    "radius_of_curvature",
    "curvature",
    "embed",
    "area",
    "polar_area",
    "apply_linear_map",
    "trig_eval",
    "validate",
    "require_valid",
    "random_symmetric_profile",
]

SYMMETRY_TOL = 1e-10


# --------------------------------------------------------------------------
# grid and profile types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AngularGrid:
    """Uniform grid theta_k = 2 pi k / n on the circle, n even and >= 8."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ValueError(f"grid size must be an even integer >= 8, got {self.n}")

    @cached_property
    def theta(self) -> np.ndarray:
        th = 2.0 * np.pi * np.arange(self.n) / self.n
        th.setflags(write=False)
        return th

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi / self.n

    def directions(self) -> np.ndarray:
        """Unit outer normals u(theta_k) as an (n, 2) array."""
        return np.column_stack([np.cos(self.theta), np.sin(self.theta)])


@dataclass(frozen=True, eq=False)
class SupportProfile:
    """Samples of a support function on an :class:`AngularGrid`.

    The samples are copied into a read-only array, so a profile behaves as an
    immutable value.  Construction does not check positivity or convexity;
    use :func:`validate` for a report or :func:`require_valid` to raise.
    """

    grid: AngularGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def theta(self) -> np.ndarray:
        return self.grid.theta

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], np.ndarray], n: int) -> "SupportProfile":
        grid = AngularGrid(n)
        return cls(grid, np.broadcast_to(f(grid.theta), (n,)))

    @classmethod
    def disk(cls, radius: float = 1.0, n: int = 256) -> "SupportProfile":
        return cls(AngularGrid(n), np.full(n, float(radius)))

    @classmethod
    def ellipse(cls, a: float, b: float, phi: float = 0.0, n: int = 256) -> "SupportProfile":
        """Origin-centred ellipse with semi-axes a, b rotated by phi."""
        return cls.from_function(
            lambda th: np.sqrt((a * np.cos(th - phi)) ** 2 + (b * np.sin(th - phi)) ** 2), n
        )

    @classmethod
    def trig(
        cls, c0: float, terms: Iterable[Sequence[float]], n: int = 256
    ) -> "SupportProfile":
        """c0 + sum a_k cos(k theta + phi_k) for terms (k, a_k) or (k, a_k, phi_k)."""
        terms = [tuple(t) for t in terms]

        def f(th):
            out = np.full_like(th, float(c0))
            for term in terms:
                k, ak = term[0], term[1]
                ph = term[2] if len(term) > 2 else 0.0
                out += ak * np.cos(k * th + ph)
            return out

        return cls.from_function(f, n)

    # -- value-type helpers --------------------------------------------------

    def with_values(self, values: np.ndarray) -> "SupportProfile":
        return SupportProfile(self.grid, values)

    def scaled(self, factor: float) -> "SupportProfile":
        """Support function of the dilated body factor * K."""
        return SupportProfile(self.grid, factor * self.values)

    def symmetrized(self) -> "SupportProfile":
        """Average each sample with its antipode: s_k <- (s_k + s_{k+n/2}) / 2."""
        return SupportProfile(self.grid, _symmetrize(self.values))

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(np.roll(self.values, self.n // 2) - self.values)))

    def __repr__(self):
        return (
            f"SupportProfile(n={self.n}, min={self.values.min():.6g}, "
            f"max={self.values.max():.6g})"
        )


def _symmetrize(values: np.ndarray) -> np.ndarray:
    return 0.5 * (values + np.roll(values, values.shape[-1] // 2, axis=-1))


# --------------------------------------------------------------------------
# spectral machinery on raw sample arrays
# --------------------------------------------------------------------------


def spectral_derivative(values: np.ndarray, order: int = 1) -> np.ndarray:
    """Derivative of the trigonometric interpolant of periodic samples.

    Works along the last axis.  The Nyquist mode is kept for even orders and
    dropped for odd ones (its odd derivatives vanish on the grid).
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    if order == 0:
        return values.copy()
    k = np.arange(n // 2 + 1)
    mult = (1j * k) ** order
    if order % 2:
        mult[-1] = 0.0
    return np.fft.irfft(np.fft.rfft(values, axis=-1) * mult, n=n, axis=-1)


def spectral_antiderivative(values: np.ndarray) -> tuple[float, np.ndarray]:
    """Exact integral of the interpolant from 0 to each grid angle.

    Returns ``(mean, cumulative)`` where ``cumulative[k] = int_0^{theta_k} f``.
    The full-period integral is ``2 pi * mean``.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    coeffs = np.fft.rfft(values)
    mean = coeffs[0].real / n
    k = np.arange(n // 2 + 1)
    integ = np.zeros_like(coeffs)
    integ[1:] = coeffs[1:] / (1j * k[1:])
    # the Nyquist cosine integrates to a sine that vanishes on the grid
    integ[-1] = 0.0
    periodic = np.fft.irfft(integ, n=n)
    theta = 2.0 * np.pi * np.arange(n) / n
    return mean, mean * theta + periodic - periodic[0]


def trig_interpolate(values: np.ndarray, angles, order: int = 0) -> np.ndarray:
    """Evaluate the trigonometric interpolant (or a derivative) off-grid."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    angles = np.asarray(angles, dtype=float)
    flat = angles.ravel()
    coeffs = np.fft.rfft(values) / n
    k = np.arange(n // 2 + 1)
    weights = np.full(k.shape, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0  # Nyquist acts as a plain cosine
    c = coeffs * weights * (1j * k) ** order
    if order % 2:
        c[-1] = 0.0
    out = np.empty(flat.shape)
    chunk = 4096
    for start in range(0, flat.size, chunk):
        phase = np.exp(1j * np.outer(flat[start:start + chunk], k))
        out[start:start + chunk] = (phase @ c).real
    return out.reshape(angles.shape)


# --------------------------------------------------------------------------
# Euclidean geometry of the body
# --------------------------------------------------------------------------


def _radius(s: SupportProfile) -> np.ndarray:
    return spectral_derivative(s.values, 2) + s.values


def radius_of_curvature(s: SupportProfile) -> np.ndarray:
    """Radius of curvature r = s'' + s at the grid angles.

    Raises
    ------
    NonConvex
        If r_k <= 0 anywhere, i.e. the body is not strictly convex.
    """
    r = _radius(s)
    if not np.all(r > 0):
        k = int(np.argmin(r))
        raise NonConvex(f"radius of curvature {r[k]:.3e} <= 0 at theta={s.theta[k]:.4f}")
    return r


def curvature(s: SupportProfile) -> np.ndarray:
    return 1.0 / radius_of_curvature(s)


def require_valid(s: SupportProfile, symmetric: bool = False) -> np.ndarray:
    """Raise unless ``s`` is positive (and convex); return its radius of curvature."""
    if not np.all(s.values > 0):
        raise InvalidProfile(
            f"support function must be positive (min {s.values.min():.3e}); origin not interior"
        )
    if symmetric:
        defect = s.symmetry_defect()
        if defect > SYMMETRY_TOL * max(1.0, float(np.max(s.values))):
            raise InvalidProfile(f"profile is not origin-symmetric (defect {defect:.3e})")
    return radius_of_curvature(s)


@dataclass(frozen=True, eq=False)
class CurveEmbedding:
    """Boundary points gamma_k with outer normal u(theta_k) and tangents d gamma / d theta."""

    points: np.ndarray
    tangents: np.ndarray
    theta: np.ndarray

    def support_values(self) -> np.ndarray:
        """Recover <gamma_k, u(theta_k)>."""
        return self.points[:, 0] * np.cos(self.theta) + self.points[:, 1] * np.sin(self.theta)


def embed(s: SupportProfile) -> CurveEmbedding:
    """Invert the support function: gamma = s u + s' u_perp, gamma' = r u_perp."""
    r = radius_of_curvature(s)
    ds = spectral_derivative(s.values, 1)
    c, sn = np.cos(s.theta), np.sin(s.theta)
    pts = np.column_stack([s.values * c - ds * sn, s.values * sn + ds * c])
    tan = np.column_stack([-r * sn, r * c])
    return CurveEmbedding(pts, tan, s.theta)


def area(s: SupportProfile) -> float:
    """Enclosed area (1/2) int s r d theta."""
    r = radius_of_curvature(s)
    return float(np.pi * np.mean(s.values * r))


def polar_area(s: SupportProfile) -> float:
    """Area of the polar body, (1/2) int s^-2 d theta."""
    if not np.all(s.values > 0):
        raise InvalidProfile("polar body undefined: origin not interior")
    radius_of_curvature(s)
    return float(np.pi * np.mean(s.values ** -2.0))


def trig_eval(s: SupportProfile, angles) -> np.ndarray:
    """Band-limited interpolation of the support function at arbitrary angles."""
    return trig_interpolate(s.values, angles)


# --------------------------------------------------------------------------
# linear maps
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearMap2:
    m11: float
    m12: float
    m21: float
    m22: float

    @classmethod
    def from_matrix(cls, m) -> "LinearMap2":
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    @classmethod
    def identity(cls) -> "LinearMap2":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def rotation(cls, phi: float) -> "LinearMap2":
        c, s = np.cos(phi), np.sin(phi)
        return cls(c, -s, s, c)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])

    @property
    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21

    def is_special(self, tol: float = 1e-12) -> bool:
        return abs(self.det - 1.0) <= tol

    def inverse(self) -> "LinearMap2":
        return LinearMap2.from_matrix(np.linalg.inv(self.matrix))

    def __matmul__(self, other: "LinearMap2") -> "LinearMap2":
        return LinearMap2.from_matrix(self.matrix @ other.matrix)

    def to_list(self) -> list[list[float]]:
        return self.matrix.tolist()


def apply_linear_map(s: SupportProfile, T: LinearMap2) -> SupportProfile:
    """Support function of T K resampled on the grid of ``s``.

    Uses h_{TK}(u) = |T^t u| s(T^t u / |T^t u|), with s evaluated off-grid by
    trigonometric interpolation.

    Raises
    ------
    Singular
        If |det T| < 1e-12.
    NonConvex
        If the resampled profile is not strictly convex.
    """
    if abs(T.det) < 1e-12:
        raise Singular(f"linear map is singular (det={T.det:.3e})")
    require_valid(s)
    w = s.grid.directions() @ T.matrix  # rows are (T^t u)^t
    norm = np.hypot(w[:, 0], w[:, 1])
    phi = np.arctan2(w[:, 1], w[:, 0])
    out = SupportProfile(s.grid, _symmetrize(norm * trig_interpolate(s.values, phi)))
    radius_of_curvature(out)
    return out


# --------------------------------------------------------------------------
# diagnostics and generators
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    positive: bool
    min_value: float
    symmetry_defect: float
    symmetric: bool
    convexity_margin: float
    convex: bool

    @property
    def ok(self) -> bool:
        return self.positive and self.symmetric and self.convex


def validate(s: SupportProfile) -> ValidationReport:
    """Report positivity, antipodal symmetry defect and min radius of curvature."""
    vals = s.values
    r = _radius(s)
    defect = s.symmetry_defect()
    finite = bool(np.all(np.isfinite(vals)))
    return ValidationReport(
        positive=finite and bool(np.all(vals > 0)),
        min_value=float(np.min(vals)),
        symmetry_defect=defect,
        symmetric=finite and defect <= SYMMETRY_TOL * max(1.0, float(np.max(np.abs(vals)))),
        convexity_margin=float(np.min(r)),
        convex=finite and bool(np.all(r > 0)),
    )


def random_symmetric_profile(
    n: int,
    rng: np.random.Generator,
    max_freq: int = 4,
    budget: float = 0.8,
) -> SupportProfile:
    """Random origin-symmetric body s = 1 + sum a_k cos(2k theta + phi_k).

    Only even frequencies appear, and sum (4k^2 + 1)|a_k| <= budget, so the
    radius of curvature stays above 1 - budget.
    """
    ks = np.arange(1, max_freq + 1)
    raw = rng.uniform(-1.0, 1.0, size=max_freq)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=max_freq)
    used = rng.uniform(0.3, 1.0) * budget
    weights = (4 * ks ** 2 + 1) * np.abs(raw)
    amps = raw * used / weights.sum()
    return SupportProfile.trig(1.0, zip(2 * ks, amps, phases), n)
