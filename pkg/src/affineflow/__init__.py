"""Numerical p-affine curvature flow of origin-symmetric convex curves."""

from .errors import (
    Extinct,
    FlowError,
    InvalidProfile,
    NonConvex,
    OptimFail,
    SandwichViolation,
    Singular,
    StepUnderflow,
    UnsupportedExponent,
)
from .geometry import AngularGrid, LinearMap2, SupportProfile, apply_linear_map, area, polar_area
from .affine import affine_perimeter, affine_state, isoperimetric_ratio
from .flow import FlowParams, Trajectory, simulate, step
from .normalize import EllipseSpec, john_ellipse, john_normalize
from .monitors import InvariantRecord, compute_record

__version__ = "0.1.0"

__all__ = [
    "AngularGrid",
    "SupportProfile",
    "LinearMap2",
    "apply_linear_map",
    "area",
    "polar_area",
    "affine_perimeter",
    "affine_state",
    "isoperimetric_ratio",
    "FlowParams",
    "Trajectory",
    "simulate",
    "step",
    "EllipseSpec",
    "john_ellipse",
    "john_normalize",
    "InvariantRecord",
    "compute_record",
    "FlowError",
    "InvalidProfile",
    "NonConvex",
    "Singular",
    "Extinct",
    "StepUnderflow",
    "OptimFail",
    "SandwichViolation",
    "UnsupportedExponent",
]
