"""Cached reference trajectories shared by the flow, monitor and acceptance tests."""

from functools import lru_cache

from affineflow.flow import FlowParams, simulate
from affineflow.geometry import SupportProfile

N = 256


@lru_cache(maxsize=None)
def circle_run(p=2.0, t_end=0.4, tol_step=1e-8, monitor_every=1):
    return simulate(SupportProfile.disk(1.0, N), FlowParams(p, t_end=t_end, tol_step=tol_step), monitor_every)


@lru_cache(maxsize=None)
def ellipse_run(p=2.0, t_end=0.25, monitor_every=5):
    return simulate(SupportProfile.ellipse(2.0, 0.5, 0.0, N), FlowParams(p, t_end=t_end), monitor_every)


@lru_cache(maxsize=None)
def perturbed_run(p=2.0, t_end=None, monitor_every=1):
    """s0 = 1 + 0.05 cos 4 theta, by default down to the area floor."""
    return simulate(SupportProfile.trig(1.0, [(4, 0.05)], N), FlowParams(p, t_end=t_end), monitor_every)


@lru_cache(maxsize=None)
def mixed_run(p=3.0, t_end=0.15, monitor_every=1):
    """A body with two even modes and a phase."""
    s0 = SupportProfile.trig(1.0, [(2, 0.1, 0.4), (6, 0.01)], N)
    return simulate(s0, FlowParams(p, t_end=t_end), monitor_every)
