"""Command-line front end.

    affineflow simulate   --p 2 --init disk:1 --t-end 0.4
    affineflow invariants --init ellipse:2,0.5 --p 1 2 3
    affineflow normalize  --init "trig:1,(4,0.05)"
    affineflow sweep      --p 1 1.5 2 3 --seed 0-7 --t-end 0.05 --out-dir sweep

Exit codes: 0 success, 1 monitor failure, 2 bad configuration (including
p < 1), 3 convexity loss or step underflow before t_end, 4 John-ellipse
optimizer failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .affine import affine_state, frame_identity_residuals, isoperimetric_bound
from .errors import InvalidProfile, OptimFail, SandwichViolation, UnsupportedExponent
from .flow import FlowParams, Trajectory, ellipse_extinction_time, simulate
from .geometry import AngularGrid, SupportProfile, random_symmetric_profile, require_valid, trig_interpolate
from .monitors import (
    CheckReport,
    check_ancient_inequalities,
    check_area_law,
    check_harnack,
    check_monotone,
    check_omega_l_evolution,
    compute_record,
    ellipse_family,
    ellipse_residual,
    normalized_diagnostics,
)
from .normalize import SQRT2, john_ellipse, john_normalize

CSV_COLUMNS = (
    "t", "A", "A_star", "AAstar", "Omega1", "Omega2", "Omegap",
    "ratio_p", "sigma_max", "sigma_min", "R_max", "dt",
)
_RECORD_FIELDS = (
    "t", "A", "A_star", "AAstar", "Omega_1", "Omega_2", "Omega_p",
    "ratio_p", "sigma_max", "sigma_min", "harnack_R_max",
)
DEFAULT_MONITORS = ("harnack", "monotone")
EXIT_OK, EXIT_MONITOR, EXIT_CONFIG, EXIT_CONVEXITY, EXIT_OPTIM = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


def fmt(x: float) -> str:
    return "%.17g" % x


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


@dataclass
class RunConfig:
    p: list = field(default_factory=lambda: [2.0])
    n: int = 256
    init: str = "disk:1"
    t_end: Optional[float] = None
    stop_area: Optional[float] = None
    tol_step: float = 1e-8
    monitor_every: int = 1
    monitors: list = field(default_factory=lambda: list(DEFAULT_MONITORS))
    out_dir: str = "run"
    seed: list = field(default_factory=lambda: [0])

    def validate(self) -> "RunConfig":
        if not self.p:
            raise ConfigError("empty p list")
        for p in self.p:
            if not math.isfinite(p) or p < 1:
                raise UnsupportedExponent(f"p < 1 unsupported (got p={p:g})")
        n = self.n
        if n < 64 or n & (n - 1):
            raise ConfigError(f"n must be a power of two >= 64, got {n}")
        if self.monitor_every < 1:
            raise ConfigError("monitor_every must be >= 1")
        if self.t_end is not None and self.t_end <= 0:
            raise ConfigError("t_end must be positive")
        if self.tol_step <= 0:
            raise ConfigError("tol_step must be positive")
        for m in self.monitors:
            parse_monitor(m)
        return self

    def flow_params(self, p: float) -> FlowParams:
        return FlowParams(p, tol_step=self.tol_step, t_end=self.t_end, stop_area=self.stop_area)


def parse_monitor(name: str):
    if name in ("harnack", "monotone", "ancient", "residual"):
        return name, None
    m = re.fullmatch(r"omega_l:([0-9.eE+-]+)", name)
    if m:
        l = float(m.group(1))
        if l < 2:
            raise ConfigError("omega_l monitor needs l >= 2")
        return "omega_l", l
    raise ConfigError(f"unknown monitor {name!r}")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc


def parse_init(desc: str, n: int) -> SupportProfile:
    """Build the initial profile from ``disk:r``, ``ellipse:a,b[,phi]``,
    ``trig:c0,(k,a_k[,phi_k])...`` or ``file:path``.

    A file holds either a JSON list of samples, a JSON object with key ``s``,
    or whitespace-separated numbers; samples are resampled to ``n`` points by
    trigonometric interpolation when their count differs.
    """
    kind, sep, body = desc.partition(":")
    if not sep:
        raise ConfigError(f"shape descriptor {desc!r} lacks a ':'")
    kind = kind.strip().lower()
    if kind == "disk":
        vals = _floats(body)
        if len(vals) != 1 or vals[0] <= 0:
            raise ConfigError("disk needs one positive radius")
        s = SupportProfile.disk(vals[0], n)
    elif kind == "ellipse":
        vals = _floats(body)
        if len(vals) not in (2, 3) or min(vals[:2]) <= 0:
            raise ConfigError("ellipse needs positive a,b and optional phi")
        s = SupportProfile.ellipse(*vals[:2], vals[2] if len(vals) == 3 else 0.0, n=n)
    elif kind == "trig":
        head, _, rest = body.partition("(")
        c0 = _floats(head)
        if len(c0) != 1:
            raise ConfigError("trig needs a constant term c0")
        terms = []
        for group in re.findall(r"\(([^)]*)\)", "(" + rest if rest else ""):
            vals = _floats(group)
            if len(vals) not in (2, 3) or vals[0] != int(vals[0]) or vals[0] < 1:
                raise ConfigError(f"bad trig term ({group})")
            terms.append(vals)
        s = SupportProfile.trig(c0[0], terms, n)
    elif kind == "file":
        s = _load_profile(Path(body), n)
    else:
        raise ConfigError(f"unknown shape kind {kind!r}")
    try:
        require_valid(s, symmetric=True)
    except InvalidProfile as exc:
        raise ConfigError(f"initial shape rejected: {exc}") from exc
    return s


def _load_profile(path: Path, n: int) -> SupportProfile:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
        if isinstance(data, dict):
            data = data["s"]
        vals = np.asarray(data, dtype=float)
    except (ValueError, KeyError, TypeError):
        try:
            vals = np.array(text.split(), dtype=float)
        except ValueError as exc:
            raise ConfigError(f"{path}: not a list of numbers") from exc
    if vals.ndim != 1 or len(vals) < 8 or len(vals) % 2:
        raise ConfigError(f"{path}: need an even number (>= 8) of samples")
    if len(vals) != n:
        vals = trig_interpolate(vals, AngularGrid(n).theta)
    return SupportProfile(AngularGrid(n), vals)


def _merge_config(args, ns_keys: Sequence[str]) -> RunConfig:
    cfg = RunConfig()
    for key in ns_keys:
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load config {args.config}: {exc}") from exc
        known = {f.name for f in fields(RunConfig)}
        for key, val in data.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if key in ("p", "seed") and not isinstance(val, list):
                val = [val]
            setattr(cfg, key, val)
    try:
        cfg.p = [float(x) for x in cfg.p]
        cfg.seed = [int(x) for x in cfg.seed]
        cfg.n = int(cfg.n)
        cfg.monitor_every = int(cfg.monitor_every)
        cfg.tol_step = float(cfg.tol_step)
        cfg.t_end = None if cfg.t_end is None else float(cfg.t_end)
        cfg.stop_area = None if cfg.stop_area is None else float(cfg.stop_area)
        cfg.monitors = list(cfg.monitors)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    return cfg.validate()


def _seed_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        m = re.fullmatch(r"\s*(\d+)\s*-\s*(\d+)\s*", part)
        if m:
            out.extend(range(int(m.group(1)), int(m.group(2)) + 1))
        elif part.strip():
            out.append(int(part))
    return out


# --------------------------------------------------------------------------
# running and writing
# --------------------------------------------------------------------------


def run_monitors(traj: Trajectory, cfg: RunConfig) -> list[CheckReport]:
    params = traj.params
    reports = []
    enough = len(traj) >= 3
    for name in cfg.monitors:
        kind, arg = parse_monitor(name)
        if kind == "harnack":
            reports.append(check_harnack(traj, params))
        elif kind == "monotone":
            if enough:
                reports.append(check_monotone(traj, params))
                reports.append(check_area_law(traj, params))
        elif kind == "omega_l":
            if enough:
                reports.append(check_omega_l_evolution(traj, params, arg))
        elif kind == "ancient":
            reports.append(_ancient_report(traj))
        elif kind == "residual":
            reports.append(_residual_report(traj))
    return reports


def _ancient_report(traj: Trajectory) -> CheckReport:
    # oracle family through the John ellipse of the initial body, from two
    # lifespans in the past to 90% of its extinction time
    p = traj.params.p
    s0 = traj.points[0].state
    e = john_ellipse(s0)
    big_t = ellipse_extinction_time(e.a, e.b, p)
    family = ellipse_family(e.a, e.b, p, np.linspace(-2.0 * big_t, 0.9 * big_t, 33), n=s0.n, phi=e.phi)
    return check_ancient_inequalities(family, traj.params)


def _residual_report(traj: Trajectory) -> CheckReport:
    nd = normalized_diagnostics(traj)
    tol = 1e-8
    ok_res = nd.ellipse_residual[-1] <= nd.ellipse_residual[0] + tol
    ok_sig = nd.sigma_ratio[-1] <= nd.sigma_ratio[0] + tol
    margin = min(
        nd.ellipse_residual[0] + tol - nd.ellipse_residual[-1],
        nd.sigma_ratio[0] + tol - nd.sigma_ratio[-1],
    )
    return CheckReport(
        "residual",
        bool(ok_res and ok_sig),
        float(margin),
        [bool(ok_res), bool(ok_sig)],
        {
            "times": nd.times,
            "ellipse_residual": nd.ellipse_residual,
            "sigma_ratio": nd.sigma_ratio,
            "distance_to_disk": nd.distance_to_disk,
            "omega1_cubed_over_area_floor": nd.omega1_floor,
        },
    )


def write_trajectory_csv(traj: Trajectory, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for pt in traj.points:
            row = [getattr(pt.record, k) for k in _RECORD_FIELDS] + [pt.dt]
            w.writerow([fmt(x) for x in row])


def write_snapshots(traj: Trajectory, path: Path, every: int) -> None:
    last = len(traj) - 1
    with open(path, "w") as fh:
        for i, pt in enumerate(traj.points):
            if i % every == 0 or i == last:
                fh.write(json.dumps({"t": pt.t, "s": pt.state.values.tolist()}) + "\n")


def execute_run(s0: SupportProfile, p: float, cfg: RunConfig, out: Path) -> dict:
    """Simulate, monitor and write the three output files; return the report."""
    out.mkdir(parents=True, exist_ok=True)
    traj = simulate(s0, cfg.flow_params(p), monitor_every=cfg.monitor_every)
    write_trajectory_csv(traj, out / "trajectory.csv")
    write_snapshots(traj, out / "snapshots.jsonl", cfg.monitor_every)
    report = {
        "p": p,
        "n": cfg.n,
        "termination": traj.termination,
        "t_final": float(traj.times[-1]),
        "steps": traj.steps,
        "rejected": traj.rejected,
        "records": len(traj),
    }
    premature = traj.termination in ("convexity_loss", "step_underflow")
    report["premature_stop"] = premature
    try:
        checks = run_monitors(traj, cfg)
        report["monitors"] = [c.to_dict() for c in checks]
        report["monitors_passed"] = all(c.passed for c in checks)
    except OptimFail as exc:
        report["monitors"] = []
        report["monitors_passed"] = False
        report["error"] = f"OptimFail: {exc}"
    except SandwichViolation as exc:
        report["monitors"] = []
        report["monitors_passed"] = False
        report["error"] = f"SandwichViolation: {exc}"
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return report


def _run_exit(report: dict) -> int:
    if report["premature_stop"]:
        return EXIT_CONVEXITY
    if report.get("error", "").startswith("OptimFail"):
        return EXIT_OPTIM
    return EXIT_OK if report["monitors_passed"] else EXIT_MONITOR


def _worst(report: dict, name: str, key: Optional[str] = None) -> float:
    vals = [m["details"][key] if key else m["worst_margin"] for m in report.get("monitors", []) if m["name"] == name]
    return min(vals) if vals else float("nan")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

_RUN_KEYS = ("p", "n", "init", "t_end", "stop_area", "tol_step", "monitor_every", "monitors", "out_dir", "seed")


def cmd_simulate(args) -> int:
    cfg = _merge_config(args, _RUN_KEYS)
    if len(cfg.p) != 1:
        raise ConfigError("simulate takes a single p")
    s0 = parse_init(cfg.init, cfg.n)
    report = execute_run(s0, cfg.p[0], cfg, Path(cfg.out_dir))
    print(json.dumps({k: report[k] for k in ("termination", "t_final", "steps", "monitors_passed")}))
    code = _run_exit(report)
    if code == EXIT_CONVEXITY:
        print(f"run stopped early: {report['termination']}", file=sys.stderr)
    return code


def cmd_invariants(args) -> int:
    cfg = _merge_config(args, ("p", "n", "init"))
    s = parse_init(cfg.init, cfg.n)
    st = affine_state(s)
    fr = frame_identity_residuals(s)
    out = {}
    per_p = {}
    for p in cfg.p:
        rec = compute_record(s, FlowParams(p), 0.0)
        per_p[fmt(p)] = {
            "Omega_p": rec.Omega_p,
            "ratio_p": rec.ratio_p,
            "ratio_bound": isoperimetric_bound(p),
            "ratio_over_bound": rec.ratio_p / isoperimetric_bound(p),
        }
    out.update(
        A=rec.A,
        A_star=rec.A_star,
        AAstar=rec.AAstar,
        Omega_1=rec.Omega_1,
        Omega_2=rec.Omega_2,
        sigma_max=rec.sigma_max,
        sigma_min=rec.sigma_min,
        mu_max=float(st.mu.max()),
        mu_min=float(st.mu.min()),
        frame_residual_unimodular=fr.unimodular,
        frame_residual_support=fr.support,
        ellipse_residual=ellipse_residual(s),
        p=per_p,
    )
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_normalize(args) -> int:
    cfg = _merge_config(args, ("n", "init"))
    s = parse_init(cfg.init, cfg.n)
    ns = john_normalize(s)
    vals = ns.state.values
    out = {
        "john_ellipse": ns.john.to_dict(),
        "map": ns.map.to_list(),
        "map_det": ns.map.det,
        "scale": ns.scale,
        "sandwich_lower_margin": float(vals.min() - 1.0 / SQRT2),
        "sandwich_upper_margin": float(SQRT2 - vals.max()),
        "distance_to_disk": float(np.max(np.abs(vals - 1.0))),
        "ellipse_residual": ellipse_residual(ns.state),
    }
    print(json.dumps(out, indent=2))
    if args.out_dir:
        path = Path(args.out_dir)
        path.mkdir(parents=True, exist_ok=True)
        with open(path / "normalized.json", "w") as fh:
            json.dump({"s": vals.tolist(), **out}, fh)
            fh.write("\n")
    return EXIT_OK


SUMMARY_COLUMNS = (
    "p", "seed", "termination", "t_final", "steps", "passed",
    "worst_monotone_margin", "worst_R_margin", "error",
)


def cmd_sweep(args) -> int:
    cfg = _merge_config(args, _RUN_KEYS)
    root = Path(cfg.out_dir)
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    any_fail = False
    for p in cfg.p:
        for seed in cfg.seed:
            s0 = random_symmetric_profile(cfg.n, np.random.default_rng(seed))
            name = f"p{fmt(p)}_seed{seed}"
            try:
                report = execute_run(s0, p, cfg, root / name)
                code = _run_exit(report)
                err = report.get("error", "")
                if code == EXIT_CONVEXITY:
                    err = err or report["termination"]
            except Exception as exc:  # record and continue
                report, code, err = {"termination": "error", "t_final": float("nan"), "steps": 0}, 1, f"{type(exc).__name__}: {exc}"
            passed = code == EXIT_OK
            any_fail |= not passed
            rows.append([
                fmt(p), str(seed), report["termination"], fmt(report["t_final"]), str(report["steps"]),
                str(passed).lower(), fmt(_worst(report, "monotone")),
                fmt(_worst(report, "harnack", "worst_R_margin")), err,
            ])
    with open(root / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        w.writerows(rows)
    print(f"{len(rows)} runs, {sum(r[5] == 'true' for r in rows)} passed; summary in {root / 'summary.csv'}")
    return EXIT_MONITOR if any_fail else EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="affineflow", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, run=True):
        sp.add_argument("--init", help="shape: disk:r | ellipse:a,b[,phi] | trig:c0,(k,a_k)... | file:path")
        sp.add_argument("--n", type=int, help="grid size, power of two >= 64 (default 256)")
        sp.add_argument("--config", help="JSON file whose keys override the flags")
        if run:
            sp.add_argument("--t-end", dest="t_end", type=float)
            sp.add_argument("--stop-area", dest="stop_area", type=float)
            sp.add_argument("--tol-step", dest="tol_step", type=float)
            sp.add_argument("--monitor-every", dest="monitor_every", type=int)
            sp.add_argument("--monitors", nargs="+", help="harnack monotone omega_l:L ancient residual")

    sp = sub.add_parser("simulate", help="run the flow and its monitors")
    common(sp)
    sp.add_argument("--p", type=float, nargs=1)
    sp.add_argument("--out-dir", dest="out_dir")
    sp.add_argument("--seed", type=_seed_list, help="accepted for config symmetry; unused")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("invariants", help="print the affine invariants of a shape")
    common(sp, run=False)
    sp.add_argument("--p", type=float, nargs="+")
    sp.set_defaults(func=cmd_invariants)

    sp = sub.add_parser("normalize", help="John-normalize a shape")
    common(sp, run=False)
    sp.add_argument("--out-dir", dest="out_dir", help="also write normalized.json here")
    sp.set_defaults(func=cmd_normalize)

    sp = sub.add_parser("sweep", help="monitor suite over p values and random bodies")
    common(sp)
    sp.add_argument("--p", type=float, nargs="*")
    sp.add_argument("--seed", type=_seed_list, help="e.g. 0-7 or 1,4,9")
    sp.add_argument("--out-dir", dest="out_dir")
    sp.set_defaults(func=cmd_sweep)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnsupportedExponent) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OptimFail as exc:
        print(f"error: John ellipse optimization failed: {exc}", file=sys.stderr)
        return EXIT_OPTIM
    except SandwichViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MONITOR


if __name__ == "__main__":
    sys.exit(main())
