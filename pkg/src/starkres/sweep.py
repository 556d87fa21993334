"""Field-strength sweeps: DC zero clouds and AC eigenvalue trajectories.

The DC sweep locates all window zeros per field value, links them into
trajectories by nearest-neighbor gating, and fits the instability
envelope; the AC sweep follows the dilated Floquet eigenvalue toward its
field-free limit.  The stability/instability flags are fixed numeric
predicates over those outputs, reproducible bit for bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .floquet import FloquetProblem, eigen_near
from .formfactor import FormFactor
from .resolvent import QuadratureSettings, ResolventEvaluator
from .rootfind import Resonance, Window, find_zeros

__all__ = [
    "SlopeFit",
    "TrajectoryPoint",
    "SweepResult",
    "dc_sweep",
    "ac_sweep",
    "fit_slope",
    "link_trajectories",
]


@dataclass(frozen=True)
class SlopeFit:
    c0: float              # envelope constant max |Im z| / f
    slope: float           # least-squares log-log slope of |Im z| vs f
    residual: float        # rms residual of the log-log fit
    axis_ambiguous: bool   # all Im z at the noise floor


@dataclass(frozen=True)
class TrajectoryPoint:
    f: float
    z: complex
    residual: float


@dataclass(frozen=True)
class SweepResult:
    mode: str
    f_grid: tuple[float, ...]
    resonances: tuple[tuple[Resonance, ...], ...]   # aligned with f_grid
    reference: complex                              # field-free resonance
    trajectories: tuple[tuple[TrajectoryPoint, ...], ...]
    max_im: tuple[float, ...]
    min_dist_reference: tuple[float, ...]
    mean_re: tuple[float, ...]
    scatter_re: tuple[float, ...]
    c0_envelope: float
    c0_largest_f: float
    fit: SlopeFit
    flags: dict[str, bool] = field(default_factory=dict)
    errors: tuple[str, ...] = ()
    sensitivities: tuple[float, ...] = ()

    def all_points(self) -> list[tuple[float, Resonance]]:
        out = []
        for f, group in zip(self.f_grid, self.resonances):
            out.extend((f, r) for r in group)
        return out


def _validate_grid(f_grid) -> tuple[float, ...]:
    grid = tuple(float(f) for f in f_grid)
    if not grid or any(f <= 0 for f in grid):
        raise ValueError("f grid must be positive")
    if any(a <= b for a, b in zip(grid, grid[1:])):
        raise ValueError("f grid must be strictly descending")
    return grid


def fit_slope(points: list[tuple[float, complex]]) -> SlopeFit:
    """Envelope constant and log-log width-vs-field slope of a trajectory."""
    if len(points) < 3:
        raise ValueError("slope fitting needs at least 3 points")
    fs = np.array([p[0] for p in points], dtype=float)
    ims = np.array([abs(complex(p[1]).imag) for p in points], dtype=float)
    floor = 1e-14
    if np.all(ims <= floor):
        return SlopeFit(0.0, 0.0, 0.0, True)
    c0 = float(np.max(ims / fs))
    keep = ims > floor
    lf = np.log(fs[keep])
    li = np.log(ims[keep])
    A = np.vstack([lf, np.ones_like(lf)]).T
    coef, *_ = np.linalg.lstsq(A, li, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - li) ** 2)))
    return SlopeFit(c0, float(coef[0]), resid, False)


def link_trajectories(f_grid, groups) -> tuple[tuple[TrajectoryPoint, ...], ...]:
    """Greedy nearest-neighbor chains down the descending f grid.

    The gate is 3x the median nearest-neighbor spacing of the cloud at the
    larger field value, so the link radius tightens as the cloud densifies.
    Assignment is order-independent: candidates are processed sorted by
    distance.
    """
    trajectories: list[list[TrajectoryPoint]] = []
    open_ends: list[int] = []
    prev_zs: list[complex] = []
    for level, (f, group) in enumerate(zip(f_grid, groups)):
        zs = sorted((r.z for r in group), key=lambda z: (z.real, z.imag))
        res = {r.z: r.residual for r in group}
        if level == 0 or not open_ends:
            for z in zs:
                trajectories.append([TrajectoryPoint(f, z, res[z])])
            open_ends = list(range(len(trajectories)))
        else:
            gate = _gate_radius(prev_zs)
            cands = []
            for ti, t_idx in enumerate(open_ends):
                tail = trajectories[t_idx][-1].z
                for zi, z in enumerate(zs):
                    d = abs(z - tail)
                    if d <= gate:
                        cands.append((d, ti, zi))
            cands.sort(key=lambda c: (c[0], c[1], c[2]))
            used_t: set[int] = set()
            used_z: set[int] = set()
            next_ends = []
            for d, ti, zi in cands:
                if ti in used_t or zi in used_z:
                    continue
                used_t.add(ti)
                used_z.add(zi)
                t_idx = open_ends[ti]
                trajectories[t_idx].append(TrajectoryPoint(f, zs[zi], res[zs[zi]]))
                next_ends.append(t_idx)
            for zi, z in enumerate(zs):
                if zi not in used_z:
                    trajectories.append([TrajectoryPoint(f, z, res[z])])
                    next_ends.append(len(trajectories) - 1)
            open_ends = next_ends
        prev_zs = zs
    return tuple(tuple(t) for t in trajectories)


def _gate_radius(zs: list[complex]) -> float:
    if len(zs) < 2:
        return math.inf
    nn = []
    for i, z in enumerate(zs):
        nn.append(min(abs(z - w) for j, w in enumerate(zs) if j != i))
    return 3.0 * float(np.median(nn))


def dc_sweep(phi: FormFactor, f_grid, window: Window, tol: float = 1e-9,
             settings: QuadratureSettings | None = None,
             workers: int = 1) -> SweepResult:
    """Locate the resonance cloud per field value and test the
    instability predicates against the field-free resonance."""
    grid = _validate_grid(f_grid)
    if window.im_max > 0:
        raise ValueError("resonance search windows must lie in Im z <= 0")
    settings = settings or QuadratureSettings()
    ev0 = ResolventEvaluator(phi, 0.0, settings)
    ref_window = Window(window.re_min, window.re_max,
                        min(window.im_min, -1e-3), -1e-4)
    ref_zeros = find_zeros(ev0.F_value, ref_window, tol=1e-11,
                           fprime=ev0.F_derivative)
    if not ref_zeros:
        raise ValueError("no field-free resonance found in the window")
    reference = min(ref_zeros, key=lambda r: abs(r.z - 1.0)).z

    def run_one(f: float):
        ev = ResolventEvaluator(phi, f, settings)
        try:
            return find_zeros(ev.F_value, window, tol=tol,
                              fprime=ev.F_derivative, f=f), None
        except Exception as exc:  # recorded, sweep continues
            return [], f"f={f:.17g}: {type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, grid))
    else:
        results = [run_one(f) for f in grid]
    groups = tuple(tuple(r) for r, _ in results)
    errors = tuple(ederr for _, ederr in results if ederr)

    max_im, min_dist, mean_re, scat_re = [], [], [], []
    for f, group in zip(grid, groups):
        if group:
            max_im.append(max(abs(r.z.imag) for r in group))
            min_dist.append(min(abs(r.z - reference) for r in group))
            res = [r.z.real for r in group]
            mean_re.append(float(np.mean(res)))
            scat_re.append(float(np.std(res)))
        else:
            max_im.append(0.0)
            min_dist.append(math.inf)
            mean_re.append(math.nan)
            scat_re.append(0.0)

    trajectories = link_trajectories(grid, groups)
    pts = [(f, r.z) for f, group in zip(grid, groups) for r in group]
    c0_env = max((abs(r.z.imag) / f for f, g in zip(grid, groups)
                  for r in g), default=0.0)
    c0_top = max((abs(r.z.imag) / grid[0] for r in groups[0]), default=0.0)
    fit = fit_slope(pts) if len(pts) >= 3 else SlopeFit(c0_env, 0.0, 0.0,
                                                        False)

    im_ref = abs(reference.imag)
    has_data = groups[0] and groups[-1]
    flags = {
        # cloud widths collapse toward the axis as f decreases
        "axis_approach": bool(has_data and max_im[-1] <= 0.5 * max_im[0]),
        # no resonance approaches the field-free one
        "r0_avoidance": bool(groups[-1] and min_dist[-1] > 0.5 * im_ref),
    }
    flags["dc_unstable"] = flags["axis_approach"] and flags["r0_avoidance"]
    return SweepResult(
        mode="dc", f_grid=grid, resonances=groups, reference=reference,
        trajectories=trajectories, max_im=tuple(max_im),
        min_dist_reference=tuple(min_dist), mean_re=tuple(mean_re),
        scatter_re=tuple(scat_re), c0_envelope=c0_env, c0_largest_f=c0_top,
        fit=fit, flags=flags, errors=errors)


def ac_sweep(phi: FormFactor, f_grid, omega: float = 1.0, theta: complex = 0.3j,
             target: complex | None = None, tol: float = 1e-9,
             n_fourier: int = 16, n_hermite: int = 80,
             length_scale: float = 1.0, disk_radius: float = 0.05,
             workers: int = 1) -> SweepResult:
    """Track the Floquet resonance eigenvalue along the descending f grid.

    The trajectory starts at the f = 0 eigenvalue; distances are recorded
    against ``target`` (the field-free resonance from a DC run) when
    given, else against the f = 0 eigenvalue itself.
    """
    grid = _validate_grid(f_grid)
    prob0 = FloquetProblem(phi, 0.0, omega, theta, n_fourier, n_hermite,
                           length_scale)
    seed = target if target is not None else 1.0 - 0.01j
    pairs0 = eigen_near(prob0, seed, tol=tol, radius=disk_radius)
    if not pairs0:
        raise ValueError("no field-free Floquet eigenvalue near the target")
    lam0 = min(pairs0, key=lambda p: (p.sensitivity, abs(p.eigenvalue - seed)))
    reference = complex(target) if target is not None else lam0.eigenvalue

    def run_one(f: float):
        prob = FloquetProblem(phi, f, omega, theta, n_fourier, n_hermite,
                              length_scale)
        try:
            pairs = eigen_near(prob, lam0.eigenvalue, tol=tol,
                               radius=disk_radius)
            if not pairs:
                return None, f"f={f:.17g}: no eigenvalue in the target disk"
            return pairs[0], None
        except Exception as exc:
            return None, f"f={f:.17g}: {type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, grid))
    else:
        results = [run_one(f) for f in grid]
    errors = tuple(err for _, err in results if err)

    groups = []
    traj = [TrajectoryPoint(0.0, lam0.eigenvalue, lam0.residual)]
    sens = [lam0.sensitivity]
    dists = []
    for f, (pair, _err) in zip(grid, results):
        if pair is None:
            groups.append(())
            continue
        groups.append((Resonance(pair.eigenvalue, f, pair.residual, 1, 0),))
        traj.append(TrajectoryPoint(f, pair.eigenvalue, pair.residual))
        sens.append(pair.sensitivity)
        dists.append(abs(pair.eigenvalue - reference))

    decreasing = (len(dists) >= 3
                  and dists[-1] < dists[-2] < dists[-3])
    last_sens = sens[-1] if sens[-1] == sens[-1] else max(
        (s for s in sens if s == s), default=math.inf)
    small = bool(dists and dists[-1] <= 10.0 * last_sens)
    flags = {
        "converging_to_reference": bool(decreasing),
        "within_truncation_floor": small,
        "ac_stable": bool(decreasing and small),
    }
    max_im = tuple(abs(g[0].z.imag) if g else 0.0 for g in groups)
    min_d = tuple(abs(g[0].z - reference) if g else math.inf for g in groups)
    # the field-free limit point closes the trajectory
    ordered = tuple(traj[1:] + traj[:1])
    return SweepResult(
        mode="ac", f_grid=grid, resonances=tuple(groups), reference=reference,
        trajectories=(ordered,), max_im=max_im,
        min_dist_reference=min_d,
        mean_re=tuple(g[0].z.real if g else math.nan for g in groups),
        scatter_re=tuple(0.0 for _ in groups),
        c0_envelope=0.0, c0_largest_f=0.0,
        fit=SlopeFit(0.0, 0.0, 0.0, False), flags=flags, errors=errors,
        sensitivities=tuple(sens))
