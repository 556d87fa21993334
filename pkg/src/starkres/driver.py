"""Command-line entry point, configuration, persistence, figures.

Subcommands: dc (zeros at one field value), sweep (DC instability sweep),
ac (Floquet trajectory), plot (re-render CSV data), verify (oracle
cross-checks).  All artifacts are written deterministically: fixed column
orders, 17-significant-digit floats, sorted JSON keys, self-contained SVG
with inline styling.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .formfactor import FormFactor
from .oracle import verify_report
from .resolvent import QuadratureSettings, ResolventEvaluator
from .rootfind import Window, find_zeros
from .sweep import ac_sweep, dc_sweep

__all__ = ["RunConfig", "run", "main", "write_csv", "write_manifest",
           "svg_scatter", "parse_config_file"]

MODES = ("dc", "sweep", "ac", "plot", "verify")


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


@dataclass(frozen=True)
class RunConfig:
    mode: str = "dc"
    amplitude: float = 0.1
    width: float = 1.0
    form_factor: tuple | None = None      # serialized records override
    f: float = 0.0
    f_grid: tuple[float, ...] = (0.05, 0.02, 0.01, 0.005)
    re_min: float = 0.9
    re_max: float = 1.1
    im_min: float = -0.05
    im_max: float = -1e-6
    tol: float = 1e-9
    omega: float = 1.0
    im_theta: float = 0.3
    n_fourier: int = 16
    n_hermite: int = 80
    length_scale: float = 1.0
    target: complex | None = None
    out: str = "."
    csv_source: str | None = None
    deterministic: bool = True            # rng-free execution, always on

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.f < 0 or self.omega <= 0 or self.tol <= 0:
            raise ValueError("require f >= 0, omega > 0, tol > 0")
        if self.width <= 0 or self.length_scale <= 0:
            raise ValueError("width and length scale must be positive")
        if not self.deterministic:
            raise ValueError("deterministic execution cannot be disabled")

    @property
    def window(self) -> Window:
        return Window(self.re_min, self.re_max, self.im_min, self.im_max)

    def coupling(self) -> FormFactor:
        if self.form_factor is not None:
            return FormFactor.from_records(self.form_factor)
        return FormFactor.gaussian(self.amplitude, self.width)

    def workers(self) -> int:
        env = os.environ.get("STARKRES_THREADS", "")
        try:
            return max(1, int(env)) if env else 1
        except ValueError:
            return 1


_CONFIG_KEYS = {
    "mode": ("mode", str),
    "form.amp": ("amplitude", float),
    "form.width": ("width", float),
    "f": ("f", float),
    "f_grid": ("f_grid", "grid"),
    "window.re_min": ("re_min", float),
    "window.re_max": ("re_max", float),
    "window.im_min": ("im_min", float),
    "window.im_max": ("im_max", float),
    "tol": ("tol", float),
    "omega": ("omega", float),
    "im_theta": ("im_theta", float),
    "n_fourier": ("n_fourier", int),
    "n_hermite": ("n_hermite", int),
    "length_scale": ("length_scale", float),
    "target": ("target", "complex"),
    "out": ("out", str),
    "csv": ("csv_source", str),
}


def parse_config_file(path) -> dict:
    """Flat key=value configuration; mode prefixes (dc.window.re_min=...)
    are stripped.  Unknown keys are rejected."""
    out = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{ln}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        parts = key.split(".")
        if parts[0] in MODES:
            parts = parts[1:]
        key = ".".join(parts)
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{ln}: unknown key {key!r}")
        name, conv = _CONFIG_KEYS[key]
        if conv == "grid":
            out[name] = tuple(float(v) for v in val.split(","))
        elif conv == "complex":
            out[name] = complex(val.replace(" ", ""))
        else:
            out[name] = conv(val)
    return out


# ----------------------------------------------------------------------
# artifact writers


def write_csv(path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for v in row:
                if isinstance(v, float):
                    cells.append(_fmt(v))
                elif v is None:
                    cells.append("")
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")


def write_manifest(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def svg_scatter(path, points: list[tuple[float, float]], xlabel: str,
                ylabel: str, title: str, size: tuple[int, int] = (640, 440)
                ) -> None:
    """Self-contained scatter plot; inline styling, no external assets."""
    W, H = size
    ml, mr, mt, mb = 72, 24, 40, 56
    if points:
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 - x0 < 1e-300:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1e-300:
        y0, y1 = y0 - 0.5, y1 + 0.5
    padx = 0.06 * (x1 - x0)
    pady = 0.06 * (y1 - y0)
    x0, x1 = x0 - padx, x1 + padx
    y0, y1 = y0 - pady, y1 + pady

    def X(x):
        return ml + (x - x0) / (x1 - x0) * (W - ml - mr)

    def Y(y):
        return H - mb - (y - y0) / (y1 - y0) * (H - mt - mb)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W/2:.1f}" y="24" text-anchor="middle" '
        'font-family="sans-serif" font-size="15" fill="black">'
        f'{title}</text>',
        f'<rect x="{ml}" y="{mt}" width="{W-ml-mr}" height="{H-mt-mb}" '
        'fill="none" stroke="black" stroke-width="1"/>',
    ]
    for t in _ticks(x0, x1):
        parts.append(
            f'<line x1="{X(t):.2f}" y1="{H-mb}" x2="{X(t):.2f}" '
            f'y2="{H-mb+5}" stroke="black" stroke-width="1"/>')
        parts.append(
            f'<text x="{X(t):.2f}" y="{H-mb+20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11" fill="black">'
            f'{t:.4g}</text>')
    for t in _ticks(y0, y1):
        parts.append(
            f'<line x1="{ml-5}" y1="{Y(t):.2f}" x2="{ml}" y2="{Y(t):.2f}" '
            'stroke="black" stroke-width="1"/>')
        parts.append(
            f'<text x="{ml-9}" y="{Y(t):.2f}" text-anchor="end" '
            'font-family="sans-serif" font-size="11" fill="black" '
            f'dominant-baseline="middle">{t:.4g}</text>')
    parts.append(
        f'<text x="{(ml + W - mr)/2:.1f}" y="{H-12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" fill="black">{xlabel}</text>')
    parts.append(
        f'<text x="18" y="{(mt + H - mb)/2:.1f}" text-anchor="middle" '
        'font-family="sans-serif" font-size="13" fill="black" '
        f'transform="rotate(-90 18 {(mt + H - mb)/2:.1f})">{ylabel}</text>')
    for x, y in points:
        parts.append(
            f'<circle cx="{X(x):.2f}" cy="{Y(y):.2f}" r="2.4" '
            'fill="#1f5fa8" fill-opacity="0.85"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def _cloud_figures(out: Path, rows: list[tuple]) -> list[str]:
    """Four scatter figures: Re and Im of the cloud vs f, full and fine."""
    made = []
    pts_re = [(r[0], r[1]) for r in rows]
    pts_im = [(r[0], r[2]) for r in rows]
    fs = sorted({r[0] for r in rows})
    f_fine = fs[len(fs) // 2] if fs else 0.0
    fine_re = [(f, v) for f, v in pts_re if f <= f_fine]
    fine_im = [(f, v) for f, v in pts_im if f <= f_fine]
    for name, pts, ylabel, title in (
        ("re_vs_f.svg", pts_re, "Re z", "Cloud real parts vs field strength"),
        ("re_vs_f_fine.svg", fine_re, "Re z",
         "Cloud real parts vs field strength (fine scale)"),
        ("im_vs_f.svg", pts_im, "Im z",
         "Cloud imaginary parts vs field strength"),
        ("im_vs_f_fine.svg", fine_im, "Im z",
         "Cloud imaginary parts vs field strength (fine scale)"),
    ):
        svg_scatter(out / name, pts, "f", ylabel, title)
        made.append(name)
    return made


# ----------------------------------------------------------------------
# mode runners


def _base_manifest(config: RunConfig) -> dict:
    return {
        "version": __version__,
        "mode": config.mode,
        "form_factor": [list(map(float, rec))
                        for rec in config.coupling().to_records()],
        "parameters": {
            "f": config.f,
            "f_grid": list(config.f_grid),
            "window": {"re_min": config.re_min, "re_max": config.re_max,
                       "im_min": config.im_min, "im_max": config.im_max},
            "tol": config.tol,
            "omega": config.omega,
            "im_theta": config.im_theta,
            "n_fourier": config.n_fourier,
            "n_hermite": config.n_hermite,
            "length_scale": config.length_scale,
            "target": None if config.target is None else
            [config.target.real, config.target.imag],
            "quadrature": {
                "tol": QuadratureSettings().tol,
                "max_subdivisions": QuadratureSettings().max_subdivisions,
                "gamma": QuadratureSettings().gamma,
                "derivative_radius": QuadratureSettings().derivative_radius,
                "derivative_nodes": QuadratureSettings().derivative_nodes,
                "panel_nodes": QuadratureSettings().panel_nodes,
                "panel_width": QuadratureSettings().panel_width,
            },
            "deterministic": True,
            "workers": config.workers(),
        },
    }


def _run_dc(config: RunConfig, out: Path) -> None:
    phi = config.coupling()
    window = config.window
    ev = ResolventEvaluator(phi, config.f)
    zeros = find_zeros(ev.F_value, window, tol=config.tol,
                       fprime=ev.F_derivative, f=config.f)
    rows = [[config.f, r.z.real, r.z.imag, r.residual, r.winding, None]
            for r in zeros]
    write_csv(out / "resonances.csv",
              ["f", "re_z", "im_z", "residual", "winding", "trajectory_id"],
              rows)
    manifest = _base_manifest(config)
    manifest["results"] = {
        "n_resonances": len(zeros),
        "resonances": [[r.z.real, r.z.imag] for r in zeros],
        "residuals": [r.residual for r in zeros],
        "windings": [r.winding for r in zeros],
    }
    write_manifest(out / "manifest.json", manifest)


def _run_sweep(config: RunConfig, out: Path) -> None:
    phi = config.coupling()
    result = dc_sweep(phi, config.f_grid, config.window, tol=config.tol,
                      workers=config.workers())
    traj_of = {}
    for tid, traj in enumerate(result.trajectories):
        for p in traj:
            traj_of[(p.f, p.z)] = tid
    rows = []
    for f, group in zip(result.f_grid, result.resonances):
        for r in group:
            rows.append([f, r.z.real, r.z.imag, r.residual, r.winding,
                         traj_of.get((f, r.z))])
    write_csv(out / "sweep.csv",
              ["f", "re_z", "im_z", "residual", "winding", "trajectory_id"],
              rows)
    _cloud_figures(out, [(row[0], row[1], row[2]) for row in rows])
    manifest = _base_manifest(config)
    manifest["results"] = {
        "reference_resonance": [result.reference.real, result.reference.imag],
        "c0_envelope": result.c0_envelope,
        "c0_largest_f": result.c0_largest_f,
        "loglog_slope": result.fit.slope,
        "loglog_residual": result.fit.residual,
        "max_im_per_f": list(result.max_im),
        "min_dist_reference_per_f": list(result.min_dist_reference),
        "mean_re_per_f": list(result.mean_re),
        "scatter_re_per_f": list(result.scatter_re),
        "n_per_f": [len(g) for g in result.resonances],
        "flags": result.flags,
        "errors": list(result.errors),
    }
    write_manifest(out / "manifest.json", manifest)


def _run_ac(config: RunConfig, out: Path) -> None:
    phi = config.coupling()
    result = ac_sweep(phi, config.f_grid, omega=config.omega,
                      theta=1j * config.im_theta, target=config.target,
                      tol=config.tol, n_fourier=config.n_fourier,
                      n_hermite=config.n_hermite,
                      length_scale=config.length_scale,
                      workers=config.workers())
    rows = []
    traj = result.trajectories[0]
    for p, s in zip(traj, result.sensitivities[1:] + result.sensitivities[:1]):
        rows.append([p.f, config.omega, config.im_theta, config.n_fourier,
                     config.n_hermite, p.z.real, p.z.imag, p.residual, s])
    write_csv(out / "eigenvalues.csv",
              ["f", "omega", "im_theta", "N", "J", "re_lambda", "im_lambda",
               "residual", "sensitivity"], rows)
    svg_scatter(out / "ac_trajectory.svg",
                [(p.f, abs(p.z - result.reference)) for p in traj],
                "f", "|lambda(f) - reference|",
                "Floquet eigenvalue distance to the field-free resonance")
    manifest = _base_manifest(config)
    manifest["results"] = {
        "reference": [result.reference.real, result.reference.imag],
        "trajectory": [[p.f, p.z.real, p.z.imag] for p in traj],
        "distances": list(result.min_dist_reference),
        "sensitivities": list(result.sensitivities),
        "flags": result.flags,
        "errors": list(result.errors),
    }
    write_manifest(out / "manifest.json", manifest)


def _run_plot(config: RunConfig, out: Path) -> None:
    if not config.csv_source:
        raise ValueError("plot mode needs --csv pointing at sweep output")
    rows = []
    with open(config.csv_source, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        idx = {name: i for i, name in enumerate(header)}
        for line in fh:
            cells = line.rstrip("\n").split(",")
            rows.append((float(cells[idx["f"]]), float(cells[idx["re_z"]]),
                         float(cells[idx["im_z"]])))
    made = _cloud_figures(out, rows)
    manifest = _base_manifest(config)
    manifest["results"] = {"figures": made, "points": len(rows)}
    write_manifest(out / "manifest.json", manifest)


def _run_verify(config: RunConfig, out: Path) -> bool:
    report = verify_report()
    write_manifest(out / "verify.json", report)
    for chk in report["checks"]:
        status = "pass" if chk["pass"] else "FAIL"
        print(f"  {chk['name']}: {status} "
              f"(max deviation {chk['max_deviation']:.3e}, "
              f"{chk['points']} points)")
    return bool(report["all_pass"])


def run(config: RunConfig) -> int:
    """Execute a configured run; returns the process exit status."""
    out = Path(config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory: {exc}", file=sys.stderr)
        return 2
    try:
        if config.mode == "dc":
            _run_dc(config, out)
        elif config.mode == "sweep":
            _run_sweep(config, out)
        elif config.mode == "ac":
            _run_ac(config, out)
        elif config.mode == "plot":
            _run_plot(config, out)
        elif config.mode == "verify":
            return 0 if _run_verify(config, out) else 3
        return 0
    except (ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        (out / "failure.log").write_text(
            f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}",
            encoding="utf-8")
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


# ----------------------------------------------------------------------
# CLI


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="starkres",
        description="Resonances of a coupled-channel model in static and "
                    "oscillating external fields")
    sub = ap.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", type=str, default=None)
        p.add_argument("--amp", type=float, default=None,
                       help="coupling amplitude")
        p.add_argument("--width", type=float, default=None,
                       help="coupling Gaussian width")
        p.add_argument("--f", type=float, default=None,
                       help="field strength")
        p.add_argument("--f-grid", type=str, default=None,
                       help="comma-separated descending field grid")
        p.add_argument("--re-min", type=float, default=None)
        p.add_argument("--re-max", type=float, default=None)
        p.add_argument("--im-min", type=float, default=None)
        p.add_argument("--im-max", type=float, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--omega", type=float, default=None)
        p.add_argument("--im-theta", type=float, default=None)
        p.add_argument("--n-fourier", type=int, default=None)
        p.add_argument("--n-hermite", type=int, default=None)
        p.add_argument("--length-scale", type=float, default=None)
        p.add_argument("--target", type=str, default=None,
                       help="complex target, e.g. 1.019-0.011j")
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--csv", type=str, default=None,
                       help="input CSV for plot mode")
    return ap


_FLAG_TO_FIELD = {
    "amp": "amplitude", "width": "width", "f": "f",
    "re_min": "re_min", "re_max": "re_max", "im_min": "im_min",
    "im_max": "im_max", "tol": "tol", "omega": "omega",
    "im_theta": "im_theta", "n_fourier": "n_fourier",
    "n_hermite": "n_hermite", "length_scale": "length_scale",
    "out": "out", "csv": "csv_source",
}


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        values.update(parse_config_file(args.config))
    values["mode"] = args.mode
    for flag, name in _FLAG_TO_FIELD.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[name] = v
    if getattr(args, "f_grid", None):
        values["f_grid"] = tuple(float(s) for s in args.f_grid.split(","))
    if getattr(args, "target", None):
        values["target"] = complex(args.target.replace(" ", ""))
    return RunConfig(**values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except (ValueError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
