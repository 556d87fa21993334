"""Certified zero finding for analytic functions on rectangular windows.

The argument principle is evaluated by tracking the continuous phase of F
along adaptively refined boundary samples, which yields exact integer
winding numbers without numerically integrating F'/F.  Windows are split
until each sub-box holds at most one zero, then Newton polishing (with a
Cauchy-circle derivative fallback) produces residual-certified zeros.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "Window",
    "Resonance",
    "BoundaryZeroError",
    "winding_number",
    "find_zeros",
    "multiplicity_estimate",
]

# deterministic outward jitter factors for boundary-zero retries
_JITTER = (2.3e-4, 7.9e-4, 2.7e-3)
_PHASE_STEP_MAX = 0.45 * math.pi


class BoundaryZeroError(Exception):
    """A zero of F appears to lie on the integration contour."""


@dataclass(frozen=True)
class Window:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError("window must satisfy re_min < re_max and "
                             "im_min < im_max")

    @property
    def width(self) -> float:
        return self.re_max - self.re_min

    @property
    def height(self) -> float:
        return self.im_max - self.im_min

    @property
    def diameter(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re_min + self.re_max),
                       0.5 * (self.im_min + self.im_max))

    def contains(self, z: complex, pad: float = 0.0) -> bool:
        return (self.re_min - pad <= z.real <= self.re_max + pad
                and self.im_min - pad <= z.imag <= self.im_max + pad)

    def corners(self) -> tuple[complex, complex, complex, complex]:
        return (complex(self.re_min, self.im_min),
                complex(self.re_max, self.im_min),
                complex(self.re_max, self.im_max),
                complex(self.re_min, self.im_max))

    def expanded(self, factor: float) -> "Window":
        dw = factor * self.width
        dh = factor * self.height
        return Window(self.re_min - dw, self.re_max + dw,
                      self.im_min - dh, self.im_max + dh)


@dataclass(frozen=True)
class Resonance:
    """A certified zero of F: location, isolation certificate, residual."""

    z: complex
    f: float
    residual: float
    winding: int
    iterations: int
    axis_ambiguous: bool = False
    cluster_radius: float = 0.0


# ----------------------------------------------------------------------
# phase-tracked winding numbers


def _rect_param(window: Window):
    c = window.corners()
    sides = [(c[0], c[1]), (c[1], c[2]), (c[2], c[3]), (c[3], c[0])]
    lengths = np.array([abs(b - a) for a, b in sides])
    cuts = np.concatenate([[0.0], np.cumsum(lengths) / lengths.sum()])

    def to_point(t):
        t = np.asarray(t, dtype=float) % 1.0
        out = np.empty(t.shape, dtype=complex)
        for i, (a, b) in enumerate(sides):
            lo, hi = cuts[i], cuts[i + 1]
            m = (t >= lo) & (t < hi)
            out[m] = a + (b - a) * (t[m] - lo) / (hi - lo)
        return out

    return to_point


def _circle_param(center: complex, radius: float):
    def to_point(t):
        return center + radius * np.exp(2j * np.pi * np.asarray(t, dtype=float))
    return to_point


def _phase_winding(F, to_point, n_init: int, max_rounds: int = 28,
                   zero_floor_rel: float = 1e-10) -> int:
    """Winding of F along the closed path t in [0, 1) -> to_point(t)."""
    t = np.linspace(0.0, 1.0, n_init, endpoint=False)
    v = np.asarray(F(to_point(t)), dtype=complex).ravel()
    for _ in range(max_rounds):
        scale = float(np.median(np.abs(v)))
        if scale == 0.0 or float(np.min(np.abs(v))) < zero_floor_rel * scale:
            raise BoundaryZeroError("|F| below threshold on the contour")
        steps = np.angle(np.roll(v, -1) / v)
        bad = np.abs(steps) > _PHASE_STEP_MAX
        if not np.any(bad):
            total = float(np.sum(steps))
            wind = total / (2.0 * math.pi)
            nearest = round(wind)
            if abs(wind - nearest) > 0.05:
                raise BoundaryZeroError(
                    f"phase tracking inconsistent (sum {wind:.4f} turns)")
            return int(nearest)
        t_next = np.roll(t, -1).copy()
        t_next[-1] = 1.0
        mids = 0.5 * (t[bad] + t_next[bad])
        v_mid = np.asarray(F(to_point(mids)), dtype=complex).ravel()
        t = np.concatenate([t, mids])
        v = np.concatenate([v, v_mid])
        order = np.argsort(t, kind="stable")
        t = t[order]
        v = v[order]
    raise BoundaryZeroError("phase refinement exceeded its depth limit")


def winding_number(F, window: Window, n_init: int = 64) -> int:
    """Exact zero count (with multiplicity) of F inside the window.

    Boundary-zero suspicion triggers up to three deterministic outward
    jitters of the window before failing.
    """
    last: Exception | None = None
    for attempt, factor in enumerate((0.0,) + _JITTER):
        w = window if factor == 0.0 else window.expanded(factor)
        try:
            return _phase_winding(F, _rect_param(w), n_init)
        except BoundaryZeroError as exc:
            last = exc
    raise BoundaryZeroError(
        f"winding failed after jitter retries: {last}")


def multiplicity_estimate(F, z0: complex, rho: float, n_init: int = 64) -> int:
    """Winding of F on the circle |z - z0| = rho."""
    last: Exception | None = None
    for attempt, factor in enumerate((0.0,) + _JITTER):
        try:
            return _phase_winding(F, _circle_param(z0, rho * (1.0 + factor)),
                                  n_init)
        except BoundaryZeroError as exc:
            last = exc
    raise BoundaryZeroError(
        f"multiplicity estimate failed after jitter retries: {last}")


# ----------------------------------------------------------------------
# Newton polishing and certified subdivision


def _cauchy_derivative(F, z: complex, rho: float, n: int = 32) -> complex:
    angles = 2.0 * np.pi * np.arange(n) / n
    ring = z + rho * np.exp(1j * angles)
    vals = np.asarray(F(ring), dtype=complex).ravel()
    return complex(np.mean(vals * np.exp(-1j * angles)) / rho)


def _newton(F, fprime, z0: complex, box: Window, tol: float,
            max_iter: int = 60):
    """Polish a zero from z0; returns (z, residual, iterations) or None."""
    z = complex(z0)
    rho = min(1e-3, 0.25 * min(box.width, box.height))
    for it in range(1, max_iter + 1):
        fz = complex(np.asarray(F(np.array([z])), dtype=complex)[0])
        if fprime is not None:
            dfz = complex(fprime(z))
        else:
            dfz = _cauchy_derivative(F, z, rho)
        if dfz == 0 or not np.isfinite(dfz) or not np.isfinite(fz):
            return None
        step = fz / dfz
        z_new = z - step
        if not box.contains(z_new, pad=0.25 * box.diameter):
            return None
        z = z_new
        if abs(step) < 1e-14 * (1.0 + abs(z)):
            break
    res = abs(complex(np.asarray(F(np.array([z])), dtype=complex)[0]))
    if res > tol or not box.contains(z):
        return None
    return z, res, it


def _split(window: Window, fraction: float = 0.5):
    if window.width >= window.height:
        cut = window.re_min + fraction * window.width
        return (Window(window.re_min, cut, window.im_min, window.im_max),
                Window(cut, window.re_max, window.im_min, window.im_max))
    cut = window.im_min + fraction * window.height
    return (Window(window.re_min, window.re_max, window.im_min, cut),
            Window(window.re_min, window.re_max, cut, window.im_max))


def find_zeros(F, window: Window, tol: float = 1e-10, fprime=None,
               f: float = 0.0, coarse_diameter: float | None = None,
               min_box_diameter: float | None = None,
               merge_radius: float = 1e-9) -> list[Resonance]:
    """All zeros of F in the window, each carried by a winding certificate.

    Sub-boxes are bisected until they isolate single zeros; Newton polishes
    from the box center, falling back to further bisection when it escapes
    its certified box.  The certificates of the returned zeros add up to
    the winding number of the full window.  Zero clusters that cannot be
    separated above ``min_box_diameter`` are reported as a single record
    with winding > 1 and a nonzero cluster radius (their residual may
    exceed ``tol``).
    """
    if min_box_diameter is None:
        min_box_diameter = max(50.0 * tol, 1e-12 * window.diameter)
    total = winding_number(F, window)
    found: list[Resonance] = []
    stack: list[tuple[Window, int]] = [(window, total)]
    while stack:
        box, wind = stack.pop()
        if wind == 0:
            continue
        if box.diameter <= min_box_diameter:
            # unresolved cluster: report its center with the cluster radius
            center = box.center
            res = abs(complex(np.asarray(F(np.array([center])),
                                         dtype=complex)[0]))
            found.append(Resonance(center, f, res, wind, 0,
                                   cluster_radius=0.5 * box.diameter))
            continue
        if wind == 1 and (coarse_diameter is None
                          or box.diameter <= coarse_diameter):
            polished = _newton(F, fprime, box.center, box, tol)
            if polished is not None:
                z, res, it = polished
                found.append(Resonance(z, f, res, 1, it))
                continue
        # bisect, jittering the cut if a zero sits on the split line;
        # the halves use strict windings (no window expansion) so that an
        # on-edge zero forces a different cut instead of double-counting
        halves = None
        w1 = None
        for fraction in (0.5, 0.5 + 37.0 * _JITTER[0], 0.5 - 59.0 * _JITTER[1]):
            cand = _split(box, fraction)
            try:
                w1 = _phase_winding(F, _rect_param(cand[0]), 64)
                halves = cand
                break
            except BoundaryZeroError:
                continue
        if halves is None:
            raise BoundaryZeroError(
                f"could not place a zero-free split line in {box}")
        w2 = wind - w1
        if w2 < 0:
            w2 = _phase_winding(F, _rect_param(halves[1]), 64)
            w1 = wind - w2
        if w1 < 0 or w2 < 0:
            raise RuntimeError(
                f"inconsistent winding split {wind} -> ({w1}, {w2}) in {box}")
        stack.append((halves[0], w1))
        stack.append((halves[1], w2))

    found = _merge_duplicates(found, merge_radius)
    if sum(r.winding for r in found) != total:
        raise RuntimeError(
            f"certificate mismatch: window winding {total}, "
            f"sum of zero certificates {sum(r.winding for r in found)}")
    guard = 10.0 * tol
    found = [replace(r, axis_ambiguous=abs(r.z.imag) < guard) for r in found]
    found.sort(key=lambda r: (r.z.real, r.z.imag))
    return found


def _merge_duplicates(items: list[Resonance], radius: float) -> list[Resonance]:
    out: list[Resonance] = []
    for r in sorted(items, key=lambda r: (r.z.real, r.z.imag)):
        for i, kept in enumerate(out):
            if abs(kept.z - r.z) < radius:
                out[i] = replace(kept, winding=kept.winding + r.winding)
                break
        else:
            out.append(r)
    return out
