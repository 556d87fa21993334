import numpy as np
import pytest

from conftest import R0
from starkres import FormFactor, Window, ac_sweep, dc_sweep, fit_slope
from starkres.rootfind import Resonance
from starkres.sweep import link_trajectories


def test_fit_slope_linear():
    pts = [(f, 1.0 - 0.3j * f) for f in (0.05, 0.02, 0.01, 0.005)]
    fit = fit_slope(pts)
    assert fit.c0 == pytest.approx(0.3, rel=1e-12)
    assert fit.slope == pytest.approx(1.0, abs=1e-9)
    assert not fit.axis_ambiguous


def test_fit_slope_quadratic():
    pts = [(f, 1.0 - 0.3j * f * f) for f in (0.05, 0.02, 0.01, 0.005)]
    fit = fit_slope(pts)
    assert fit.slope == pytest.approx(2.0, abs=1e-9)
    assert np.isfinite(fit.c0)


def test_fit_slope_degenerate_axis():
    pts = [(f, 1.0 + 0.0j) for f in (0.05, 0.02, 0.01)]
    assert fit_slope(pts).axis_ambiguous


def test_fit_slope_scale_consistency(rng):
    pts = [(f, 1.0 - 1j * 0.21 * f ** 1.1) for f in (0.08, 0.03, 0.01)]
    s1 = fit_slope(pts).slope
    scaled = [(7.0 * f, z.real - 7.0j * abs(z.imag)) for f, z in pts]
    s2 = fit_slope(scaled).slope
    assert s1 == pytest.approx(s2, abs=1e-9)


def _groups(per_f):
    return tuple(
        tuple(Resonance(z, f, 1e-12, 1, 3) for z in zs)
        for f, zs in per_f
    )


def test_link_trajectories_permutation_invariant():
    per_f = [
        (0.05, [1.00 - 0.030j, 1.06 - 0.010j]),
        (0.02, [0.995 - 0.013j, 1.055 - 0.004j, 0.95 - 0.012j]),
        (0.01, [0.992 - 0.006j, 1.052 - 0.002j, 0.948 - 0.006j]),
    ]
    grid = tuple(f for f, _ in per_f)
    base = link_trajectories(grid, _groups(per_f))
    shuffled = [(f, list(reversed(zs))) for f, zs in per_f]
    again = link_trajectories(grid, _groups(shuffled))
    def canon(trajs):
        return sorted((tuple((p.f, p.z.real, p.z.imag) for p in t)
                       for t in trajs))
    assert canon(base) == canon(again)
    # chains are monotone along the grid and disjoint
    for t in base:
        fs = [p.f for p in t]
        assert fs == sorted(fs, reverse=True)
    all_pts = [(p.f, p.z) for t in base for p in t]
    assert len(all_pts) == len(set(all_pts)) == 8


def test_dc_sweep_small(coupling):
    res = dc_sweep(coupling, (0.05, 0.02), Window(0.9, 1.1, -0.05, -1e-6),
                   tol=1e-9)
    assert res.mode == "dc"
    assert abs(res.reference - R0) < 1e-8
    assert all(len(g) >= 1 for g in res.resonances)
    assert res.c0_envelope > 0
    assert res.flags["r0_avoidance"]
    assert all(r.residual < 1e-9 for g in res.resonances for r in g)
    # deterministic repetition
    res2 = dc_sweep(coupling, (0.05, 0.02), Window(0.9, 1.1, -0.05, -1e-6),
                    tol=1e-9)
    assert [(r.z, r.residual) for g in res.resonances for r in g] \
        == [(r.z, r.residual) for g in res2.resonances for r in g]


def test_dc_sweep_workers_match_serial(coupling):
    w = Window(0.95, 1.1, -0.05, -1e-6)
    serial = dc_sweep(coupling, (0.05, 0.02), w, tol=1e-9, workers=1)
    threaded = dc_sweep(coupling, (0.05, 0.02), w, tol=1e-9, workers=2)
    assert [(r.z, r.residual) for g in serial.resonances for r in g] \
        == [(r.z, r.residual) for g in threaded.resonances for r in g]


def test_dc_sweep_grid_validation(coupling):
    with pytest.raises(ValueError):
        dc_sweep(coupling, (0.02, 0.05), Window(0.9, 1.1, -0.05, -1e-6))
    with pytest.raises(ValueError):
        dc_sweep(coupling, (), Window(0.9, 1.1, -0.05, -1e-6))
    with pytest.raises(ValueError):
        dc_sweep(FormFactor.zero(), (0.05,), Window(0.9, 1.1, -0.05, -1e-6))


def test_ac_sweep_small(coupling):
    res = ac_sweep(coupling, (0.1, 0.05, 0.02), omega=1.0, theta=0.3j,
                   target=None, tol=1e-9, n_fourier=4, n_hermite=40)
    assert res.mode == "ac"
    # reference is the field-free eigenvalue; the trajectory closes on it
    traj = res.trajectories[0]
    assert traj[-1].f == 0.0
    dists = [abs(p.z - res.reference) for p in traj[:-1]]
    assert dists[0] > dists[1] > dists[2]
    assert res.flags["converging_to_reference"]
    assert res.flags["ac_stable"]
    assert len(res.sensitivities) == 4
