"""Acceptance criteria 1-9, one printed PASS/FAIL line each.

Tolerances are pinned to the acceptance bounds.  Criteria that
the model does not meet fail here with the measured numbers printed; the
blocking analysis for each is recorded in the project decisions ledger.
"""
import time
import warnings

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from twowell import cli
from twowell import propagator as pr
from twowell import quadrature as qd
from twowell import spectral
from twowell import volterra as vt
from twowell.errors import Blowup
from twowell.quadrature import TimeGrid
from twowell.spectral import WellConfig


def report(capsys, n, ok, msg):
    with capsys.disabled():
        print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} - {msg}")
    assert ok, msg


def preset_cfg(name, sigma=None):
    return cli.build_scenario(name, None, {"sigma": sigma})


def osc_reference(g, b, t):
    """int_0^t g(s) (t-s)^(-1/2) exp(i b/(t-s)) ds by QUADPACK's Fourier routine after v = 1/(t-s)."""
    v0 = 1 / t
    f = lambda u: g(t - 1 / (v0 + u)) * (v0 + u) ** -1.5
    parts = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        for w in ("cos", "sin"):
            parts.append(quad(f, 0, np.inf, weight=w, wvar=b, epsabs=1e-13, limlst=200)[0])
    return np.exp(1j * b * v0) * (parts[0] + 1j * parts[1])


def test_criterion_1_spectral(capsys):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst_res, worst_rel = 0.0, 0.0
    for _ in range(50):
        a = rng.uniform(0.2, 6.0)
        g = -(1 / a) * rng.uniform(1.05, 20.0)
        s = spectral.solve_symmetric(g, a)
        worst_res = max(worst_res, abs(spectral.determinant_residual(s.lambda_ground, g, g, a)),
                        abs(spectral.determinant_residual(s.lambda_excited, g, g, a)))
        p = spectral.solve_asymmetric(g, g, a)
        ref = np.array([s.lambda_ground, s.lambda_excited, *s.coeffs])
        got = np.array([p.lambda_ground, p.lambda_excited, *p.coeffs])
        worst_rel = max(worst_rel, np.max(np.abs(got - ref) / np.abs(ref)))
    elapsed = time.perf_counter() - t0
    ok = worst_res < 1e-10 and worst_rel < 1e-10 and elapsed < 1.0
    report(capsys, 1, ok, f"max residual {worst_res:.2e}, asym/sym rel diff {worst_rel:.2e}, {elapsed:.2f} s")


def test_criterion_2_quadrature(capsys):
    t0 = time.perf_counter()
    grid = TimeGrid(T=1.0, K=51)
    l = 50
    aff = 0.7 - 1.3 * grid.nodes
    val = qd.abel_history(aff, grid, l) + qd.abel_implicit_coeff(grid) * aff[l]
    aff_err = abs(val - (0.7 * 2 - 1.3 * 4 / 3))
    errs, dts = [], []
    for K in (11, 21, 41, 81, 161):
        g = TimeGrid(T=1.0, K=K)
        s2 = g.nodes ** 2
        errs.append(abs(qd.abel_history(s2, g, K - 1) + qd.abel_implicit_coeff(g) * s2[-1] - 16 / 15))
        dts.append(g.dt)
    abel_order = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    ref = osc_reference(lambda s: 1.0, 1.0, 1.0)
    g = TimeGrid(T=1.0, K=1001)
    qa_err = abs(qd.ho_quasianalytic(np.ones(g.K), qd.osc_cells_analytic(1.0, g), g, g.K - 1) - ref)
    errs, dts = [], []
    for K in (101, 201, 401, 801, 1601, 3201):
        g = TimeGrid(T=1.0, K=K)
        errs.append(abs(qd.ho_ipp(np.ones(K, complex), 1.0, g, K - 1) - ref))
        dts.append(g.dt)
    ipp_order = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    elapsed = time.perf_counter() - t0
    ok = aff_err < 1e-13 and abel_order >= 1.9 and qa_err < 1e-6 and ipp_order >= 0.9 and elapsed < 30
    report(capsys, 2, ok, f"affine err {aff_err:.1e}, Abel order {abel_order:.2f}, "
                          f"quasianalytic err {qa_err:.1e}, IPP order {ipp_order:.2f}, {elapsed:.1f} s")


def test_criterion_3_propagator(capsys):
    # analytic and FFT routes are compared on t = 0, 0.1, ..., 10
    t0 = time.perf_counter()
    grid = TimeGrid(T=10.0, K=101)
    worst, worst_ic = {}, 0.0
    for name in cli.PRESETS:
        sc = preset_cfg(name)
        cfg = sc.cfg
        pair = spectral.solve(cfg)
        sa = pr.source_analytic(cfg, pair, grid)
        space = pr.fft_space_grid(cfg.a, 6000.0, 2 ** 21)
        psi0 = spectral.initial_state(cfg, pair)
        sf = pr.source_fft(cfg, psi0(space.x), grid, space)
        worst[name] = max(np.max(np.abs(sa.rhs_left - sf.rhs_left)), np.max(np.abs(sa.rhs_right - sf.rhs_right)))
        want = np.array([psi0(-cfg.a), psi0(cfg.a)])
        worst_ic = max(worst_ic, np.max(np.abs(sa.at(0) - want)), np.max(np.abs(sf.at(0) - want)))
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) < 1e-5 and worst_ic < 1e-8 and elapsed < 60
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report(capsys, 3, ok, f"sup diff {detail}; t=0 err {worst_ic:.1e}; {elapsed:.1f} s")


def test_criterion_4_linear_beating(capsys):
    sc = preset_cfg("sym-linear")
    pair = spectral.solve(sc.cfg)
    grid = sc.grid
    tr = vt.solve(sc.cfg, grid, pr.source_analytic(sc.cfg, pair, grid), sc.settings)
    ref = spectral.beating_reference(sc.cfg, pair)
    p1, p2 = tr.abs2
    err = max(vt.relative_error(p1, np.abs(ref.q1(tr.t)) ** 2).max(),
              vt.relative_error(p2, np.abs(ref.q2(tr.t)) ** 2).max())
    period = vt.beating_period(tr.t, p1)
    perr = abs(period / pair.period - 1)
    ok = grid.dt <= pair.period / 2000 * (1 + 1e-12) and err <= 0.05 and perr <= 0.02
    report(capsys, 4, ok, f"dt = T_B/{pair.period / grid.dt:.0f}, sup rel err {err:.2%}, period err {perr:.2%}")


def test_criterion_5_asymmetric(capsys):
    b = preset_cfg("asym-B")
    pair = spectral.solve(b.cfg)
    tr = vt.solve(b.cfg, b.grid, pr.source_analytic(b.cfg, pair, b.grid), b.settings)
    (g1, g2), (e1, e2) = spectral.well_values(b.cfg, pair)
    # |q2|^2 = A^2 + B^2 + 2AB cos(dlambda t): oscillation amplitude 2|AB|
    amp2 = 2 * abs(b.cfg.alpha * g2 * b.cfg.beta * e2)
    amp1 = 2 * abs(b.cfg.alpha * g1 * b.cfg.beta * e1)
    ref = spectral.beating_reference(b.cfg, pair)
    p1, p2 = tr.abs2
    err = max(vt.relative_error(p1, np.abs(ref.q1(tr.t)) ** 2).max(),
              vt.relative_error(p2, np.abs(ref.q2(tr.t)) ** 2).max())
    a = preset_cfg("asym-A")
    pa = spectral.solve(a.cfg)
    ta = vt.solve(a.cfg, a.grid, pr.source_analytic(a.cfg, pa, a.grid), a.settings)
    transfer = vt.beating_metrics(ta).transfer_fraction
    amp_ok = 1e-8 <= amp2 <= 1e-6
    ok = amp_ok and err <= 0.15 and transfer < 0.5
    report(capsys, 5, ok, f"asym-B exact |q2|^2 amplitude {amp2:.1e} (order 1e-7 required; |q1|^2 amplitude "
                          f"{amp1:.1e}), numerical rel err {err:.1%}; asym-A transfer {transfer:.3f}")


def _ladder_run(sigma, T=50.0, dt=5e-3):
    sc = preset_cfg("nl-sigma" if sigma else "sym-linear", sigma if sigma else None)
    cfg = sc.cfg
    pair = spectral.solve(cfg)
    grid = TimeGrid.from_dt(dt, T)
    return vt.solve(cfg, grid, pr.source_analytic(cfg, pair, grid), sc.settings)


def test_criterion_6_nonlinear_ladder(capsys):
    tf = {s: vt.beating_metrics(_ladder_run(s)).transfer_fraction for s in (0.0, 0.3, 0.6, 0.9)}
    vals = list(tf.values())
    decreasing = all(x > y for x, y in zip(vals, vals[1:]))
    half = tf[0.9] < 0.5 * tf[0.0]
    detail = ", ".join(f"sigma={s}: {v:.3f}" for s, v in tf.items())
    report(capsys, 6, decreasing and half,
           f"transfer {detail}; strictly decreasing {decreasing}; sigma=0.9 below half linear {half}")


def test_criterion_7_blowup(capsys):
    tripped = {}
    for s in (0.3, 0.6, 0.7, 0.8, 0.9):
        with warnings.catch_warnings():
            warnings.simplefilter("error", RuntimeWarning)
            try:
                tr = _ladder_run(s)
                tripped[s] = tr.t[-1] < 50.0 - 1e-9
            except (Blowup, RuntimeWarning):
                tripped[s] = True
    sc = preset_cfg("nl-sigma", 0.98)
    pair = spectral.solve(sc.cfg)
    blow = None
    try:
        vt.solve_guarded(sc.cfg, sc.dt, sc.T, lambda g: pr.source_analytic(sc.cfg, pair, g), sc.settings)
    except Blowup as exc:
        blow = exc
    ok = blow is not None and not any(tripped.values())
    where = "none" if blow is None else f"t = {blow.trajectory.t[-1]:.2f} ({blow.reason})"
    report(capsys, 7, ok, f"sigma=0.98 blow-up at {where}; sigma<=0.9 guard trips {sum(tripped.values())}")


def test_criterion_8_semiclassical(capsys):
    rows = spectral.delta_lambda_asymptotics(-4.0, np.linspace(1.0, 2.0, 11))
    slope = np.polyfit([r.a for r in rows], np.log([r.delta_lambda for r in rows]), 1)[0]
    ok = abs(slope - (-8.0)) <= 0.1 * 8.0
    report(capsys, 8, ok, f"log(dlambda) slope {slope:.3f} vs required -2|gamma| = -8 +- 10% "
                          f"(wells at -a, +a give -|gamma| = -4)")


def test_criterion_9_exchange_symmetry(capsys):
    worst = 0.0
    for sigma in (0.0, 0.6):
        cfg = WellConfig(a=3.0, gamma1=-0.5, gamma2=-0.5, sigma=sigma, alpha=1.0, beta=0.0)
        pair = spectral.solve(cfg)
        grid = TimeGrid.from_dt(0.01, 20.0)
        tr = vt.solve(cfg, grid, pr.source_analytic(cfg, pair, grid))
        worst = max(worst, np.max(np.abs(np.abs(tr.q1) - np.abs(tr.q2))))
    report(capsys, 9, worst < 1e-10, f"max ||q1| - |q2|| = {worst:.1e} over {grid.K} steps")
