"""Charge-equation marcher: exact linear beating as oracle, plus structural properties."""
import warnings

import numpy as np
import pytest

from twowell import propagator as pr
from twowell import spectral
from twowell import volterra as vt
from twowell.errors import Blowup, DegenerateInitialData
from twowell.quadrature import TimeGrid
from twowell.spectral import WellConfig


def para(sigma=0.0, alpha=0.1, beta=np.sqrt(0.99)):
    return WellConfig(a=3.0, gamma1=-0.5, gamma2=-0.5, sigma=sigma, alpha=alpha, beta=beta)


def run(cfg, T, dt, **kw):
    pair = spectral.solve(cfg)
    grid = TimeGrid.from_dt(dt, T)
    return pair, vt.solve(cfg, grid, pr.source_analytic(cfg, pair, grid), vt.SolverSettings(**kw))


def exact_abs2(cfg, pair, t):
    ref = spectral.beating_reference(cfg, pair)
    return np.abs(ref.q1(t)) ** 2, np.abs(ref.q2(t)) ** 2


def test_settings_validation():
    with pytest.raises(ValueError):
        vt.SolverSettings(fix_tol=0)
    with pytest.raises(ValueError):
        vt.SolverSettings(max_iters=0)
    with pytest.raises(ValueError):
        vt.SolverSettings(ho_method="filon")


def test_kappa():
    assert vt.kappa(-2.0) == pytest.approx(-np.exp(1j * np.pi / 4) / np.sqrt(np.pi))


def test_initial_identity_and_single_iteration_linear():
    cfg = para()
    pair, tr = run(cfg, 5.0, 0.05)
    psi0 = spectral.initial_state(cfg, pair)
    assert abs(tr.q1[0] - psi0(-3.0)) < 1e-12 and abs(tr.q2[0] - psi0(3.0)) < 1e-12
    assert np.all(tr.iterations[1:] == 1)


@pytest.mark.parametrize("method", ["ipp", "quasianalytic"])
def test_linear_beating_matches_exact(method):
    cfg = para()
    pair = spectral.solve(cfg)
    grid = TimeGrid(T=pair.period, K=2001)
    tr = vt.solve(cfg, grid, pr.source_analytic(cfg, pair, grid), vt.SolverSettings(ho_method=method))
    e1, e2 = exact_abs2(cfg, pair, tr.t)
    p1, p2 = tr.abs2
    err = max(vt.relative_error(p1, e1).max(), vt.relative_error(p2, e2).max())
    assert err < 0.05
    assert abs(vt.beating_period(tr.t, p1) / pair.period - 1) < 0.02


def test_linear_error_decreases_under_refinement():
    cfg = para()
    pair = spectral.solve(cfg)
    errs = []
    for K in (251, 501, 1001):
        grid = TimeGrid(T=pair.period / 2, K=K)
        tr = vt.solve(cfg, grid, pr.source_analytic(cfg, pair, grid))
        e1, _ = exact_abs2(cfg, pair, tr.t)
        errs.append(vt.relative_error(tr.abs2[0], e1).max())
    assert errs[0] > errs[1] > errs[2]


def test_step_matches_solve():
    cfg = para(sigma=0.6)
    pair = spectral.solve(cfg)
    grid = TimeGrid.from_dt(0.01, 1.0)
    src = pr.source_analytic(cfg, pair, grid)
    st = vt.SolverSettings()
    tr = vt.solve(cfg, grid, src, st)
    hist = np.vstack([tr.q1, tr.q2])
    q1, q2, n = vt.step(40, hist, src, st, cfg, tr.couplings)
    assert q1 == tr.q1[40] and q2 == tr.q2[40] and n == tr.iterations[40]


@pytest.mark.parametrize("sigma", [0.0, 0.6])
def test_exchange_symmetry(sigma):
    cfg = para(sigma=sigma, alpha=1.0, beta=0.0)
    _, tr = run(cfg, 10.0, 0.01)
    assert np.max(np.abs(np.abs(tr.q1) - np.abs(tr.q2))) < 1e-10


def test_determinism():
    cfg = para(sigma=0.6)
    _, a = run(cfg, 3.0, 0.01)
    _, b = run(cfg, 3.0, 0.01)
    assert np.array_equal(a.q1, b.q1) and np.array_equal(a.q2, b.q2)


def test_fix_tol_halving_is_small():
    cfg = para(sigma=0.6)
    _, a = run(cfg, 5.0, 0.005, fix_tol=1e-3)
    _, b = run(cfg, 5.0, 0.005, fix_tol=5e-4)
    assert max(np.max(np.abs(a.abs2[i] - b.abs2[i])) for i in range(2)) < 1e-2


def test_sigma_03_iterations_bounded():
    _, tr = run(para(sigma=0.3), 50.0, 5e-3)
    assert tr.iterations.max() <= 10 and tr.nonconverged == 0


def test_nonlinear_gamma_rules():
    assert vt.nonlinear_gamma_from_linear(-0.5, 0.3, 0.7, 0.0) == -0.5
    assert vt.nonlinear_gamma_from_linear(-0.5, 0.4, 0.4, 0.6) == pytest.approx(-0.5 / 0.4 ** 1.2)
    cfg = para(sigma=0.6)
    pair = spectral.solve(cfg)
    psi0 = spectral.initial_state(cfg, pair)
    l, r = float(psi0(-3.0)), float(psi0(3.0))
    want = 2 * -0.5 / (abs(r) ** 1.2 + abs(l) ** 1.2)
    assert vt.couplings_for(cfg, l, r) == pytest.approx((want, want), rel=1e-15)
    with pytest.raises(DegenerateInitialData):
        vt.nonlinear_gamma_from_linear(-0.5, 0.0, 0.0, 0.5)


def test_explicit_nonlinear_gamma_is_used():
    cfg = WellConfig(a=3.0, gamma1=-0.5, gamma2=-0.5, sigma=0.5, gamma=-0.7)
    assert vt.couplings_for(cfg, 0.2, 0.2) == (-0.7, -0.7)


def test_beating_metrics_exact_signals():
    cfg = para(alpha=np.sqrt(0.5), beta=np.sqrt(0.5))
    pair = spectral.solve(cfg)
    grid = TimeGrid(T=pair.period, K=4001)
    ref = spectral.beating_reference(cfg, pair)
    tr = vt.ChargeTrajectory(grid, ref.q1(grid.nodes), ref.q2(grid.nodes), np.ones(grid.K, int), (-0.5, -0.5), 0.0)
    m = vt.beating_metrics(tr)
    assert m.transfer_fraction == pytest.approx(1.0, abs=1e-3)
    assert m.first_max_time == pytest.approx(pair.period / 2, rel=1e-3)
    assert vt.beating_period(tr.t, tr.abs2[0]) == pytest.approx(pair.period, rel=1e-6)
    cfg0 = para(alpha=1.0, beta=0.0)
    ref0 = spectral.beating_reference(cfg0, pair)
    tr0 = vt.ChargeTrajectory(grid, ref0.q1(grid.nodes), ref0.q2(grid.nodes), np.ones(grid.K, int), (-0.5, -0.5), 0.0)
    assert vt.beating_metrics(tr0).contrast < 1e-12


def test_threshold_blowup_carries_trajectory():
    cfg = para(sigma=0.6)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        with pytest.raises(Blowup) as exc:
            run(cfg, 10.0, 0.01, blowup_threshold=0.02)
    e = exc.value
    assert e.reason == "threshold" and e.trajectory.q1.size == e.index + 1
    assert np.max(np.abs(e.trajectory.q1[-1:]) ** 2 + np.abs(e.trajectory.q2[-1:]) ** 2) > 0.02
    assert any(issubclass(x.category, RuntimeWarning) for x in w)


def test_repeated_nonconvergence_escalates():
    cfg = para(sigma=0.9)
    with pytest.raises(Blowup) as exc, pytest.warns(RuntimeWarning):
        run(cfg, 5.0, 0.05, fix_tol=1e-15, max_iters=1)
    assert exc.value.reason == "nonconvergence"


def test_refinement_guard_flags_only_singular_growth():
    def guarded(sigma):
        cfg = para(sigma=sigma)
        pair = spectral.solve(cfg)
        return vt.solve_guarded(cfg, 5e-3, 50.0, lambda g: pr.source_analytic(cfg, pair, g))

    tr = guarded(0.9)
    assert tr.blowup is None and len(tr.meta["refinement_peaks"]) == 3
    with pytest.raises(Blowup) as exc:
        guarded(0.98)
    assert exc.value.reason == "refinement" and 0 < exc.value.trajectory.t[-1] < 50
