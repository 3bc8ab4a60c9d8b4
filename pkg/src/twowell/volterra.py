"""Time-marching of the discretized charge equations.

For wells y_1 = -a and y_2 = +a the charges q_i(t) = psi(t, y_i) satisfy

    q_i + k_i int_0^t g_i(s) (t-s)^(-1/2) ds
        + k_j int_0^t g_j(s) (t-s)^(-1/2) exp(i a^2/(t-s)) ds = theta_i(t),

with g = q |q|^(2 sigma), k_i = (gamma_i/2) sqrt(i/pi), j the other well and
theta_i the free evolution of psi_0 at y_i.  The Abel integral is treated
implicitly through its last cell; the nonlinearity there is linearized and
iterated to a fixed point.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import quadrature as qd
from .errors import Blowup, DegenerateInitialData
from .quadrature import TimeGrid

HO_METHODS = ("ipp", "quasianalytic")


@dataclass
class SolverSettings:
    fix_tol: float = 1e-3
    max_iters: int = 10
    ho_method: str = "ipp"
    blowup_threshold: float = 1e6
    relative_tol: bool = False
    nonconvergence_limit: int = 3

    def __post_init__(self):
        if not self.fix_tol > 0:
            raise ValueError("fix_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.ho_method not in HO_METHODS:
            raise ValueError(f"ho_method must be one of {HO_METHODS}")


@dataclass
class ChargeTrajectory:
    grid: TimeGrid
    q1: np.ndarray
    q2: np.ndarray
    iterations: np.ndarray
    couplings: tuple
    sigma: float
    nonconverged: int = 0
    blowup: tuple | None = None
    meta: dict = field(default_factory=dict)

    @property
    def t(self):
        return self.grid.nodes[: self.q1.size]

    @property
    def abs2(self):
        return np.abs(self.q1) ** 2, np.abs(self.q2) ** 2


def kappa(gamma):
    """Coupling constant (gamma/2) sqrt(i/pi), principal branch."""
    return gamma / 2 * np.sqrt(1j / np.pi)


def nonlinear_gamma_from_linear(gamma_lin, psi0_left, psi0_right, sigma):
    """gamma = 2 gamma_lin / (|psi0(a)|^(2 sigma) + |psi0(-a)|^(2 sigma))."""
    ml, mr = abs(psi0_left), abs(psi0_right)
    if ml == 0 and mr == 0:
        raise DegenerateInitialData("initial state vanishes at both wells")
    return 2 * gamma_lin / (ml ** (2 * sigma) + mr ** (2 * sigma))


def couplings_for(cfg, psi0_left, psi0_right):
    """Strengths (gamma_1, gamma_2) that multiply |q_i|^(2 sigma) in the run."""
    if cfg.sigma == 0:
        return (cfg.gamma1, cfg.gamma2)
    if cfg.gamma is not None:
        return (cfg.gamma, cfg.gamma)
    return tuple(nonlinear_gamma_from_linear(g, psi0_left, psi0_right, cfg.sigma)
                 for g in (cfg.gamma1, cfg.gamma2))


class _Marcher:
    """Holds the tables shared by every step of one run."""

    def __init__(self, cfg, grid: TimeGrid, source, settings: SolverSettings, couplings):
        self.cfg, self.grid, self.source, self.settings = cfg, grid, source, settings
        self.sigma = cfg.sigma
        self.k = np.array([kappa(couplings[0]), kappa(couplings[1])])
        self.k_other = self.k[::-1]
        K = grid.K
        tab = qd.GaussAbelTable.build(K)
        self.abel = tab
        self.coef = qd.abel_implicit_coeff(grid)
        a = cfg.a
        if settings.ho_method == "ipp":
            self.kernel = qd.ipp_kernel(a * a, grid)
        else:
            self.cells = qd.osc_cells_analytic(a, grid)
            self.c_cur = qd.quasianalytic_current_coeff(self.cells)
        self.q = np.zeros((2, K), complex)
        self.g = np.zeros((2, K), complex)
        self.iters = np.zeros(K, int)
        q0 = source.at(0)
        self.q[:, 0] = q0
        self.g[:, 0] = self._nl(q0)
        self.nonconv_run = 0
        self.nonconv_total = 0

    def _nl(self, q):
        if self.sigma == 0:
            return q
        return q * np.abs(q) ** (2 * self.sigma)

    def step(self, l):
        st = self.settings
        g = self.g[:, :l + 1]
        ab = qd.abel_history(g, self.grid, l, self.abel)
        if st.ho_method == "ipp":
            ho = qd.ho_ipp(g, self.cfg.a, self.grid, l, self.kernel)
            base = self.source.at(l) - self.k * ab - self.k_other * ho[::-1]
            ho_cur = None
        else:
            gz = g.copy()
            gz[:, l] = 0
            ho = qd.ho_quasianalytic(gz, self.cells, self.grid, l)
            base = self.source.at(l) - self.k * ab - self.k_other * ho[::-1]
            ho_cur = self.k_other * self.c_cur
        prev = self.q[:, l - 1].copy()
        lin = self.sigma == 0 and ho_cur is None
        converged = lin
        n = 0
        for n in range(1, st.max_iters + 1):
            rhs = base if ho_cur is None else base - ho_cur * self._nl(prev)[::-1]
            new = rhs / (1 + self.k * self.coef * np.abs(prev) ** (2 * self.sigma))
            diff = np.abs(new - prev)
            if st.relative_tol:
                diff = diff / np.maximum(np.abs(new), 1e-300)
            prev = new
            if lin or np.all(diff < st.fix_tol):
                converged = True
                break
        self.q[:, l] = prev
        self.g[:, l] = self._nl(prev)
        self.iters[l] = n
        if converged:
            self.nonconv_run = 0
        else:
            self.nonconv_run += 1
            self.nonconv_total += 1
        return prev, n, converged


def solve(cfg, grid: TimeGrid, source, settings: SolverSettings | None = None,
          couplings=None) -> ChargeTrajectory:
    """March l = 1..K-1 and return the charge trajectory.

    Raises Blowup (carrying the truncated trajectory) when |q|^2 passes
    ``blowup_threshold`` or the fixed point fails ``nonconvergence_limit``
    steps in a row.
    """
    settings = settings or SolverSettings()
    if couplings is None:
        q0 = source.at(0)
        couplings = couplings_for(cfg, q0[0], q0[1])
    m = _Marcher(cfg, grid, source, settings, couplings)
    for l in range(1, grid.K):
        q, n, ok = m.step(l)
        reason = None
        if not np.all(np.isfinite(q)) or np.any(np.abs(q) ** 2 > settings.blowup_threshold):
            reason = "threshold"
        elif m.nonconv_run >= settings.nonconvergence_limit:
            reason = "nonconvergence"
        if reason:
            traj = _pack(m, grid, l + 1, couplings, cfg.sigma, (l, reason))
            if cfg.sigma < 1:
                warnings.warn(f"blow-up guard tripped at step {l} for sigma={cfg.sigma} < 1",
                              RuntimeWarning, stacklevel=2)
            raise Blowup(l, reason, traj)
    return _pack(m, grid, grid.K, couplings, cfg.sigma, None)


def _pack(m, grid, n, couplings, sigma, blowup):
    return ChargeTrajectory(grid, m.q[0, :n].copy(), m.q[1, :n].copy(), m.iters[:n].copy(),
                            tuple(couplings), sigma, m.nonconv_total, blowup)


def step(l, history, source, settings, cfg, couplings=None):
    """Single fixed-point step at node l given q_0..q_{l-1} (shape (2, >=l)).

    Convenience wrapper around the marcher used by ``solve``; returns
    (q1_l, q2_l, iterations).
    """
    history = np.asarray(history, complex)
    grid = source.grid
    if couplings is None:
        couplings = couplings_for(cfg, history[0, 0], history[1, 0])
    m = _Marcher(cfg, grid, source, settings, couplings)
    m.q[:, :l] = history[:, :l]
    m.g[:, :l] = m._nl(history[:, :l])
    q, n, _ = m.step(l)
    return q[0], q[1], n


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class BeatingMetrics:
    transfer_fraction: float
    first_max_time: float
    contrast: float


def beating_metrics(traj: ChargeTrajectory) -> BeatingMetrics:
    """Transfer max|q2|^2/max|q1|^2, time of the first peak of |q2|^2, contrast of |q1|^2.

    Peaks below the mid-level of |q2|^2 are ignored when locating the first one.
    """
    p1, p2 = traj.abs2
    t = traj.t
    transfer = float(p2.max() / p1.max())
    mid = 0.5 * (p2.max() + p2.min())
    c = p2[1:-1]
    interior = np.nonzero((c > p2[:-2]) & (c >= p2[2:]) & (c > mid))[0]
    first = float(t[interior[0] + 1]) if interior.size else float(t[np.argmax(p2)])
    hi, lo = p1.max(), p1.min()
    contrast = float((hi - lo) / (hi + lo)) if hi + lo > 0 else 0.0
    return BeatingMetrics(transfer, first, contrast)


def beating_period(t, y):
    """Twice the time of the first deep interior minimum of y, parabola-refined.

    Suited to a beating that starts at a maximum (left-concentrated start).
    Only minima below the mid-level (max + min)/2 count, so quadrature
    ripples near t = 0 are skipped.
    """
    y = np.asarray(y)
    mid = 0.5 * (y.max() + y.min())
    c = y[1:-1]
    idx = np.nonzero((c < y[:-2]) & (c <= y[2:]) & (c < mid))[0]
    if idx.size == 0:
        raise ValueError("no interior minimum in the series")
    i = idx[0] + 1
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    h = t[1] - t[0]
    den = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / den if den != 0 else 0.0
    return 2 * (t[i] + shift * h)


def relative_error(num, exact):
    """|num - exact| / max|exact| pointwise, for |q|^2 series."""
    exact = np.asarray(exact)
    return np.abs(np.asarray(num) - exact) / np.max(np.abs(exact))


@dataclass(frozen=True)
class RefinementReport:
    dts: tuple
    peaks: tuple
    peak_times: tuple
    diverging: bool
    finest: ChargeTrajectory | None = None


def refinement_divergence(run, dt, T, levels=(4, 2, 1), growth_floor=0.05) -> RefinementReport:
    """Flag finite-time singular growth from the behaviour of the peak under refinement.

    ``run(dt, T)`` must return a ChargeTrajectory.  With peaks P at
    dt*levels (coarse to fine) and increments d1, d2, the run is flagged when
    both increments are positive, the finer one is not smaller, and it
    exceeds ``growth_floor`` of the finest peak: a convergent peak shrinks
    its increments geometrically, a singular one does not.
    """
    peaks, times, dts = [], [], []
    tr = None
    for f in levels:
        h = dt * f
        try:
            tr = run(h, T)
        except Blowup as exc:
            tr = exc.trajectory
        p = np.maximum(*tr.abs2)
        j = int(np.argmax(p))
        peaks.append(float(p[j]))
        times.append(float(tr.t[j]))
        dts.append(h)
    d1 = peaks[-2] - peaks[-3]
    d2 = peaks[-1] - peaks[-2]
    div = d1 > 0 and d2 > 0 and d2 >= d1 and d2 >= growth_floor * peaks[-1]
    return RefinementReport(tuple(dts), tuple(peaks), tuple(times), bool(div), tr)


def solve_guarded(cfg, dt, T, make_source, settings: SolverSettings | None = None,
                  levels=(4, 2, 1)) -> ChargeTrajectory:
    """Solve at ``dt`` and also run the refinement-divergence check for sigma > 0.

    ``make_source(grid)`` builds the SourceSeries for a grid.  A flagged run
    raises Blowup with reason "refinement" at the index of the finest peak,
    carrying the finest trajectory truncated there.  Linear runs skip the
    check and cost a single solve.
    """
    settings = settings or SolverSettings()

    def run(h, T_):
        grid = TimeGrid.from_dt(h, T_)
        return solve(cfg, grid, make_source(grid), settings)

    if cfg.sigma == 0:
        return run(dt, T)
    rep = refinement_divergence(run, dt, T, levels)
    tr = rep.finest
    if rep.diverging:
        p = np.maximum(*tr.abs2)
        j = int(np.argmax(p))
        cut = ChargeTrajectory(tr.grid, tr.q1[:j + 1], tr.q2[:j + 1], tr.iterations[:j + 1],
                               tr.couplings, tr.sigma, tr.nonconverged, (j, "refinement"),
                               {"refinement_peaks": rep.peaks, "refinement_dts": rep.dts})
        raise Blowup(j, "refinement", cut)
    tr.meta.update(refinement_peaks=rep.peaks, refinement_dts=rep.dts)
    return tr
