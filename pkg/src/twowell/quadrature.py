"""Kernel discretizations on a homogeneous time grid.

Two kernels appear in the charge equations:

* the Abel kernel (t-s)^(-1/2), handled by product integration with a
  one-point singular-weight Gauss rule on every cell;
* the oscillatory kernel (t-s)^(-1/2) exp(i b/(t-s)), handled either by
  closed-form cell integrals of a piecewise linear charge
  ("quasianalytic") or by a trapezoid sum on the smooth part plus one
  integration-by-parts boundary term ("ipp").

Indices are 0-based: node j sits at t_j = j*dt and ``l`` is the index of
the node whose integral is requested.  Charge sequences ``g`` hold
g_0 ... g_l (or at least g_0 ... g_{l-1} where noted).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BranchInconsistency
from .specfun import erf_complex

SQRT_MI = np.sqrt(-1j + 0j)     # principal sqrt(-i) = exp(-i pi/4)
SQRT_I = np.sqrt(1j)            # exp(i pi/4)
SQRT_PI = np.sqrt(np.pi)


@dataclass(frozen=True)
class TimeGrid:
    """Nodes t_j = j*dt, j = 0..K-1, with dt = T/(K-1)."""

    T: float
    K: int

    def __post_init__(self):
        if self.K < 2 or not self.T > 0:
            raise ValueError("TimeGrid needs K >= 2 and T > 0")

    @classmethod
    def from_dt(cls, dt, T):
        K = int(round(T / dt)) + 1
        return cls(T=(K - 1) * dt, K=K)

    @property
    def dt(self) -> float:
        return self.T / (self.K - 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.dt * np.arange(self.K)


# ---------------------------------------------------------------------------
# Abel kernel


def gauss_abel(r):
    """Weight and node of the one-point rule for int_0^1 f(eta) (r-eta)^(-1/2) deta.

    w = 2(sqrt r - sqrt(r-1)) and xi = first moment / w, both written in
    forms that avoid cancellation for large r.
    """
    r = np.asarray(r, dtype=float)
    s, p = np.sqrt(r), np.sqrt(r - 1)
    w = 2 / (s + p)
    xi = (1 + r / (r + s * p)) / 3
    if w.ndim == 0:
        return float(w), float(xi)
    return w, xi


@dataclass(frozen=True)
class GaussAbelTable:
    """w(r), xi(r) for r = 1..K-1 stored at index r-1."""

    w: np.ndarray
    xi: np.ndarray

    @classmethod
    def build(cls, K):
        w, xi = gauss_abel(np.arange(1, max(K, 2)))
        return cls(np.atleast_1d(w), np.atleast_1d(xi))

    @property
    def size(self):
        return self.w.size


def abel_history(g, grid: TimeGrid, l: int, table: GaussAbelTable | None = None):
    """Explicit part of the Abel rule at node l (everything except the g_l term).

    Works on the last axis of ``g`` so both charges can be processed at once.
    """
    g = np.asarray(g)
    if l < 1 or g.shape[-1] < l:
        raise IndexError(f"need g_0..g_{l - 1}, got {g.shape[-1]} values")
    if table is None or table.size < l:
        table = GaussAbelTable.build(l + 1)
    # cell k = 0..l-1 has r = l - k, i.e. table index l-1-k
    w = table.w[l - 1::-1] if l > 1 else table.w[:1]
    xi = table.xi[l - 1::-1] if l > 1 else table.xi[:1]
    left = np.dot(g[..., :l], w * (1 - xi))
    right = np.dot(g[..., 1:l], w[:-1] * xi[:-1])
    return np.sqrt(grid.dt) * (left + right)


def abel_implicit_coeff(grid: TimeGrid, l: int = 1) -> float:
    """Coefficient of g_l in the Abel rule: sqrt(dt) w(1) xi(1) = (4/3) sqrt(dt)."""
    return 4.0 / 3.0 * np.sqrt(grid.dt)


# ---------------------------------------------------------------------------
# oscillatory kernel: closed-form cells


def _F23(xi, a):
    """Antiderivatives of exp(i a^2/xi^2) and xi^2 exp(i a^2/xi^2), sharing one erf.

    The xi -> 0 limits are filled in explicitly.
    """
    xi = np.asarray(xi, dtype=float)
    b = a * a
    c2 = SQRT_MI * SQRT_PI * a
    c3 = 2.0 / 3.0 * a ** 3 * SQRT_PI * SQRT_I
    f2 = np.full(xi.shape, c2, dtype=complex)
    f3 = np.full(xi.shape, c3, dtype=complex)
    m = xi > 0
    x = xi[m]
    e = np.exp(1j * b / (x * x))
    erf = erf_complex(SQRT_MI * a / x)
    f2[m] = x * e + c2 * erf
    f3[m] = (x ** 3 / 3 + 2j * b / 3 * x) * e + c3 * erf
    return f2, f3


def _F2(xi, a):
    return _F23(xi, a)[0]


def _F3(xi, a):
    return _F23(xi, a)[1]


@dataclass(frozen=True)
class OscCellTable:
    """Cell integrals for the oscillatory kernel with phase b = a^2.

    I2[r-1] = int over cell r of (t_l-s)^(-1/2) e^{ib/(t_l-s)} ds and
    I3[r-1] the same with (t_l-s)^(+1/2); cell r spans [t_l - r dt, t_l - (r-1) dt].
    They depend on l only through r, so one table serves every step.
    """

    b: float
    dt: float
    I2: np.ndarray
    I3: np.ndarray

    def check_modulus(self, slack=1e-12):
        r = np.arange(1, self.I2.size + 1)
        bound = 2 * (np.sqrt(r * self.dt) - np.sqrt((r - 1) * self.dt))
        # each cell is a difference of antiderivatives of size ~ sqrt(r dt) + a,
        # so rounding adds an absolute error of that order times eps
        scale = np.sqrt(r * self.dt) + np.sqrt(self.b)
        bad = np.abs(self.I2) > bound * (1 + slack) + 64 * np.finfo(float).eps * scale
        if np.any(bad):
            k = int(np.argmax(bad))
            raise BranchInconsistency(f"|I2| exceeds its bound in cell r={k + 1}")
        return self


def osc_cells_analytic(a, grid: TimeGrid, l: int | None = None) -> OscCellTable:
    """Closed-form I2/I3 cells for phase a^2, for r = 1..l (default K-1)."""
    n = grid.K - 1 if l is None else l
    dt = grid.dt
    D = np.sqrt(np.arange(n + 1) * dt)
    F2, F3 = _F23(D, a)
    I2 = 2 * (F2[1:] - F2[:-1])
    I3 = 2 * (F3[1:] - F3[:-1])
    return OscCellTable(a * a, dt, I2, I3).check_modulus()


def osc_full_interval(a, t):
    """int_0^t (t-s)^(-1/2) exp(i a^2/(t-s)) ds in closed form."""
    return complex(2 * (_F2(np.sqrt(t), a)[()] - _F2(0.0, a)[()]))


def quasianalytic_current_coeff(table: OscCellTable) -> complex:
    """Weight of g_l in ho_quasianalytic (the last cell's linear part)."""
    return complex((table.dt * table.I2[0] - table.I3[0]) / table.dt)


def ho_quasianalytic(g, table: OscCellTable, grid: TimeGrid, l: int):
    """Oscillatory integral at node l for piecewise linear g_0..g_l."""
    g = np.asarray(g)
    if l < 1:
        return np.zeros(g.shape[:-1], complex) if g.ndim > 1 else 0j
    I2 = table.I2[l - 1::-1] if l > 1 else table.I2[:1]
    I3 = table.I3[l - 1::-1] if l > 1 else table.I3[:1]
    dt = grid.dt
    tau = dt * (l - np.arange(l))          # t_l - t_k
    gk = g[..., :l]
    dg = (g[..., 1:l + 1] - gk) / dt
    return np.dot(dg, tau * I2 - I3) + np.dot(gk, I2)


# ---------------------------------------------------------------------------
# oscillatory kernel: trapezoid + integration by parts


def split_count(a, dt) -> int:
    """Number J of resolved oscillations: 5 dt ~ a^2/(pi J^2)."""
    return max(1, int(round(a / np.sqrt(5 * np.pi * dt))))


def ho_split_index(a, grid: TimeGrid, l: int) -> int:
    """Index N with t_N < s_J <= t_{N+1}, s_J = t_l - a^2/(J pi), clamped to [0, l-1]."""
    dt = grid.dt
    J = split_count(a, dt)
    sJ = l * dt - a * a / (J * np.pi)
    n = int(np.ceil(sJ / dt)) - 1
    # guard rounding at exact node hits
    if (n + 1) * dt < sJ:
        n += 1
    elif n >= 0 and n * dt >= sJ:
        n -= 1
    return min(max(n, 0), l - 1)


def ipp_kernel(b, grid: TimeGrid) -> np.ndarray:
    """exp(i b/tau)/sqrt(tau) at tau = r dt for r = 1..K-1 (index r-1)."""
    tau = grid.dt * np.arange(1, grid.K)
    return np.exp(1j * b / tau) / np.sqrt(tau)


def _ipp_core(g, b, dt, l, n, kernel=None):
    tau = dt * (l - np.arange(n + 1))
    if kernel is None:
        f = np.exp(1j * b / tau) / np.sqrt(tau)
    else:
        f = kernel[l - n - 1:l][::-1]
    gs = g[..., : n + 1]
    if n > 0:
        trap = dt * (np.dot(gs, f) - 0.5 * (gs[..., 0] * f[0] + gs[..., n] * f[n]))
    else:
        trap = 0j
    tn = tau[n]
    return trap + 1j / b * gs[..., n] * tn ** 1.5 * np.exp(1j * b / tn)


def ho_ipp(g, a, grid: TimeGrid, l: int, kernel=None):
    """Trapezoid on [t_0, t_N] plus (i/a^2) g_N (t_l-t_N)^(3/2) e^{ia^2/(t_l-t_N)}.

    Reads only g_0..g_{l-1}.  ``kernel`` may hold ipp_kernel(a**2, grid)
    to skip recomputing the exponentials.
    """
    g = np.asarray(g)
    if l < 1:
        return 0j
    n = ho_split_index(a, grid, l)
    return _ipp_core(g, a * a, grid.dt, l, n, kernel)


def ho_general(g, b, grid: TimeGrid, l: int, method="ipp", tables=None):
    """Kernel (t-s)^(-1/2) exp(i b/(t-s)) with b >= 0.

    b = 0 reduces to the Abel rule (including the g_l term); otherwise the
    chosen oscillatory scheme runs with a = sqrt(b).
    """
    if b < 0:
        raise ValueError("phase parameter b must be non-negative")
    g = np.asarray(g)
    if b == 0:
        ab = tables.get("abel") if tables else None
        return abel_history(g, grid, l, ab) + abel_implicit_coeff(grid, l) * g[..., l]
    a = np.sqrt(b)
    if method == "ipp":
        return ho_ipp(g, a, grid, l)
    if method == "quasianalytic":
        tab = tables.get("osc") if tables else None
        if tab is None or tab.I2.size < l or tab.b != b:
            tab = osc_cells_analytic(a, grid, l)
        return ho_quasianalytic(g, tab, grid, l)
    raise ValueError(f"unknown method {method!r}")
