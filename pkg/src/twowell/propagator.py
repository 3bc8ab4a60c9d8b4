"""Free Schroedinger evolution of the initial state, sampled at the wells.

Convention: i d/dt psi = -psi'' for the free flow, so a plane wave with
wavenumber nu picks up exp(-i nu^2 t).  For psi_0 = sum of c G(x - y) terms
the value of the free flow at a well reduces to the two chirp integrals

    I_A = int exp(-i nu^2 t) / (lambda + nu^2) d nu
    I_B = int cos(2 a nu) exp(-i nu^2 t) / (lambda + nu^2) d nu

which have closed forms in the scaled complementary error function.  A
second, independent route evolves sampled psi_0 with the FFT on a large
periodic box.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainTooSmall, InitialValueMismatch
from .quadrature import TimeGrid
from .specfun import erfc_scaled

TOL_IC = 1e-8


@dataclass
class SourceSeries:
    """Free evolution (U(t) psi_0)(-a) and (+a) on the nodes of ``grid``."""

    grid: TimeGrid
    rhs_left: np.ndarray
    rhs_right: np.ndarray

    def at(self, l):
        return np.array([self.rhs_left[l], self.rhs_right[l]])


# ---------------------------------------------------------------------------
# analytic route


def analytic_IA(lam, t):
    """I_A = (pi/sqrt(lam)) erfcx(sqrt(i lam t)); pi/sqrt(lam) at t = 0."""
    t = np.asarray(t, dtype=float)
    z = np.sqrt(1j * lam * t)
    out = np.pi / np.sqrt(lam) * erfc_scaled(z)
    return out[()] if np.ndim(out) == 0 else out


def analytic_IB(lam, a, t):
    """I_B = pi/(2 sqrt(lam)) e^{i a^2/t} [erfcx(z0 + u) + erfcx(z0 - u)].

    z0 = sqrt(i lam t) and u = a/sqrt(i t).  This is the two-erf form with
    the exp(+-2 sqrt(lam) a) prefactors folded into the scaled functions,
    so no overflow occurs for large a sqrt(lam).
    """
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(t.shape, dtype=complex)
    zero = t == 0
    out[zero] = np.pi * np.exp(-2 * np.sqrt(lam) * a) / np.sqrt(lam)
    tt = t[~zero]
    if tt.size:
        z0 = np.sqrt(1j * lam * tt)
        u = a / np.sqrt(1j * tt)
        out[~zero] = (np.pi / (2 * np.sqrt(lam)) * np.exp(1j * a * a / tt)
                      * (erfc_scaled(z0 + u) + erfc_scaled(z0 - u)))
    return out[0] if scalar else out


def source_analytic(cfg, pair, grid: TimeGrid, check=True) -> SourceSeries:
    """Sources for psi_0 = alpha phi_ground + beta phi_excited.

    A state c_L G(x+a) + c_R G(x-a) contributes (c_L I_A + c_R I_B)/(2 pi)
    at -a and (c_L I_B + c_R I_A)/(2 pi) at +a.
    """
    t = grid.nodes
    c0, c1, c2, c3 = pair.coeffs
    left = np.zeros(grid.K, complex)
    right = np.zeros(grid.K, complex)
    for w, lam, cl, cr in ((cfg.alpha, pair.lambda_ground, c0, c1),
                           (cfg.beta, pair.lambda_excited, c2, c3)):
        if w == 0:
            continue
        ia = analytic_IA(lam, t)
        ib = analytic_IB(lam, cfg.a, t)
        left += w * (cl * ia + cr * ib) / (2 * np.pi)
        right += w * (cl * ib + cr * ia) / (2 * np.pi)
    src = SourceSeries(grid, left, right)
    if check:
        _check_initial(cfg, pair, src)
    return src


def _check_initial(cfg, pair, src):
    from .spectral import initial_state

    psi0 = initial_state(cfg, pair)
    want = np.array([psi0(-cfg.a), psi0(cfg.a)], dtype=float)
    got = src.at(0)
    if np.max(np.abs(got - want)) > TOL_IC:
        raise InitialValueMismatch(f"source at t=0 is {got}, initial state gives {want}")


# ---------------------------------------------------------------------------
# FFT route


@dataclass(frozen=True)
class SpaceGrid:
    """Periodic grid x_j = (j - N/2) dx with the wells at index N/2 -+ m."""

    N: int
    dx: float
    m: int

    @property
    def x(self):
        return (np.arange(self.N) - self.N // 2) * self.dx

    @property
    def Lx(self):
        return 0.5 * self.N * self.dx

    @property
    def wavenumbers(self):
        # nu_k = omega k with omega = pi/Lx
        return 2 * np.pi * np.fft.fftfreq(self.N, self.dx)

    def index(self, x):
        return self.N // 2 + int(round(x / self.dx))

    def coarsened(self):
        return SpaceGrid(self.N // 2, 2 * self.dx, self.m // 2)


def fft_space_grid(a, Lx, N) -> SpaceGrid:
    """Grid of N points covering at least [-Lx, Lx) with -a and +a on nodes.

    dx = a/m with m even, so that the grid coarsened by two still carries
    the wells on nodes.
    """
    m = int(np.floor(a * N / (2 * Lx)))
    m -= m % 2
    if m < 2:
        raise ValueError("grid too coarse to resolve the well separation")
    return SpaceGrid(int(N), a / m, m)


def free_evolution(psi0_samples, space: SpaceGrid, t):
    """Full periodic field U(t) psi_0 on ``space`` at a single time."""
    f = np.fft.fft(np.asarray(psi0_samples, dtype=complex))
    return np.fft.ifft(f * np.exp(-1j * space.wavenumbers ** 2 * t))


def _well_series(psi0, space: SpaceGrid, t):
    """Values of U(t) psi_0 at the two well nodes for every t.

    Only two output points are needed, so the inverse transform is a pair
    of dot products per time; for uniform t the phase is advanced by
    repeated multiplication and re-synchronized every 32 steps.
    """
    N = space.N
    f = np.fft.fft(np.asarray(psi0, dtype=complex)) / N
    nu = space.wavenumbers
    jl, jr = N // 2 - space.m, N // 2 + space.m
    basis = np.vstack([f * np.exp(1j * nu * jl * space.dx),
                       f * np.exp(1j * nu * jr * space.dx)])
    nu2 = nu * nu
    out = np.empty((2, len(t)), complex)
    uniform = len(t) > 2 and np.allclose(np.diff(t), t[1] - t[0], rtol=1e-12, atol=0)
    step = np.exp(-1j * nu2 * (t[1] - t[0])) if uniform else None
    ph = None
    for i, ti in enumerate(t):
        if not uniform or i % 32 == 0:
            ph = np.exp(-1j * nu2 * ti)
        else:
            ph *= step
        out[:, i] = basis @ ph
    return out


def source_fft(cfg, psi0_samples, grid: TimeGrid, space: SpaceGrid, richardson=True,
               boundary_tol=1e-10) -> SourceSeries:
    """Sources from the FFT route on a periodic box.

    With ``richardson`` the computation is repeated on the grid coarsened
    by two (every other sample) and combined as (4 fine - coarse)/3, which
    removes the leading O(dx^2) error that the kinks of psi_0 at the wells
    feed into the sampled spectrum.
    """
    psi0 = np.asarray(psi0_samples, dtype=complex)
    if psi0.shape != (space.N,):
        raise ValueError("psi0 samples do not match the space grid")
    if max(abs(psi0[0]), abs(psi0[-1])) > boundary_tol:
        raise DomainTooSmall(f"|psi0| at the box edge is {max(abs(psi0[0]), abs(psi0[-1])):.3g}")
    if abs(space.m * space.dx - cfg.a) > 1e-12 * cfg.a:
        raise ValueError("wells are not on grid nodes")
    t = grid.nodes
    fine = _well_series(psi0, space, t)
    if richardson:
        coarse = _well_series(psi0[::2], space.coarsened(), t)
        fine = (4 * fine - coarse) / 3
    return SourceSeries(grid, fine[0], fine[1])
