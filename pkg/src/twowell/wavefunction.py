"""Full wavefunction from the charges and density/norm diagnostics.

With charges q_j and g_j = q_j |q_j|^(2 sigma) the solution off the wells is

    psi(t, x) = (U(t) psi_0)(x) - sum_j k_j int_0^t g_j(s) (t-s)^(-1/2)
                                       exp(i (x - y_j)^2 / (4 (t-s))) ds,

k_j = (gamma_j/2) sqrt(i/pi), which is the charge equation itself when x
sits on a well.  Each integral is the oscillatory kernel with phase
b = (x - y_j)^2/4 and is evaluated with the quadrature module.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quadrature as qd
from .propagator import SpaceGrid, free_evolution
from .volterra import ChargeTrajectory, kappa


@dataclass(frozen=True)
class FieldSnapshot:
    t: float
    xs: np.ndarray
    psi: np.ndarray

    @property
    def density(self):
        return np.abs(self.psi) ** 2

    @property
    def l2norm(self) -> float:
        return float(np.sqrt(np.trapezoid(self.density, self.xs)))


IPP_MIN_PHASE = 4.0


def _ipp_ok(b, dt, b_min=IPP_MIN_PHASE):
    # the boundary term carries 1/b and the trapezoid part sees an
    # under-resolved chirp for small b: use the closed-form cells there
    return b >= max(b_min, 4 * np.pi * dt)


def duhamel_integral(g, b, grid, l, method="auto"):
    """int_0^{t_l} g(s) (t_l-s)^(-1/2) exp(i b/(t_l-s)) ds for one phase b >= 0.

    ``method`` is "ipp", "quasianalytic" or "auto" (ipp when b is large
    enough, closed-form cells otherwise).
    """
    if l == 0:
        return 0j
    if b == 0:
        return complex(qd.ho_general(g, 0.0, grid, l))
    if method == "auto":
        method = "ipp" if _ipp_ok(b, grid.dt) else "quasianalytic"
    return complex(qd.ho_general(g, b, grid, l, method))


def reconstruct(traj: ChargeTrajectory, cfg, source_field, l, xs, method="auto") -> FieldSnapshot:
    """psi(t_l, xs) from the trajectory and the free evolution ``source_field`` on xs.

    ``method`` applies to the oscillatory terms; passing the scheme that
    produced ``traj`` makes the values at x = -a, +a reproduce q_1, q_2
    up to the difference between the supplied free field and the source
    used by the solver.
    """
    xs = np.asarray(xs, dtype=float)
    psi = np.array(source_field, dtype=complex, copy=True)
    if psi.shape != xs.shape:
        raise ValueError("source_field and xs differ in shape")
    if l >= traj.q1.size:
        raise IndexError(f"trajectory has no node {l}")
    grid = traj.grid
    sig = traj.sigma
    for q, y, gam in ((traj.q1, -cfg.a, traj.couplings[0]), (traj.q2, cfg.a, traj.couplings[1])):
        g = q[: l + 1] * np.abs(q[: l + 1]) ** (2 * sig)
        k = kappa(gam)
        if k == 0:
            continue
        for i, x in enumerate(xs):
            b = 0.25 * (x - y) ** 2
            psi[i] -= k * duhamel_integral(g, b, grid, l, method)
    return FieldSnapshot(float(grid.nodes[l]), xs, psi)


def window_indices(space: SpaceGrid, half_width, stride=1):
    """Indices of the FFT grid inside [-half_width, half_width], every ``stride``-th."""
    x = space.x
    idx = np.nonzero(np.abs(x) <= half_width)[0]
    c = space.N // 2
    keep = idx[(idx - c) % stride == 0]
    wells = [j for j in (c - space.m, c + space.m) if abs(x[j]) <= half_width]
    return np.union1d(keep, wells)


def snapshots(traj: ChargeTrajectory, cfg, psi0_samples, space: SpaceGrid, ls, half_width,
              stride=1, method="auto"):
    """Reconstruct at the nodes ``ls`` on a window of the FFT grid."""
    idx = window_indices(space, half_width, stride)
    xs = space.x[idx]
    out = []
    for l in ls:
        free = free_evolution(psi0_samples, space, traj.grid.nodes[l])[idx]
        out.append(reconstruct(traj, cfg, free, l, xs, method))
    return out


def norm_series(snaps) -> np.ndarray:
    return np.array([s.l2norm for s in snaps])
