"""Batch command-line front end.

    twowell spectrum   --preset sym-linear
    twowell simulate   --preset asym-B --out-dir runs/b
    twowell reconstruct --preset sym-linear --snapshots 0,48.6,97.2
    twowell converge   --preset sym-linear

Configuration is layered: preset, then a key = value file (--config), then
command-line flags.  Every run writes plot-ready CSV files and a key = value
metadata file into --out-dir.
"""
from __future__ import annotations

import argparse
import hashlib
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType

import numpy as np

from . import __version__
from . import propagator as pr
from . import spectral
from . import volterra as vt
from . import wavefunction as wf
from .errors import Blowup, ConfigError, NoTwoLevels, TwoWellError
from .quadrature import TimeGrid
from .spectral import WellConfig

EXIT_OK = 0
EXIT_CRASH = 1
EXIT_CONFIG = 2
EXIT_NO_TWO_LEVELS = 3
EXIT_BLOWUP = 4

SIGMA_LADDER = (0.3, 0.6, 0.7, 0.8, 0.9, 0.98)
_R2 = 1 / np.sqrt(2)

# T = "period" means one beating period of the linear spectrum and
# steps the number of steps per T when dt is not given.
PRESETS = MappingProxyType({
    "sym-linear": MappingProxyType(dict(
        a=3.0, gamma1=-0.5, gamma2=-0.5, alpha=np.sqrt(0.01), beta=np.sqrt(0.99),
        sigma=0.0, T="period", steps=2000)),
    "asym-A": MappingProxyType(dict(
        a=0.5, gamma1=-8.0, gamma2=-4.0, alpha=_R2, beta=_R2, sigma=0.0, T=10.0, dt=6.25e-4)),
    "asym-B": MappingProxyType(dict(
        a=5.0, gamma1=-10.0, gamma2=-4.0, alpha=_R2, beta=_R2, sigma=0.0, T=10.0, dt=2.5e-3)),
    "nl-sigma": MappingProxyType(dict(
        a=3.0, gamma1=-0.5, gamma2=-0.5, alpha=np.sqrt(0.01), beta=np.sqrt(0.99),
        sigma=0.3, T=50.0, dt=5e-3)),
})

_FLOAT_KEYS = {"a", "gamma1", "gamma2", "gamma", "sigma", "alpha", "beta", "dt",
               "fix_tol", "blowup_threshold", "Lx", "window"}
_INT_KEYS = {"steps", "max_iters", "N", "stride"}
_STR_KEYS = {"ho_method", "source", "refine_guard", "T"}
KNOWN_KEYS = _FLOAT_KEYS | _INT_KEYS | _STR_KEYS

DEFAULTS = MappingProxyType(dict(
    ho_method="ipp", fix_tol=1e-3, max_iters=10, blowup_threshold=1e6,
    source="analytic", refine_guard="on", Lx=3000.0, N=2 ** 18, window=40.0, stride=8))


def preset_hash(name) -> str:
    """Stable digest of a preset's parameters (17 significant digits)."""
    p = PRESETS[name]
    text = ";".join(f"{k}={v:.17g}" if isinstance(v, float) else f"{k}={v}" for k, v in sorted(p.items()))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class Scenario:
    name: str
    cfg: WellConfig
    T: float
    dt: float
    settings: vt.SolverSettings
    params: dict = field(default_factory=dict)

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid.from_dt(self.dt, self.T)


def read_config(path) -> dict:
    """Parse a flat key = value file; '#' starts a comment."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def _coerce(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        if k not in KNOWN_KEYS:
            raise ConfigError(f"unknown key {k!r}")
        try:
            if k in _FLOAT_KEYS:
                out[k] = None if v in (None, "none", "None") else float(v)
            elif k in _INT_KEYS:
                out[k] = int(v)
            elif k == "T" and v != "period":
                out[k] = float(v)
            else:
                out[k] = v
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {k}: {v!r}") from exc
    return out


def build_scenario(preset=None, config=None, overrides=None) -> Scenario:
    """Merge preset, config file entries and overrides into a Scenario."""
    params = dict(DEFAULTS)
    name = "custom"
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        params.update(PRESETS[preset])
        name = preset
    if config:
        params.update(_coerce(read_config(config)))
    params.update(_coerce({k: v for k, v in (overrides or {}).items() if v is not None}))
    missing = [k for k in ("a", "gamma1", "gamma2") if k not in params]
    if missing:
        raise ConfigError(f"missing parameters: {', '.join(missing)}")
    if name == "nl-sigma" and params["sigma"] not in SIGMA_LADDER:
        raise ConfigError(f"nl-sigma needs sigma in {SIGMA_LADDER}")
    if params["refine_guard"] not in ("on", "off"):
        raise ConfigError("refine_guard must be on or off")
    if params["source"] not in ("analytic", "fft"):
        raise ConfigError("source must be analytic or fft")
    try:
        cfg = WellConfig(a=params["a"], gamma1=params["gamma1"], gamma2=params["gamma2"],
                         sigma=params.get("sigma", 0.0), alpha=params.get("alpha", 1.0),
                         beta=params.get("beta", 0.0), gamma=params.get("gamma"))
        settings = vt.SolverSettings(fix_tol=params["fix_tol"], max_iters=params["max_iters"],
                                     ho_method=params["ho_method"],
                                     blowup_threshold=params["blowup_threshold"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    T = params.get("T", 10.0)
    if T == "period":
        T = spectral.solve(cfg).period
    dt = params.get("dt")
    if dt is None:
        dt = T / params.get("steps", 2000)
    if not (T > 0 and dt > 0 and dt <= T):
        raise ConfigError(f"need 0 < dt <= T, got dt={dt}, T={T}")
    params.update(T=T, dt=dt)
    return Scenario(name, cfg, float(T), float(dt), settings, params)


# ---------------------------------------------------------------------------
# output helpers


def write_csv(path, header, columns):
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(header), comments="")


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {h: data[:, i] for i, h in enumerate(header)}


def write_metadata(path, meta: dict):
    lines = []
    for k, v in meta.items():
        if isinstance(v, float):
            v = f"{v:.17g}"
        elif isinstance(v, (tuple, list, np.ndarray)):
            v = " ".join(f"{x:.17g}" if isinstance(x, (float, np.floating)) else str(x) for x in v)
        lines.append(f"{k} = {v}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_metadata(path) -> dict:
    return read_config(path)


def _base_meta(sc: Scenario, command):
    meta = {"command": command, "version": __version__, "scenario": sc.name}
    if sc.name in PRESETS:
        meta["preset_hash"] = preset_hash(sc.name)
    for k in sorted(sc.params):
        v = sc.params[k]
        meta[k] = "none" if v is None else v
    meta["K"] = sc.grid.K
    meta["dt_effective"] = sc.grid.dt
    return meta


# ---------------------------------------------------------------------------
# commands


def spectrum_report(cfg: WellConfig) -> dict:
    """Levels, splitting, period and two-level verdicts for a configuration."""
    g1, g2 = -cfg.gamma1, -cfg.gamma2
    rep = {"a": cfg.a, "gamma1": cfg.gamma1, "gamma2": cfg.gamma2,
           "symmetric": cfg.symmetric,
           "symmetric_condition": bool(cfg.symmetric and cfg.gamma1 < -1 / cfg.a),
           "two_level_condition": bool(g1 > 0 and g2 > 0 and 1 / g1 + 1 / g2 < 2 * cfg.a)}
    try:
        pair = spectral.solve(cfg)
    except NoTwoLevels as exc:
        rep["verdict"] = f"no two levels: {exc}"
        return rep
    rep.update(verdict="two levels", lambda_ground=pair.lambda_ground,
               lambda_excited=pair.lambda_excited, delta_lambda=pair.delta_lambda,
               period=pair.period, coeffs=[float(c) for c in pair.coeffs])
    return rep


def cmd_spectrum(sc: Scenario, out: Path):
    rep = spectrum_report(sc.cfg)
    meta = _base_meta(sc, "spectrum")
    meta.update(rep)
    write_metadata(out / "spectrum.txt", meta)
    for k, v in rep.items():
        print(f"{k} = {v}")
    if "period" not in rep:
        return EXIT_NO_TWO_LEVELS
    pair = spectral.solve(sc.cfg)
    pg, pe = spectral.eigenfunctions(sc.cfg, pair)
    x = np.linspace(-3 * sc.cfg.a - 10, 3 * sc.cfg.a + 10, 1001)
    write_csv(out / "eigenfunctions.csv", ["x", "phi_ground", "phi_excited"], [x, pg(x), pe(x)])
    return EXIT_OK


def _make_source(sc: Scenario, pair):
    if sc.params["source"] == "analytic":
        return lambda grid: pr.source_analytic(sc.cfg, pair, grid)
    space = pr.fft_space_grid(sc.cfg.a, sc.params["Lx"], sc.params["N"])
    psi0 = spectral.initial_state(sc.cfg, pair)(space.x)
    return lambda grid: pr.source_fft(sc.cfg, psi0, grid, space)


def run_scenario(sc: Scenario):
    """Solve a scenario; returns (pair, trajectory, blowup or None)."""
    pair = spectral.solve(sc.cfg)
    make = _make_source(sc, pair)
    try:
        if sc.cfg.sigma > 0 and sc.params["refine_guard"] == "on":
            tr = vt.solve_guarded(sc.cfg, sc.grid.dt, sc.T, make, sc.settings)
        else:
            grid = sc.grid
            tr = vt.solve(sc.cfg, grid, make(grid), sc.settings)
        return pair, tr, None
    except Blowup as exc:
        return pair, exc.trajectory, exc


def trajectory_columns(sc: Scenario, pair, tr):
    p1, p2 = tr.abs2
    header = ["t", "re_q1", "im_q1", "abs2_q1", "re_q2", "im_q2", "abs2_q2"]
    cols = [tr.t, tr.q1.real, tr.q1.imag, p1, tr.q2.real, tr.q2.imag, p2]
    if sc.cfg.sigma == 0:
        ref = spectral.beating_reference(sc.cfg, pair)
        e1, e2 = np.abs(ref.q1(tr.t)) ** 2, np.abs(ref.q2(tr.t)) ** 2
        header += ["abs2_q1_exact", "abs2_q2_exact", "rel_err_1", "rel_err_2"]
        cols += [e1, e2, vt.relative_error(p1, e1), vt.relative_error(p2, e2)]
    return header, cols


def cmd_simulate(sc: Scenario, out: Path):
    t0 = time.perf_counter()
    pair, tr, blow = run_scenario(sc)
    header, cols = trajectory_columns(sc, pair, tr)
    write_csv(out / "trajectory.csv", header, cols)
    meta = _base_meta(sc, "simulate")
    meta.update(lambda_ground=pair.lambda_ground, lambda_excited=pair.lambda_excited,
                period=pair.period, coupling1=tr.couplings[0], coupling2=tr.couplings[1],
                iterations_max=int(tr.iterations.max()),
                iterations_mean=float(tr.iterations[1:].mean()) if tr.iterations.size > 1 else 0.0,
                nonconverged_steps=tr.nonconverged, steps_completed=tr.q1.size)
    m = vt.beating_metrics(tr)
    meta.update(transfer_fraction=m.transfer_fraction, first_max_time=m.first_max_time,
                contrast=m.contrast)
    if sc.cfg.sigma == 0:
        meta["max_rel_err"] = float(max(cols[-1].max(), cols[-2].max()))
    for k, v in tr.meta.items():
        meta[k] = v
    meta["blowup"] = "none" if blow is None else f"{blow.index} {blow.reason}"
    if blow is not None:
        meta["blowup_time"] = float(tr.t[-1])
    meta["runtime_s"] = time.perf_counter() - t0
    write_metadata(out / "metadata.txt", meta)
    print(f"{sc.name}: {tr.q1.size} steps, blowup={meta['blowup']}, out={out}")
    return EXIT_BLOWUP if blow is not None else EXIT_OK


def parse_times(text, T):
    """'0,1.5,T/2' style list; the token T stands for the final time."""
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if tok == "T":
            out.append(T)
        elif tok.startswith("T/"):
            out.append(T / float(tok[2:]))
        else:
            out.append(float(tok))
    return out


def cmd_reconstruct(sc: Scenario, out: Path, times):
    pair, tr, blow = run_scenario(sc)
    space = pr.fft_space_grid(sc.cfg.a, sc.params["Lx"], sc.params["N"])
    psi0 = spectral.initial_state(sc.cfg, pair)(space.x)
    dt = tr.grid.dt
    ls = sorted({min(int(round(t / dt)), tr.q1.size - 1) for t in times})
    snaps = wf.snapshots(tr, sc.cfg, psi0, space, ls, sc.params["window"], sc.params["stride"])
    for i, s in enumerate(snaps):
        write_csv(out / f"snapshot_{i:04d}.csv", ["x", "re_psi", "im_psi", "density"],
                  [s.xs, s.psi.real, s.psi.imag, s.density])
    meta = _base_meta(sc, "reconstruct")
    meta.update(snapshot_times=[s.t for s in snaps], norm_series=list(wf.norm_series(snaps)),
                blowup="none" if blow is None else f"{blow.index} {blow.reason}")
    write_metadata(out / "metadata.txt", meta)
    print(f"{sc.name}: {len(snaps)} snapshots, norms {np.round(wf.norm_series(snaps), 6)}")
    return EXIT_BLOWUP if blow is not None else EXIT_OK


@dataclass(frozen=True)
class ConvergenceRow:
    dt: float
    error: float
    order: float


def convergence_table(sc: Scenario, dts):
    """Sup relative error of |q_i|^2 against the exact linear charges per dt."""
    if sc.cfg.sigma != 0:
        raise ConfigError("converge needs a linear scenario (sigma = 0)")
    pair = spectral.solve(sc.cfg)
    ref = spectral.beating_reference(sc.cfg, pair)
    rows, prev = [], None
    for dt in sorted(dts, reverse=True):
        grid = TimeGrid.from_dt(dt, sc.T)
        tr = vt.solve(sc.cfg, grid, pr.source_analytic(sc.cfg, pair, grid), sc.settings)
        p1, p2 = tr.abs2
        err = max(vt.relative_error(p1, np.abs(ref.q1(tr.t)) ** 2).max(),
                  vt.relative_error(p2, np.abs(ref.q2(tr.t)) ** 2).max())
        order = np.nan if prev is None else np.log(prev[1] / err) / np.log(prev[0] / dt)
        rows.append(ConvergenceRow(float(dt), float(err), float(order)))
        prev = (dt, err)
    return rows


def select_dt(rows, tol=0.05):
    ok = [r.dt for r in rows if r.error <= tol]
    return max(ok) if ok else None


def cmd_converge(sc: Scenario, out: Path, dts):
    if not dts:
        dts = [sc.T / n for n in (250, 500, 1000, 2000)]
    rows = convergence_table(sc, dts)
    write_csv(out / "convergence.csv", ["dt", "sup_rel_err", "order"],
              [[r.dt for r in rows], [r.error for r in rows], [r.order for r in rows]])
    meta = _base_meta(sc, "converge")
    chosen = select_dt(rows)
    meta.update(dts=[r.dt for r in rows], errors=[r.error for r in rows],
                selected_dt="none" if chosen is None else chosen)
    write_metadata(out / "metadata.txt", meta)
    for r in rows:
        print(f"dt={r.dt:.6g}  err={r.error:.4e}  order={r.order:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    p = argparse.ArgumentParser(prog="twowell", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("spectrum", "simulate", "reconstruct", "converge"):
        s = sub.add_parser(name)
        s.add_argument("--preset", choices=list(PRESETS))
        s.add_argument("--config", help="key = value file")
        s.add_argument("--out-dir", default=".", type=Path)
        s.add_argument("--dt", type=float)
        s.add_argument("--T", type=float)
        s.add_argument("--sigma", type=float)
        s.add_argument("--ho-method", choices=vt.HO_METHODS)
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any configuration key")
        if name == "reconstruct":
            s.add_argument("--snapshots", default="0,T/2,T",
                           help="comma separated times; T stands for the final time")
        if name == "converge":
            s.add_argument("--dts", help="comma separated time steps")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = {"dt": args.dt, "T": args.T, "sigma": args.sigma, "ho_method": args.ho_method}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            overrides[k.strip()] = v.strip()
        sc = build_scenario(args.preset, args.config, overrides)
        out = args.out_dir
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "spectrum":
            return cmd_spectrum(sc, out)
        if args.command == "simulate":
            return cmd_simulate(sc, out)
        if args.command == "reconstruct":
            return cmd_reconstruct(sc, out, parse_times(args.snapshots, sc.T))
        dts = [float(x) for x in args.dts.split(",")] if args.dts else None
        return cmd_converge(sc, out, dts)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoTwoLevels as exc:
        print(f"no two levels: {exc}", file=sys.stderr)
        return EXIT_NO_TWO_LEVELS
    except TwoWellError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CRASH


if __name__ == "__main__":
    sys.exit(main())
