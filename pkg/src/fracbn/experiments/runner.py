"""Subcommand implementations: each takes a ``Context`` and returns a report dict."""

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..asymptotics import (SweepParams, crossing_point, dyadic_grid, gradient_growth, sweep_boundary,
                           sweep_interior)
from ..domain import Box, Interval, build_grid, field_from_dict
from ..energy import NehariOptions, compute_sharp_constants, critical_exponent, minimize_nehari, threshold
from ..exceptions import PreconditionError
from ..extension import calibrate_cs, default_probes, dtn_trace, make_cylinder, reference_cs, solve_extension
from ..pohozaev import concentration_diagnostics, nonexistence_audit, pohozaev_sides
from .cache import SpectralCache
from .report import SCHEMA_VERSION, write_table


@dataclass
class Context:
    config: object
    out_dir: Path
    cache: SpectralCache
    threads: int = 1
    timing: dict = field(default_factory=dict)
    tables: list = field(default_factory=list)
    fields: list = field(default_factory=list)

    def stage(self, name, t0):
        self.timing[name] = round(time.perf_counter() - t0, 6)

    def table(self, name, header, rows):
        write_table(self.out_dir / "tables" / f"{name}.csv", header, rows)
        self.tables.append(f"tables/{name}.csv")

    def field_csv(self, name, header, rows):
        write_table(self.out_dir / "fields" / f"{name}.csv", header, rows)
        self.fields.append(f"fields/{name}.csv")


def _problem(ctx, resolution=None, complete=False):
    cfg = ctx.config
    t0 = time.perf_counter()
    grid = build_grid(cfg.descriptor(), cfg.resolution if resolution is None else resolution)
    fld = field_from_dict(cfg.field, grid)
    S = ctx.cache.spectrum(grid, fld, cfg.solver.spectrum_tol, None if complete else cfg.solver.n_eigen)
    ctx.stage(f"spectrum_{grid.shape[0]}", t0)
    return grid, fld, S


def _spectral_summary(S, s, grid):
    return {"lambda_1": float(S.eigenvalues[0]), "lambda_1s": float(S.eigenvalues[0] ** s), "K": S.n_components,
            "n_interior": grid.n_interior, "residual": float(S.residual),
            "eigenvalues": [float(v) for v in S.eigenvalues[:10]]}


def _x0(cfg, fld):
    return np.asarray(cfg.x0 if cfg.x0 is not None else fld.x0, float)


def _cylinder(ctx, grid, fld, S, s):
    cc = ctx.config.cylinder
    return make_cylinder(grid, s, fld, ratio=cc.ratio, y_max=cc.y_max_factor * _diam(grid), spectrum=S)


def _constants(ctx, S, grid, fld, s):
    """Cylinder, calibrated c_s and the threshold.

    With ``cylinder.calibration_resolution`` set, c_s is calibrated on that
    coarser lattice of the same domain and field.
    """
    res = ctx.config.cylinder.calibration_resolution
    if res is not None:
        grid, fld, S = _problem(ctx, res, complete=True)
    cyl = _cylinder(ctx, grid, fld, S, s)
    cal = calibrate_cs(S, cyl, fld, s, default_probes(S))
    consts = compute_sharp_constants(grid.dim, s)
    T = threshold(fld.A0, grid.dim, s, cal.c_s, consts.Ks)
    return cyl, cal, consts, {
        "c_s": cal.c_s, "c_s_spread": cal.spread, "c_s_reference": reference_cs(s), "K_s": consts.Ks,
        "K_1": consts.K1, "threshold": T, "quadrature_errors": dict(consts.errors),
        "calibration_resolution": list(grid.shape),
    }


def _diam(grid):
    lo, hi = grid.domain.bbox
    return float(np.linalg.norm(hi - lo))


def _continuum_lambda1(cfg, fld):
    """lambda_1 for intervals and boxes with a constant scalar multiple of the identity, else None."""
    if cfg.field.get("kind") != "constant":
        return None
    A = fld.A0
    a = float(A[0, 0])
    if not np.allclose(A, a * np.eye(len(A))):
        return None
    desc = cfg.descriptor()
    if isinstance(desc, Interval):
        return a * (np.pi / (desc.b - desc.a)) ** 2
    if isinstance(desc, Box):
        lo, hi = desc.bbox
        return a * float(np.sum((np.pi / (hi - lo)) ** 2))
    return None


def _base(ctx, command):
    return {"schema_version": SCHEMA_VERSION, "version": __version__, "command": command, "status": "ok",
            "config": ctx.config.echo()}


def cmd_eig(ctx):
    cfg = ctx.config
    grid, fld, S = _problem(ctx)
    rep = _base(ctx, "eig")
    rep["spectral"] = _spectral_summary(S, cfg.s, grid)
    exact = _continuum_lambda1(cfg, fld)
    res = {"lambda_1": float(S.eigenvalues[0]), "lambda_1s": float(S.eigenvalues[0] ** cfg.s),
           "eigen_residual": float(S.residual), "mesh_width": float(np.max(grid.h))}
    if exact is not None:
        res["continuum_lambda_1"] = exact
        res["relative_error"] = abs(S.eigenvalues[0] - exact) / exact
    rep["results"] = res
    k = np.arange(1, S.n_components + 1)
    ctx.table("eigenvalues", ["k", "lambda", "lambda_s"], zip(k, S.eigenvalues, S.eigenvalues**cfg.s))
    return rep


def _opts(cfg):
    return NehariOptions(tolerance=cfg.solver.tolerance, max_iter=cfg.solver.max_iter,
                         n_starts=cfg.solver.n_starts, random_state=cfg.run.seed)


def cmd_solve(ctx):
    cfg = ctx.config
    grid, fld, S = _problem(ctx)
    s = cfg.s
    lam1s = float(S.eigenvalues[0] ** s)
    lam = cfg.resolve_lam(lam1s)
    if not lam < lam1s:
        raise PreconditionError(f"lam = {lam:.6g} >= lambda_1s = {lam1s:.6g}: S_lambda^A <= 0, nothing to minimize")
    t0 = time.perf_counter()
    res = minimize_nehari(S, s, lam, _opts(cfg))
    ctx.stage("minimize", t0)
    t0 = time.perf_counter()
    cyl, cal, consts, cdict = _constants(ctx, S, grid, fld, s)
    if cyl.grid is not grid:
        cyl = _cylinder(ctx, grid, fld, S, s)
    w = solve_extension(cyl, fld, s, res.minimizer)
    poh = pohozaev_sides(res.minimizer, w, lam, fld, _x0(cfg, fld), cal.c_s, el_residual=res.el_residual)
    ctx.stage("pohozaev", t0)
    rep = _base(ctx, "solve")
    rep["spectral"] = _spectral_summary(S, s, grid)
    rep["constants"] = cdict
    p = critical_exponent(grid.dim, s)
    rep["results"] = {
        "lam": lam, "minimizer": res.summary(), "tolerance": cfg.solver.tolerance,
        "threshold_gap": res.level - cdict["threshold"],
        "concentration": concentration_diagnostics(grid, res.minimizer, p),
        "pohozaev": poh.to_dict(),
    }
    ctx.field_csv("minimizer", [f"x{i}" for i in range(grid.dim)] + ["u"],
                  np.column_stack([grid.interior, res.minimizer]))
    ctx.field_csv("pohozaev_integrand", [f"x{i}" for i in range(grid.dim)] + ["integrand"], poh.integrand_rows())
    return rep


def _sweep_setup(ctx):
    cfg = ctx.config
    grid, fld, S = _problem(ctx)
    s = cfg.s
    cyl, cal, consts, cdict = _constants(ctx, S, grid, fld, s)
    lam = cfg.resolve_lam(S.eigenvalues[0] ** s)
    sw = cfg.sweep
    params = SweepParams(grid.dim, s, lam, fld, consts, cal.c_s, domain=cfg.descriptor(), r=sw.r,
                         alpha=sw.alpha, beta=sw.beta, delta=sw.delta, direction=sw.direction,
                         reading=sw.reading, drop=sw.drop, spectrum=S)
    return grid, fld, S, cdict, lam, params


def _run_sweep(ctx, params):
    sw = ctx.config.sweep
    t0 = time.perf_counter()
    if sw.kind == "interior":
        table = sweep_interior(params, dyadic_grid(sw.r, sw.k_min, sw.k_max), workers=ctx.threads)
    else:
        table = sweep_boundary(params, range(sw.j_min, sw.j_max + 1), workers=ctx.threads)
    ctx.stage("sweep", t0)
    ctx.table(f"sweep_{sw.kind}", table.header(), table.rows())
    return table


def cmd_certify(ctx):
    grid, fld, S, cdict, lam, params = _sweep_setup(ctx)
    table = _run_sweep(ctx, params)
    rep = _base(ctx, "certify")
    rep["spectral"] = _spectral_summary(S, ctx.config.s, grid)
    rep["constants"] = cdict
    unc = table.column("gap_uncertainty")
    rep["results"] = {
        "lam": lam, "kind": ctx.config.sweep.kind, "crossing": crossing_point(table),
        "max_gap_uncertainty": float(unc.max()) if len(unc) else None, "table": table.to_dict(),
    }
    return rep


def cmd_sweep(ctx):
    grid, fld, S, cdict, lam, params = _sweep_setup(ctx)
    table = _run_sweep(ctx, params)
    sw = ctx.config.sweep
    t0 = time.perf_counter()
    growth = gradient_growth(grid.dim, ctx.config.s, fld.sigma, sw.radii, drop=sw.drop)
    ctx.stage("gradient_growth", t0)
    ctx.table("gradient_growth", ["R", "value"], zip(growth.radii, growth.values))
    rep = _base(ctx, "sweep")
    rep["spectral"] = _spectral_summary(S, ctx.config.s, grid)
    rep["constants"] = cdict
    rep["results"] = {"lam": lam, "kind": sw.kind, "fits": {k: v.to_dict() for k, v in table.fits.items()},
                      "regimes": table.regimes, "gradient_growth": growth.to_dict(), "table": table.to_dict()}
    return rep


def _reference_level(resolution):
    return int(resolution if np.isscalar(resolution) else max(resolution))


def cmd_audit(ctx):
    cfg = ctx.config
    levels = sorted(cfg.audit.levels)
    cell = None
    runs = []
    spectral = None
    for res in levels:
        grid, fld, S = _problem(ctx, res)
        cell = cell or float(np.max(grid.h))
        spectral = _spectral_summary(S, cfg.s, grid)
        for lam in cfg.audit.lams:
            t0 = time.perf_counter()
            a = nonexistence_audit(grid, fld, cfg.s, float(lam), _x0(cfg, fld), _opts(cfg), spectrum=S, cell=cell)
            ctx.stage(f"audit_{res}_{lam}", t0)
            runs.append({"resolution": res, **a.to_dict()})
    rows = [[r["resolution"], r["lam"], r["passed"], r["concentration"].get("node"), r["concentration"].get("cell"),
             (r["pohozaev"] or {}).get("lhs"), (r["pohozaev"] or {}).get("rhs")] for r in runs]
    ctx.table("audit", ["resolution", "lam", "passed", "node_share", "cell_share", "lhs", "rhs"], rows)
    trends = {}
    for lam in cfg.audit.lams:
        shares = [r["concentration"].get("cell") for r in runs if r["lam"] == float(lam) and not r["skipped"]]
        trends[str(float(lam))] = {"cell_shares": shares, "increasing": bool(len(shares) > 1 and
                                                                             np.all(np.diff(shares) > 0))}
    rep = _base(ctx, "audit")
    rep["spectral"] = spectral
    ref = _reference_level(cfg.resolution)
    rep["results"] = {"runs": runs, "all_passed": all(r["passed"] for r in runs), "reference_resolution": ref,
                      "passed_from_reference": all(r["passed"] for r in runs if r["resolution"] >= ref),
                      "concentration_trend": trends, "cell_width": cell}
    return rep


def dtn_errors(S, cyl, fld, s, c_s, k_max=5):
    """Relative L2 errors of the discrete DtN map on phi_1..phi_k_max."""
    V = S.eigenvectors[:, :k_max].T
    ws = solve_extension(cyl, fld, s, V)
    out = []
    for k, (phi, w) in enumerate(zip(V, ws)):
        lk = S.eigenvalues[k] ** s
        d = dtn_trace(w, s, c_s) - lk * phi
        out.append(float(np.sqrt(S.l2_inner(d, d)) / lk))
    return out


def cmd_extension_check(ctx):
    """Calibration and DtN errors over ``cylinder.levels`` refinements.

    Each level doubles the lattice resolution and takes the square root of
    the y-grading ratio; the cap height is held fixed.
    """
    cfg = ctx.config
    s = cfg.s
    res = cfg.resolution
    ratio = cfg.cylinder.ratio
    levels = []
    for level in range(cfg.cylinder.levels):
        t0 = time.perf_counter()
        grid, fld, S = _problem(ctx, res)
        cyl = make_cylinder(grid, s, fld, ratio=ratio, y_max=cfg.cylinder.y_max_factor * _diam(grid), spectrum=S)
        cal = calibrate_cs(S, cyl, fld, s, default_probes(S))
        errs = dtn_errors(S, cyl, fld, s, cal.c_s)
        ctx.stage(f"extension_level_{level}", t0)
        levels.append({"resolution": list(grid.shape), "layers": len(cyl.y), "grading_ratio": ratio,
                       "c_s": cal.c_s, "c_s_ratios": [float(r) for r in cal.ratios], "c_s_spread": cal.spread,
                       "dtn_errors": errs})
        res = tuple(2 * (m - 1) + 1 for m in grid.shape)
        ratio = float(np.sqrt(ratio))
    ctx.table("dtn_errors", ["level", "k", "relative_error"],
              [[i, k + 1, e] for i, lv in enumerate(levels) for k, e in enumerate(lv["dtn_errors"])])
    E = np.array([lv["dtn_errors"] for lv in levels])
    rep = _base(ctx, "extension-check")
    rep["spectral"] = _spectral_summary(S, s, grid)
    rep["constants"] = {"c_s": levels[0]["c_s"], "c_s_spread": levels[0]["c_s_spread"],
                        "c_s_reference": reference_cs(s)}
    rep["results"] = {"levels": levels, "worst_error": E.max(axis=1).tolist(), "tolerance": 0.05,
                      "decreasing": bool(len(E) > 1 and np.all(np.diff(E, axis=0) < 0))}
    return rep


COMMANDS = {
    "eig": cmd_eig,
    "solve": cmd_solve,
    "certify": cmd_certify,
    "audit": cmd_audit,
    "extension-check": cmd_extension_check,
    "sweep": cmd_sweep,
}
