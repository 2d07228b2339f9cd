"""Pohozaev identity on computed solutions and the nonexistence audit."""

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ._validation import check_exponent
from .domain import star_shape_check
from .energy import (NehariOptions, compute_sharp_constants, critical_exponent, minimize_nehari,
                     threshold)
from .exceptions import NumericalError, PreconditionError
from .extension import calibrate_cs, default_probes, make_cylinder, solve_extension
from .operator import assemble, decompose

NEAR_SOLUTION_GATE = 1e-4
STENCIL_TOLERANCE = 0.2


def a_prime(field, x0, x, h=1e-6, domain=None):
    """Matrices a'_ij(x) = grad a_ij(x) . (x - x0) at points ``x`` (m, n).

    Uses the field's analytic gradient when present, central differences
    of step ``h`` otherwise. With ``domain`` given, a differencing stencil
    that leaves the region raises ``PreconditionError``.
    """
    x = np.atleast_2d(np.asarray(x, float))
    d = x - np.asarray(x0, float)
    if field.gradient is not None:
        G = field.gradient(x)
    else:
        n = x.shape[1]
        G = np.empty((len(x), n, n, n))
        for k in range(n):
            e = np.zeros(n)
            e[k] = h
            if domain is not None and (np.any(domain.sdf(x + e) >= 0) or np.any(domain.sdf(x - e) >= 0)):
                raise PreconditionError("differencing stencil for A' leaves the region")
            G[..., k] = (field(x + e) - field(x - e)) / (2 * h)
    Ap = np.einsum("mijk,mk->mij", G, d)
    return 0.5 * (Ap + np.swapaxes(Ap, 1, 2))


def _weighted_trapezoid(y, F, a):
    """Integral of y^a times the piecewise-linear interpolant of F (last axis over y)."""
    y0, y1 = y[:-1], y[1:]
    d = y1 - y0
    m0 = (y1 ** (a + 1) - y0 ** (a + 1)) / (a + 1)
    m1 = (y1 ** (a + 2) - y0 ** (a + 2)) / (a + 2) - y0 * m0
    F0, F1 = F[..., :-1], F[..., 1:]
    return np.sum(F0 * (m0 - m1 / d) + F1 * m1 / d, axis=-1)


@dataclass
class PohozaevReport:
    """Both sides of the Pohozaev identity for a computed (near-)solution.

    ``rhs = lam_term + aprime_term``; ``residual`` is
    ``|lhs - rhs| / max(|lhs|, |rhs|, floor)``. ``stencil_disagreement``
    compares the lateral flux from one-sided stencils of spacing h and 2h.
    """

    lhs: float
    rhs: float
    lam_term: float
    aprime_term: float
    residual: float
    stencil_disagreement: float
    lhs_uncertainty: float
    unstable: bool
    el_residual: Optional[float]
    diagnostic_only: bool
    signs: dict
    boundary_points: np.ndarray = dc_field(repr=False, default=None)
    boundary_integrand: np.ndarray = dc_field(repr=False, default=None)

    def to_dict(self):
        return {
            "lhs": self.lhs, "rhs": self.rhs, "lam_term": self.lam_term, "aprime_term": self.aprime_term,
            "residual": self.residual, "stencil_disagreement": self.stencil_disagreement,
            "lhs_uncertainty": self.lhs_uncertainty, "unstable": self.unstable, "el_residual": self.el_residual,
            "diagnostic_only": self.diagnostic_only, "signs": dict(self.signs),
        }

    def integrand_rows(self):
        """(x..., integrand) rows per boundary quadrature node."""
        return np.column_stack([self.boundary_points, self.boundary_integrand])


def _sign(v, tol):
    return 0 if abs(v) <= tol else int(np.sign(v))


def boundary_aligned(grid, rtol=1e-9):
    """True when every Dirichlet lattice node lies on the boundary of the region."""
    scale = float(np.max(grid.domain.bbox[1] - grid.domain.bbox[0]))
    return bool(np.all(np.abs(grid.domain.sdf(grid.boundary)) <= rtol * scale))


def _lateral_flux(grid, W, field, x0, y, a, m, spacing, aligned):
    """Per-node y-integrated flux of ½ y^a (d_nu w)^2 nu^T A nu (x - x0).nu with stencil spacing."""
    pts, nrm, wts = grid.domain.boundary_quadrature(m)
    h = float(np.max(grid.h)) * spacing
    interp = RegularGridInterpolator(grid.axes, W, bounds_error=False, fill_value=0.0)
    f1, f2, f3 = (interp(pts - k * h * nrm) for k in (1, 2, 3))
    if aligned:
        # w = 0 at the boundary point itself
        dn = (-4 * f1 + f2) / (2 * h)
    else:
        # staircase boundary: the discrete zero set is offset by up to h, so fit a
        # quadratic through three interior samples without assuming the boundary value
        dn = (2.5 * f1 - 4 * f2 + 1.5 * f3) / h
    A = field(pts)
    nAn = np.einsum("pi,pij,pj->p", nrm, A, nrm)
    xn = np.einsum("pi,pi->p", pts - np.asarray(x0, float), nrm)
    per_node = 0.5 * _weighted_trapezoid(y, dn**2, a) * nAn * xn
    return pts, per_node, float(per_node @ wts)


def _aprime_term(w, field, x0):
    cyl = w.cylinder
    grid = cyl.grid
    Ap = a_prime(field, x0, grid.interior)
    if not np.any(Ap):
        return 0.0
    W = grid.to_lattice(w.values)
    grads = np.gradient(W, *grid.h, axis=tuple(range(1, grid.dim + 1)))
    idx = tuple(grid.interior_index.T)
    G = np.stack([g[(slice(None),) + idx] for g in grads], axis=-1)  # (M, N, n)
    dens = np.einsum("mpi,pij,mpj->pm", G, Ap, G)
    return float(-0.5 * grid.cell_volume * np.sum(_weighted_trapezoid(cyl.y, dens, 1 - 2 * cyl.s)))


def pohozaev_sides(u, w, lam, field, x0, c_s, el_residual=None, m=None, strict=False):
    """Evaluate both sides of the Pohozaev identity.

    Parameters
    ----------
    u : ndarray
        Trace values at interior nodes.
    w : CylinderFunction
        Extension of ``u``.
    lam : float
    field : CoefficientField
    x0 : array_like
        Centre for the multiplier (x - x0).
    c_s : float
    el_residual : float, optional
        Euler-Lagrange residual of ``u``; above ``NEAR_SOLUTION_GATE`` the
        report is labelled diagnostic only.
    m : int, optional
        Boundary quadrature nodes (default 4 per lattice line).
    strict : bool
        Raise instead of flagging when the h and 2h one-sided stencils
        disagree by more than ``STENCIL_TOLERANCE``.

    Returns
    -------
    PohozaevReport
    """
    cyl = w.cylinder
    grid = cyl.grid
    s = check_exponent(cyl.s)
    u = np.asarray(u, float)
    if u.shape != (grid.n_interior,):
        raise PreconditionError(f"u must have shape ({grid.n_interior},), got {u.shape}")
    a = 1 - 2 * s
    m = m or 4 * max(grid.shape)
    W = np.moveaxis(grid.to_lattice(w.values), 0, -1)
    aligned = boundary_aligned(grid)
    pts, per_node, lhs = _lateral_flux(grid, W, field, x0, cyl.y, a, m, 1, aligned)
    _, _, lhs2 = _lateral_flux(grid, W, field, x0, cyl.y, a, m, 2, aligned)
    l2 = grid.cell_volume * float(u @ u)
    lam_term = s / c_s * lam * l2
    ap_term = _aprime_term(w, field, x0)
    rhs = lam_term + ap_term
    floor = 1e-12 * max(l2 * max(1.0, abs(lam)), 1e-300)
    if lhs == 0 and rhs == 0:
        residual, disagreement = 0.0, 0.0
    else:
        residual = abs(lhs - rhs) / max(abs(lhs), abs(rhs), floor)
        disagreement = abs(lhs - lhs2) / max(abs(lhs), floor)
    if strict and disagreement > STENCIL_TOLERANCE:
        raise NumericalError(
            f"boundary gradient extraction unstable: h and 2h stencils disagree by {disagreement:.1%}",
            residual=disagreement,
        )
    tol = abs(lhs - lhs2)
    return PohozaevReport(
        lhs=lhs, rhs=rhs, lam_term=lam_term, aprime_term=ap_term, residual=float(residual),
        stencil_disagreement=float(disagreement), lhs_uncertainty=float(tol),
        unstable=bool(disagreement > STENCIL_TOLERANCE),
        el_residual=None if el_residual is None else float(el_residual),
        diagnostic_only=el_residual is None or el_residual > NEAR_SOLUTION_GATE,
        signs={"lhs": _sign(lhs, tol), "lam_term": _sign(lam_term, floor), "aprime_term": _sign(ap_term, floor)},
        boundary_points=pts, boundary_integrand=per_node,
    )


def concentration_diagnostics(grid, u, p, cell=None):
    """Mass shares of the L^p density at its peak.

    ``node`` is the largest single-node share; ``cell`` is the share inside
    the axis-aligned cell of width ``cell`` (default: the mesh width)
    centred at the peak node. In a refinement study ``cell`` is held at the
    coarsest mesh width so the shares are comparable across levels.
    """
    mass = grid.weights * np.abs(u) ** p
    k = int(np.argmax(mass))
    width = float(np.max(grid.h)) if cell is None else float(cell)
    inside = np.all(np.abs(grid.interior - grid.interior[k]) <= width / 2 * (1 + 1e-12), axis=1)
    total = mass.sum()
    return {"node": float(mass[k] / total), "cell": float(mass[inside].sum() / total), "cell_width": width,
            "peak": grid.interior[k].tolist()}


@dataclass
class AuditReport:
    skipped: bool
    reason: str = ""
    passed: bool = False
    lam: float = 0.0
    level: Optional[float] = None
    threshold: Optional[float] = None
    threshold_gap: Optional[float] = None
    concentration: dict = dc_field(default_factory=dict)
    pohozaev: Optional[PohozaevReport] = None
    c_s: Optional[float] = None
    minimizer: Optional[np.ndarray] = dc_field(default=None, repr=False)

    def to_dict(self):
        return {
            "skipped": self.skipped, "reason": self.reason, "passed": self.passed, "lam": self.lam,
            "level": self.level, "threshold": self.threshold, "threshold_gap": self.threshold_gap,
            "concentration": dict(self.concentration), "c_s": self.c_s,
            "pohozaev": None if self.pohozaev is None else self.pohozaev.to_dict(),
        }


def nonexistence_audit(grid, field, s, lam, x0, opts=None, spectrum=None, cell=None, psd_tol=1e-12):
    """Run the sign argument for lam <= 0 on a star-shaped region.

    Preconditions (star shape about ``x0``, A' positive semidefinite at all
    interior nodes, lam <= 0) are checked first; a failure returns a skipped
    report with the reason. Otherwise the Nehari minimization is run, its
    level compared with the threshold, and the Pohozaev sides evaluated on
    the terminal iterate. The audit passes when lhs exceeds its stencil
    uncertainty while rhs <= 0.
    """
    s = check_exponent(s)
    if lam > 0:
        return AuditReport(True, f"lam = {lam} > 0: the sign argument needs lam <= 0", lam=lam)
    ok, margin = star_shape_check(grid, x0)
    if not ok:
        return AuditReport(True, f"region is not star-shaped about x0 (min (x - x0).nu = {margin:.3g})", lam=lam)
    Ap = a_prime(field, x0, grid.interior)
    min_eig = float(np.linalg.eigvalsh(Ap).min()) if len(Ap) else 0.0
    if min_eig < -psd_tol:
        return AuditReport(True, f"A' is not positive semidefinite (min eigenvalue {min_eig:.3g})", lam=lam)
    S = spectrum if spectrum is not None else decompose(assemble(grid, field))
    res = minimize_nehari(S, s, lam, opts or NehariOptions())
    n = grid.dim
    p = critical_exponent(n, s)
    cyl = make_cylinder(grid, s, field, spectrum=S)
    cal = calibrate_cs(S, cyl, field, s, default_probes(S))
    consts = compute_sharp_constants(n, s)
    T = threshold(field.A0, n, s, cal.c_s, consts.Ks)
    w = solve_extension(cyl, field, s, res.minimizer)
    rep = pohozaev_sides(res.minimizer, w, lam, field, x0, cal.c_s, el_residual=res.el_residual)
    passed = rep.lhs > rep.lhs_uncertainty and rep.rhs <= 0 and rep.lhs - rep.rhs > rep.lhs_uncertainty
    return AuditReport(
        skipped=False, passed=bool(passed), lam=float(lam), level=res.level, threshold=float(T),
        threshold_gap=float(res.level - T), concentration=concentration_diagnostics(grid, res.minimizer, p, cell),
        pohozaev=rep, c_s=cal.c_s, minimizer=res.minimizer,
    )
