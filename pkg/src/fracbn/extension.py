"""Weighted extension problem on a truncated cylinder and its Neumann trace.

The extension w of a grid function u minimizes

    E(w) = integral over Omega x (0, Y) of y^(1-2s) (grad_x w . A grad_x w + w_y^2)

with w(., 0) = u, zero lateral data and a natural (Neumann) cap at y = Y.
In the variable zeta = y^(2s) the weight becomes

    y^(1-2s) w_y^2 dy  = 2s w_zeta^2 dzeta
    y^(1-2s) w^2   dy  = zeta^((1-2s)/s) / (2s) w^2 dzeta,

so continuous piecewise-linear elements in zeta represent the y^(2s) boundary
layer exactly, and the weighted Neumann trace -lim y^(1-2s) w_y = -2s w_zeta
is the discrete flux through the first layer. In x the operator stiffness and
lumped mass are reused, so the cylinder matrix is the Kronecker sum

    Kz (x) W I  +  Mz (x) W K_x.
"""

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import gamma
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_exponent, check_grid_function, check_positive
from .domain import CoefficientField
from .exceptions import ConvergenceError, NumericalError, PreconditionError
from .operator import DENSE_LIMIT, assemble, decompose, hs_inner

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def reference_cs(s):
    """Closed-form constant Gamma(s) / (2^(1-2s) Gamma(1-s)), for cross-checks only."""
    s = check_exponent(s)
    return gamma(s) / (2 ** (1 - 2 * s) * gamma(1 - s))


def geometric_y_mesh(y1, ratio, y_max):
    """Nodes 0, y1, y1 + y1 r, ... graded geometrically and clipped at ``y_max``."""
    check_positive(y1, "y1")
    if ratio < 1:
        raise PreconditionError(f"grading ratio must be >= 1, got {ratio}")
    ys = [0.0, y1]
    step = y1
    while ys[-1] < y_max:
        step *= ratio
        ys.append(ys[-1] + step)
    ys[-1] = y_max
    if ys[-1] - ys[-2] < 0.5 * step / ratio and len(ys) > 3:
        del ys[-2]
    return np.array(ys)


def _zeta_matrices(zeta, s):
    """Stiffness and weighted mass of P1 elements in zeta for the transformed weights."""
    p = (1 - 2 * s) / s
    M = len(zeta)
    a, b = zeta[:-1], zeta[1:]
    H = b - a
    kz = 2 * s / H
    # moments m_k = integral over the cell of zeta^p zeta^k / (2s)
    mom = np.empty((3, M - 1))
    first = a == 0
    for k in range(3):
        mom[k, first] = b[first] ** (p + k + 1) / (p + k + 1)
    if np.any(~first):
        aa, HH = a[~first, None], H[~first, None]
        zz = aa + 0.5 * (_GL_NODES + 1) * HH
        ww = 0.5 * _GL_WEIGHTS * HH
        for k in range(3):
            mom[k, ~first] = np.sum(ww * zz ** (p + k), axis=1)
    mom /= 2 * s
    m0, m1, m2 = mom
    Maa = (b * b * m0 - 2 * b * m1 + m2) / H**2
    Mbb = (a * a * m0 - 2 * a * m1 + m2) / H**2
    Mab = (-a * b * m0 + (a + b) * m1 - m2) / H**2
    main_k = np.zeros(M)
    main_k[:-1] += kz
    main_k[1:] += kz
    main_m = np.zeros(M)
    main_m[:-1] += Maa
    main_m[1:] += Mbb
    Kz = sp.diags([main_k, -kz, -kz], [0, 1, -1], format="csr")
    Mz = sp.diags([main_m, Mab, Mab], [0, 1, -1], format="csr")
    return Kz, Mz


@dataclass(frozen=True, eq=False)
class Cylinder:
    """Truncated cylinder Omega x (0, Y_max) with a graded y-mesh.

    Attributes
    ----------
    grid : Grid
    s : float
        Weight exponent is ``1 - 2 s``.
    y : ndarray
        Nodes 0 = y_0 < y_1 < ... < y_M = Y_max.
    stiffness : StiffnessMatrix
        Base operator for the coefficient field.
    spectrum : SpectralDecomposition or None
        Complete base spectrum, when available, for the modal solver.
    """

    grid: object
    s: float
    y: np.ndarray
    stiffness: object
    spectrum: Optional[object] = None
    _cache: dict = dc_field(default_factory=dict, repr=False)

    @property
    def weight_exponent(self):
        return 1 - 2 * self.s

    @property
    def zeta(self):
        return self.y ** (2 * self.s)

    @property
    def y_max(self):
        return float(self.y[-1])

    @property
    def field(self):
        return self.stiffness.field

    def y_matrices(self):
        if "yz" not in self._cache:
            self._cache["yz"] = _zeta_matrices(self.zeta, self.s)
        return self._cache["yz"]

    def system(self):
        """Full cylinder matrix over all y-layers (layer-major ordering)."""
        if "A" not in self._cache:
            Kz, Mz = self.y_matrices()
            W = self.grid.cell_volume
            N = self.grid.n_interior
            self._cache["A"] = (W * (sp.kron(Kz, sp.identity(N)) + sp.kron(Mz, self.stiffness.matrix))).tocsr()
        return self._cache["A"]


def diameter(grid):
    lo, hi = grid.domain.bbox
    return float(np.linalg.norm(hi - lo))


def make_cylinder(grid, s, field=None, y1=None, ratio=1.15, y_max=None, spectrum="auto"):
    """Build the truncated cylinder for ``grid`` and exponent ``s``.

    Parameters
    ----------
    y1 : float, optional
        First layer height; ``min(h)^2`` by default.
    ratio : float
        Geometric grading ratio.
    y_max : float, optional
        Cap height; at least ``5 * diam`` (the default).
    spectrum : "auto", SpectralDecomposition or None
        Base spectrum for the modal solver. "auto" computes it when the grid
        has at most ``DENSE_LIMIT`` interior nodes.
    """
    s = check_exponent(s)
    field = field or CoefficientField.constant(np.eye(grid.dim))
    diam = diameter(grid)
    y_max = 5 * diam if y_max is None else float(y_max)
    if y_max < 5 * diam * (1 - 1e-12):
        raise PreconditionError(f"Y_max = {y_max} is below 5 * diam = {5 * diam}")
    y1 = float(np.min(grid.h)) ** 2 if y1 is None else float(y1)
    M = assemble(grid, field)
    if isinstance(spectrum, str):
        if spectrum != "auto":
            raise PreconditionError(f"unknown spectrum option {spectrum!r}")
        spectrum = decompose(M) if grid.n_interior <= DENSE_LIMIT else None
    if spectrum is not None and not spectrum.complete:
        spectrum = None
    return Cylinder(grid, s, geometric_y_mesh(y1, ratio, y_max), M, spectrum)


def refine_cylinder(cyl, levels=1):
    """Halve the base mesh width, take the square root of the grading ratio, y1 = h^2."""
    from .domain import build_grid

    grid = cyl.grid
    y = cyl.y
    ratio = (y[2] - y[1]) / (y[1] - y[0])
    for _ in range(levels):
        grid = build_grid(grid.domain, tuple(2 * (m - 1) + 1 for m in grid.shape))
        ratio = np.sqrt(ratio)
    return make_cylinder(grid, cyl.s, cyl.field, ratio=ratio, y_max=cyl.y_max)


@dataclass(frozen=True, eq=False)
class CylinderFunction:
    """Nodal values ``values[m, i] = w(x_i, y_m)`` on a cylinder."""

    cylinder: Cylinder
    values: np.ndarray

    @property
    def trace(self):
        return self.values[0]

    def weighted_energy(self):
        """Integral of y^(1-2s) (grad w)^T B grad w over the truncated cylinder."""
        Kz, Mz = self.cylinder.y_matrices()
        w = self.values
        K = self.cylinder.stiffness.matrix
        W = self.cylinder.grid.cell_volume
        return float(W * (np.sum(w * (Kz @ w)) + np.sum((Mz @ w) * (K @ w.T).T)))

    def slice_energy(self, m=-1):
        """Weighted energy density integral over Omega at the y-layer ``m``."""
        cyl = self.cylinder
        y = cyl.y
        m = m % len(y)
        w = self.values
        K = cyl.stiffness.matrix
        W = cyl.grid.cell_volume
        j = max(m, 1)
        wy = (w[j] - w[j - 1]) / (y[j] - y[j - 1])
        ym = y[m] if m > 0 else y[1]
        return float(ym ** (1 - 2 * cyl.s) * W * (wy @ wy + w[m] @ (K @ w[m])))

    def to_rows(self):
        """(x..., y, w) rows for CSV export."""
        pts = self.cylinder.grid.interior
        y = self.cylinder.y
        rows = [np.column_stack([pts, np.full(len(pts), ym), self.values[m]]) for m, ym in enumerate(y)]
        return np.vstack(rows)


def _solve_modal(cyl, u):
    S = cyl.spectrum
    Kz, Mz = cyl.y_matrices()
    c = S.coefficients(u)
    lam = S.eigenvalues
    # per mode: (Kz + lam Mz) g = 0 on layers >= 1 with g_0 = 1, batched Thomas sweep
    kd, ko = Kz.diagonal(), Kz.diagonal(1)
    md, mo = Mz.diagonal(), Mz.diagonal(1)
    M = len(kd)
    diag = kd[1:, None] + lam[None, :] * md[1:, None]
    off = ko[1:, None] + lam[None, :] * mo[1:, None]
    rhs = np.zeros((M - 1, len(lam)))
    rhs[0] = -(ko[0] + lam * mo[0])
    cp = np.empty_like(off)
    dp = np.empty_like(rhs)
    cp[0] = off[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, M - 1):
        den = diag[i] - off[i - 1] * cp[i - 1]
        if i < M - 2:
            cp[i] = off[i] / den
        dp[i] = (rhs[i] - off[i - 1] * dp[i - 1]) / den
    g = np.empty((M, len(lam)))
    g[0] = 1.0
    g[-1] = dp[-1]
    for i in range(M - 3, -1, -1):
        g[i + 1] = dp[i] - cp[i] * g[i + 2]
    return (g * c) @ S.eigenvectors.T


def _solve_direct(cyl, u):
    N = cyl.grid.n_interior
    if "lu" not in cyl._cache:
        A = cyl.system()
        cyl._cache["lu"] = spla.splu(A[N:, N:].tocsc())
        cyl._cache["A_i0"] = A[N:, :N]
    lu, Ai0 = cyl._cache["lu"], cyl._cache["A_i0"]
    rhs = -(Ai0 @ u.T)
    wi = lu.solve(np.asarray(rhs).reshape(-1, u.shape[0]))
    A = cyl.system()
    res = A[N:, N:] @ wi - rhs.reshape(wi.shape)
    rel = np.linalg.norm(res) / max(np.linalg.norm(rhs), 1e-300)
    if rel > 1e-8:
        raise ConvergenceError(f"cylinder solve residual {rel:.2e}", residual=rel)
    M = len(cyl.y)
    layers = wi.T.reshape(u.shape[0], M - 1, N)
    return np.concatenate([u[:, None, :], layers], axis=1)


def solve_extension(cyl, field, s, u, method="auto"):
    """Discrete weighted-harmonic extension of ``u`` into the cylinder.

    Parameters
    ----------
    cyl : Cylinder
    field : CoefficientField or None
        Must be the field the cylinder was built with (checked by hash).
    s : float
        Must match ``cyl.s``.
    u : array of shape (N,) or (B, N)
    method : {"auto", "modal", "direct"}
        "modal" diagonalizes in x with the complete base spectrum and solves
        one tridiagonal problem per eigenvalue; "direct" factorizes the
        Kronecker system. Both minimize the same discrete energy.

    Returns
    -------
    CylinderFunction or list of CylinderFunction
    """
    if field is not None and field.hash != cyl.field.hash:
        raise PreconditionError("coefficient field differs from the one the cylinder was built with")
    if not np.isclose(s, cyl.s, rtol=0, atol=1e-14):
        raise PreconditionError(f"cylinder was built for s = {cyl.s}, got s = {s}")
    u = check_grid_function(u, cyl.grid.n_interior)
    batch = u.ndim == 2
    U = np.atleast_2d(u)
    if method == "auto":
        method = "modal" if cyl.spectrum is not None else "direct"
    if method == "modal":
        if cyl.spectrum is None:
            raise PreconditionError("modal solve needs a complete base spectrum")
        M = len(cyl.y)
        out = np.stack([_solve_modal(cyl, row) for row in U]) if len(U) else np.zeros((0, M, U.shape[1]))
        out[:, 0] = U
    elif method == "direct":
        out = _solve_direct(cyl, U)
    else:
        raise PreconditionError(f"unknown method {method!r}")
    fns = [CylinderFunction(cyl, w) for w in out]
    return fns if batch else fns[0]


def dtn_trace(w, s, c_s, check=True, rtol=0.25):
    """Weighted Neumann trace -c_s lim y^(1-2s) w_y at the interior nodes.

    Uses the zeta-consistent first-layer quotient c_s 2s (w(y1) - w(0)) / y1^(2s)
    with the sign that makes the result positive for positive eigenfunction
    data. With ``check`` the same quotient over the second layer must agree
    to ``rtol`` (relative L2), otherwise the grading is too coarse.
    """
    cyl = w.cylinder
    if not np.isclose(s, cyl.s, rtol=0, atol=1e-14):
        raise PreconditionError(f"cylinder was built for s = {cyl.s}, got s = {s}")
    z = cyl.zeta
    v = w.values
    d1 = -c_s * 2 * s * (v[1] - v[0]) / z[1]
    if check:
        d2 = -c_s * 2 * s * (v[2] - v[0]) / z[2]
        nrm = np.linalg.norm(d1)
        if nrm > 0 and np.linalg.norm(d1 - d2) > rtol * nrm:
            rel = np.linalg.norm(d1 - d2) / nrm
            raise NumericalError(f"y-grading too coarse near y = 0 (layer disagreement {rel:.2f})", residual=rel)
    return d1


@dataclass
class CsCalibration:
    c_s: float
    ratios: np.ndarray
    spread: float

    def to_dict(self):
        return {"c_s": self.c_s, "ratios": [float(r) for r in self.ratios], "spread": self.spread}


def calibrate_cs(S, cyl, field, s, probes, tol=0.02):
    """Normalization constant from the isometry hs_norm^2 = c_s * weighted energy.

    Returns the median ratio over the probes; raises ``NumericalError`` when
    the ratios spread by more than ``tol`` (cylinder under-resolved).
    """
    P = np.atleast_2d(check_grid_function(probes, cyl.grid.n_interior))
    nrm = np.linalg.norm(P, axis=1)
    if np.any(nrm == 0):
        raise PreconditionError("calibration probes must be nonzero")
    cos = np.abs((P / nrm[:, None]) @ (P / nrm[:, None]).T)
    if np.any(cos[np.triu_indices(len(P), 1)] > 1 - 1e-10):
        raise PreconditionError("calibration probes must be pairwise non-parallel")
    ws = solve_extension(cyl, field, s, P)
    ratios = np.array([hs_inner(S, s, p, p) / w.weighted_energy() for p, w in zip(P, ws)])
    spread = float(ratios.max() / ratios.min() - 1)
    cal = CsCalibration(float(np.median(ratios)), ratios, spread)
    if spread > tol:
        raise NumericalError(f"isometry ratios spread {spread:.2%} exceeds {tol:.0%}", residual=spread)
    return cal


def j_energy(w, lam, c_s, field=None):
    """c_s * weighted energy of ``w`` minus lam * ||w(., 0)||^2."""
    if field is not None and field.hash != w.cylinder.field.hash:
        raise PreconditionError("coefficient field differs from the one the cylinder was built with")
    tr = w.trace
    return c_s * w.weighted_energy() - lam * w.cylinder.grid.cell_volume * float(tr @ tr)


def default_probes(S):
    """Five probes: phi_1, phi_2, phi_3, phi_1 + phi_2, phi_1 + phi_3."""
    if S.n_components < 3:
        raise PreconditionError("default probes need at least three eigenpairs")
    V = S.eigenvectors[:, :3].T
    return np.vstack([V, V[0] + V[1], V[0] + V[2]])


class ExtensionOperator(TransformerMixin, BaseEstimator):
    """Dirichlet-to-Neumann map through the weighted extension.

    ``fit`` builds the cylinder on a grid and calibrates ``c_s`` unless it is
    given; ``transform`` maps grid functions to their Neumann traces, which
    approximate (-L)^s.

    Parameters
    ----------
    s : float
    field : CoefficientField or None
    ratio : float
        y-grading ratio.
    y_max_factor : float
        Cap height in units of the domain diameter (>= 5).
    c_s : float or None
        Fixed constant; calibrated when None.
    method : {"auto", "modal", "direct"}

    Attributes
    ----------
    cylinder_ : Cylinder
    calibration_ : CsCalibration or None
    c_s_ : float
    """

    def __init__(self, s=0.5, field=None, ratio=1.15, y_max_factor=5.0, c_s=None, method="auto"):
        self.s = s
        self.field = field
        self.ratio = ratio
        self.y_max_factor = y_max_factor
        self.c_s = c_s
        self.method = method

    def fit(self, X, y=None):
        s = check_exponent(self.s)
        self.cylinder_ = make_cylinder(X, s, self.field, ratio=self.ratio, y_max=self.y_max_factor * diameter(X))
        S = self.cylinder_.spectrum
        if S is None:
            S = decompose(self.cylinder_.stiffness, min(10, X.n_interior - 2))
        self.spectrum_ = S
        if self.c_s is None:
            self.calibration_ = calibrate_cs(S, self.cylinder_, None, s, default_probes(S))
            self.c_s_ = self.calibration_.c_s
        else:
            self.calibration_ = None
            self.c_s_ = check_positive(self.c_s, "c_s")
        self.n_features_in_ = X.n_interior
        return self

    def extend(self, X):
        check_is_fitted(self, "cylinder_")
        return solve_extension(self.cylinder_, None, self.cylinder_.s, X, self.method)

    def transform(self, X):
        w = self.extend(X)
        if isinstance(w, list):
            return np.stack([dtn_trace(wi, self.cylinder_.s, self.c_s_) for wi in w])
        return dtn_trace(w, self.cylinder_.s, self.c_s_)

    def fit_transform(self, X, y=None, **fit_params):
        raise PreconditionError("fit takes a Grid and transform takes grid functions; call them separately")
