"""Scaling-law sweeps over the bubble width and exponent fitting."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy import stats

from ._validation import check_dimension, check_exponent
from .bubbles import boundary_spec, choose_beta, interior_spec, sphere_area, w1_gradient
from .domain import alpha_singular_sequence
from .energy import critical_exponent, existence_certificate
from .exceptions import ContainmentError, PreconditionError, QuadratureError
from .quadrature import panel_rule, tanh_sinh


@dataclass
class ExponentFit:
    """Least-squares log-log slope with a studentized 95% half-width."""

    slope: float
    half_width: float
    intercept: float
    x_min: float
    x_max: float
    n_points: int

    def predict(self, x):
        x = np.asarray(x, float)
        if np.any(x < self.x_min * (1 - 1e-12)) or np.any(x > self.x_max * (1 + 1e-12)):
            raise PreconditionError(f"refusing to extrapolate outside [{self.x_min:.3g}, {self.x_max:.3g}]")
        return np.exp(self.intercept) * x**self.slope

    def contains(self, value, tol):
        return abs(self.slope - value) <= tol

    def to_dict(self):
        return {"slope": self.slope, "half_width": self.half_width, "intercept": self.intercept,
                "x_min": self.x_min, "x_max": self.x_max, "n_points": self.n_points}


@dataclass
class LogFactorTest:
    slope: float
    r_squared: float
    detected: bool

    def to_dict(self):
        return {"slope": self.slope, "r_squared": self.r_squared, "detected": self.detected}


@dataclass
class SweepTable:
    """Rows indexed by the sweep variable (``eps`` or ``j``) plus fits.

    ``columns`` maps names to arrays of equal length; the sweep variable is
    ``columns[index]``.
    """

    index: str
    columns: dict
    fits: dict = dc_field(default_factory=dict)
    regimes: dict = dc_field(default_factory=dict)
    notes: list = dc_field(default_factory=list)

    def __len__(self):
        return len(self.columns[self.index])

    def column(self, name):
        return np.asarray(self.columns[name], float)

    def header(self):
        return list(self.columns)

    def rows(self):
        names = self.header()
        return [[self.columns[c][i] for c in names] for i in range(len(self))]

    def to_dict(self):
        return {
            "index": self.index,
            "columns": {k: [_plain(v) for v in vals] for k, vals in self.columns.items()},
            "fits": {k: v.to_dict() for k, v in self.fits.items()},
            "regimes": dict(self.regimes),
            "notes": list(self.notes),
        }


def _plain(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return float(v)


def fit_exponent(table, column, x=None, drop=0):
    """Slope of log(column) against log(x) (x defaults to the eps column).

    The ``drop`` largest-x rows are excluded as pre-asymptotic.
    """
    y = table.column(column) if isinstance(table, SweepTable) else np.asarray(table[column], float)
    if x is None:
        x = table.column("eps") if isinstance(table, SweepTable) else np.asarray(table["eps"], float)
    x = np.asarray(x, float)
    order = np.argsort(-x)
    x, y = x[order][drop:], y[order][drop:]
    if len(x) < 4:
        raise PreconditionError(f"need at least 4 rows for a fit, got {len(x)}")
    if np.any(y <= 0) or np.any(x <= 0):
        raise PreconditionError(f"column {column!r} has nonpositive values; cannot fit a power law")
    lx, ly = np.log(x), np.log(y)
    res = stats.linregress(lx, ly)
    hw = float(stats.t.ppf(0.975, len(x) - 2) * res.stderr)
    return ExponentFit(float(res.slope), hw, float(res.intercept), float(x.min()), float(x.max()), len(x))


def detect_log_factor(eps, values, p, drop=0, r2_min=0.9):
    """Fit values / eps^p against ln(1/eps); a positive trend with R^2 > r2_min is a log factor."""
    eps = np.asarray(eps, float)
    order = np.argsort(-eps)
    eps, values = eps[order][drop:], np.asarray(values, float)[order][drop:]
    res = stats.linregress(np.log(1 / eps), values / eps**p)
    r2 = float(res.rvalue**2)
    return LogFactorTest(float(res.slope), r2, bool(res.slope > 0 and r2 > r2_min))


def dyadic_grid(r, k_min=2, k_max=12):
    """eps = r 2^-k for k = k_min..k_max (strictly decreasing)."""
    return [r * 2.0**-k for k in range(k_min, k_max + 1)]


# ---------------------------------------------------------------------------
# Weighted gradient integral of w_1
# ---------------------------------------------------------------------------


def _gradient_piece(n, s, sigma, r_edges, th_lo, th_hi, step):
    """Polar piece r in r_edges, theta in (th_lo(r), th_hi(r)) of the weighted integral."""
    r, wr = panel_rule(r_edges, 16)
    t, _, wt = tanh_sinh(step, 4.5)
    lo, hi = th_lo(r), th_hi(r)
    th = lo[:, None] + (hi - lo)[:, None] * t[None, :]
    w = (wr * r * (hi - lo))[:, None] * wt[None, :]
    rho, y = r[:, None] * np.cos(th), r[:, None] * np.sin(th)
    keep = (y > 0) & (w > 0)
    _, dr, _ = w1_gradient(n, s, rho[keep], y[keep])
    return float(sphere_area(n) * np.sum(w[keep] * rho[keep] ** (n - 1 + sigma) * y[keep] ** (1 - 2 * s) * dr**2))


def weighted_gradient_integral(n, s, sigma, R, step=1 / 16, rtol=1e-6, pieces=False):
    """Integral of y^(1-2s) |x|^sigma |grad_x w_1|^2 over {|x| >= 1, |x|^2 + y^2 <= R^2}.

    Polar coordinates (r, theta) in the (|x|, y) quarter plane, split into
    I1 = {r <= 2}, I2 = {r > 2, y >= |x|} and I3 = {r > 2, y < |x|}.
    Geometric Gauss-Legendre panels in r, tanh-sinh in theta (the weight is
    singular at theta = 0). Each piece is repeated with twice the theta step
    and must agree to ``rtol``.

    Raises
    ------
    QuadratureError
        Naming the piece whose two resolutions disagree.
    """
    n = check_dimension(n, s)
    if R < 2:
        raise PreconditionError(f"truncation radius must be >= 2, got {R}")
    zero = lambda r: np.zeros_like(r)  # noqa: E731
    edge = lambda r: np.arccos(np.minimum(1.0, 1.0 / r))  # noqa: E731
    quarter = lambda r: np.minimum(np.pi / 4, edge(r))  # noqa: E731
    outer = np.geomspace(2.0, R, max(1, int(np.ceil(2 * np.log2(R / 2)))) + 1) if R > 2 else None
    spec = {"I1": (np.geomspace(1.0, min(R, 2.0), 3), zero, edge)}
    if outer is not None:
        spec["I2"] = (outer, quarter, edge)
        spec["I3"] = (outer, zero, quarter)
    out = {}
    for name, (edges, lo, hi) in spec.items():
        fine = _gradient_piece(n, s, sigma, edges, lo, hi, step)
        coarse = _gradient_piece(n, s, sigma, edges, lo, hi, 2 * step)
        if not np.isfinite(fine) or abs(fine - coarse) > rtol * abs(fine) + 1e-300:
            raise QuadratureError(f"{name}: resolutions disagree ({fine:.10e} vs {coarse:.10e})",
                                  residual=abs(fine - coarse))
        out[name] = fine
    total = float(sum(out.values()))
    return (total, out) if pieces else total


def log_coefficient(n, s, sigma, r=1e8, step=1 / 32):
    """Shell density r dI/dr of the weighted integral at large ``r``.

    For sigma = n - 2s this is the coefficient of ln R in the growth of
    ``weighted_gradient_integral``; ``r`` = 1e8 is deep in the homogeneous
    far field.
    """
    t, _, w = tanh_sinh(step, 4.5)
    th = 0.5 * np.pi * t
    rho, y = r * np.cos(th), r * np.sin(th)
    _, dr, _ = w1_gradient(n, s, rho, y)
    return float(sphere_area(n) * np.sum(0.5 * np.pi * w * r * r * rho ** (n - 1 + sigma) * y ** (1 - 2 * s) * dr**2))


@dataclass
class GrowthFit:
    """Growth of the weighted integral in R.

    ``increment_slope`` is the log-log slope of V(2R) - V(R) against R, which
    removes the additive constant; it estimates sigma - n + 2s. For the log
    regime ``log_slope`` is the slope of V against ln R divided by
    ``log_coefficient``.
    """

    regime: str
    radii: list
    values: list
    increment_slope: float
    log_slope: Optional[float]

    def to_dict(self):
        return {"regime": self.regime, "radii": list(map(float, self.radii)), "values": list(map(float, self.values)),
                "increment_slope": self.increment_slope, "log_slope": self.log_slope}


def gradient_growth(n, s, sigma, radii, drop=2):
    """Evaluate the weighted integral on doubling radii and fit its growth."""
    radii = np.asarray(sorted(radii), float)
    if len(radii) - drop < 4 or not np.allclose(radii[1:] / radii[:-1], 2.0):
        raise PreconditionError("need at least drop + 4 doubling radii")
    v = np.array([weighted_gradient_integral(n, s, sigma, R) for R in radii])
    d = np.diff(v)
    rr = radii[:-1][drop:]
    if np.any(d[drop:] <= 0):
        raise PreconditionError("integral is not increasing in R")
    slope = float(np.polyfit(np.log(rr), np.log(d[drop:]), 1)[0])
    regime = gradient_regime(n, s, sigma)
    log_slope = None
    if regime == "log":
        lin = np.polyfit(np.log(radii[drop:]), v[drop:], 1)[0]
        log_slope = float(lin / log_coefficient(n, s, sigma))
    return GrowthFit(regime, radii.tolist(), v.tolist(), slope, log_slope)


def gradient_regime(n, s, sigma):
    d = n - 2 * s
    if np.isclose(sigma, d):
        return "log"
    return "bounded" if sigma < d else "power"


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def _map(fn, items, workers):
    """Ordered map, optionally over a thread pool (rows are independent)."""
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _collect(names, rows):
    cols = {k: [] for k in names}
    notes = []
    for r in rows:
        if isinstance(r, str):
            notes.append(r)
            continue
        for k in names:
            cols[k].append(r[k])
    return cols, notes


@dataclass
class SweepParams:
    """Shared sweep inputs.

    ``field`` is the coefficient; its distinguished point is the interior
    centre (interior sweeps) or the boundary point (boundary sweeps).
    """

    n: int
    s: float
    lam: float
    field: object
    constants: object
    c_s: float
    domain: object = None
    r: float = 0.5
    alpha: float = 1.0
    beta: Optional[float] = None
    delta: float = 0.25
    direction: Optional[tuple] = None
    reading: str = "default"
    drop: int = 2
    spectrum: object = None


def _trace_regime(n, s):
    if np.isclose(n, 4 * s):
        return "eps^(2s) ln(1/eps)"
    return "eps^(2s)" if n > 4 * s else "eps^(n-2s)"


def _excess_regime(n, s, sigma):
    d = n - 2 * s
    if np.isclose(sigma, d):
        return "eps^(n-2s) ln(1/eps)"
    return "eps^sigma" if sigma < d else "eps^(n-2s)"


def sweep_interior(params, eps_list, workers=1):
    """Certificate ingredients along a decreasing list of bubble widths."""
    n, s = check_dimension(params.n, params.s), check_exponent(params.s)
    eps_list = sorted((float(e) for e in eps_list), reverse=True)
    if any(e > params.r / 4 * (1 + 1e-12) for e in eps_list):
        raise PreconditionError("eps values must lie in (0, r/4]")
    x0 = params.field.x0
    A0 = params.field.A0
    names = ("eps", "trace_l2", "constraint", "weighted_energy", "energy_excess", "numerator", "denominator",
             "constraint_defect", "q", "threshold", "gap", "gap_uncertainty", "below_threshold")

    def row(eps):
        try:
            tf = interior_spec(n, s, eps, x0, A0, params.r, params.domain)
        except ContainmentError as exc:
            return f"eps={eps:.6g} dropped: {exc}"
        rep = existence_certificate(params.spectrum, s, params.lam, params.field, tf, params.constants, params.c_s)
        P = rep.parts
        return dict(
            eps=eps, trace_l2=P["trace_l2"], constraint=rep.constraint, weighted_energy=P["weighted_energy"],
            energy_excess=P["weighted_energy"] - P["bubble_energy"], numerator=P["numerator"],
            denominator=rep.constraint ** (2 / critical_exponent(n, s)), constraint_defect=params.constants.K1 * P["jacobian"] - rep.constraint,
            q=rep.q, threshold=rep.threshold, gap=rep.gap, gap_uncertainty=rep.gap_uncertainty,
            below_threshold=rep.below_threshold,
        )

    cols, notes = _collect(names, _map(row, eps_list, workers))
    table = SweepTable("eps", cols, notes=notes)
    sigma = params.field.sigma
    table.regimes = {"trace_l2": _trace_regime(n, s), "energy_excess": _excess_regime(n, s, sigma)}
    if len(table) - params.drop >= 4:
        for c in ("trace_l2", "energy_excess"):
            if np.all(table.column(c) > 0):
                table.fits[c] = fit_exponent(table, c, drop=params.drop)
        table.regimes["trace_l2_log_test"] = detect_log_factor(
            table.column("eps"), table.column("trace_l2"), 2 * s, drop=params.drop
        ).to_dict()
    return table


def crossing_point(table):
    """Largest eps (or smallest j) from which every later row is below threshold; None if none."""
    below = list(table.columns["below_threshold"])
    idx = table.column(table.index)
    for i in range(len(below)):
        if all(below[i:]):
            return float(idx[i]) if table.index == "eps" else int(idx[i])
    return None


def sweep_boundary(params, j_list, x0=None, workers=1):
    """Boundary certificate along x_j = x0 + 2^-j d with the configured eps_j reading."""
    n, s = check_dimension(params.n, params.s), check_exponent(params.s)
    field = params.field
    x0 = field.x0 if x0 is None else np.asarray(x0, float)
    sigma = field.sigma
    alpha = params.alpha
    beta = params.beta if params.beta is not None else choose_beta(n, s, sigma, alpha)
    j_list = sorted(int(j) for j in j_list)
    names = ("j", "eps_j", "q", "threshold", "gap", "gap_uncertainty", "below_threshold", "scale_lambda",
             "scale_cutoff", "scale_sigma", "dominance_ratio")

    def row(j):
        try:
            xj = alpha_singular_sequence(params.domain, x0, alpha, params.delta, 1, params.direction, start=j)[0]
            tf = boundary_spec(n, s, x0, xj, alpha, beta, params.delta, field.A0, j, params.domain, params.reading)
        except ContainmentError as exc:
            return f"j={j} dropped: {exc}"
        rep = existence_certificate(params.spectrum, s, params.lam, field, tf, params.constants, params.c_s)
        e = tf.eps_j
        sl, sc, ss = e ** (2 * s * beta), e ** ((n - 2 * s) * (beta - alpha)), e**sigma
        return dict(j=j, eps_j=e, q=rep.q, threshold=rep.threshold, gap=rep.gap,
                    gap_uncertainty=rep.gap_uncertainty, below_threshold=rep.below_threshold, scale_lambda=sl,
                    scale_cutoff=sc, scale_sigma=ss, dominance_ratio=sl / max(sc, ss))

    cols, notes = _collect(names, _map(row, j_list, workers))
    table = SweepTable("j", cols, notes=notes)
    table.regimes = {"beta": beta, "alpha": alpha, "reading": params.reading,
                     "ordering_holds": bool(2 * s * beta < min(sigma, (n - 2 * s) * (beta - alpha)))}
    ratio = table.column("dominance_ratio")
    table.regimes["dominance_increasing"] = bool(len(ratio) > 1 and np.all(np.diff(ratio) > 0))
    return table
