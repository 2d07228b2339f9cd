"""Critical functionals, sharp constants, the Nehari minimizer and the existence certificate.

Discrete functionals live on a ``SpectralDecomposition``: with spectral
coefficients c_k of u,

    I(u) = sum (lambda_k^s - lam) c_k^2,     G(u) = sum_i w_i |u_i|^p,
    Q(u) = I(u) / G(u)^(2/p),                 p = 2n / (n - 2s).

The existence certificate evaluates Q on the continuum test functions of the
bubbles module by quadrature in coordinates scaled to unit bubble width.
"""

from dataclasses import asdict, dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.special import gamma, gammaln, jv, kv
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import (check_dimension, check_exponent, check_grid_function, check_positive,
                          check_random_state, check_spd)
from .bubbles import QuadSpec, cutoff_profile, sphere_area, u1_profile, w1_gradient
from .exceptions import PreconditionError, QuadratureError
from .operator import hs_inner
from .quadrature import panel_rule, tanh_sinh


def critical_exponent(n, s):
    """p = 2n / (n - 2s)."""
    return 2 * n / (n - 2 * s)


def _dim(S):
    if S.dim is None:
        raise PreconditionError("the spectral decomposition carries no spatial dimension")
    return S.dim


def lp_mass(S, u, p):
    """Lumped integral of |u|^p."""
    return np.sum(S.weights * np.abs(u) ** p, axis=-1)


def i_energy(S, s, lam, u):
    """hs_norm^2 - lam ||u||^2."""
    return hs_inner(S, s, u, u) - lam * S.l2_inner(u, u)


def rayleigh_q(S, s, lam, u):
    """I(u) / ||u||^2_{L^p} with the critical exponent p."""
    p = critical_exponent(_dim(S), s)
    G = lp_mass(S, u, p)
    if np.any(G == 0):
        raise PreconditionError("Rayleigh quotient of the zero function")
    return i_energy(S, s, lam, u) / G ** (2 / p)


@dataclass
class EnergyReport:
    """Rayleigh quotient of one test function against the threshold."""

    i_energy: float
    constraint: float
    q: float
    lam: float
    threshold: float
    below_threshold: bool
    gap: float = float("nan")
    gap_uncertainty: float = float("nan")
    parts: dict = dc_field(default_factory=dict)
    hypotheses: dict = dc_field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# Sharp constants
# ---------------------------------------------------------------------------


@dataclass
class SharpConstants:
    """K_s(n), K_1 and the ingredients of the quotient.

    Attributes
    ----------
    n, s
    Ks : float
        ||u_1||^2_{L^p} / E.
    K1 : float
        ||u_1||^p_{L^p}.
    energy : float
        E = weighted Dirichlet energy of w_1 over the half space.
    profile_integral : float
        D = integral of t^(1-2s) (theta^2 + theta'^2) for the one-dimensional
        extension profile theta; equals the reciprocal of the DtN constant.
    errors : dict
        Quadrature error estimates.
    """

    n: int
    s: float
    Ks: float
    K1: float
    energy: float
    profile_integral: float
    errors: dict

    def to_dict(self):
        return asdict(self)


def _quad(f, edges, quad, name, errors):
    total, err = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(f, a, b, epsabs=0, epsrel=quad.epsrel, limit=quad.limit)
        total += v
        err += e
    if not np.isfinite(total) or err > 1e3 * quad.epsrel * abs(total) + quad.epsabs:
        raise QuadratureError(f"{name}: error estimate {err:.2e} for value {total:.6e}", residual=err)
    errors[name] = err
    return total


def constraint_mass(n, s, eps=1.0, quad=QuadSpec(epsrel=1e-12)):
    """Integral of |u_eps|^p over R^n by radial quadrature (independent of eps)."""
    check_dimension(n, s)
    p = critical_exponent(n, s)
    m = (n - 2 * s) / 2
    f = lambda r: r ** (n - 1) * (eps**m / (r * r + eps * eps) ** m) ** p
    return sphere_area(n) * _quad(f, [0, eps, np.inf], quad, "mass", {})


def profile_integral(s, quad=QuadSpec(epsrel=1e-12)):
    """D = integral t^(1-2s) c^2 t^(2s) (K_s^2 + K_{s-1}^2) dt with c = 2^(1-s) / Gamma(s)."""
    c = 2 ** (1 - s) / gamma(s)
    f = lambda t: t * c * c * (kv(s, t) ** 2 + kv(s - 1, t) ** 2)
    return _quad(f, [0, 1, np.inf], quad, "profile", {})


def compute_sharp_constants(n, s, quad=QuadSpec(epsrel=1e-12)):
    """Sharp trace constant by quadrature.

    The energy of w_1 is evaluated in Fourier variables: the transform of
    u_1 is a Bessel-K function, the extension multiplies it by the profile
    theta(|xi| y), and the half-space energy factorizes into a radial
    integral in xi times the profile integral D. Improper integrals use
    quadrature with an infinite-interval map for the tails.
    """
    n = check_dimension(n, s)
    s = check_exponent(s)
    errors = {}
    p = critical_exponent(n, s)
    nu = (n - 2 * s) / 2
    K1 = sphere_area(n) * _quad(lambda r: r ** (n - 1) * (1 + r * r) ** (-n), [0, 1, np.inf], quad, "K1", errors)
    D = profile_integral(s, quad)
    R = _quad(lambda r: r ** (n - 1) * kv(s, r) ** 2, [0, 1, np.inf], quad, "bessel", errors)
    E = np.exp((1 - nu) * np.log(4) - 2 * gammaln(nu)) * sphere_area(n) * R * D
    return SharpConstants(n, s, K1 ** (2 / p) / E, K1, E, D, errors)


def sobolev_constant_closed_form(n, s):
    """Sharp constant S with ||u||^2_{L^p} <= S ||(-Delta)^{s/2} u||^2 on R^n."""
    return (
        2 ** (-2 * s) * np.pi ** (-s) * gamma((n - 2 * s) / 2) / gamma((n + 2 * s) / 2)
        * (gamma(n) / gamma(n / 2)) ** (2 * s / n)
    )


def sharp_constant_oracle(n, s, c_s):
    """Independent value of K_s(n) = S_{n,s} * c_s."""
    return sobolev_constant_closed_form(n, s) * c_s


def radial_probe_ratio(n, s, components, D=None, kmax=None):
    """||u||^2_{L^p} / weighted energy of its extension for compactly supported radial u.

    ``components`` is a list of (coefficient, radius, power) for the sum of
    c (1 - |x|^2 / R^2)_+^m. The energy is D * int |xi|^(2s) |u_hat|^2 dxi / (2 pi)^n
    with the closed-form Hankel transform of each component.
    """
    n = check_dimension(n, s)
    D = profile_integral(s) if D is None else D
    p = critical_exponent(n, s)
    comps = [(float(c), float(R), float(m)) for c, R, m in components]
    Rmax = max(R for _, R, _ in comps)

    def u(r):
        r = np.asarray(r, float)
        return sum(c * np.clip(1 - (r / R) ** 2, 0, None) ** m for c, R, m in comps)

    def uhat(k):
        out = np.zeros_like(k)
        for c, R, m in comps:
            nu = n / 2 + m
            kr = k * R
            fk = 2 ** nu * np.pi ** (n / 2) * gamma(m + 1) * jv(nu, kr) / kr**nu
            out += c * R**n * fk
        return out

    edges = np.sort(np.unique([0.0] + [R for _, R, _ in comps]))
    x, w = panel_rule(np.concatenate([np.linspace(a, b, 33)[:-1] for a, b in zip(edges[:-1], edges[1:])] + [[Rmax]]), 16)
    mass = sphere_area(n) * np.sum(w * x ** (n - 1) * np.abs(u(x)) ** p)
    kmax = 4000.0 / min(R for _, R, _ in comps) if kmax is None else kmax
    step = np.pi / (2 * Rmax)
    kx, kw = panel_rule(np.arange(0.0, kmax + step, step), 8)
    kx = np.where(kx == 0, 1e-300, kx)
    energy = D * sphere_area(n) / (2 * np.pi) ** n * np.sum(kw * kx ** (n - 1 + 2 * s) * uhat(kx) ** 2)
    return mass ** (2 / p) / energy


def threshold(A0, n, s, c_s, Ks):
    """c_s det(A0)^(s/n) / K_s(n)."""
    A0 = check_spd(A0, "A0")
    return c_s * np.linalg.det(A0) ** (s / n) / Ks


# ---------------------------------------------------------------------------
# Nehari-constrained minimization
# ---------------------------------------------------------------------------


@dataclass
class NehariOptions:
    """Settings for ``minimize_nehari``.

    ``initial`` replaces phi_1 as the first start (for example a discrete
    bubble from ``bubbles.bubble_trace`` to probe for lower basins).
    """

    tolerance: float = 1e-7
    max_iter: int = 2000
    n_starts: int = 5
    random_state: Optional[int] = 0
    concentration_threshold: float = 0.25
    step: float = 1.0
    initial: Optional[np.ndarray] = None


@dataclass
class MinimizerResult:
    """Outcome of a Nehari-constrained minimization.

    ``minimizer`` is normalized to unit L^p mass; ``solution`` rescales it by
    S^((n-2s)/(4s)) so that (-L)^s u - lam u = |u|^(p-2) u.
    """

    minimizer: np.ndarray
    level: float
    n_iter: int
    el_residual: float
    constraint_residual: float
    converged: bool
    concentration: float
    concentrated: bool
    start: int
    starts: list = dc_field(default_factory=list)

    def summary(self):
        return {
            "level": self.level,
            "n_iter": self.n_iter,
            "el_residual": self.el_residual,
            "constraint_residual": self.constraint_residual,
            "converged": self.converged,
            "concentration": self.concentration,
            "concentrated": self.concentrated,
            "start": self.start,
            "starts": self.starts,
        }


def concentration_fraction(S, u, p):
    """Largest single-node share of the L^p mass."""
    m = S.weights * np.abs(u) ** p
    return float(m.max() / m.sum())


def el_residual(S, s, lam, u, level=None):
    """Discrete H^{-s} norm of (-L)^s u - lam u - level |u|^(p-2) u."""
    p = critical_exponent(_dim(S), s)
    c = S.coefficients(u)
    if level is None:
        level = float(np.sum((S.power(s) - lam) * c * c) / lp_mass(S, u, p) ** (2 / p))
    g = S.coefficients(np.abs(u) ** (p - 2) * u)
    G = lp_mass(S, u, p) ** ((p - 2) / p)
    r = (S.power(s) - lam) * c - level / G * g
    return float(np.sqrt(np.sum(S.power(-s) * r * r)))


def _descend(S, s, lam, c0, p, opts):
    H = S.power(s) - lam
    W = S.weights
    V = S.eigenvectors

    def normalize(c):
        u = np.abs(c @ V.T)
        u /= np.sum(W * u**p) ** (1 / p)
        return (W * u) @ V, u

    c, u = normalize(c0)
    q = float(np.sum(H * c * c))
    tau = opts.step
    res = np.inf
    it = 0
    for it in range(1, opts.max_iter + 1):
        g = (W * u ** (p - 1)) @ V
        r = H * c - q * g
        res = float(np.sqrt(np.sum(r * r / S.power(s))))
        if res <= opts.tolerance:
            break
        direction = q * g / H - c
        while True:
            cn, un = normalize(c + tau * direction)
            qn = float(np.sum(H * cn * cn))
            if qn <= q or tau < 1e-12:
                break
            tau *= 0.5
        if qn > q:
            break
        c, u, q = cn, un, qn
        tau = min(opts.step, 2 * tau)
    else:
        it = opts.max_iter
    g = (W * u ** (p - 1)) @ V
    res = float(np.sqrt(np.sum((H * c - q * g) ** 2 / S.power(s))))
    return u, q, it, res


def minimize_nehari(S, s, lam, opts=None):
    """Minimize I over the unit L^p sphere by preconditioned descent.

    Each step moves the spectral coefficients toward the fixed point
    c = Q (Lambda^s - lam)^-1 g(u) with backtracking on the quotient,
    renormalizes to unit L^p mass and replaces u by |u|. Multi-start runs
    begin at phi_1 and at random positive perturbations of it.
    """
    opts = opts or NehariOptions()
    s = check_exponent(s)
    if not S.complete:
        raise PreconditionError("minimization needs the complete discrete spectrum")
    lam1s = float(S.eigenvalues[0] ** s)
    if not lam < lam1s:
        raise PreconditionError(
            f"lam = {lam:.6g} >= lambda_1s = {lam1s:.6g}: S_lambda <= 0, minimization not performed"
        )
    check_positive(opts.tolerance, "tolerance")
    p = critical_exponent(_dim(S), s)
    rng = check_random_state(opts.random_state)
    K = S.n_components
    best = None
    starts = []
    base = np.zeros(K)
    base[0] = 1.0
    if opts.initial is not None:
        base = S.coefficients(check_grid_function(opts.initial, S.size))
        if not np.any(base):
            raise PreconditionError("initial guess has no component in the spectral basis")
    for start in range(max(1, opts.n_starts)):
        c0 = base.copy()
        if start > 0:
            c0 += 0.3 * np.linalg.norm(base) * rng.standard_normal(K) / np.arange(1, K + 1)
        u, q, it, res = _descend(S, s, lam, c0, p, opts)
        rec = (q, res, start, u, it)
        starts.append({"start": start, "level": q, "el_residual": res, "n_iter": it})
        if best is None or (q, res) < (best[0], best[1]):
            best = rec
    q, res, start, u, it = best
    frac = concentration_fraction(S, u, p)
    return MinimizerResult(
        minimizer=u,
        level=q,
        n_iter=it,
        el_residual=res,
        constraint_residual=float(abs(lp_mass(S, u, p) - 1)),
        converged=res <= opts.tolerance,
        concentration=frac,
        concentrated=frac > opts.concentration_threshold,
        start=start,
        starts=starts,
    )


def solution_scale(level, n, s):
    """Factor turning the unit-mass minimizer into a solution with unit nonlinearity."""
    return level ** ((n - 2 * s) / (4 * s))


# ---------------------------------------------------------------------------
# Existence certificate by scaled quadrature
# ---------------------------------------------------------------------------


def _direction_rule(n, m):
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        t = 2 * np.pi * (np.arange(m) + 0.5) / m
        return np.column_stack([np.cos(t), np.sin(t)]), np.full(m, 2 * np.pi / m)
    k = np.arange(m) + 0.5
    ph = np.arccos(1 - 2 * k / m)
    th = np.pi * (1 + 5**0.5) * k
    return np.column_stack([np.cos(th) * np.sin(ph), np.sin(th) * np.sin(ph), np.cos(ph)]), np.full(m, 4 * np.pi / m)


class _PolarRule:
    """Quadrature nodes on the quarter plane {rho > 0, y > 0} in polar form."""

    def __init__(self, fine=True):
        step = 1 / 16 if fine else 1 / 8
        t, tc, w = tanh_sinh(step, 4.5)
        self.sin = np.sin(0.5 * np.pi * t)
        self.cos = np.sin(0.5 * np.pi * tc)
        self.wt = 0.5 * np.pi * w
        self.gl = 16 if fine else 8
        self.step = step

    def radial(self, a, b):
        """Gauss-Legendre panels on [a, b] (geometric from 0 when a == 0)."""
        if a == 0:
            edges = np.concatenate([[0.0], b * 2.0 ** -np.arange(30, -1, -1)])
        else:
            k = max(1, int(np.ceil(np.log2(b / a))))
            edges = np.geomspace(a, b, k + 1)
        return panel_rule(edges, self.gl)

    def uniform(self, a, b, panels):
        return panel_rule(np.linspace(a, b, panels + 1), self.gl)

    def tail(self, a):
        """Nodes for R in [a, inf) through R = a / u."""
        t, tc, w = tanh_sinh(self.step, 4.5)
        return a / t, w * a / t**2


def _polar_points(rule, R, wR):
    RR = R[:, None]
    rho = RR * rule.cos[None, :]
    y = RR * rule.sin[None, :]
    w = (wR[:, None] * rule.wt[None, :]) * RR
    return rho.ravel(), y.ravel(), w.ravel()


def _cutoff_excess(n, s, t, rule):
    """Scaled integral of y^(1-2s) (|grad(phi w)|^2 - |grad w|^2) over the half space."""
    R1, w1 = rule.uniform(t / 2, t, 8)
    R2, w2 = rule.tail(t)
    total = 0.0
    for R, wR in ((R1, w1), (R2, w2)):
        rho, y, w = _polar_points(rule, R, wR)
        keep = (w > 0) & (y > 0)
        rho, y, w = rho[keep], y[keep], w[keep]
        v, dr, dy = w1_gradient(n, s, rho, y)
        Rxy = np.hypot(rho, y)
        phi, dphi = cutoff_profile(Rxy / t, derivative=True)
        gphi_r = dphi / t * rho / Rxy
        gphi_y = dphi / t * y / Rxy
        grad2 = dr * dr + dy * dy
        integrand = -(1 - phi * phi) * grad2 + 2 * phi * v * (gphi_r * dr + gphi_y * dy) + v * v * (gphi_r**2 + gphi_y**2)
        total += np.sum(w * rho ** (n - 1) * y ** (1 - 2 * s) * integrand)
    return sphere_area(n) * total


def _angular_factor(tf, field, radii, n_dirs=32):
    """sum over directions e of g^T (A(x) - A(x0)) g with g = O^T a^(-1/2) e, x = c + O^T a^(1/2) R e."""
    n = tf.n
    dirs, dw = _direction_rule(n, n_dirs)
    cm = tf.cmap
    g = (dirs / np.sqrt(cm.a)) @ cm.O
    base = cm.inverse(dirs)
    A0 = field.A0
    out = np.zeros(len(radii))
    for d in range(len(dirs)):
        x = tf.center[None, :] + radii[:, None] * base[d][None, :]
        A = field(x) - A0
        out += dw[d] * np.einsum("i,mij,j->m", g[d], A, g[d])
    return out


def _perturbation(tf, field, t, rule):
    """Scaled integral of y^(1-2s) (grad_x V)^T (A(x) - A(x0)) grad_x V over the support."""
    n, s = tf.n, tf.s
    if field is None:
        return 0.0
    R1, w1 = rule.radial(0.0, t / 2)
    R2, w2 = rule.uniform(t / 2, t, 8)
    R = np.concatenate([R1, R2])
    wR = np.concatenate([w1, w2])
    rho, y, w = _polar_points(rule, R, wR)
    keep = (w > 0) & (y > 0) & (rho > 0)
    rho, y, w = rho[keep], y[keep], w[keep]
    v, dr, _ = w1_gradient(n, s, rho, y)
    Rxy = np.hypot(rho, y)
    phi, dphi = cutoff_profile(Rxy / t, derivative=True)
    dV = phi * dr + v * dphi / t * rho / Rxy
    ang = _angular_factor(tf, field, tf.width * rho)
    return float(np.sum(w * rho ** (n - 1) * y ** (1 - 2 * s) * dV * dV * ang))


def _radial_1d(f, a, b, quad=QuadSpec(epsrel=1e-12)):
    # dyadic breakpoints keep each panel within one scale when b / a is huge
    lo = max(a, 1.0)
    edges = [a] if a < lo else []
    if np.isfinite(b):
        k = max(0, int(np.floor(np.log2(b / lo)))) if b > lo else 0
        edges += [lo * 2.0**i for i in range(k + 1) if lo * 2.0**i < b] + [b]
    else:
        edges += [lo, 2 * lo, np.inf]
    # rescale so the panels are O(1) for quad's infinite-interval map
    edges = sorted(set(e / lo for e in edges))
    return lo * _quad(lambda u: f(lo * u), edges, quad, "radial", {})


def certificate_parts(tf, field, rule=None):
    """Scaled pieces of the quotient for a test function (see ``existence_certificate``)."""
    rule = rule or _PolarRule()
    n, s = tf.n, tf.s
    t = tf.ratio
    p = critical_exponent(n, s)
    jac = tf.cmap.jacobian
    l2 = sphere_area(n) * _radial_1d(lambda r: r ** (n - 1) * (cutoff_profile(r / t) * u1_profile(n, s, r)) ** 2,
                                     0.0, t)
    deficit = sphere_area(n) * _radial_1d(
        lambda r: r ** (n - 1) * (1 - cutoff_profile(r / t) ** p) * u1_profile(n, s, r) ** p, t / 2, np.inf
    )
    return {
        "ratio": t,
        "cutoff_excess": _cutoff_excess(n, s, t, rule),
        "perturbation": _perturbation(tf, field, t, rule),
        "trace_l2": jac * tf.width ** (2 * s) * l2,
        "deficit": deficit,
        "jacobian": jac,
    }


def _assemble(parts, lam, c_s, consts):
    n, s = consts.n, consts.s
    p = critical_exponent(n, s)
    jac = parts["jacobian"]
    E, K1 = consts.energy, consts.K1
    weighted = jac * (E + parts["cutoff_excess"]) + parts["perturbation"]
    numerator = c_s * weighted - lam * parts["trace_l2"]
    mass = jac * (K1 - parts["deficit"])
    denom = mass ** (2 / p)
    # numerator - threshold * denominator with the leading terms cancelled exactly
    shortfall = -np.expm1((2 / p) * np.log1p(-parts["deficit"] / K1))
    excess = (c_s * jac * parts["cutoff_excess"] + c_s * parts["perturbation"] - lam * parts["trace_l2"]
              + c_s * jac * E * shortfall)
    return weighted, numerator, mass, denom, excess / denom


def existence_certificate(S, s, lam, field, tf, constants, c_s, fine_rule=None, coarse_rule=None):
    """Quotient Q(V) of a test function against the threshold.

    Parameters
    ----------
    S : SpectralDecomposition or None
        Used for the first fractional eigenvalue in the report.
    s, lam : float
    field : CoefficientField
        Coefficient whose value at its distinguished point defines the map
        and the threshold.
    tf : TestFunctionSpec
    constants : SharpConstants
    c_s : float

    Returns
    -------
    EnergyReport
        ``gap = Q - threshold`` computed without cancellation;
        ``gap_uncertainty`` is the change of the gap between two quadrature
        resolutions.
    """
    s = check_exponent(s)
    if constants.n != tf.n or abs(constants.s - s) > 1e-14 or abs(tf.s - s) > 1e-14:
        raise PreconditionError("constants, test function and s disagree")
    n = tf.n
    A0 = field.A0
    T = threshold(A0, n, s, c_s, constants.Ks)
    fine = certificate_parts(tf, field, fine_rule or _PolarRule(True))
    coarse = certificate_parts(tf, field, coarse_rule or _PolarRule(False))
    weighted, num, mass, denom, gap = _assemble(fine, lam, c_s, constants)
    gap_c = _assemble(coarse, lam, c_s, constants)[4]
    sigma = field.sigma
    hyp = {"lam_positive": lam > 0}
    if tf.kind == "interior":
        hyp.update(n_ge_4s=n >= 4 * s, sigma_gt_2s=sigma > 2 * s)
    else:
        hyp.update(
            n_gt_4s=n > 4 * s,
            sigma_admissible=bool(n > 4 * s and sigma > 2 * s * (n - 2 * s) / (n - 4 * s)),
            alpha_admissible=bool(n > 4 * s and 1 <= tf.alpha < sigma * (n - 4 * s) / (2 * s * (n - 2 * s))),
        )
    if S is not None:
        hyp["lam_below_lambda1s"] = bool(lam < S.eigenvalues[0] ** s)
    parts = dict(fine)
    parts.update(weighted_energy=weighted, numerator=num, bubble_energy=constants.energy * fine["jacobian"])
    return EnergyReport(
        i_energy=float(num),
        constraint=float(mass),
        q=float(num / denom),
        lam=float(lam),
        threshold=float(T),
        below_threshold=bool(gap < 0),
        gap=float(gap),
        gap_uncertainty=float(abs(gap - gap_c)),
        parts={k: float(v) for k, v in parts.items()},
        hypotheses={k: bool(v) for k, v in hyp.items()},
    )


class NehariMinimizer(BaseEstimator):
    """Nehari-constrained minimizer as an estimator over a spectral decomposition.

    Parameters
    ----------
    s : float
    lam : float
        Must lie below the first fractional eigenvalue.
    tol : float
        Target Euler-Lagrange residual in the discrete H^{-s} norm.
    max_iter, n_starts : int
    random_state : int or None
    concentration_threshold : float

    Attributes
    ----------
    result_ : MinimizerResult
    minimizer_ : ndarray
    level_ : float
    n_iter_ : int
    converged_ : bool
    """

    def __init__(self, s=0.5, lam=0.0, tol=1e-7, max_iter=2000, n_starts=5, random_state=0,
                 concentration_threshold=0.25):
        self.s = s
        self.lam = lam
        self.tol = tol
        self.max_iter = max_iter
        self.n_starts = n_starts
        self.random_state = random_state
        self.concentration_threshold = concentration_threshold

    def fit(self, X, y=None):
        opts = NehariOptions(self.tol, self.max_iter, self.n_starts, self.random_state,
                             self.concentration_threshold)
        self.result_ = minimize_nehari(X, self.s, self.lam, opts)
        self.spectrum_ = X
        self.minimizer_ = self.result_.minimizer
        self.level_ = self.result_.level
        self.n_iter_ = self.result_.n_iter
        self.converged_ = self.result_.converged
        return self

    def predict(self, X=None):
        """Solution-normalized minimizer: (-L)^s u - lam u = |u|^(p-2) u."""
        check_is_fitted(self, "result_")
        n = _dim(self.spectrum_)
        return solution_scale(self.level_, n, self.s) * self.minimizer_

    def score(self, X=None, y=None):
        """Negative minimal level, so larger is better."""
        check_is_fitted(self, "result_")
        return -self.level_
