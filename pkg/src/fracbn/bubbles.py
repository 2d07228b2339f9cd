"""Bubbles, their weighted-harmonic extension, cutoffs and test functions.

The bubble is u_eps(x) = eps^((n-2s)/2) (|x - c|^2 + eps^2)^(-(n-2s)/2) and
w_1 is the Poisson extension of u_1. w_1 is radial in x, so it is exposed as
a profile in (rho, y) with rho = |x|. Two evaluations are provided:

* ``w1_profile``: the convolution of two radial power kernels collapsed to a
  single parameter integral,

      w_1(rho, y) = C y^(2s) int_0^1 t^(m1-1) (1-t)^(m2-1)
                    [t y^2 + (1-t) + t(1-t) rho^2]^(-n/2) dt,

  with m1 = (n+2s)/2, m2 = (n-2s)/2, evaluated by tanh-sinh quadrature. It
  also yields the gradient by differentiating under the integral.
* ``bubble_extension_w1``: the defining real-space integral of the kernel
  against u_1, split at |xi| in {|x|/2, |x|, 3|x|/2}; used as the reference.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.special import gamma, gammaln, hyp2f1

from ._validation import check_dimension, check_exponent, check_positive, check_spd
from .exceptions import ContainmentError, HypothesisViolation, PreconditionError, QuadratureError
from .quadrature import tanh_sinh


def sphere_area(n):
    """Surface measure of the unit sphere in R^n (2 for n = 1)."""
    return 2 * np.pi ** (n / 2) / gamma(n / 2)


@dataclass(frozen=True)
class BubbleSpec:
    n: int
    s: float
    eps: float
    center: tuple = None

    def __post_init__(self):
        check_exponent(self.s)
        check_dimension(self.n, self.s)
        check_positive(self.eps, "eps")
        if self.center is None:
            object.__setattr__(self, "center", (0.0,) * self.n)

    @property
    def exponent(self):
        return (self.n - 2 * self.s) / 2


def bubble_trace(spec, x):
    """u_eps at points ``x`` (shape (m, n) or (n,))."""
    x = np.asarray(x, float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    r2 = np.sum((x - np.asarray(spec.center)) ** 2, axis=1)
    m = spec.exponent
    out = spec.eps**m / (r2 + spec.eps**2) ** m
    return out[0] if single else out


def u1_profile(n, s, rho):
    return (1 + np.asarray(rho, float) ** 2) ** (-(n - 2 * s) / 2)


@lru_cache(maxsize=64)
def kernel_constant(n, s):
    """kappa_{n,s} from the normalization of the kernel mass, by radial quadrature."""
    n = check_dimension(n)
    s = check_exponent(s)
    m = (n + 2 * s) / 2
    f = lambda r: r ** (n - 1) * (1 + r * r) ** (-m)
    val = sum(integrate.quad(f, a, b, epsabs=0, epsrel=1e-13, limit=200)[0] for a, b in ((0, 1), (1, np.inf)))
    return 1.0 / (sphere_area(n) * val)


def kernel_constant_closed_form(n, s):
    return gamma((n + 2 * s) / 2) / (np.pi ** (n / 2) * gamma(s))


def poisson_kernel(n, s, x, y):
    """P_y(x) = kappa y^(2s) / (|x|^2 + y^2)^((n+2s)/2); ``x`` is (m, n) or (n,)."""
    check_positive(np.min(y), "y")
    x = np.asarray(x, float)
    single = x.ndim == 1
    r2 = np.sum(np.atleast_2d(x) ** 2, axis=1)
    y = np.asarray(y, float)
    out = kernel_constant(n, s) * y ** (2 * s) / (r2 + y**2) ** ((n + 2 * s) / 2)
    return out[0] if single and out.ndim else out


def kernel_mass(n, s, y):
    """Integral of P_y over R^n by radial quadrature (equals 1)."""
    k = kernel_constant(n, s)
    f = lambda r: sphere_area(n) * r ** (n - 1) * k * y ** (2 * s) / (r * r + y * y) ** ((n + 2 * s) / 2)
    return sum(integrate.quad(f, a, b, epsabs=0, epsrel=1e-12, limit=200)[0] for a, b in ((0, y), (y, np.inf)))


# ---------------------------------------------------------------------------
# w_1 via the parameter integral
# ---------------------------------------------------------------------------


def _w1_consts(n, s):
    m1, m2 = (n + 2 * s) / 2, (n - 2 * s) / 2
    logC = np.log(kernel_constant(n, s)) + (n / 2) * np.log(np.pi) + gammaln(n / 2) - gammaln(m1) - gammaln(m2)
    return m1, m2, np.exp(logC)


def _w1_eval(n, s, rho, y, grad, chunk=4096):
    m1, m2, C = _w1_consts(n, s)
    t, tc, w = tanh_sinh()
    lt, ltc = np.log(t), np.log(tc)
    base = w * np.exp((m1 - 1) * lt + (m2 - 1) * ltc)
    if grad:
        # y^(1-2s) d_y w_1 is the (1-s)-extension of (-Delta)^s u_1, a multiple of
        # (1 + |x|^2)^(-(n+2s)/2); this form has no cancellation for y << rho.
        base_y = w * np.exp(m2 * lt + (m1 - 1) * ltc)
        Cy = 2 * np.exp(gammaln(n / 2 + 1) - gammaln(m2) - gammaln(s))
    rho = np.asarray(rho, float).ravel()
    y = np.asarray(y, float).ravel()
    val = np.empty_like(rho)
    drho = np.empty_like(rho) if grad else None
    dy = np.empty_like(rho) if grad else None
    for lo in range(0, len(rho), chunk):
        sl = slice(lo, lo + chunk)
        R, Y = rho[sl, None], y[sl, None]
        lam = t * Y**2 + tc + t * tc * R**2
        p = lam ** (-n / 2)
        ys = y[sl] ** (2 * s)
        val[sl] = C * ys * (p @ base)
        if grad:
            p1 = p / lam
            drho[sl] = -C * ys * n * rho[sl] * (p1 @ (base * t * tc))
            dy[sl] = -Cy * y[sl] * (p1 @ base_y)
    return val, drho, dy


def w1_profile(n, s, rho, y):
    """w_1 at (|x| = rho, y); returns u_1(rho) exactly on y = 0.

    Relative accuracy is about 1e-13 for y >= 1e-4; below y ~ 1e-6 the
    integrand peak at 1 - t ~ y^2 is under-sampled and accuracy degrades to
    about 1e-5.
    """
    n = check_dimension(n, s)
    rho_a, y_a = np.broadcast_arrays(np.asarray(rho, float), np.asarray(y, float))
    if np.any(y_a < 0):
        raise PreconditionError("y must be nonnegative")
    out = np.asarray(u1_profile(n, s, rho_a), float).copy()
    pos = y_a > 0
    if np.any(pos):
        out[pos] = _w1_eval(n, s, np.abs(rho_a[pos]), y_a[pos], grad=False)[0]
    return out


def w1_gradient(n, s, rho, y):
    """Value and partial derivatives (d/drho, d/dy) of w_1 for y > 0."""
    n = check_dimension(n, s)
    rho_a, y_a = np.broadcast_arrays(np.asarray(rho, float), np.asarray(y, float))
    if np.any(y_a <= 0):
        raise PreconditionError("gradient of w_1 needs y > 0")
    v, dr, dy = _w1_eval(n, s, np.abs(rho_a), y_a, grad=True)
    shp = rho_a.shape
    return v.reshape(shp), (np.sign(rho_a) * dr.reshape(shp)), dy.reshape(shp)


# ---------------------------------------------------------------------------
# w_1 by real-space quadrature (reference)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadSpec:
    """Adaptive quadrature targets."""

    epsrel: float = 1e-10
    epsabs: float = 1e-14
    limit: int = 400


def _quad_pieces(f, edges, spec):
    total, err = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            v, e = integrate.quad(f, a, b, epsabs=spec.epsabs, epsrel=spec.epsrel, limit=spec.limit)
            total += v
            err += e
    if err > max(100 * spec.epsabs, 1e3 * spec.epsrel * abs(total)):
        raise QuadratureError(f"quadrature error estimate {err:.2e} for value {total:.6e}", residual=err)
    return total


def bubble_extension_w1(n, s, x, y, quad=QuadSpec()):
    """Real-space integral of P_y(x - xi) u_1(xi) over R^n, split at |x|/2, |x|, 3|x|/2."""
    n = check_dimension(n, s)
    x = np.atleast_1d(np.asarray(x, float))
    r = float(np.linalg.norm(x))
    if y < 0:
        raise PreconditionError("y must be nonnegative")
    if y == 0:
        return float(u1_profile(n, s, r))
    k = kernel_constant(n, s)
    m2 = (n - 2 * s) / 2
    mm = (n + 2 * s) / 2
    pre = k * y ** (2 * s)
    if n == 1:
        xv = x[0]
        f = lambda xi: pre * ((xv - xi) ** 2 + y * y) ** (-mm) * (1 + xi * xi) ** (-m2)
        pts = sorted({-1.5 * r, -r, -0.5 * r, 0.0, 0.5 * r, r, 1.5 * r})
        return _quad_pieces(f, [-np.inf] + pts + [np.inf], quad)

    def angular(rho):
        a = y * y + r * r + rho * rho
        b = 2 * r * rho
        if n == 2:
            return 2 * np.pi * a ** (-mm) * hyp2f1(mm / 2, (mm + 1) / 2, 1, (b / a) ** 2)
        if b == 0:
            return 4 * np.pi * a ** (-mm)
        return 2 * np.pi * ((a - b) ** (1 - mm) - (a + b) ** (1 - mm)) / (b * (mm - 1))

    f = lambda rho: pre * rho ** (n - 1) * (1 + rho * rho) ** (-m2) * angular(rho)
    pts = [0.5 * r, r, 1.5 * r] if r > 0 else []
    return _quad_pieces(f, [0.0] + pts + [np.inf], quad)


# ---------------------------------------------------------------------------
# Cutoff
# ---------------------------------------------------------------------------


def _psi(t):
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)


def cutoff_profile(t, derivative=False):
    """Smooth nonincreasing phi with phi = 1 on [0, 1/2] and phi = 0 on [1, inf)."""
    t = np.asarray(t, float)
    tau = np.clip(2 * t - 1, 0.0, 1.0)
    a, b = _psi(1 - tau), _psi(tau)
    phi = a / (a + b)
    if not derivative:
        return phi
    inner = (tau > 0) & (tau < 1)
    tt = np.where(inner, tau, 0.5)
    da = a * (-1.0 / (1 - tt) ** 2)
    db = b * (1.0 / tt**2)
    dphi = np.where(inner, 2 * (da * b - a * db) / (a + b) ** 2, 0.0)
    return phi, dphi


def cutoff(r, point):
    """phi(r_xy / r) at ``point = (x, y)`` with r_xy = sqrt(|x|^2 + y^2)."""
    check_positive(r, "r")
    x, y = point
    rxy = np.sqrt(np.sum(np.atleast_1d(np.asarray(x, float)) ** 2, axis=-1) + np.asarray(y, float) ** 2)
    return cutoff_profile(rxy / r)


# ---------------------------------------------------------------------------
# Coordinate map
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CoordinateMap:
    """x_tilde = diag(a)^(-1/2) O x, with A0 = O^T diag(a) O."""

    a: np.ndarray
    O: np.ndarray

    @property
    def jacobian(self):
        """det(A0)^(1/2), so that dx = jacobian * dx_tilde."""
        return float(np.sqrt(np.prod(self.a)))

    @property
    def det(self):
        return float(np.prod(self.a))

    def forward(self, x):
        return (np.atleast_2d(x) @ self.O.T) / np.sqrt(self.a)

    def inverse(self, xt):
        return (np.atleast_2d(xt) * np.sqrt(self.a)) @ self.O

    def matrix(self):
        return self.O.T @ np.diag(self.a) @ self.O


def diagonalizing_map(A0):
    """Eigen-decomposition map that turns the form of A0 into the Euclidean one."""
    A0 = check_spd(A0, "A0")
    a, Q = np.linalg.eigh(A0)
    O = Q.T.copy()
    # deterministic orientation: largest entry of each row positive
    for i in range(len(a)):
        if O[i, np.argmax(np.abs(O[i]))] < 0:
            O[i] = -O[i]
    return CoordinateMap(a, O)


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TestFunctionSpec:
    """Interior bubble V_eps or boundary bubble V_j.

    Both are phi(r_xy / radius) w_width(Phi(x - center), y) with r_xy
    measured in the mapped coordinates. For the interior kind ``radius = r``
    and ``width = eps``; for the boundary kind ``radius = delta * eps_j^alpha``
    and ``width = eps_j^beta``.
    """

    __test__ = False

    kind: str
    n: int
    s: float
    center: np.ndarray
    cmap: CoordinateMap
    width: float
    radius: float
    alpha: Optional[float] = None
    beta: Optional[float] = None
    delta: Optional[float] = None
    j: Optional[int] = None
    eps_j: Optional[float] = None
    reading: str = "default"

    @property
    def bubble(self):
        return BubbleSpec(self.n, self.s, self.width, tuple(self.center))

    @property
    def ratio(self):
        """Cutoff radius in units of the bubble width."""
        return self.radius / self.width

    def to_dict(self):
        d = {"kind": self.kind, "n": self.n, "s": self.s, "center": [float(c) for c in self.center],
             "width": self.width, "radius": self.radius}
        if self.kind == "boundary":
            d.update(alpha=self.alpha, beta=self.beta, delta=self.delta, j=self.j, eps_j=self.eps_j,
                     reading=self.reading)
        return d


def _support_check(domain, center, cmap, radius, samples=256):
    if domain is None:
        return
    n = len(center)
    if n == 1:
        dirs = np.array([[-1.0], [1.0]])
    elif n == 2:
        t = 2 * np.pi * np.arange(samples) / samples
        dirs = np.column_stack([np.cos(t), np.sin(t)])
    else:
        k = np.arange(samples) + 0.5
        ph = np.arccos(1 - 2 * k / samples)
        th = np.pi * (1 + 5**0.5) * k
        dirs = np.column_stack([np.cos(th) * np.sin(ph), np.sin(th) * np.sin(ph), np.cos(ph)])
    pts = center + cmap.inverse(radius * dirs)
    if not domain.contains(center[None, :])[0] or np.any(domain.sdf(pts) >= 0):
        raise ContainmentError(f"test-function support of radius {radius:.3g} escapes the domain")


def interior_spec(n, s, eps, x0, A0, r, domain=None):
    """Interior test function with cutoff radius ``r`` around ``x0``; support checked in ``domain``."""
    check_dimension(n, s)
    check_positive(eps, "eps")
    check_positive(r, "r")
    x0 = np.asarray(x0, float)
    cmap = diagonalizing_map(A0)
    _support_check(domain, x0, cmap, r)
    return TestFunctionSpec("interior", n, s, x0, cmap, float(eps), float(r))


def boundary_spec(n, s, x0, xj, alpha, beta, delta, A0, j=None, domain=None, reading="default"):
    """Boundary test function at ``xj`` approaching the boundary point ``x0``.

    ``reading`` selects eps_j = |xj - x0| ("default") or |xj - x0|^alpha
    ("literal"); the cutoff scale is delta * eps_j^alpha and the bubble width
    eps_j^beta in both cases.
    """
    if not beta > alpha >= 1:
        raise PreconditionError(f"need beta > alpha >= 1, got alpha={alpha}, beta={beta}")
    check_positive(delta, "delta")
    xj = np.asarray(xj, float)
    d = float(np.linalg.norm(xj - np.asarray(x0, float)))
    if reading == "default":
        eps_j = d
    elif reading == "literal":
        eps_j = d**alpha
    else:
        raise PreconditionError(f"unknown eps_j reading {reading!r}")
    cmap = diagonalizing_map(A0)
    radius = delta * eps_j**alpha
    _support_check(domain, xj, cmap, radius)
    return TestFunctionSpec("boundary", n, s, xj, cmap, float(eps_j**beta), float(radius), alpha=float(alpha),
                            beta=float(beta), delta=float(delta), j=j, eps_j=eps_j, reading=reading)


def _evaluate(tf, x, y):
    x = np.atleast_2d(np.asarray(x, float))
    y = np.broadcast_to(np.asarray(y, float), (len(x),))
    xt = tf.cmap.forward(x - tf.center)
    rho = np.linalg.norm(xt, axis=1)
    phi = cutoff_profile(np.sqrt(rho**2 + y**2) / tf.radius)
    out = np.zeros(len(x))
    live = phi > 0
    eta = tf.width
    if np.any(live):
        out[live] = phi[live] * eta ** (tf.s - tf.n / 2) * w1_profile(tf.n, tf.s, rho[live] / eta, y[live] / eta)
    return out


def interior_test_function(tf, x, y):
    """V_eps(x, y) at points ``x`` (m, n) and heights ``y``."""
    if tf.kind != "interior":
        raise PreconditionError("expected an interior test-function spec")
    return _evaluate(tf, x, y)


def boundary_test_function(tf, x, y):
    """V_j(x, y) at points ``x`` (m, n) and heights ``y``."""
    if tf.kind != "boundary":
        raise PreconditionError("expected a boundary test-function spec")
    return _evaluate(tf, x, y)


def choose_beta(n, s, sigma, alpha):
    """Midpoint of (alpha (n-2s)/(n-4s), sigma/(2s)); checks 2 s beta < min(sigma, (n-2s)(beta-alpha))."""
    s = check_exponent(s)
    if not n > 4 * s:
        raise HypothesisViolation(f"need n > 4s, got n={n}, s={s}")
    if not sigma > 2 * s * (n - 2 * s) / (n - 4 * s):
        raise HypothesisViolation(
            f"need sigma > 2s(n-2s)/(n-4s) = {2 * s * (n - 2 * s) / (n - 4 * s):.6g}, got sigma={sigma}"
        )
    if alpha < 1:
        raise HypothesisViolation(f"need alpha >= 1, got {alpha}")
    lo = alpha * (n - 2 * s) / (n - 4 * s)
    hi = sigma / (2 * s)
    if not lo < hi:
        raise HypothesisViolation(
            f"empty beta interval ({lo:.6g}, {hi:.6g}): need alpha < sigma(n-4s)/(2s(n-2s))"
        )
    beta = 0.5 * (lo + hi)
    if not 2 * s * beta < min(sigma, (n - 2 * s) * (beta - alpha)):
        raise HypothesisViolation(
            f"2s*beta = {2 * s * beta:.6g} is not below min(sigma, (n-2s)(beta-alpha)) = "
            f"{min(sigma, (n - 2 * s) * (beta - alpha)):.6g}"
        )
    return beta
