"""Bounded domains on uniform lattices, coefficient fields, geometric checks.

Regions are described by a level-set function that is negative inside. For
intervals, boxes, discs and annuli it is the exact signed distance; for
polygons and the cusp it is a signed function with the correct sign and a
usable gradient, which is all the grid and the predicates need.
"""

from dataclasses import dataclass, field
import hashlib
import json
from typing import Callable, Optional

import numpy as np

from ._validation import check_dimension, check_positive
from .exceptions import ContainmentError, HypothesisViolation, PreconditionError


# ---------------------------------------------------------------------------
# Domain descriptors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Domain:
    """Base descriptor. Subclasses define ``sdf``, ``sdf_grad`` and ``bbox``."""

    @property
    def dim(self):
        return len(self.bbox[0])

    def sdf(self, x):
        raise NotImplementedError

    def sdf_grad(self, x):
        # Central differences; subclasses override with analytic gradients.
        x = np.atleast_2d(np.asarray(x, dtype=float))
        h = 1e-7 * max(1.0, float(np.max(np.abs(self.bbox))))
        g = np.empty_like(x)
        for k in range(x.shape[1]):
            e = np.zeros(x.shape[1])
            e[k] = h
            g[:, k] = (self.sdf(x + e) - self.sdf(x - e)) / (2 * h)
        return g

    def contains(self, x):
        return self.sdf(x) < 0

    def boundary_quadrature(self, m):
        """Points, outward normals and weights for integrals over the boundary."""
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    @property
    def volume(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Interval(Domain):
    a: float = 0.0
    b: float = 1.0

    @property
    def bbox(self):
        return (np.array([self.a]), np.array([self.b]))

    @property
    def volume(self):
        return self.b - self.a

    def sdf(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))[:, 0]
        return np.maximum(self.a - x, x - self.b)

    def sdf_grad(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))[:, 0]
        mid = 0.5 * (self.a + self.b)
        return np.where(x < mid, -1.0, 1.0)[:, None]

    def boundary_quadrature(self, m=None):
        return (np.array([[self.a], [self.b]]), np.array([[-1.0], [1.0]]), np.array([1.0, 1.0]))

    def to_dict(self):
        return {"kind": "interval", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class Box(Domain):
    lo: tuple = (0.0, 0.0)
    hi: tuple = (1.0, 1.0)

    @property
    def bbox(self):
        return (np.asarray(self.lo, float), np.asarray(self.hi, float))

    @property
    def volume(self):
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def sdf(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lo, hi = self.bbox
        d = np.maximum(lo - x, x - hi)
        outside = np.linalg.norm(np.maximum(d, 0.0), axis=1)
        inside = np.minimum(d.max(axis=1), 0.0)
        return outside + inside

    def sdf_grad(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lo, hi = self.bbox
        d = np.maximum(lo - x, x - hi)
        sign = np.where(lo - x > x - hi, -1.0, 1.0)
        pos = np.maximum(d, 0.0)
        g = np.zeros_like(x)
        out = np.linalg.norm(pos, axis=1) > 0
        g[out] = (pos * sign)[out] / np.linalg.norm(pos[out], axis=1)[:, None]
        k = d.argmax(axis=1)
        rows = np.where(~out)[0]
        g[rows, k[rows]] = sign[rows, k[rows]]
        return g

    def boundary_quadrature(self, m=64):
        lo, hi = self.bbox
        n = len(lo)
        if n != 2:
            raise PreconditionError("boundary quadrature for boxes is implemented for n = 2")
        # midpoint rule on each edge, corners excluded
        pts, nrm, wts = [], [], []
        for axis in range(2):
            other = 1 - axis
            L = hi[other] - lo[other]
            t = lo[other] + (np.arange(m) + 0.5) * L / m
            for side, val in ((-1.0, lo[axis]), (1.0, hi[axis])):
                p = np.empty((m, 2))
                p[:, axis] = val
                p[:, other] = t
                nv = np.zeros((m, 2))
                nv[:, axis] = side
                pts.append(p)
                nrm.append(nv)
                wts.append(np.full(m, L / m))
        return np.vstack(pts), np.vstack(nrm), np.concatenate(wts)

    def to_dict(self):
        return {"kind": "box", "lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True)
class Disc(Domain):
    """Ball of given radius; a disc for n = 2."""

    center: tuple = (0.0, 0.0)
    radius: float = 1.0

    @property
    def bbox(self):
        c = np.asarray(self.center, float)
        return (c - self.radius, c + self.radius)

    @property
    def volume(self):
        from scipy.special import gamma

        n = len(self.center)
        return np.pi ** (n / 2) / gamma(n / 2 + 1) * self.radius**n

    def sdf(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.linalg.norm(x - np.asarray(self.center), axis=1) - self.radius

    def sdf_grad(self, x):
        d = np.atleast_2d(np.asarray(x, dtype=float)) - np.asarray(self.center)
        r = np.linalg.norm(d, axis=1, keepdims=True)
        r[r == 0] = 1.0
        return d / r

    def boundary_quadrature(self, m=256):
        if len(self.center) != 2:
            raise PreconditionError("boundary quadrature for balls is implemented for n = 2")
        t = 2 * np.pi * np.arange(m) / m
        nrm = np.column_stack([np.cos(t), np.sin(t)])
        return np.asarray(self.center) + self.radius * nrm, nrm, np.full(m, 2 * np.pi * self.radius / m)

    def to_dict(self):
        return {"kind": "disc", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Annulus(Domain):
    center: tuple = (0.0, 0.0)
    r_in: float = 0.5
    r_out: float = 1.0

    @property
    def bbox(self):
        c = np.asarray(self.center, float)
        return (c - self.r_out, c + self.r_out)

    @property
    def volume(self):
        return np.pi * (self.r_out**2 - self.r_in**2)

    def sdf(self, x):
        r = np.linalg.norm(np.atleast_2d(np.asarray(x, float)) - np.asarray(self.center), axis=1)
        return np.maximum(r - self.r_out, self.r_in - r)

    def sdf_grad(self, x):
        d = np.atleast_2d(np.asarray(x, float)) - np.asarray(self.center)
        r = np.linalg.norm(d, axis=1, keepdims=True)
        r[r == 0] = 1.0
        outer = (r[:, 0] - self.r_out) > (self.r_in - r[:, 0])
        return np.where(outer[:, None], d / r, -d / r)

    def boundary_quadrature(self, m=256):
        t = 2 * np.pi * np.arange(m) / m
        e = np.column_stack([np.cos(t), np.sin(t)])
        c = np.asarray(self.center)
        pts = np.vstack([c + self.r_out * e, c + self.r_in * e])
        nrm = np.vstack([e, -e])
        wts = np.concatenate([np.full(m, 2 * np.pi * self.r_out / m), np.full(m, 2 * np.pi * self.r_in / m)])
        return pts, nrm, wts

    def to_dict(self):
        return {"kind": "annulus", "center": list(self.center), "r_in": self.r_in, "r_out": self.r_out}


@dataclass(frozen=True)
class Polygon(Domain):
    """Simple polygon in the plane, vertices in counter-clockwise order."""

    vertices: tuple = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))

    @property
    def bbox(self):
        v = np.asarray(self.vertices, float)
        return (v.min(axis=0), v.max(axis=0))

    @property
    def volume(self):
        v = np.asarray(self.vertices, float)
        x, y = v[:, 0], v[:, 1]
        return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    def sdf(self, x):
        p = np.atleast_2d(np.asarray(x, float))
        v = np.asarray(self.vertices, float)
        w = np.roll(v, -1, axis=0)
        d2 = np.full(len(p), np.inf)
        inside = np.zeros(len(p), bool)
        for a, b in zip(v, w):
            e = b - a
            t = np.clip(((p - a) @ e) / (e @ e), 0.0, 1.0)
            d2 = np.minimum(d2, np.sum((p - a - t[:, None] * e) ** 2, axis=1))
            cond = (a[1] > p[:, 1]) != (b[1] > p[:, 1])
            xint = a[0] + (p[:, 1] - a[1]) * e[0] / np.where(e[1] == 0, 1.0, e[1])
            inside ^= cond & (p[:, 0] < xint)
        return np.where(inside, -1.0, 1.0) * np.sqrt(d2)

    def boundary_quadrature(self, m=64):
        v = np.asarray(self.vertices, float)
        pts, nrm, wts = [], [], []
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            e = b - a
            L = np.linalg.norm(e)
            t = (np.arange(m) + 0.5) / m
            pts.append(a + t[:, None] * e)
            nrm.append(np.tile(np.array([e[1], -e[0]]) / L, (m, 1)))
            wts.append(np.full(m, L / m))
        return np.vstack(pts), np.vstack(nrm), np.concatenate(wts)

    def to_dict(self):
        return {"kind": "polygon", "vertices": [list(p) for p in self.vertices]}


@dataclass(frozen=True)
class Cusp(Domain):
    """Region {0 < x2 < height, |x1| < x2**power}; singular at the origin."""

    power: float = 2.0
    height: float = 1.0

    @property
    def bbox(self):
        w = self.height**self.power
        return (np.array([-w, 0.0]), np.array([w, self.height]))

    @property
    def volume(self):
        return 2 * self.height ** (self.power + 1) / (self.power + 1)

    def sdf(self, x):
        p = np.atleast_2d(np.asarray(x, float))
        x1, x2 = p[:, 0], p[:, 1]
        return np.maximum.reduce([np.abs(x1) - np.maximum(x2, 0.0) ** self.power, -x2, x2 - self.height])

    def to_dict(self):
        return {"kind": "cusp", "power": self.power, "height": self.height}


_DOMAINS = {
    "interval": Interval,
    "box": Box,
    "disc": Disc,
    "annulus": Annulus,
    "polygon": Polygon,
    "cusp": Cusp,
}


def domain_from_dict(spec):
    """Build a descriptor from its config-table form (``kind`` plus fields)."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _DOMAINS:
        raise PreconditionError(f"unknown domain kind {kind!r}; expected one of {sorted(_DOMAINS)}")
    for key in ("lo", "hi", "center"):
        if key in spec:
            spec[key] = tuple(float(v) for v in spec[key])
    if "vertices" in spec:
        spec["vertices"] = tuple(tuple(float(c) for c in p) for p in spec["vertices"])
    return _DOMAINS[kind](**spec)


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform lattice restricted to a domain.

    Attributes
    ----------
    domain : Domain
    axes : tuple of ndarray
        Lattice coordinates per axis, including the bounding-box faces.
    h : ndarray
        Mesh width per axis.
    interior : ndarray of shape (N, n)
        Interior node coordinates, in lattice (C) order.
    interior_index : ndarray of shape (N, n)
        Multi-indices of the interior nodes.
    boundary : ndarray of shape (B, n)
        Boundary nodes: lattice nodes outside the open domain that neighbour
        an interior node along an axis.
    normals : ndarray of shape (B, n)
        Outward unit normals at boundary nodes (level-set gradient).
    """

    domain: Domain
    axes: tuple
    h: np.ndarray
    interior: np.ndarray
    interior_index: np.ndarray
    boundary: np.ndarray
    boundary_index: np.ndarray
    normals: np.ndarray
    boundary_class: str = "unverified"

    @property
    def dim(self):
        return len(self.axes)

    @property
    def shape(self):
        return tuple(len(a) for a in self.axes)

    @property
    def n_interior(self):
        return len(self.interior)

    @property
    def cell_volume(self):
        return float(np.prod(self.h))

    @property
    def weights(self):
        """Lumped quadrature weights at interior nodes."""
        return np.full(self.n_interior, self.cell_volume)

    def interior_mask(self):
        mask = np.zeros(self.shape, bool)
        mask[tuple(self.interior_index.T)] = True
        return mask

    def to_lattice(self, u):
        """Zero-extend interior values (or a batch of them) to the full lattice."""
        u = np.asarray(u, float)
        full = np.zeros(u.shape[:-1] + self.shape)
        full[(Ellipsis,) + tuple(self.interior_index.T)] = u
        return full

    def interpolate(self, u, points):
        """Multilinear interpolation of the zero-extended grid function."""
        from scipy.interpolate import RegularGridInterpolator

        interp = RegularGridInterpolator(self.axes, self.to_lattice(u), bounds_error=False, fill_value=0.0)
        return interp(np.atleast_2d(points))

    @property
    def hash(self):
        payload = json.dumps(
            {"domain": self.domain.to_dict(), "shape": self.shape, "lo": [float(a[0]) for a in self.axes],
             "hi": [float(a[-1]) for a in self.axes]},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def build_grid(descriptor, resolution):
    """Lattice with ``resolution`` nodes per axis over the descriptor's bounding box.

    Interior nodes are lattice nodes strictly inside the region; boundary
    nodes are the outside nodes adjacent to them, where Dirichlet data is
    imposed.
    """
    n = check_dimension(descriptor.dim)
    res = np.broadcast_to(np.asarray(resolution, int), (n,))
    if np.any(res < 3):
        raise PreconditionError(f"resolution must be >= 3 per axis, got {resolution!r}")
    lo, hi = descriptor.bbox
    if np.any(hi - lo <= 0) or descriptor.volume <= 0:
        raise PreconditionError("degenerate region (zero volume)")
    axes = tuple(np.linspace(lo[k], hi[k], res[k]) for k in range(n))
    h = np.array([(hi[k] - lo[k]) / (res[k] - 1) for k in range(n)])
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    phi = descriptor.sdf(mesh).reshape(tuple(res))
    inside = phi < -1e-12 * float(np.max(hi - lo))
    if not inside.any():
        raise PreconditionError("no lattice node lies inside the region; increase resolution")
    near = np.zeros_like(inside)
    for k in range(n):
        for shift in (1, -1):
            near |= np.roll(inside, shift, axis=k) & _roll_valid(inside.shape, k, shift)
    bnd = near & ~inside
    idx_in = np.argwhere(inside)
    idx_bd = np.argwhere(bnd)
    pts_in = np.column_stack([axes[k][idx_in[:, k]] for k in range(n)])
    pts_bd = np.column_stack([axes[k][idx_bd[:, k]] for k in range(n)])
    g = descriptor.sdf_grad(pts_bd)
    g = g / np.linalg.norm(g, axis=1, keepdims=True)
    return Grid(descriptor, axes, h, pts_in, idx_in, pts_bd, idx_bd, g)


def _roll_valid(shape, axis, shift):
    # mask of positions whose rolled source did not wrap around
    valid = np.ones(shape, bool)
    sl = [slice(None)] * len(shape)
    sl[axis] = 0 if shift == 1 else -1
    valid[tuple(sl)] = False
    return valid


# ---------------------------------------------------------------------------
# Coefficient fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Symmetric matrix field x -> A(x) with a distinguished point.

    ``evaluator`` maps an array of points (m, n) to matrices (m, n, n);
    ``gradient`` (optional) maps points to (m, n, n, n) with the last axis
    the derivative direction.
    """

    evaluator: Callable
    x0: np.ndarray
    sigma: float = 2.0
    C0: float = 1.0
    gradient: Optional[Callable] = None
    description: dict = field(default_factory=dict)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        return self.evaluator(x)

    @property
    def dim(self):
        return len(self.x0)

    @property
    def A0(self):
        return self(self.x0[None, :])[0]

    @property
    def hash(self):
        return hashlib.sha256(json.dumps(self.description, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def constant(cls, A, x0=None):
        A = np.atleast_2d(np.asarray(A, float))
        n = A.shape[0]
        x0 = np.zeros(n) if x0 is None else np.asarray(x0, float)

        def ev(x):
            return np.broadcast_to(A, (len(x), n, n)).copy()

        def grad(x):
            return np.zeros((len(x), n, n, n))

        desc = {"kind": "constant", "A": A.tolist(), "x0": x0.tolist()}
        return cls(ev, x0, sigma=2.0, C0=1.0, gradient=grad, description=desc)

    @classmethod
    def prototype(cls, A0, x0, sigma, C0=1.0):
        """A(x) = A0 + C0 |x - x0|^sigma I."""
        A0 = np.atleast_2d(np.asarray(A0, float))
        x0 = np.asarray(x0, float)
        n = A0.shape[0]
        eye = np.eye(n)

        def ev(x):
            r = np.linalg.norm(x - x0, axis=1)
            return A0 + C0 * (r**sigma)[:, None, None] * eye

        def grad(x):
            d = x - x0
            r = np.linalg.norm(d, axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                f = np.where(r > 0, C0 * sigma * r ** (sigma - 2), 0.0)
            return eye[None, :, :, None] * (f[:, None] * d)[:, None, None, :]

        desc = {"kind": "prototype", "A0": A0.tolist(), "x0": x0.tolist(), "sigma": sigma, "C0": C0}
        return cls(ev, x0, sigma=float(sigma), C0=float(C0), gradient=grad, description=desc)

    @classmethod
    def from_callable(cls, func, x0, sigma=2.0, C0=1.0, gradient=None, name="callable"):
        """Wrap a pointwise function ``func(x) -> (n, n)``."""
        x0 = np.asarray(x0, float)

        def ev(x):
            return np.array([np.asarray(func(p), float) for p in x])

        return cls(ev, x0, sigma=sigma, C0=C0, gradient=gradient, description={"kind": name, "x0": x0.tolist()})

    @classmethod
    def tabulated(cls, grid, matrices, x0, sigma=2.0, C0=1.0):
        """Per-lattice-node matrices, multilinearly interpolated between nodes.

        ``matrices`` has shape ``grid.shape + (n, n)``. This is the in-memory
        form of the JSON schema ``{"kind": "tabulated", "matrices": [...]}``.
        """
        from scipy.interpolate import RegularGridInterpolator

        M = np.asarray(matrices, float)
        n = grid.dim
        if M.shape != grid.shape + (n, n):
            raise PreconditionError(f"tabulated field must have shape {grid.shape + (n, n)}, got {M.shape}")
        interp = RegularGridInterpolator(grid.axes, M, bounds_error=False, fill_value=None)
        desc = {"kind": "tabulated", "x0": list(map(float, x0)), "digest": hashlib.sha256(M.tobytes()).hexdigest()}
        return cls(lambda x: interp(x), np.asarray(x0, float), sigma=sigma, C0=C0, gradient=None, description=desc)


def field_from_dict(spec, grid=None):
    """Config-table form: ``constant``, ``prototype`` or ``tabulated``."""
    kind = spec.get("kind")
    if kind == "constant":
        return CoefficientField.constant(spec["A"], spec.get("x0"))
    if kind == "prototype":
        return CoefficientField.prototype(spec["A0"], spec["x0"], spec["sigma"], spec.get("C0", 1.0))
    if kind == "tabulated":
        if grid is None:
            raise PreconditionError("a tabulated field needs the grid it was tabulated on")
        return CoefficientField.tabulated(grid, spec["matrices"], spec["x0"], spec.get("sigma", 2.0),
                                          spec.get("C0", 1.0))
    raise PreconditionError(f"unknown coefficient field kind {kind!r}")


@dataclass
class HypothesisReport:
    h2_holds: bool
    h1_holds: bool
    h2_worst: float
    h1_worst: float
    h2_witness: Optional[np.ndarray]
    h1_witness: Optional[np.ndarray]

    def to_dict(self):
        conv = lambda w: None if w is None else [float(v) for v in w]
        return {"h2_holds": self.h2_holds, "h1_holds": self.h1_holds, "h2_worst": self.h2_worst,
                "h1_worst": self.h1_worst, "h2_witness": conv(self.h2_witness), "h1_witness": conv(self.h1_witness)}


def check_hypotheses(field, grid, radius, rtol=1e-10):
    """Pointwise matrix inequalities A(x) >= A(x0) and A(x) <= A(x0) + C0|x-x0|^sigma I.

    Checked on interior and boundary nodes (the closure). The worst violation
    is the smallest eigenvalue of the relevant difference matrix.
    """
    pts = np.vstack([grid.interior, grid.boundary])
    A = field(pts)
    asym = np.abs(A - np.swapaxes(A, 1, 2)).max(axis=(1, 2))
    scale = np.abs(A).max(axis=(1, 2))
    bad = np.where(asym > rtol * np.maximum(scale, 1.0))[0]
    if bad.size:
        raise HypothesisViolation(f"A(x) is not symmetric at node {pts[bad[0]].tolist()}", witness=pts[bad[0]])
    A0 = field.A0
    tol = rtol * max(np.abs(A0).max(), scale.max(), 1.0)
    ev2 = np.linalg.eigvalsh(A - A0).min(axis=1)
    i2 = int(np.argmin(ev2))
    r = np.linalg.norm(pts - field.x0, axis=1)
    near = r <= radius
    D1 = A0 + field.C0 * (r**field.sigma)[:, None, None] * np.eye(grid.dim) - A
    ev1 = np.linalg.eigvalsh(D1[near]).min(axis=1) if near.any() else np.array([np.inf])
    i1 = int(np.argmin(ev1))
    h1_witness = pts[near][i1] if near.any() else None
    return HypothesisReport(
        h2_holds=bool(ev2[i2] >= -tol),
        h1_holds=bool(ev1[i1] >= -tol),
        h2_worst=float(ev2[i2]),
        h1_worst=float(ev1[i1]),
        h2_witness=pts[i2],
        h1_witness=h1_witness,
    )


def _sphere_samples(n, m):
    if n == 1:
        return np.array([[-1.0], [1.0]])
    if n == 2:
        t = 2 * np.pi * np.arange(m) / m
        return np.column_stack([np.cos(t), np.sin(t)])
    k = np.arange(m) + 0.5
    phi = np.arccos(1 - 2 * k / m)
    th = np.pi * (1 + 5**0.5) * k
    return np.column_stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)])


def ball_in_domain(descriptor, center, radius, samples=256):
    """Sampled check that the closed ball lies in the open region."""
    center = np.asarray(center, float)
    if not descriptor.contains(center[None, :])[0]:
        return False
    dirs = _sphere_samples(descriptor.dim, samples)
    return bool(np.all(descriptor.sdf(center + radius * dirs) < 0))


def alpha_singular_sequence(descriptor, x0, alpha, delta, count, direction=None, start=1, samples=256):
    """Points x_j = x0 + 2^-j d with B(x_j, delta |x_j - x0|^alpha) inside the region.

    ``d`` defaults to the inward normal at ``x0`` (minus the level-set
    gradient). Containment of each ball is verified by sampling its boundary.
    """
    x0 = np.asarray(x0, float)
    if alpha < 1:
        raise PreconditionError(f"alpha must be >= 1, got {alpha}")
    check_positive(delta, "delta")
    scale = float(np.max(descriptor.bbox[1] - descriptor.bbox[0]))
    if abs(descriptor.sdf(x0[None, :])[0]) > 1e-9 * scale:
        raise PreconditionError("x0 must lie on the boundary of the region")
    if direction is None:
        d = -descriptor.sdf_grad(x0[None, :])[0]
    else:
        d = np.asarray(direction, float)
    d = d / np.linalg.norm(d)
    out = []
    for j in range(start, start + count):
        xj = x0 + 2.0**-j * d
        rad = delta * np.linalg.norm(xj - x0) ** alpha
        if not ball_in_domain(descriptor, xj, rad, samples):
            raise ContainmentError(
                f"B(x_{j}, {rad:.3g}) is not contained in the region: not {alpha}-singular at x0 for delta={delta}"
            )
        out.append(xj)
    return out


def star_shape_check(grid, x0):
    """Return ``(ok, min (x - x0) . nu)`` over the grid's boundary nodes."""
    vals = np.einsum("ij,ij->i", grid.boundary - np.asarray(x0, float), grid.normals)
    m = float(vals.min())
    return m > 0, m
