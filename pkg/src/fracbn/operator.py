"""Discrete divergence-form operator, its spectrum, and spectral fractional powers.

The operator -div(A grad) is discretized on the interior lattice nodes with
homogeneous Dirichlet data. Its quadratic form is

    sum over axis-k edges   A_kk(edge midpoint) (u_j - u_i)^2 / h_k^2
  + sum over cells, k < l   2 A_kl(cell center) Du_k Du_l

where Du_k is the mean difference quotient of a lattice cell along axis k.
The mass matrix is the lumped weight h_1 ... h_n, so the eigenproblem is a
standard symmetric one and eigenvectors scaled by 1/sqrt(weight) are
orthonormal in the discrete L2 inner product.
"""

from dataclasses import dataclass
import hashlib
import itertools
from typing import NamedTuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_exponent, check_grid_function, check_positive, check_random_state
from .domain import CoefficientField
from .exceptions import ConvergenceError, HypothesisViolation, NumericalError, PreconditionError

DENSE_LIMIT = 4000


@dataclass(frozen=True, eq=False)
class StiffnessMatrix:
    """Sparse symmetric matrix of -div(A grad) over interior nodes."""

    matrix: sp.csr_matrix
    grid: object
    field: CoefficientField

    @property
    def shape(self):
        return self.matrix.shape

    def toarray(self):
        return self.matrix.toarray()

    @property
    def hash(self):
        return hashlib.sha256((self.grid.hash + self.field.hash).encode()).hexdigest()[:16]


def _lattice_lookup(grid):
    lut = -np.ones(grid.shape, dtype=np.int64)
    lut[tuple(grid.interior_index.T)] = np.arange(grid.n_interior)
    return lut


def _check_pd(A, pts):
    lo = np.linalg.eigvalsh(0.5 * (A + np.swapaxes(A, 1, 2))).min(axis=1)
    bad = np.where(lo <= 0)[0]
    if bad.size:
        p = pts[bad[0]]
        raise HypothesisViolation(f"coefficient is not positive definite at {p.tolist()}", witness=p)


def assemble(grid, field):
    """Assemble the stiffness matrix of -div(A grad) with Dirichlet data.

    Parameters
    ----------
    grid : Grid
    field : CoefficientField
        Sampled at edge midpoints (diagonal entries of A) and at cell centres
        (off-diagonal entries).

    Returns
    -------
    StiffnessMatrix
    """
    n = grid.dim
    if field.dim != n:
        raise PreconditionError(f"field dimension {field.dim} does not match grid dimension {n}")
    lut = _lattice_lookup(grid)
    shape = grid.shape
    N = grid.n_interior
    rows, cols, vals = [], [], []

    # Axis edges: rank-one terms a (e_j - e_i)(e_j - e_i)^T / h^2.
    for k in range(n):
        lo = [slice(None)] * n
        hi = [slice(None)] * n
        lo[k] = slice(0, shape[k] - 1)
        hi[k] = slice(1, shape[k])
        i = lut[tuple(lo)].ravel()
        j = lut[tuple(hi)].ravel()
        keep = (i >= 0) | (j >= 0)
        i, j = i[keep], j[keep]
        idx_i = np.argwhere(lut[tuple(lo)] > -2)[keep]
        mid = np.column_stack([grid.axes[m][idx_i[:, m]] for m in range(n)])
        mid[:, k] += 0.5 * grid.h[k]
        A = field(mid)
        _check_pd(A, mid)
        a = A[:, k, k] / grid.h[k] ** 2
        for p, q, sgn in ((i, i, 1.0), (j, j, 1.0), (i, j, -1.0), (j, i, -1.0)):
            ok = (p >= 0) & (q >= 0)
            rows.append(p[ok])
            cols.append(q[ok])
            vals.append(sgn * a[ok])

    # Cells: cross terms 2 a_kl Du_k Du_l, only when some a_kl is nonzero.
    if n > 1:
        cshape = tuple(m - 1 for m in shape)
        cidx = np.argwhere(np.ones(cshape, bool))
        centers = np.column_stack([grid.axes[m][cidx[:, m]] + 0.5 * grid.h[m] for m in range(n)])
        Ac = field(centers)
        offdiag = [(k, l) for k in range(n) for l in range(k + 1, n)]
        if any(np.any(Ac[:, k, l] != 0) for k, l in offdiag):
            _check_pd(Ac, centers)
            corners = list(itertools.product((0, 1), repeat=n))
            corner_nodes = np.stack([lut[tuple((cidx + np.array(c)).T)] for c in corners], axis=1)
            scale = 1.0 / 2 ** (n - 1)
            # gradient functional per axis: coefficients on the 2^n corners
            G = np.array([[(2 * c[k] - 1) * scale / grid.h[k] for c in corners] for k in range(n)])
            for k, l in offdiag:
                a = Ac[:, k, l]
                live = a != 0
                for p in range(len(corners)):
                    for q in range(len(corners)):
                        w = a * (G[k, p] * G[l, q] + G[l, p] * G[k, q])
                        ip, iq = corner_nodes[:, p], corner_nodes[:, q]
                        ok = live & (ip >= 0) & (iq >= 0) & (w != 0)
                        rows.append(ip[ok])
                        cols.append(iq[ok])
                        vals.append(w[ok])

    M = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
    ).tocsr()
    M.sum_duplicates()
    # exact symmetry: keep the diagonal and the upper triangle, mirror it
    U = sp.triu(M, k=1)
    K = (sp.diags(M.diagonal()) + U + U.T).tocsr()
    K.sort_indices()
    return StiffnessMatrix(K, grid, field)


class SpectralDecomposition:
    """Eigenpairs of the discrete operator with L2-orthonormal eigenvectors.

    Parameters
    ----------
    eigenvalues : ndarray of shape (K,)
    eigenvectors : ndarray of shape (N, K)
        Columns orthonormal in the weighted inner product ``sum(w * u * v)``.
    weights : ndarray of shape (N,)
        Lumped quadrature weights.
    grid_hash, field_hash : str
    residual : float
        Largest relative eigen-residual over the computed pairs.
    dim : int or None
        Spatial dimension of the underlying grid.
    """

    def __init__(self, eigenvalues, eigenvectors, weights, grid_hash="", field_hash="", residual=0.0, dim=None):
        self.eigenvalues = np.asarray(eigenvalues, float)
        self.eigenvectors = np.asarray(eigenvectors, float)
        self.weights = np.asarray(weights, float)
        self.grid_hash = grid_hash
        self.field_hash = field_hash
        self.residual = float(residual)
        self.dim = dim

    @property
    def n_components(self):
        return len(self.eigenvalues)

    @property
    def size(self):
        return self.eigenvectors.shape[0]

    @property
    def complete(self):
        return self.n_components == self.size

    def coefficients(self, u):
        """Spectral coefficients c_k = <u, phi_k> (rows of ``u`` are grid functions)."""
        u = check_grid_function(u, self.size)
        return (u * self.weights) @ self.eigenvectors

    def synthesize(self, c):
        return np.asarray(c, float) @ self.eigenvectors.T

    def l2_inner(self, u, v):
        return np.sum(self.weights * np.asarray(u) * np.asarray(v), axis=-1)

    def projection_residual(self, u):
        """Relative L2 norm of the part of ``u`` outside the computed span."""
        u = check_grid_function(u, self.size)
        if self.complete:
            return np.zeros(u.shape[:-1]) if u.ndim > 1 else 0.0
        rest = u - self.synthesize(self.coefficients(u))
        nu = np.sqrt(self.l2_inner(u, u))
        return np.sqrt(self.l2_inner(rest, rest)) / np.where(nu > 0, nu, 1.0)

    def power(self, s):
        return self.eigenvalues**s

    def gram(self):
        return (self.eigenvectors * self.weights[:, None]).T @ self.eigenvectors

    def truncate(self, K):
        if K > self.n_components:
            raise PreconditionError(f"cannot truncate {self.n_components} pairs to {K}")
        return SpectralDecomposition(self.eigenvalues[:K], self.eigenvectors[:, :K], self.weights,
                                     self.grid_hash, self.field_hash, self.residual, self.dim)


def _fix_signs(V):
    # first component above noise level made positive
    for k in range(V.shape[1]):
        col = V[:, k]
        big = np.nonzero(np.abs(col) > 1e-8 * np.abs(col).max())[0]
        if big.size and col[big[0]] < 0:
            V[:, k] = -col
    return V


def decompose(M, K=None, tol=1e-8):
    """Return the ``K`` smallest eigenpairs of a stiffness matrix.

    Dense symmetric solve up to ``DENSE_LIMIT`` interior nodes, shift-invert
    Lanczos above that. Raises ``ConvergenceError`` (with the achieved
    residual) if some pair misses ``||K phi - lambda phi|| <= tol * lambda``.
    """
    A = M.matrix
    N = A.shape[0]
    K = N if K is None else int(K)
    if not 1 <= K <= N:
        raise PreconditionError(f"K must satisfy 1 <= K <= {N}, got {K}")
    w = M.grid.cell_volume
    if N <= DENSE_LIMIT:
        if K < N:
            lam, V = scipy.linalg.eigh(A.toarray(), subset_by_index=(0, K - 1), driver="evr")
        else:
            lam, V = scipy.linalg.eigh(A.toarray(), driver="evd")
    else:
        if K >= N - 1:
            raise PreconditionError(f"partial decomposition needs K < N - 1 for N = {N}")
        try:
            lam, V = spla.eigsh(A.tocsc(), k=K, sigma=0.0, which="LM", tol=1e-12)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(f"eigensolver did not converge: {exc}") from exc
        order = np.argsort(lam)
        lam, V = lam[order], V[:, order]
    V = _fix_signs(np.ascontiguousarray(V))
    res = np.linalg.norm(A @ V - V * lam, axis=0) / np.abs(lam)
    worst = float(res.max())
    if not lam[0] > 0:
        raise NumericalError(f"smallest eigenvalue {lam[0]:.3e} is not positive", residual=worst)
    if worst > tol:
        raise ConvergenceError(f"eigen-residual {worst:.3e} exceeds tolerance {tol:.1e}", residual=worst)
    return SpectralDecomposition(lam, V / np.sqrt(w), np.full(N, w), M.grid.hash, M.field.hash, worst, M.grid.dim)


def _check_span(S, u, tol):
    r = np.max(S.projection_residual(u))
    if r > tol:
        raise NumericalError(
            f"projection residual {r:.3e} exceeds {tol:.1e}: input has mass outside the computed span", residual=r
        )
    return r


def fractional_apply(S, s, u, tol=1e-8):
    """Apply (-L)^s = sum c_k lambda_k^s phi_k to ``u`` (vector or rows).

    ``s`` may be any real; ``s`` in (0, 1] is the usual case and negative
    values give the inverse powers used by the solvers.
    """
    _check_span(S, u, tol)
    return S.synthesize(S.coefficients(u) * S.power(s))


def hs_inner(S, s, u, v, tol=1e-8):
    """H^s inner product sum lambda_k^s c_k d_k."""
    _check_span(S, u, tol)
    _check_span(S, v, tol)
    return np.sum(S.power(s) * S.coefficients(u) * S.coefficients(v), axis=-1)


class FractionalEigenvalue(NamedTuple):
    value: float
    probe_min: float


def first_fractional_eigenvalue(S, s, n_probes=32, random_state=0):
    """First eigenvalue lambda_1^s of (-L)^s with a Rayleigh-quotient check.

    Returns the value and the smallest Rayleigh quotient over random probes,
    which must not fall below the value.
    """
    s = float(s)
    if not 0 < s <= 1:
        raise PreconditionError(f"s must lie in (0, 1], got {s}")
    if S.n_components == 0:
        raise PreconditionError("empty decomposition")
    value = float(S.eigenvalues[0] ** s)
    rng = check_random_state(random_state)
    c = rng.standard_normal((n_probes, S.n_components))
    q = (c**2 @ S.power(s)) / np.sum(c**2, axis=1)
    return FractionalEigenvalue(value, float(q.min()))


class FractionalOperator(TransformerMixin, BaseEstimator):
    """Spectral fractional power of -div(A grad) as a transformer.

    Parameters
    ----------
    s : float
        Exponent in (0, 1).
    n_components : int or None
        Eigenpairs to keep; all interior nodes when None.
    field : CoefficientField or None
        Coefficient; identity matrix when None.
    tol : float
        Projection-residual tolerance.

    Attributes
    ----------
    stiffness_ : StiffnessMatrix
    spectrum_ : SpectralDecomposition
    n_features_in_ : int
    """

    def __init__(self, s=0.5, n_components=None, field=None, tol=1e-8):
        self.s = s
        self.n_components = n_components
        self.field = field
        self.tol = tol

    def fit(self, X, y=None):
        """Assemble and decompose on the grid ``X``."""
        check_exponent(self.s)
        check_positive(self.tol, "tol")
        field = self.field or CoefficientField.constant(np.eye(X.dim))
        self.stiffness_ = assemble(X, field)
        self.spectrum_ = decompose(self.stiffness_, self.n_components)
        self.grid_ = X
        self.n_features_in_ = X.n_interior
        return self

    def transform(self, X):
        check_is_fitted(self, "spectrum_")
        return fractional_apply(self.spectrum_, self.s, X, self.tol)

    def inverse_transform(self, X):
        check_is_fitted(self, "spectrum_")
        return fractional_apply(self.spectrum_, -self.s, X, self.tol)

    def fit_transform(self, X, y=None, **fit_params):
        raise PreconditionError("fit takes a Grid and transform takes grid functions; call them separately")

    def energy(self, u):
        """Squared H^s norm of each row of ``u``."""
        check_is_fitted(self, "spectrum_")
        return hs_inner(self.spectrum_, self.s, u, u, self.tol)

    @property
    def first_eigenvalue_(self):
        check_is_fitted(self, "spectrum_")
        return float(self.spectrum_.eigenvalues[0] ** self.s)
