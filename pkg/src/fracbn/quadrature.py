"""Fixed quadrature rules shared by the bubble and energy modules."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=8)
def tanh_sinh(step=1 / 32, kmax=6.0):
    """Tanh-sinh rule on [0, 1].

    Returns nodes ``t``, complements ``1 - t`` computed without cancellation,
    and weights. Nodes whose complement underflows are dropped.
    """
    k = np.arange(-round(kmax / step), round(kmax / step) + 1) * step
    u = 0.5 * np.pi * np.sinh(k)
    with np.errstate(over="ignore"):
        t = 1 / (1 + np.exp(-2 * u))
        tc = 1 / (1 + np.exp(2 * u))
        w = step * 0.25 * np.pi * np.cosh(k) / np.cosh(u) ** 2
    keep = (w > 0) & (t > 0) & (tc > 0)
    return t[keep], tc[keep], w[keep]


@lru_cache(maxsize=32)
def gauss_legendre(m):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1), 0.5 * w


def geometric_panels(a, b, ratio=2.0, first=None):
    """Panel edges on [a, b] growing geometrically from ``a``.

    ``b`` may be ``np.inf``; the last panel then ends where ``first * ratio^k``
    exceeds 1e12 times the first width and the caller maps the tail.
    """
    first = (b - a) / 64 if first is None else first
    edges = [a]
    width = first
    while edges[-1] + width < b and width < 1e12 * first:
        edges.append(edges[-1] + width)
        width *= ratio
    if np.isfinite(b):
        edges.append(b)
    return np.array(edges)


def panel_rule(edges, m=16):
    """Composite Gauss-Legendre nodes and weights over consecutive panels."""
    x, w = gauss_legendre(m)
    a, b = np.asarray(edges[:-1]), np.asarray(edges[1:])
    nodes = (a[:, None] + (b - a)[:, None] * x).ravel()
    weights = ((b - a)[:, None] * w).ravel()
    return nodes, weights
