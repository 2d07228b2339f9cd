"""Input validation helpers shared by the estimators and free functions."""

import numbers

import numpy as np

from .exceptions import PreconditionError


def check_exponent(s, name="s"):
    """Return ``s`` as float after checking ``0 < s < 1``."""
    if not isinstance(s, numbers.Real) or not 0.0 < float(s) < 1.0:
        raise PreconditionError(f"{name} must lie in (0, 1), got {s!r}")
    return float(s)


def check_dimension(n, s=None):
    if int(n) != n or n not in (1, 2, 3):
        raise PreconditionError(f"only n in {{1, 2, 3}} is supported, got {n!r}")
    if s is not None and not n > 2 * s:
        raise PreconditionError(f"need n > 2s, got n={n}, s={s}")
    return int(n)


def check_positive(value, name):
    if not np.isfinite(value) or value <= 0:
        raise PreconditionError(f"{name} must be positive and finite, got {value!r}")
    return float(value)


def check_grid_function(u, size, name="u", allow_batch=True):
    """Validate values at interior nodes.

    Accepts a vector of length ``size`` or, when ``allow_batch`` is set, a
    2D array whose rows are grid functions.
    """
    arr = np.asarray(u, dtype=float)
    ok_shape = arr.shape == (size,) or (allow_batch and arr.ndim == 2 and arr.shape[1] == size)
    if not ok_shape:
        raise PreconditionError(
            f"{name} must have length {size} (one value per interior node), got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise PreconditionError(f"{name} contains non-finite values")
    return arr


def check_spd(matrix, name="matrix", rtol=1e-10):
    """Check a symmetric positive definite matrix; returns it as an array."""
    A = np.atleast_2d(np.asarray(matrix, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise PreconditionError(f"{name} must be square, got shape {A.shape}")
    scale = max(np.abs(A).max(), 1.0)
    if np.abs(A - A.T).max() > rtol * scale:
        raise PreconditionError(f"{name} is not symmetric")
    if np.linalg.eigvalsh(0.5 * (A + A.T)).min() <= 0:
        raise PreconditionError(f"{name} is not positive definite")
    return A


def check_random_state(seed):
    """Return a ``numpy.random.Generator`` from a seed or generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
