"""On-disk cache of spectral decompositions.

Each entry is an ``.npz`` file keyed by the grid and field hashes. The file
stores a SHA-256 digest of its arrays; a mismatch on load (truncated or
edited file) is logged, the file is removed and the decomposition rebuilt.
"""

import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path

import numpy as np

from ..operator import SpectralDecomposition, assemble, decompose

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


def _digest(arrays):
    h = hashlib.sha256()
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name])
        h.update(name.encode())
        h.update(str(a.dtype).encode())
        h.update(json.dumps(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


class SpectralCache:
    """Directory-backed cache; ``root=None`` disables caching."""

    def __init__(self, root=None):
        self.root = None if root is None else Path(root)
        self.hits = 0
        self.misses = 0
        self.rebuilt = 0

    def key(self, grid, field, tol, K=None):
        payload = json.dumps({"grid": grid.hash, "field": field.hash, "tol": tol, "K": K, "v": FORMAT_VERSION},
                             sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:24]

    def path(self, key):
        return self.root / f"spectrum-{key}.npz"

    def load(self, key):
        p = self.path(key)
        if not p.exists():
            return None
        try:
            with np.load(p, allow_pickle=False) as z:
                arrays = {k: z[k] for k in ("eigenvalues", "eigenvectors", "weights")}
                stored = str(z["digest"])
                meta = json.loads(str(z["meta"]))
        except Exception as exc:  # unreadable archive
            log.warning("cache entry %s unreadable (%s); rebuilding", p.name, exc)
            self._discard(p)
            return None
        if _digest(arrays) != stored:
            log.warning("cache entry %s failed its integrity check; rebuilding", p.name)
            self._discard(p)
            return None
        return SpectralDecomposition(arrays["eigenvalues"], arrays["eigenvectors"], arrays["weights"],
                                     meta["grid_hash"], meta["field_hash"], meta["residual"], meta["dim"])

    def _discard(self, p):
        self.rebuilt += 1
        try:
            p.unlink()
        except OSError:
            pass

    def store(self, key, S):
        self.root.mkdir(parents=True, exist_ok=True)
        arrays = {"eigenvalues": S.eigenvalues, "eigenvectors": S.eigenvectors, "weights": S.weights}
        meta = json.dumps({"grid_hash": S.grid_hash, "field_hash": S.field_hash, "residual": float(S.residual),
                           "dim": S.dim})
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".npz")
        os.close(fd)
        np.savez(tmp, digest=np.array(_digest(arrays)), meta=np.array(meta), **arrays)
        os.replace(tmp, self.path(key))

    def spectrum(self, grid, field, tol=1e-8, K=None):
        """Decomposition for (grid, field), from cache when valid.

        ``K=None`` requests the complete basis; large lattices need ``K``.
        """
        if self.root is None:
            self.misses += 1
            return decompose(assemble(grid, field), K=K, tol=tol)
        key = self.key(grid, field, tol, K)
        S = self.load(key)
        if S is not None:
            self.hits += 1
            return S
        self.misses += 1
        S = decompose(assemble(grid, field), K=K, tol=tol)
        self.store(key, S)
        return S

    def stats(self):
        return {"hits": self.hits, "misses": self.misses, "rebuilt": self.rebuilt}
