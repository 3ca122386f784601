"""Hot inner loops, each with a numba and a pure-numpy implementation.

The public names (``midranks_columns``, ``placements``, ``count_max_exceed``)
are bound at import time according to :data:`lrst._backend.USE_NUMBA`.
Both implementations are always importable under their suffixed names so
they can be compared against each other in tests and benchmarks.
"""

import numpy as np
from scipy.stats import rankdata

from ._backend import USE_NUMBA, njit


# ---------------------------------------------------------------------------
# mid-ranks, column-wise
# ---------------------------------------------------------------------------


def midranks_columns_numpy(a):
    a = np.asarray(a, dtype=np.float64)
    return rankdata(a, method="average", axis=0).astype(np.float64)


@njit
def midranks_columns_numba(a):
    m, ncol = a.shape
    out = np.empty((m, ncol), dtype=np.float64)
    cols = a.T.copy()  # contiguous columns
    for c in range(ncol):
        col = cols[c]
        order = np.argsort(col)  # stability is irrelevant: tied entries share a rank
        i = 0
        while i < m:
            j = i
            v = col[order[i]]
            while j + 1 < m and col[order[j + 1]] == v:
                j += 1
            # ranks i+1 .. j+1 share their mean
            r = 0.5 * (i + j) + 1.0
            for q in range(i, j + 1):
                out[order[q], c] = r
            i = j + 1
    return out


# ---------------------------------------------------------------------------
# placements: (#ref < q + 0.5 * #ref == q) / n_ref, column-wise
# ---------------------------------------------------------------------------


def placements_numpy(ref, query):
    ref = np.asarray(ref, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    n_ref, ncol = ref.shape
    out = np.empty(query.shape, dtype=np.float64)
    for c in range(ncol):
        s = np.sort(ref[:, c])
        lo = np.searchsorted(s, query[:, c], side="left")
        hi = np.searchsorted(s, query[:, c], side="right")
        out[:, c] = (lo + hi) / (2.0 * n_ref)
    return out


@njit
def placements_numba(ref, query):
    n_ref, ncol = ref.shape
    n_q = query.shape[0]
    out = np.empty((n_q, ncol), dtype=np.float64)
    refs, queries = ref.T.copy(), query.T.copy()
    for c in range(ncol):
        s = np.sort(refs[c])
        q = queries[c]
        order = np.argsort(q)
        # one merge sweep over the sorted queries
        lo = 0
        for idx in order:
            v = q[idx]
            while lo < n_ref and s[lo] < v:
                lo += 1
            hi = lo
            while hi < n_ref and s[hi] == v:
                hi += 1
            out[idx, c] = (lo + hi) / (2.0 * n_ref)
    return out


# ---------------------------------------------------------------------------
# Monte-Carlo tail counting for max of correlated normals
# ---------------------------------------------------------------------------


def count_max_exceed_numpy(e, chol, v):
    """Number of rows of ``e @ chol.T`` whose maximum exceeds ``v``."""
    z = e @ chol.T
    return int(np.count_nonzero(z.max(axis=1) > v))


@njit
def count_max_exceed_numba(e, chol, v):
    m, d = e.shape
    count = 0
    for r in range(m):
        for i in range(d):
            s = 0.0
            for j in range(i + 1):
                s += chol[i, j] * e[r, j]
            if s > v:
                count += 1
                break
    return count


if USE_NUMBA:
    _midranks, _placements, _count = midranks_columns_numba, placements_numba, count_max_exceed_numba
else:
    _midranks, _placements, _count = midranks_columns_numpy, placements_numpy, count_max_exceed_numpy


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def midranks_columns(a):
    return _midranks(_f64(a))


def placements(ref, query):
    return _placements(_f64(ref), _f64(query))


def count_max_exceed(e, chol, v):
    return int(_count(_f64(e), _f64(chol), float(v)))
