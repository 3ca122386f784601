"""The numba kernels and their numpy fallbacks must agree exactly."""

import numpy as np
import pytest

from lrst import _kernels
from lrst._backend import backend_name

numba = pytest.importorskip("numba")


@pytest.mark.parametrize("ties", [False, True])
def test_midranks_backends_agree(rng, ties):
    for _ in range(20):
        n, c = rng.integers(1, 40), rng.integers(1, 6)
        a = rng.integers(0, 5, (n, c)).astype(float) if ties else rng.standard_normal((n, c))
        np.testing.assert_array_equal(_kernels.midranks_columns_numba(a), _kernels.midranks_columns_numpy(a))


@pytest.mark.parametrize("ties", [False, True])
def test_placements_backends_agree(rng, ties):
    for _ in range(20):
        c = rng.integers(1, 6)
        draw = (lambda n: rng.integers(0, 5, (n, c)).astype(float)) if ties else (lambda n: rng.standard_normal((n, c)))
        ref, query = draw(rng.integers(1, 30)), draw(rng.integers(1, 30))
        np.testing.assert_array_equal(_kernels.placements_numba(ref, query), _kernels.placements_numpy(ref, query))


def test_placements_brute_force(rng):
    ref = rng.integers(0, 4, (7, 2)).astype(float)
    query = rng.integers(0, 4, (5, 2)).astype(float)
    expected = np.array([
        [((ref[:, c] < q[c]).sum() + 0.5 * (ref[:, c] == q[c]).sum()) / len(ref) for c in range(2)] for q in query
    ])
    np.testing.assert_array_equal(_kernels.placements(ref, query), expected)


def test_count_max_exceed_backends_agree(rng):
    C = np.array([[1.0, 0.3, 0.2], [0.3, 1.0, 0.5], [0.2, 0.5, 1.0]])
    L = np.linalg.cholesky(C)
    e = rng.standard_normal((5000, 3))
    for v in (-1.0, 0.0, 1.3, 2.5):
        assert _kernels.count_max_exceed_numba(e, L, v) == _kernels.count_max_exceed_numpy(e, L, v)


def test_backend_name_is_known():
    assert backend_name() in ("numba", "numpy")
