"""Mid-ranks and pairwise (control vs one dose) pooled ranking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dataset import TrialDataset


class EmptyInput(ValueError):
    pass


def midranks(v) -> np.ndarray:
    """Ranks of ``v`` (1-based) with tied blocks given their mean rank.

    >>> midranks([3, 1, 4, 1, 5]).tolist()
    [3.0, 1.5, 4.0, 1.5, 5.0]
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("midranks expects a 1-d vector")
    if v.size == 0:
        raise EmptyInput("cannot rank an empty vector")
    return _kernels.midranks_columns(v[:, None])[:, 0]


def pooled_midranks(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rank ``x`` and ``y`` jointly within each (visit, outcome) cell.

    ``x`` is ``(n_x, T, K)`` and ``y`` is ``(n_y, T, K)``; the returned rank
    arrays have the same shapes.
    """
    n_x, T, K = x.shape
    pooled = np.concatenate([x.reshape(n_x, T * K), y.reshape(y.shape[0], T * K)], axis=0)
    r = _kernels.midranks_columns(pooled)
    return r[:n_x].reshape(x.shape), r[n_x:].reshape(y.shape)


@dataclass(frozen=True)
class PairRankProfile:
    """Per-visit mean pooled ranks for one control/dose pair (averaged over outcomes)."""

    rbar_control: np.ndarray
    rbar_dose: np.ndarray
    cell_diff: np.ndarray  # (T, K) mean-rank differences before outcome averaging

    @property
    def rdiff(self) -> np.ndarray:
        return self.rbar_dose - self.rbar_control

    @property
    def total_diff(self) -> float:
        """Time-summed rank difference ``J' rdiff``."""
        return float(self.rdiff.sum())


def pair_rank_profile(ds: TrialDataset, dose: str) -> PairRankProfile:
    x, y = ds.control, ds.dose(dose)
    rx, ry = pooled_midranks(x, y)
    mx, my = rx.mean(axis=0), ry.mean(axis=0)
    return PairRankProfile(mx.mean(axis=1), my.mean(axis=1), my - mx)
