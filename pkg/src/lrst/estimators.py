"""Relative effects, placement covariances and the asymptotic covariance blocks.

Everything is built from *placements*: for a control subject ``i`` in cell
``(t, k)``, its placement among dose subjects is the fraction of dose values
below ``x_itk`` (ties counted one half), and symmetrically for dose subjects
among controls. The relative effect and all covariance moment estimators are
averages and cross-products of these vectors.

Cells are flattened as ``c = t * K + k``; 4-index arrays are returned with
shape ``(T, K, T, K)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from . import _kernels
from .dataset import SampleRatios, TrialDataset, sample_ratios

#: Within-pair weights ``(1 + n_y/n_x, 1 + n_x/n_y)``; gives unit-variance components.
PAIRWISE = "pairwise"
#: Within-pair weights ``(1 + N_1/n_x, 1 + n_x/N_1)`` built on the control share of the pairwise total.
SHARE = "share"
WEIGHT_CONVENTIONS = (PAIRWISE, SHARE)


def _flat(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return a.reshape(a.shape[0], -1)


def control_placements(x, y) -> np.ndarray:
    """``(n_x, T*K)`` placements of control values among dose values."""
    return _kernels.placements(_flat(y), _flat(x))


def dose_placements(x, y) -> np.ndarray:
    """``(n_y, T*K)`` placements of dose values among control values."""
    return _kernels.placements(_flat(x), _flat(y))


def theta_hat_arrays(x, y) -> np.ndarray:
    """``(T, K)`` estimate of P(X < Y) - P(X > Y), ties split evenly."""
    x = np.asarray(x, dtype=np.float64)
    py = dose_placements(x, y)
    return (2.0 * py.mean(axis=0) - 1.0).reshape(x.shape[1:])


def _centered_cov(p: np.ndarray, center: np.ndarray, q: np.ndarray | None = None, center_q=None) -> np.ndarray:
    a = p - center
    b = a if q is None else q - center_q
    return a.T @ b / p.shape[0]


def c_hat_arrays(x, y) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    T, K = x.shape[1:]
    theta = theta_hat_arrays(x, y).ravel()
    px = control_placements(x, y)
    return _centered_cov(px, (1.0 - theta) / 2.0).reshape(T, K, T, K)


def d_hat_arrays(x, y) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    T, K = x.shape[1:]
    theta = theta_hat_arrays(x, y).ravel()
    py = dose_placements(x, y)
    return _centered_cov(py, (1.0 + theta) / 2.0).reshape(T, K, T, K)


def c_cross_hat_arrays(x, y, z) -> np.ndarray:
    """Covariance over controls of the y-placement at (t1,k1) and z-placement at (t2,k2)."""
    x = np.asarray(x, dtype=np.float64)
    T, K = x.shape[1:]
    ty = theta_hat_arrays(x, y).ravel()
    tz = theta_hat_arrays(x, z).ravel()
    return _centered_cov(
        control_placements(x, y), (1.0 - ty) / 2.0, control_placements(x, z), (1.0 - tz) / 2.0
    ).reshape(T, K, T, K)


@dataclass(frozen=True)
class PairwiseEffects:
    dose: str
    theta_hat: np.ndarray  # (T, K)

    @property
    def theta_bar(self) -> float:
        return float(self.theta_hat.mean())


def theta_hat(ds: TrialDataset, dose: str) -> PairwiseEffects:
    return PairwiseEffects(dose, theta_hat_arrays(ds.control, ds.dose(dose)))


def c_hat(ds: TrialDataset, dose: str) -> np.ndarray:
    return c_hat_arrays(ds.control, ds.dose(dose))


def d_hat(ds: TrialDataset, dose: str) -> np.ndarray:
    return d_hat_arrays(ds.control, ds.dose(dose))


def c_cross_hat(ds: TrialDataset, dose_i: str, dose_j: str) -> np.ndarray:
    if dose_i == dose_j:
        raise ValueError("cross covariance needs two distinct dose arms")
    return c_cross_hat_arrays(ds.control, ds.dose(dose_i), ds.dose(dose_j))


@dataclass(frozen=True)
class CovTerms:
    """Placement covariance arrays for every pair and ordered dose pair."""

    c: dict[str, np.ndarray]
    d: dict[str, np.ndarray]
    cross: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)
    theta: dict[str, np.ndarray] = field(default_factory=dict)


def cov_terms(ds: TrialDataset) -> CovTerms:
    """All estimators in one pass; each placement matrix is computed once."""
    x = ds.control
    T, K = ds.T, ds.K
    c, d, theta, centered = {}, {}, {}, {}
    for arm in ds.dose_arms:
        y = ds.dose(arm)
        px = control_placements(x, y)
        py = dose_placements(x, y)
        th = 2.0 * py.mean(axis=0) - 1.0
        theta[arm] = th.reshape(T, K)
        centered[arm] = px - (1.0 - th) / 2.0
        c[arm] = (centered[arm].T @ centered[arm] / x.shape[0]).reshape(T, K, T, K)
        e = py - (1.0 + th) / 2.0
        d[arm] = (e.T @ e / y.shape[0]).reshape(T, K, T, K)
    cross = {
        (i, j): (centered[i].T @ centered[j] / x.shape[0]).reshape(T, K, T, K)
        for i, j in permutations(ds.dose_arms, 2)
    }
    return CovTerms(c, d, cross, theta)


def _outcome_average(a: np.ndarray) -> np.ndarray:
    """``(T, K, T, K) -> (T, T)``: sum over both outcome indices divided by K^2."""
    K = a.shape[1]
    return a.sum(axis=(1, 3)) / K**2


def within_weights(ratios: SampleRatios, index: int, weights: str = PAIRWISE) -> tuple[float, float]:
    """Multipliers applied to the c and d terms of a within-pair block."""
    if weights == PAIRWISE:
        lam = ratios.control_to_dose[index]
    elif weights == SHARE:
        lam = ratios.control_share_pair[index]
    else:
        raise ValueError(f"unknown weight convention {weights!r}; expected one of {WEIGHT_CONVENTIONS}")
    return 1.0 + 1.0 / lam, 1.0 + lam


def sigma_within(c: np.ndarray, d: np.ndarray, ratios: SampleRatios, index: int, weights: str = PAIRWISE) -> np.ndarray:
    """``T x T`` covariance of ``N^{-1/2}`` times the rank-difference vector for dose ``index``."""
    wc, wd = within_weights(ratios, index, weights)
    scale = ratios.share_control + ratios.share_doses[index]
    return scale * _outcome_average(wc * np.asarray(c) + wd * np.asarray(d))


def cross_coefficient(ratios: SampleRatios, i: int, j: int) -> float:
    return (1.0 + ratios.n_doses[i] / ratios.n_control) * (ratios.share_control + ratios.share_doses[j])


def sigma_cross(c_cross: np.ndarray, ratios: SampleRatios, i: int, j: int) -> np.ndarray:
    """``T x T`` cross-covariance block between dose ``i`` (rows) and dose ``j`` (columns)."""
    return cross_coefficient(ratios, i, j) * _outcome_average(np.asarray(c_cross))


@dataclass(frozen=True)
class SigmaBlocks:
    dose_arms: tuple[str, ...]
    within: dict[str, np.ndarray]
    cross: dict[tuple[str, str], np.ndarray]
    ratios: SampleRatios
    cov: CovTerms | None = None

    @property
    def T(self) -> int:
        return next(iter(self.within.values())).shape[0]

    def matrix(self) -> np.ndarray:
        """Full ``(A*T) x (A*T)`` block matrix in dose-arm order."""
        A, T = len(self.dose_arms), self.T
        out = np.empty((A * T, A * T))
        for a, arm in enumerate(self.dose_arms):
            out[a * T : (a + 1) * T, a * T : (a + 1) * T] = self.within[arm]
            for b, other in enumerate(self.dose_arms):
                if a != b:
                    out[a * T : (a + 1) * T, b * T : (b + 1) * T] = self.cross[(arm, other)]
        return out

    def total_variance(self, arm: str) -> float:
        """``J' Sigma_within J``."""
        return float(self.within[arm].sum())

    def total_covariance(self, arm_i: str, arm_j: str) -> float:
        return float(self.cross[(arm_i, arm_j)].sum())


def assemble_sigma(ds: TrialDataset, weights: str = PAIRWISE) -> SigmaBlocks:
    ratios = sample_ratios(ds)
    cov = cov_terms(ds)
    index = {arm: a for a, arm in enumerate(ds.dose_arms)}
    within = {arm: sigma_within(cov.c[arm], cov.d[arm], ratios, index[arm], weights) for arm in ds.dose_arms}
    cross = {(i, j): sigma_cross(cov.cross[(i, j)], ratios, index[i], index[j]) for (i, j) in cov.cross}
    return SigmaBlocks(ds.dose_arms, within, cross, ratios, cov)
