"""PCA monitoring of standardized autoencoder residuals.

Fits loadings on the covariance of z-scored residuals and provides Hotelling
T², the squared prediction error (SPE) and the combined index
``phi = T² + SPE / g`` together with their chi-square control limits.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .chi2 import chi2_quantile
from .errors import ConfigurationError, DegenerateDataError, InsufficientDataError, ShapeError
from .signal_prep import ZScoreScaler, zscore_apply, zscore_fit

log = logging.getLogger(__name__)

CLAMP_RELATIVE = 1e-12


def cpv(eigenvalues, l: int) -> float:
    """Fraction of the total variance held by the first ``l`` eigenvalues."""
    lam = np.asarray(eigenvalues, dtype=float)
    if not 1 <= l <= lam.size:
        raise ConfigurationError(f"l must lie in [1, {lam.size}], got {l}")
    total = lam.sum()
    if not total > 0:
        raise DegenerateDataError("all eigenvalues are zero")
    return float(lam[:l].sum() / total)


def symmetric_eigh(cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs sorted by descending eigenvalue.

    Each eigenvector is signed so its largest-magnitude entry is positive
    (first such entry on ties), which makes stored loadings reproducible.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ShapeError(f"covariance must be square, got {cov.shape}")
    if not np.all(np.isfinite(cov)):
        raise DegenerateDataError("covariance contains non-finite entries")
    try:
        lam, vec = np.linalg.eigh(0.5 * (cov + cov.T))
    except np.linalg.LinAlgError as exc:
        raise DegenerateDataError(f"eigendecomposition failed: {exc}") from exc
    order = np.argsort(lam, kind="stable")[::-1]
    lam, vec = lam[order], vec[:, order]
    pivot = np.argmax(np.abs(vec), axis=0)
    signs = np.sign(vec[pivot, np.arange(vec.shape[1])])
    signs[signs == 0] = 1.0
    return lam, vec * signs


def residual_space_params(eigenvalues, l: int) -> tuple[float, float]:
    """``g`` and ``h`` of the scaled chi-square approximation to SPE."""
    tail = np.asarray(eigenvalues, dtype=float)[l:]
    s1 = tail.sum()
    s2 = np.sum(tail * tail)
    if not s1 > 0:
        raise DegenerateDataError(f"no variance left beyond {l} components")
    return float(s2 / s1), float(s1 * s1 / s2)


@dataclass(frozen=True)
class PcaMonitorModel:
    residual_scaler: ZScoreScaler
    loadings: np.ndarray  # M x l, orthonormal columns
    eigenvalues: np.ndarray  # length M, descending
    n_components: int
    g: float
    h: float
    alpha: float
    t2_limit: float
    spe_limit: float
    phi_limit: float

    def __post_init__(self):
        P = np.asarray(self.loadings, dtype=float)
        lam = np.asarray(self.eigenvalues, dtype=float)
        m = len(self.residual_scaler)
        l = int(self.n_components)
        if lam.shape != (m,):
            raise ShapeError(f"expected {m} eigenvalues, got shape {lam.shape}")
        if not 1 <= l < m or P.shape != (m, l):
            raise ShapeError(f"loadings must be {m} x l with 1 <= l < {m}, got {P.shape}, l={l}")
        if not 0 < self.alpha < 1:
            raise ConfigurationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if np.any(lam < 0) or np.any(np.diff(lam) > 0):
            raise ConfigurationError("eigenvalues must be nonnegative and sorted in descending order")
        if np.any(lam[:l] <= 0):
            raise DegenerateDataError("a retained principal component has zero variance")
        if not np.allclose(P.T @ P, np.eye(l), rtol=0, atol=1e-10):
            raise ConfigurationError("loadings are not orthonormal")
        for arr in (P, lam):
            arr.setflags(write=False)
        object.__setattr__(self, "loadings", P)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "n_components", l)

    @property
    def m_vars(self) -> int:
        return self.eigenvalues.size

    @property
    def leading_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[: self.n_components]


def control_limits(eigenvalues, l: int, alpha: float) -> tuple[float, float, float, float, float]:
    """Return ``(g, h, t2_limit, spe_limit, phi_limit)`` at confidence ``alpha``."""
    g, h = residual_space_params(eigenvalues, l)
    return (g, h, chi2_quantile(l, alpha), g * chi2_quantile(h, alpha), chi2_quantile(l + h, alpha))


def select_components(eigenvalues, cpv_target: float) -> int:
    """Smallest ``l`` whose CPV reaches ``cpv_target``.

    Raises DegenerateDataError when that ``l`` leaves no variance in the
    residual subspace, since SPE and its limit would then be undefined.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    n_nonzero = int(np.count_nonzero(lam > 0))
    if n_nonzero < 2:
        raise DegenerateDataError(
            f"residual covariance has {n_nonzero} nonzero eigenvalue(s); need at least 2")
    frac = np.cumsum(lam) / lam.sum()
    l = int(np.searchsorted(frac, cpv_target - 1e-12) + 1)
    if l >= n_nonzero:
        raise DegenerateDataError(
            f"CPV target {cpv_target:g} needs l={l} of {lam.size} components, leaving no residual "
            f"variance ({n_nonzero} nonzero eigenvalues); lower the target")
    return l


def fit(residual_matrix, cpv_target: float = 0.95, alpha: float = 0.99) -> PcaMonitorModel:
    E = np.asarray(getattr(residual_matrix, "data", residual_matrix), dtype=float)
    if not 0 < cpv_target <= 1:
        raise ConfigurationError(f"cpv_target must lie in (0, 1], got {cpv_target}")
    if not 0 < alpha < 1:
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha}")
    if E.ndim != 2:
        raise ShapeError(f"residual matrix must be 2-D, got shape {E.shape}")
    n, m = E.shape
    if n < m + 1:
        raise InsufficientDataError(f"PCA fit needs at least M+1={m + 1} rows, got {n}")
    if not np.all(np.isfinite(E)):
        raise DegenerateDataError("residual matrix contains non-finite values")

    scaler = zscore_fit(E)
    Z = zscore_apply(scaler, E)
    cov = Z.T @ Z / (n - 1)
    lam, vec = symmetric_eigh(cov)
    lam = np.where(lam < CLAMP_RELATIVE * max(lam[0], 0.0), 0.0, lam)
    l = select_components(lam, cpv_target)
    g, h, t2_lim, spe_lim, phi_lim = control_limits(lam, l, alpha)
    model = PcaMonitorModel(scaler, vec[:, :l].copy(), lam, l, g, h, alpha, t2_lim, spe_lim, phi_lim)
    log.info("PCA monitor: l=%d of %d, g=%.6g, h=%.6g, limits T2=%.6g SPE=%.6g phi=%.6g",
             l, m, g, h, t2_lim, spe_lim, phi_lim)
    return model


def _check(model: PcaMonitorModel, e) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    if e.shape[-1:] != (model.m_vars,) or e.ndim > 2:
        raise ShapeError(f"expected vectors of length {model.m_vars}, got shape {e.shape}")
    return e


def t2_index(model: PcaMonitorModel, e):
    """Hotelling T² of standardized residual(s) ``e`` (vector or rows)."""
    e = _check(model, e)
    scores = e @ model.loadings
    return np.sum(scores * scores / model.leading_eigenvalues, axis=-1)


def spe_index(model: PcaMonitorModel, e):
    e = _check(model, e)
    resid = e - (e @ model.loadings) @ model.loadings.T
    return np.sum(resid * resid, axis=-1)


def phi_index(model: PcaMonitorModel, e):
    return t2_index(model, e) + spe_index(model, e) / model.g


def standardize(model: PcaMonitorModel, raw_residuals) -> np.ndarray:
    return zscore_apply(model.residual_scaler, raw_residuals)
