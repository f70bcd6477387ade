"""Eigendecomposition and eigenvalue statistics.

Gap statistics follow the usual unfolding by the semicircle density: the gap
``lambda_{k+1} - lambda_k`` is multiplied by ``DN rho_sc(lambda_k)`` so that
its bulk mean is one. The three reference laws are

* ``Exponential``: ``e^{-x}`` (independent levels),
* ``WignerSurmiseGOE``: ``(pi x / 2) e^{-pi x^2 / 4}``, a Rayleigh law,
* ``WignerSurmiseGUE``: ``(32 x^2 / pi^2) e^{-4 x^2 / pi}``, a Maxwell law.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg
from scipy import stats

from .dyson.semicircle import rho_semicircle
from .errors import ConfigError, ContractError
from .model import BlockHermitianMatrix

HERMITIAN_TOL = 1e-10
DEFAULT_KAPPA = 0.05
HIST_BINS = 50
HIST_RANGE = (0.0, 4.0)


class ReferenceKind(str, enum.Enum):
    EXPONENTIAL = "Exponential"
    GOE = "WignerSurmiseGOE"
    GUE = "WignerSurmiseGUE"

    @classmethod
    def parse(cls, value) -> "ReferenceKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"exponential": cls.EXPONENTIAL, "exp": cls.EXPONENTIAL, "poisson": cls.EXPONENTIAL,
                   "wignersurmisegoe": cls.GOE, "goe": cls.GOE, "wignersurmisegue": cls.GUE, "gue": cls.GUE}
        if key not in aliases:
            raise ConfigError(f"unknown reference distribution {value!r}")
        return aliases[key]


_REFERENCE = {
    ReferenceKind.EXPONENTIAL: stats.expon(),
    ReferenceKind.GOE: stats.rayleigh(scale=math.sqrt(2.0 / math.pi)),
    ReferenceKind.GUE: stats.maxwell(scale=math.sqrt(math.pi / 8.0)),
}


def surmise_for(ensemble) -> ReferenceKind:
    """The Wigner surmise matching an ensemble name (``GOE`` or ``GUE``)."""
    name = getattr(ensemble, "value", ensemble)
    return ReferenceKind.GOE if str(name).upper() == "GOE" else ReferenceKind.GUE


def _check_nonneg(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ContractError("reference distributions are defined for x >= 0")
    return x


def reference_density(kind, x):
    """Density of a reference gap law at ``x >= 0``."""
    x = _check_nonneg(x)
    out = _REFERENCE[ReferenceKind.parse(kind)].pdf(x)
    return out[()] if np.ndim(out) == 0 else out


def reference_cdf(kind, x):
    x = _check_nonneg(x)
    out = _REFERENCE[ReferenceKind.parse(kind)].cdf(x)
    return out[()] if np.ndim(out) == 0 else out


def ks_distance(sample, kind) -> float:
    """Kolmogorov-Smirnov sup distance between the empirical CDF and a reference."""
    sample = np.asarray(sample, dtype=float).ravel()
    if sample.size == 0:
        raise ContractError("ks_distance needs a nonempty sample")
    _check_nonneg(sample)
    ref = _REFERENCE[ReferenceKind.parse(kind)]
    return float(stats.kstest(sample, ref.cdf).statistic)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None
    config_hash: Optional[str] = None

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def check(self, matrix: np.ndarray, n_checks: int = 10, seed: int = 0, tol: float = 1e-8) -> float:
        """Spot-check eigenpair residuals and orthonormality; returns the worst relative error."""
        if np.any(np.diff(self.eigenvalues) < 0):
            raise ContractError("eigenvalues are not ascending")
        if self.eigenvectors is None:
            return 0.0
        v = self.eigenvectors
        norm = max(np.linalg.norm(matrix, 2), 1e-300)
        ks = np.random.default_rng(seed).choice(self.dim, size=min(n_checks, self.dim), replace=False)
        res = max(np.linalg.norm(matrix @ v[:, k] - self.eigenvalues[k] * v[:, k]) / norm for k in ks)
        orth = np.max(np.abs(v.conj().T @ v - np.eye(self.dim)))
        worst = max(res, orth)
        if worst > tol:
            raise ContractError(f"eigendecomposition check failed (residual {res:.3g}, orthogonality {orth:.3g})")
        return float(worst)


def _as_array(matrix) -> np.ndarray:
    if isinstance(matrix, BlockHermitianMatrix):
        return matrix.entries
    return np.asarray(matrix)


def hermitian_deviation(matrix) -> float:
    a = _as_array(matrix)
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def eig_hermitian(matrix, vectors: bool = True, config_hash: Optional[str] = None) -> SpectralDecomposition:
    """Full eigendecomposition of a Hermitian matrix (LAPACK ``heevr``/``syevr``).

    Real input stays real. Raises :class:`ContractError` if the input deviates
    from Hermitian by more than 1e-10 entrywise.
    """
    a = _as_array(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {a.shape}")
    dev = hermitian_deviation(a)
    if dev > HERMITIAN_TOL:
        raise ContractError(f"matrix is not Hermitian (deviation {dev:.3g})")
    if np.iscomplexobj(a) and not np.any(a.imag):
        a = a.real
    if vectors:
        vals, vecs = scipy.linalg.eigh(a, driver="evr", check_finite=False)
        return SpectralDecomposition(vals, vecs, config_hash)
    vals = scipy.linalg.eigh(a, eigvals_only=True, driver="evr", check_finite=False)
    return SpectralDecomposition(vals, None, config_hash)


def bulk_indices(dim: int, kappa: float = DEFAULT_KAPPA) -> np.ndarray:
    """0-based indices ``i`` whose 1-based label ``k = i + 1`` lies in ``[kappa DN, (1 - kappa) DN]``."""
    if not 0.0 <= kappa < 0.5:
        raise ConfigError(f"bulk parameter kappa must lie in [0, 0.5), got {kappa}")
    lo = max(int(math.ceil(kappa * dim - 1e-9)), 1)
    hi = int(math.floor((1.0 - kappa) * dim + 1e-9))
    return np.arange(lo - 1, hi)


@dataclass(frozen=True, eq=False)
class GapSample:
    k_indices: np.ndarray
    eigenvalues: np.ndarray
    raw_gaps: np.ndarray
    normalized_gaps: np.ndarray
    bulk_window: tuple

    def rows(self):
        """Rows ``(k, lambda_k, gap, normalized_gap)`` for tabular output."""
        return list(zip(self.k_indices.tolist(), self.eigenvalues.tolist(), self.raw_gaps.tolist(),
                        self.normalized_gaps.tolist()))


def normalized_gaps(decomp: Union[SpectralDecomposition, np.ndarray], kappa: float = DEFAULT_KAPPA,
                    density: Optional[Callable] = None) -> GapSample:
    """Bulk gaps ``DN rho(lambda_k) (lambda_{k+1} - lambda_k)``.

    ``rho`` defaults to the semicircle density; pass any vectorized callable
    (for instance a tabulated free-convolution density) to unfold differently.
    Index ``k`` is 0-based and runs over the bulk window with ``k + 1 < DN``.
    """
    eigs = decomp.eigenvalues if isinstance(decomp, SpectralDecomposition) else np.sort(np.asarray(decomp))
    dim = eigs.shape[0]
    idx = bulk_indices(dim, kappa)
    idx = idx[idx + 1 < dim]
    if idx.size == 0:
        raise ContractError(f"empty bulk window for DN={dim}, kappa={kappa}")
    rho = rho_semicircle if density is None else density
    lam = eigs[idx]
    raw = eigs[idx + 1] - lam
    norm = dim * np.asarray(rho(lam), dtype=float) * raw
    return GapSample(idx, lam, raw, norm, (kappa, int(idx[0]), int(idx[-1])))


def gap_histogram(gaps, bins: int = HIST_BINS, value_range=HIST_RANGE):
    """Density histogram of normalized gaps with bin-averaged reference densities.

    The density is count / (total * width), so mass beyond the range is not
    redistributed. Returns a dict of equal-length columns.
    """
    gaps = np.asarray(gaps, dtype=float).ravel()
    if gaps.size == 0:
        raise ContractError("gap histogram needs a nonempty sample")
    edges = np.linspace(value_range[0], value_range[1], bins + 1)
    counts, _ = np.histogram(gaps, bins=edges)
    width = np.diff(edges)
    out = {"bin_left": edges[:-1], "bin_right": edges[1:], "density": counts / (gaps.size * width)}
    for col, kind in (("ref_exponential", ReferenceKind.EXPONENTIAL), ("ref_goe", ReferenceKind.GOE),
                      ("ref_gue", ReferenceKind.GUE)):
        cdf = reference_cdf(kind, edges)
        out[col] = np.diff(cdf) / width
    return out


@dataclass(frozen=True, eq=False)
class RigidityReport:
    k: np.ndarray
    deviations: np.ndarray
    normalized: np.ndarray
    bulk_max: float
    bulk_window: tuple


def rigidity_report(decomp: Union[SpectralDecomposition, np.ndarray], gammas, block_size: int,
                    kappa: float = DEFAULT_KAPPA) -> RigidityReport:
    """Deviations ``|lambda_k - gamma_k|`` and ``|lambda_k - gamma_k| N^{2/3} min(k, DN+1-k)^{1/3}``.

    ``k`` is the 1-based label, ``N`` the block size. The summary is the maximum
    of the normalized statistic over the bulk window.
    """
    eigs = decomp.eigenvalues if isinstance(decomp, SpectralDecomposition) else np.sort(np.asarray(decomp))
    gammas = np.asarray(gammas, dtype=float)
    if gammas.shape != eigs.shape:
        raise ContractError(f"{eigs.shape[0]} eigenvalues but {gammas.shape} quantiles")
    dim = eigs.shape[0]
    k = np.arange(1, dim + 1)
    dev = np.abs(eigs - gammas)
    scaled = dev * block_size ** (2.0 / 3.0) * np.minimum(k, dim + 1 - k) ** (1.0 / 3.0)
    idx = bulk_indices(dim, kappa)
    if idx.size == 0:
        raise ContractError(f"empty bulk window for DN={dim}, kappa={kappa}")
    return RigidityReport(k, dev, scaled, float(scaled[idx].max()), (kappa, int(idx[0]), int(idx[-1])))
