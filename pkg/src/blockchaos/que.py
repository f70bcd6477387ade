"""Eigenvector block masses, eigenvalue shifts and the localization sweep."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import ConfigError, ContractError
from .model import InteractionSpec, ModelConfig, build_interaction, sample_blocks, assemble_h_lambda
from .parallel import ordered_map
from .rng import StreamFactory
from .spectral import (ReferenceKind, SpectralDecomposition, bulk_indices, eig_hermitian, ks_distance,
                       normalized_gaps, surmise_for)


@dataclass(frozen=True, eq=False)
class BlockMassProfile:
    k: int
    masses: np.ndarray
    que_stat: float
    loc_stat: float


def _vectors(decomp: SpectralDecomposition) -> np.ndarray:
    if decomp.eigenvectors is None:
        raise ContractError("block masses need eigenvectors")
    return decomp.eigenvectors


def mass_matrix(decomp: SpectralDecomposition, d_blocks: int) -> np.ndarray:
    """(D, DN) array of ``||E_a v_k||^2`` for every eigenvector."""
    v = _vectors(decomp)
    dim = v.shape[0]
    if dim % d_blocks:
        raise ContractError(f"dimension {dim} is not a multiple of D={d_blocks}")
    w = (v.real ** 2 + v.imag ** 2) if np.iscomplexobj(v) else v * v
    return w.reshape(d_blocks, dim // d_blocks, dim).sum(axis=1)


def block_masses(decomp: SpectralDecomposition, k: int, d_blocks: int, block_size: Optional[int] = None) -> BlockMassProfile:
    """Profile of eigenvector ``k`` (0-based): masses, QUE and localization statistics."""
    v = _vectors(decomp)
    dim = v.shape[0]
    if block_size is not None and d_blocks * block_size != dim:
        raise ContractError(f"D*N = {d_blocks * block_size} does not match dimension {dim}")
    if not 0 <= k < dim:
        raise IndexError(f"eigenvector index {k} out of range [0, {dim})")
    col = v[:, k]
    masses = (np.abs(col) ** 2).reshape(d_blocks, -1).sum(axis=1)
    return BlockMassProfile(int(k), masses, float(np.max(np.abs(masses - 1.0 / d_blocks))), float(masses.max()))


def off_diagonal_overlap(decomp: SpectralDecomposition, i: int, j: int, a: int, d_blocks: int) -> complex:
    """``v_i^* (E_a - 1/D) v_j``."""
    v = _vectors(decomp)
    dim = v.shape[0]
    for idx in (i, j):
        if not 0 <= idx < dim:
            raise IndexError(f"eigenvector index {idx} out of range [0, {dim})")
    if not 0 <= a < d_blocks:
        raise IndexError(f"block index {a} out of range [0, {d_blocks})")
    n = dim // d_blocks
    vi, vj = v[:, i], v[:, j]
    sl = slice(a * n, (a + 1) * n)
    return complex(np.vdot(vi[sl], vj[sl]) - np.vdot(vi, vj) / d_blocks)


def block_spectrum(blocks: Sequence[np.ndarray]) -> np.ndarray:
    """Sorted eigenvalues of ``blockdiag(blocks)``, one small eigensolve per block."""
    return np.sort(np.concatenate([eig_hermitian(b, vectors=False).eigenvalues for b in blocks]))


@dataclass(frozen=True, eq=False)
class ShiftSample:
    k_indices: np.ndarray
    shifts: np.ndarray  # (R, len(k_indices))
    block_size: int

    @property
    def median_scaled(self) -> float:
        """Median of ``N |shift|`` pooled over bulk indices and realizations."""
        return float(np.median(self.block_size * np.abs(self.shifts)))


def paired_shift(blocks, h_lambda_eigs: np.ndarray, indices: np.ndarray) -> np.ndarray:
    base = block_spectrum(blocks)
    return h_lambda_eigs[indices] - base[indices]


def eigenvalue_shift(config: ModelConfig, realizations: int, streams: Optional[StreamFactory] = None,
                     kappa: float = 0.05, threads: Optional[int] = None) -> ShiftSample:
    """Paired shifts ``lambda_k(H_Lambda) - lambda_k(H)`` on the bulk, sorted-index pairing.

    Each realization ``r`` samples H from ``streams.child(r)`` and reuses it with
    and without Lambda.
    """
    if realizations < 1:
        raise ConfigError("need at least one realization")
    streams = streams if streams is not None else config.streams("shift")
    lam = build_interaction(config.interaction, config.d_blocks, config.block_size)
    idx = bulk_indices(config.dim, kappa)

    def one(r):
        blocks = sample_blocks(config, streams.child(r))
        if config.interaction.is_zero or config.d_blocks == 1:
            return np.zeros(idx.size)
        eigs = eig_hermitian(assemble_h_lambda(blocks, lam), vectors=False).eigenvalues
        return paired_shift(blocks, eigs, idx)

    shifts = np.stack(ordered_map(one, range(realizations), threads))
    return ShiftSample(idx, shifts, config.block_size)


@dataclass(frozen=True, eq=False)
class RealizationStats:
    """Statistics of one sweep realization."""

    que: np.ndarray
    loc: np.ndarray
    gaps: np.ndarray
    shifts: np.ndarray


SWEEP_COLUMNS = ("lambda", "A_hs_norm", "median_que", "median_loc", "ks_exponential", "ks_surmise",
                 "median_shift_times_N", "realizations")


@dataclass
class TransitionSummary:
    lambda_grid: np.ndarray
    rows: List[Dict[str, float]]
    index_mode: str
    kappa: float
    surmise: ReferenceKind
    raw: List[List[RealizationStats]] = field(default_factory=list, repr=False)

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows])

    def pooled_gaps(self, i: int) -> np.ndarray:
        return np.concatenate([s.gaps for s in self.raw[i]])


def _realization_stats(config: ModelConfig, streams: StreamFactory, lam, kappa: float, index_mode: str,
                       with_shift: bool) -> RealizationStats:
    blocks = sample_blocks(config, streams)
    h = assemble_h_lambda(blocks, lam)
    dec = eig_hermitian(h)
    dim = config.dim
    masses = mass_matrix(dec, config.d_blocks)
    if index_mode == "center":
        ks = np.array([dim // 2 - 1 if dim > 1 else 0])
    else:
        ks = bulk_indices(dim, kappa)
    m = masses[:, ks]
    que = np.max(np.abs(m - 1.0 / config.d_blocks), axis=0)
    loc = np.max(m, axis=0)
    gaps = normalized_gaps(dec, kappa).normalized_gaps
    idx = bulk_indices(dim, kappa)
    shifts = paired_shift(blocks, dec.eigenvalues, idx) if with_shift else np.zeros(idx.size)
    return RealizationStats(que, loc, gaps, shifts)


def lambda_grid_from_exponents(exponents: Sequence[float], block_size: int) -> np.ndarray:
    return np.array([float(block_size) ** float(e) for e in exponents])


def transition_sweep(template: ModelConfig, lambda_grid: Sequence[float], realizations: int,
                     kappa: float = 0.05, index_mode: str = "center", streams: Optional[StreamFactory] = None,
                     threads: Optional[int] = None) -> TransitionSummary:
    """Sweep ``A = lambda I`` over a grid and summarize each point.

    ``index_mode="center"`` uses the single eigenvector ``k = DN/2`` (1-based)
    per realization; ``"bulk"`` pools every bulk eigenvector. Gaps are pooled
    over realizations before the KS distances are taken. Realization ``r`` at
    grid point ``i`` draws from ``streams.child(i, r)``; tasks run in parallel
    and are merged in (i, r) order.
    """
    grid = np.asarray(list(lambda_grid), dtype=float)
    if grid.size == 0:
        raise ConfigError("lambda grid is empty")
    if np.any(np.diff(grid) <= 0):
        raise ConfigError("lambda grid must be strictly increasing")
    if realizations < 1:
        raise ConfigError("need at least one realization")
    if index_mode not in ("center", "bulk"):
        raise ConfigError(f"index_mode must be 'center' or 'bulk', got {index_mode!r}")
    streams = streams if streams is not None else template.streams("sweep")
    configs = [template.with_interaction(InteractionSpec.scalar(float(v))) for v in grid]
    lams = [build_interaction(c.interaction, c.d_blocks, c.block_size) for c in configs]
    tasks = [(i, r) for i in range(grid.size) for r in range(realizations)]

    def run(task):
        i, r = task
        cfg = configs[i]
        return _realization_stats(cfg, streams.child(i, r), lams[i], kappa, index_mode,
                                  with_shift=not cfg.interaction.is_zero and cfg.d_blocks > 1)

    results = ordered_map(run, tasks, threads)
    surmise = surmise_for(template.ensemble)
    rows, raw = [], []
    n = template.block_size
    for i, value in enumerate(grid):
        stats_i = results[i * realizations:(i + 1) * realizations]
        raw.append(stats_i)
        que = np.concatenate([s.que for s in stats_i])
        loc = np.concatenate([s.loc for s in stats_i])
        gaps = np.concatenate([s.gaps for s in stats_i])
        shifts = np.concatenate([s.shifts for s in stats_i])
        rows.append({
            "lambda": float(value),
            "A_hs_norm": configs[i].interaction.hs_norm(n),
            "median_que": float(np.median(que)),
            "median_loc": float(np.median(loc)),
            "ks_exponential": ks_distance(gaps, ReferenceKind.EXPONENTIAL),
            "ks_surmise": ks_distance(gaps, surmise),
            "median_shift_times_N": float(np.median(n * np.abs(shifts))),
            "realizations": int(realizations),
        })
    return TransitionSummary(grid, rows, index_mode, kappa, surmise, raw)
