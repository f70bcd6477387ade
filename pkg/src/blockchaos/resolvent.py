"""Green's function observables of a sampled matrix.

Resolvents are always built from one eigendecomposition,
``G(z) = V diag(1 / (lambda - z)) V^*``, so sweeping z costs one matrix product
per point and ``G(conj z) = G(z)^*`` holds to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dyson import DysonSolution, solve_m, two_point_kernel
from .dyson.solver import DysonModel
from .errors import ContractError, DimensionError
from .model import ModelConfig, build_interaction, sample_h_lambda
from .parallel import ordered_map
from .rng import StreamFactory
from .spectral import SpectralDecomposition, eig_hermitian


def _decomposition(source) -> SpectralDecomposition:
    if isinstance(source, SpectralDecomposition):
        if source.eigenvectors is None:
            raise ContractError("resolvents need eigenvectors")
        return source
    return eig_hermitian(source)


def green_function(source, z) -> np.ndarray:
    """``(H - z)^{-1}`` from an eigendecomposition (or a matrix, decomposed here)."""
    z = complex(z)
    if z.imag == 0.0:
        raise ContractError("the resolvent is only evaluated off the real axis")
    dec = _decomposition(source)
    v = dec.eigenvectors
    return (v * (1.0 / (dec.eigenvalues - z))) @ v.conj().T


def ward_check(g: np.ndarray, z, normalize: bool = True) -> float:
    """``max_y |sum_x |G_xy|^2 - Im G_yy / eta|``.

    With ``normalize`` the residual is divided by ``max_y sum_x |G_xy|^2`` so the
    value is a relative rounding error, comparable across eta.
    """
    eta = complex(z).imag
    if eta == 0.0:
        raise ContractError("Ward identity needs Im z != 0")
    col = np.einsum("xy,xy->y", g, g.conj()).real
    diag = np.diagonal(g).imag / eta
    res = float(np.max(np.abs(col - diag)))
    if normalize:
        res /= max(float(np.max(col)), np.finfo(float).tiny)
    return res


def block_traces(g: np.ndarray, d_blocks: int) -> np.ndarray:
    """``g_a = D <G E_a> = (1/N) tr G_(a,a)``."""
    dim = g.shape[0]
    if dim % d_blocks:
        raise DimensionError(f"dimension {dim} is not a multiple of D={d_blocks}")
    n = dim // d_blocks
    blocks = g.reshape(d_blocks, n, d_blocks, n)
    return np.einsum("aiai->a", blocks) / n


@dataclass(frozen=True, eq=False)
class ResolventObservables:
    z: complex
    block_traces: np.ndarray
    full_trace: complex
    ward_residual: float


def resolvent_observables(source, z, d_blocks: int) -> ResolventObservables:
    g = green_function(source, z)
    traces = block_traces(g, d_blocks)
    return ResolventObservables(complex(z), traces, complex(np.trace(g) / g.shape[0]), ward_check(g, z))


def two_resolvent_L(g1: np.ndarray, g2: np.ndarray, d_blocks: int, block_size: int) -> np.ndarray:
    """``L_ab = (1/N) tr(G1_(b,a) G2_(a,b)) = D <G1 E_a G2 E_b>``."""
    dim = d_blocks * block_size
    if g1.shape != (dim, dim) or g2.shape != (dim, dim):
        raise DimensionError(f"resolvents of shape {g1.shape} and {g2.shape} do not match D*N = {dim}")
    b1 = g1.reshape(d_blocks, block_size, d_blocks, block_size)
    b2 = g2.reshape(d_blocks, block_size, d_blocks, block_size)
    return np.einsum("biaj,ajbi->ab", b1, b2) / block_size


@dataclass(frozen=True, eq=False)
class TwoResolventEstimate:
    z1: complex
    z2: complex
    sample_count: int
    mean_L: np.ndarray
    stderr_L: np.ndarray
    kernel_K_reference: np.ndarray
    block_size: int

    @property
    def max_abs_dev(self) -> float:
        return float(np.max(np.abs(self.mean_L - self.kernel_K_reference)))

    @property
    def envelope(self) -> float:
        """``N^{-1} eta^{-2}`` with ``eta = min(|Im z1|, |Im z2|)``."""
        eta = min(abs(self.z1.imag), abs(self.z2.imag))
        return 1.0 / (self.block_size * eta * eta)

    def to_dict(self) -> dict:
        return {
            "z1": self.z1, "z2": self.z2, "R": self.sample_count, "mean_L": self.mean_L,
            "stderr_L": self.stderr_L, "K": self.kernel_K_reference,
            "max_abs_dev": self.max_abs_dev, "envelope": self.envelope,
        }


def sample_L(config: ModelConfig, streams: StreamFactory, z1, z2, lambda_matrix=None) -> np.ndarray:
    """L for one realization drawn from ``streams``."""
    _, h = sample_h_lambda(config, streams, lambda_matrix)
    dec = eig_hermitian(h)
    return two_resolvent_L(green_function(dec, z1), green_function(dec, z2), config.d_blocks, config.block_size)


def monte_carlo_L(config: ModelConfig, z1, z2, realizations: int, streams: Optional[StreamFactory] = None,
                  threads: Optional[int] = None,
                  realization_indices: Optional[Sequence[int]] = None) -> TwoResolventEstimate:
    """Sample mean and standard error of L over independent realizations.

    Realization ``r`` draws from ``streams.child(r)``; ``realization_indices``
    overrides the default ``0..R-1`` (repeating an index repeats a sample).
    """
    if realization_indices is None:
        if realizations < 2:
            raise ContractError("monte_carlo_L needs at least two realizations")
        realization_indices = range(realizations)
    indices = list(realization_indices)
    if len(indices) < 2:
        raise ContractError("monte_carlo_L needs at least two realizations")
    streams = streams if streams is not None else config.streams("twores")
    z1, z2 = complex(z1), complex(z2)
    lam = build_interaction(config.interaction, config.d_blocks, config.block_size)
    model = DysonModel.from_spec(config.interaction, config.d_blocks, config.block_size)
    kernel = two_point_kernel(solve_m(z1, model), solve_m(z2, model))

    samples = np.stack(ordered_map(lambda r: sample_L(config, streams.child(r), z1, z2, lam), indices, threads))
    count = samples.shape[0]
    mean = samples.mean(axis=0)
    spread = np.sum(np.abs(samples - mean) ** 2, axis=0) / (count - 1)
    stderr = np.sqrt(spread / count)
    return TwoResolventEstimate(z1, z2, count, mean, stderr, kernel.kernel_k, config.block_size)


@dataclass(frozen=True, eq=False)
class LocalLawError:
    z: complex
    averaged: float
    block_averaged: np.ndarray
    entrywise: np.ndarray
    averaged_envelope: float
    entrywise_envelope: float


def local_law_error(g: np.ndarray, solution: DysonSolution, probes: Sequence = ()) -> LocalLawError:
    """Deviations of G from M.

    ``averaged = |<G - M>|``, ``block_averaged[a] = |<(G - M) E_a>|`` and
    ``entrywise[j] = |u_j^* (G - M) v_j|`` for each probe pair ``(u_j, v_j)``.
    Envelopes are ``1/(N eta)`` and ``sqrt(Im m / (N eta)) + 1/(N eta)``.
    """
    model = solution.model
    d, n = model.d_blocks, model.block_size
    if g.shape != (d * n, d * n):
        raise DimensionError(f"G has shape {g.shape}, expected {(d * n, d * n)}")
    diff = g - solution.dense()
    dim = d * n
    averaged = abs(np.trace(diff)) / dim
    blocks = diff.reshape(d, n, d, n)
    block_avg = np.abs(np.einsum("aiai->a", blocks)) / dim
    entries = []
    for u, v in probes:
        u = np.asarray(u, dtype=np.complex128)
        v = np.asarray(v, dtype=np.complex128)
        for vec in (u, v):
            if abs(np.linalg.norm(vec) - 1.0) > 1e-10:
                raise ContractError("probe vectors must have unit norm")
        entries.append(abs(u.conj() @ diff @ v))
    eta = abs(solution.z.imag)
    inv = 1.0 / (n * eta)
    return LocalLawError(solution.z, float(averaged), block_avg, np.array(entries), inv,
                         float(np.sqrt(abs(solution.m.imag) * inv) + inv))
