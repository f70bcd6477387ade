"""Two- and three-point deterministic kernels built from M(z).

``mhat_ab = D <M(z1) E_a M(z2) E_b>`` is the deterministic counterpart of the
two-resolvent trace ``L_ab``; ``K = (1 - mhat)^{-1} mhat`` is its resummation.
All traces are evaluated from the circulant blocks of M, so the cost is
``O(D N^2)`` for diagonal models and ``O(D N^3)`` (resp. ``O(D^2 N^3)`` for the
three-point tensor) otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, NumericalError
from .solver import DysonSolution

SINGULAR_TOL = 1e-12
CIRCULANT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class TwoPointKernel:
    z1: complex
    z2: complex
    mhat: np.ndarray
    kernel_k: np.ndarray
    eigenvalues: np.ndarray
    flatness: float


def _check_same_model(*sols: DysonSolution):
    first = sols[0].model
    for s in sols[1:]:
        m = s.model
        same = m is first or (
            m.d_blocks == first.d_blocks and m.block_size == first.block_size and m.scale == first.scale
            and np.array_equal(m.sigma_vals, first.sigma_vals)
            and _same_optional(m.sigma_vecs, first.sigma_vecs) and _same_optional(m.frames, first.frames)
        )
        if not same:
            raise ContractError("Dyson solutions belong to different interactions")


def _same_optional(x, y) -> bool:
    if x is None or y is None:
        return x is y
    return x is y or np.array_equal(x, y)


def _circulant_from_offsets(g: np.ndarray) -> np.ndarray:
    """D x D matrix with entry (a, b) = g[(a - b) mod D]."""
    d = g.shape[0]
    idx = (np.arange(d)[:, None] - np.arange(d)[None, :]) % d
    return g[idx]


def mhat(sol1: DysonSolution, sol2: DysonSolution) -> np.ndarray:
    """``mhat_ab = (1/N) tr(M(z1)_(b,a) M(z2)_(a,b))``, a circulant D x D matrix."""
    _check_same_model(sol1, sol2)
    model = sol1.model
    d, n = model.d_blocks, model.block_size
    neg = (-np.arange(d)) % d
    if model.diagonal:
        c1, c2 = sol1.circulant_diagonals(), sol2.circulant_diagonals()
        g = np.einsum("di,di->d", c1[neg], c2) / n
    else:
        c1, c2 = sol1.circulant_blocks(), sol2.circulant_blocks()
        g = np.einsum("dij,dji->d", c1[neg], c2) / n
    return _circulant_from_offsets(g)


def circulancy_deviation(mat: np.ndarray) -> float:
    mat = np.asarray(mat)
    d = mat.shape[0]
    offsets = np.array([mat[(j) % d, 0] for j in range(d)])
    return float(np.max(np.abs(mat - _circulant_from_offsets(offsets))))


def mhat_eigenvalues(mat: np.ndarray) -> np.ndarray:
    """Eigenvalues ``d_k = sum_a mhat_{0a} exp(2 pi i k a / D)`` of a circulant matrix.

    ``d_0`` is the eigenvalue of the constant vector.
    """
    mat = np.asarray(mat)
    dev = circulancy_deviation(mat)
    if dev > CIRCULANT_TOL:
        raise ContractError(f"matrix is not circulant (deviation {dev:.3g})")
    d = mat.shape[0]
    return np.fft.ifft(mat[0]) * d


def kernel_K(mat: np.ndarray, z1=None, z2=None) -> TwoPointKernel:
    """``K = (1 - mhat)^{-1} mhat`` and its flatness ``max |K_ab - K_a'b'|``.

    Refuses to regularize: a nearly singular ``1 - mhat`` (smallest singular value
    below 1e-12) raises :class:`NumericalError` naming the eigenvalue closest to 1.
    """
    mat = np.asarray(mat, dtype=np.complex128)
    d = mat.shape[0]
    eye = np.eye(d)
    smin = np.linalg.svd(eye - mat, compute_uv=False).min()
    eig = mhat_eigenvalues(mat) if circulancy_deviation(mat) <= CIRCULANT_TOL else np.linalg.eigvals(mat)
    if smin <= SINGULAR_TOL:
        k = int(np.argmin(np.abs(1.0 - eig)))
        raise NumericalError(
            f"1 - mhat is singular: eigenvalue d_{k} = {eig[k]:.6g} is within {abs(1 - eig[k]):.3g} of 1",
            eigenvalue_index=k, eigenvalue=complex(eig[k]), min_singular_value=float(smin),
        )
    k_mat = np.linalg.solve(eye - mat, mat)
    flat = float(np.max(np.abs(k_mat.ravel()[:, None] - k_mat.ravel()[None, :])))
    return TwoPointKernel(z1, z2, mat, k_mat, eig, flat)


def two_point_kernel(sol1: DysonSolution, sol2: DysonSolution) -> TwoPointKernel:
    return kernel_K(mhat(sol1, sol2), sol1.z, sol2.z)


def three_m_trace(sol1: DysonSolution, sol2: DysonSolution, sol3: DysonSolution) -> np.ndarray:
    """``T_{b1 b2 b3} = D <M1 E_b1 M2 E_b2 M3 E_b3>`` as a (D, D, D) tensor.

    Equals ``(1/N) tr(M1_(b3,b1) M2_(b1,b2) M3_(b2,b3))``; with circulant blocks it
    only depends on ``p = b1 - b2`` and ``q = b2 - b3``.
    """
    _check_same_model(sol1, sol2, sol3)
    model = sol1.model
    d, n = model.d_blocks, model.block_size
    p = np.arange(d)[:, None]
    q = np.arange(d)[None, :]
    r = (-(p + q)) % d
    if model.diagonal:
        c1, c2, c3 = (s.circulant_diagonals() for s in (sol1, sol2, sol3))
        t_pq = np.einsum("pqi,pqi,pqi->pq", c1[r], np.broadcast_to(c2[:, None, :], (d, d, n)),
                         np.broadcast_to(c3[None, :, :], (d, d, n))) / n
    else:
        c1, c2, c3 = (s.circulant_blocks() for s in (sol1, sol2, sol3))
        c23 = np.einsum("pij,qjk->pqik", c2, c3)
        t_pq = np.einsum("pqki,pqik->pq", c1[r], c23) / n
    b = np.arange(d)
    pp = (b[:, None, None] - b[None, :, None]) % d
    qq = (b[None, :, None] - b[None, None, :]) % d
    return t_pq[pp, qq]


def kernel_K3(sol1: DysonSolution, sol2: DysonSolution, sol3: DysonSolution) -> np.ndarray:
    """Three-point tensor ``K_{a1a2a3} = sum_b P12_{a1b1} P23_{a2b2} P31_{a3b3} T_{b1b2b3}``
    with ``Pij = (1 - mhat(zi, zj))^{-1}``."""
    d = sol1.model.d_blocks
    eye = np.eye(d)
    inverses = []
    for sa, sb in ((sol1, sol2), (sol2, sol3), (sol3, sol1)):
        mat = mhat(sa, sb)
        kernel_K(mat, sa.z, sb.z)  # raises on a singular resolvent kernel
        inverses.append(np.linalg.inv(eye - mat))
    t = three_m_trace(sol1, sol2, sol3)
    p12, p23, p31 = inverses
    return np.einsum("ax,by,cz,xyz->abc", p12, p23, p31, t)
