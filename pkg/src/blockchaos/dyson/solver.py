"""Self-consistent equation ``m = <(Lambda - z - m)^{-1}>`` and the matrix M(z).

Lambda is block circulant, so a block Fourier transform diagonalizes it into D
Hermitian N x N symbols ``sigma_k = w^k A + w^{-k} A^*`` with ``w = exp(2 pi i / D)``.
The scalar equation then only needs the eigenvalues of the symbols, and every
block of ``M = (Lambda - z - m)^{-1}`` is an inverse FFT (over k) of the Fourier
blocks ``(sigma_k - z - m)^{-1}``.

For D = 2 the ring convention (one bond, ``A`` above and ``A^*`` below the
diagonal) is not circulant unless A is Hermitian. Writing ``A = U S V^*`` and
rotating block 0 by U and block 1 by V turns Lambda into ``[[0, S], [S, 0]]``,
which is circulant with symbols ``+-S``. The rotation is kept as a per-block
frame and undone when M is reconstructed; traces of products of M blocks with
block projectors (M-hat, K, K3) do not see it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from ..errors import ContractError, DimensionError, NumericalError
from ..model import BlockHermitianMatrix, InteractionKind, InteractionSpec, build_interaction
from .semicircle import m_semicircle

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10_000
DAMPING = 0.5


@dataclass(frozen=True, eq=False)
class DysonModel:
    """Block-Fourier data of an interaction, at a given overall scale.

    ``sigma_vals[k]`` are the eigenvalues of the k-th Fourier symbol at scale 1;
    ``sigma_vecs[k]`` its eigenvectors (``None`` when every symbol is diagonal in
    the frame basis); ``frames[a]`` the unitary applied to block a (``None`` means
    identity).
    """

    d_blocks: int
    block_size: int
    sigma_vals: np.ndarray
    sigma_vecs: Optional[np.ndarray] = None
    frames: Optional[np.ndarray] = None
    scale: float = 1.0
    a_op_norm: float = 0.0
    a_hs_norm: float = 0.0
    _weights: tuple = field(default=None, repr=False)

    @classmethod
    def from_spec(cls, spec: InteractionSpec, d_blocks: int, block_size: int) -> "DysonModel":
        d, n = int(d_blocks), int(block_size)
        if d < 1 or n < 1:
            raise DimensionError("d_blocks and block_size must be positive")
        spec.check_size(n)
        norms = dict(a_op_norm=spec.op_norm(n), a_hs_norm=spec.hs_norm(n))
        k = np.arange(d)
        if d == 1 or spec.is_zero:
            return cls(d, n, np.zeros((d, n)), **norms)
        if spec.kind is InteractionKind.SCALAR:
            return cls(d, n, np.repeat(_scalar_symbol(spec.lam, d)[:, None], n, axis=1), **norms)
        a = np.asarray(spec.matrix)
        if d == 2:
            u, s, vh = np.linalg.svd(a)
            frames = np.stack([u, vh.conj().T]).astype(np.complex128)
            vals = np.stack([s, -s])
            return cls(d, n, vals, frames=frames, **norms)
        omega = np.exp(2j * np.pi * k / d)
        a = a.astype(np.complex128)
        comm = a @ a.conj().T - a.conj().T @ a
        if np.linalg.norm(comm) <= 1e-13 * max(np.linalg.norm(a) ** 2, 1e-300):
            # normal A: one unitary diagonalizes every symbol
            t, q = scipy.linalg.schur(a, output="complex")
            alpha = np.diag(t)
            vals = 2.0 * np.real(omega[:, None] * alpha[None, :])
            frames = np.repeat(q[None], d, axis=0)
            return cls(d, n, vals, frames=frames, **norms)
        vals = np.empty((d, n))
        vecs = np.empty((d, n, n), dtype=np.complex128)
        for j in range(d):
            sym = omega[j] * a + np.conj(omega[j]) * a.conj().T
            sym = 0.5 * (sym + sym.conj().T)
            vals[j], vecs[j] = np.linalg.eigh(sym)
        return cls(d, n, vals, sigma_vecs=vecs, **norms)

    @classmethod
    def from_lambda(cls, lam: BlockHermitianMatrix) -> "DysonModel":
        """Recover A from an assembled Lambda and check the ring structure."""
        d, n = lam.d_blocks, lam.block_size
        if d == 1:
            if np.any(lam.entries):
                raise ContractError("a single-block Lambda must vanish")
            return cls.from_spec(InteractionSpec.zero(), 1, n)
        spec = InteractionSpec.dense(lam.block(0, 1))
        rebuilt = build_interaction(spec, d, n).entries
        if np.max(np.abs(rebuilt - lam.entries)) > 1e-12 * max(1.0, np.max(np.abs(lam.entries))):
            raise ContractError("matrix does not have the ring-interaction block structure")
        return cls.from_spec(spec, d, n)

    @property
    def diagonal(self) -> bool:
        return self.sigma_vecs is None

    @property
    def dim(self) -> int:
        return self.d_blocks * self.block_size

    @property
    def operator_norm(self) -> float:
        """Norm of the scaled Lambda."""
        return float(self.scale * np.max(np.abs(self.sigma_vals)))

    def scaled(self, factor: float) -> "DysonModel":
        """The same interaction with Lambda multiplied by ``factor`` (relative)."""
        return DysonModel(self.d_blocks, self.block_size, self.sigma_vals, self.sigma_vecs,
                          self.frames, self.scale * float(factor), self.a_op_norm, self.a_hs_norm,
                          self._weights)

    def at_scale(self, scale: float) -> "DysonModel":
        return self.scaled(scale / self.scale)

    def spectrum_weights(self):
        """Distinct eigenvalues of Lambda (scale 1) and their relative weights."""
        if self._weights is None:
            vals, counts = np.unique(self.sigma_vals.ravel(), return_counts=True)
            object.__setattr__(self, "_weights", (vals, counts / counts.sum()))
        return self._weights

    def lambda_eigenvalues(self) -> np.ndarray:
        return np.sort(self.scale * self.sigma_vals.ravel())

    def dense_lambda(self) -> np.ndarray:
        """Rebuild Lambda from the Fourier data (used by the reconstruction checks)."""
        sym = self.fourier_symbols()
        blocks = np.fft.fft(sym, axis=0) / self.d_blocks  # blocks[j] = C_j, Lambda_(a,b) = C_{b-a}
        d, n = self.d_blocks, self.block_size
        out = np.zeros((d, n, d, n), dtype=np.complex128)
        for a in range(d):
            for b in range(d):
                out[a, :, b, :] = self._unframe(blocks[(b - a) % d], a, b)
        return out.reshape(d * n, d * n)

    def fourier_symbols(self) -> np.ndarray:
        vals = self.scale * self.sigma_vals
        if self.diagonal:
            return np.stack([np.diag(v).astype(np.complex128) for v in vals])
        return np.einsum("kij,kj,klj->kil", self.sigma_vecs, vals, self.sigma_vecs.conj())

    def _unframe(self, block: np.ndarray, a: int, b: int) -> np.ndarray:
        if self.frames is None:
            return block
        return self.frames[a] @ block @ self.frames[b].conj().T


def _scalar_symbol(lam: float, d: int) -> np.ndarray:
    k = np.arange(d)
    if d == 1:
        return np.zeros(1)
    if d == 2:
        return lam * np.array([1.0, -1.0])
    return 2.0 * lam * np.cos(2.0 * np.pi * k / d)


def as_model(interaction, d_blocks: Optional[int] = None, block_size: Optional[int] = None) -> DysonModel:
    if isinstance(interaction, DysonModel):
        return interaction
    if isinstance(interaction, BlockHermitianMatrix):
        return DysonModel.from_lambda(interaction)
    if isinstance(interaction, InteractionSpec):
        if d_blocks is None or block_size is None:
            raise DimensionError("d_blocks and block_size are required with an InteractionSpec")
        return DysonModel.from_spec(interaction, d_blocks, block_size)
    raise TypeError(f"cannot build a Dyson model from {type(interaction).__name__}")


@dataclass(frozen=True, eq=False)
class DysonSolution:
    z: complex
    m: complex
    iterations: int
    residual: float
    model: DysonModel = field(repr=False)

    @property
    def shift(self) -> complex:
        """``z + m``; the Fourier blocks are ``(sigma_k - shift)^{-1}``."""
        return self.z + self.m

    def fourier_diagonals(self) -> np.ndarray:
        """(D, N) eigenvalues of the Fourier blocks, in the symbol eigenbasis."""
        return 1.0 / (self.model.scale * self.model.sigma_vals - self.shift)

    def fourier_blocks(self) -> np.ndarray:
        """The D Fourier blocks ``(sigma_k - z - m)^{-1}`` as (D, N, N), frame basis."""
        f = self.fourier_diagonals()
        vecs = self.model.sigma_vecs
        if vecs is None:
            return np.stack([np.diag(row) for row in f])
        return np.einsum("kij,kj,klj->kil", vecs, f, vecs.conj())

    def circulant_diagonals(self) -> np.ndarray:
        """For diagonal models: (D, N) diagonals of the blocks ``M_(a,b)``, index ``(a-b) mod D``."""
        if not self.model.diagonal:
            raise ContractError("model symbols are not simultaneously diagonal")
        return np.fft.ifft(self.fourier_diagonals(), axis=0)

    def circulant_blocks(self) -> np.ndarray:
        """(D, N, N) blocks ``C_d`` with ``M_(a,b) = C_{(a-b) mod D}`` in the frame basis."""
        return np.fft.ifft(self.fourier_blocks(), axis=0)

    def block(self, a: int, b: int) -> np.ndarray:
        d = self.model.d_blocks
        c = self.circulant_blocks()[(a - b) % d]
        return self.model._unframe(c, a, b)

    def dense(self) -> np.ndarray:
        """The full DN x DN matrix M(z)."""
        d, n = self.model.d_blocks, self.model.block_size
        c = self.circulant_blocks()
        out = np.empty((d, n, d, n), dtype=np.complex128)
        for a in range(d):
            for b in range(d):
                out[a, :, b, :] = self.model._unframe(c[(a - b) % d], a, b)
        return out.reshape(d * n, d * n)

    def block_traces(self) -> np.ndarray:
        """Normalized traces ``<M_k>_N`` of the Fourier blocks."""
        return self.fourier_diagonals().mean(axis=1)

    def conjugate(self) -> "DysonSolution":
        return DysonSolution(np.conj(self.z), np.conj(self.m), self.iterations, self.residual, self.model)


def _stieltjes(vals, weights, w):
    r = 1.0 / (vals - w)
    return np.dot(weights, r), np.dot(weights, r * r)


def _iterate(vals, weights, z, m, tol, max_iter):
    """Damped fixed-point iteration, switching to safeguarded Newton on stagnation.

    Returns ``(m, iterations, residual)``; the residual is ``|F(m) - m|`` at the
    returned m.
    """
    f, fp = _stieltjes(vals, weights, z + m)
    res = abs(f - m)
    it = 0
    newton = False
    while res > tol and it < max_iter:
        it += 1
        if not newton:
            m_new = (1.0 - DAMPING) * m + DAMPING * f
            f_new, fp_new = _stieltjes(vals, weights, z + m_new)
            res_new = abs(f_new - m_new)
            if res_new > 0.7 * res or it > 200:
                newton = True
            m, f, fp, res = m_new, f_new, fp_new, res_new
            continue
        denom = 1.0 - fp
        step = (f - m) / denom if denom != 0 else DAMPING * (f - m)
        for _ in range(40):
            m_new = m + step
            if m_new.imag > 0:
                f_new, fp_new = _stieltjes(vals, weights, z + m_new)
                res_new = abs(f_new - m_new)
                if res_new < res or res_new <= tol:
                    break
            step *= 0.5
        else:
            m_new = (1.0 - DAMPING) * m + DAMPING * f
            f_new, fp_new = _stieltjes(vals, weights, z + m_new)
            res_new = abs(f_new - m_new)
        m, f, fp, res = m_new, f_new, fp_new, res_new
    return m, it, res


def solve_m(z, interaction, d_blocks: Optional[int] = None, block_size: Optional[int] = None,
            tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
            initial: Optional[complex] = None) -> DysonSolution:
    """Solve ``m(z) = <(Lambda - z - m)^{-1}>`` with ``Im m > 0`` on the upper half plane.

    ``interaction`` is a :class:`DysonModel`, an :class:`InteractionSpec` (with
    ``d_blocks`` and ``block_size``) or an assembled Lambda. For ``Im z < 0`` the
    equation is solved at ``conj(z)`` and the result conjugated.

    Raises :class:`NumericalError` (carrying the last residual) if neither the
    direct iteration nor an eta-continuation from ``Im z = 1`` converges.
    """
    model = as_model(interaction, d_blocks, block_size)
    z = complex(z)
    if z.imag == 0.0:
        raise ContractError("solve_m needs Im z != 0")
    if z.imag < 0:
        init = None if initial is None else np.conj(initial)
        return solve_m(np.conj(z), model, tol=tol, max_iter=max_iter, initial=init).conjugate()
    vals, weights = model.spectrum_weights()
    vals = model.scale * vals
    m0 = complex(m_semicircle(z)) if initial is None else complex(initial)
    m, it, res = _iterate(vals, weights, z, m0, tol, max_iter)
    if res <= tol and m.imag >= 0:
        return DysonSolution(z, complex(m), it, float(res), model)
    log.debug("direct solve failed at z=%s (res=%.3g); trying eta continuation", z, res)
    total = it
    eta_path = np.geomspace(max(1.0, 2.0 * z.imag), z.imag, 60)
    m = complex(m_semicircle(complex(z.real, eta_path[0])))
    for eta in eta_path:
        m, it, res = _iterate(vals, weights, complex(z.real, eta), m, tol, max_iter)
        total += it
        if res > tol or m.imag < 0:
            break
    if res <= tol and m.imag >= 0:
        return DysonSolution(z, complex(m), total, float(res), model)
    raise NumericalError(f"self-consistent equation did not converge at z={z}", residual=float(res),
                         iterations=total, z=z, m=complex(m))


def residual(sol: DysonSolution) -> float:
    """``|m - (1/D) sum_k <M_k>_N|`` recomputed from the Fourier blocks."""
    return float(abs(sol.m - sol.block_traces().mean()))
