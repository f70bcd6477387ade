"""Block random-matrix model: D independent Wigner blocks on a ring coupled by A.

The full matrix is ``H_Lambda = H + Lambda`` with ``H = blockdiag(H_1, ..., H_D)``
and ``Lambda`` carrying ``A`` on block ``(a, a+1)`` and ``A^*`` on block
``(a+1, a)`` (indices mod D). Block indices are 0-based throughout the package.

Ring conventions for small D:

* ``D = 1``: there is no neighbouring block, so ``Lambda = 0`` (pure Wigner).
* ``D = 2``: block ``(0, 1) = A`` and block ``(1, 0) = A^*``; the wrap-around bond
  is the same bond and is not counted twice.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DimensionError
from .rng import StreamFactory

__all__ = [
    "Ensemble",
    "InteractionKind",
    "InteractionSpec",
    "ModelConfig",
    "BlockHermitianMatrix",
    "OUMode",
    "sample_wigner_block",
    "sample_blocks",
    "block_diagonal",
    "build_interaction",
    "assemble_h_lambda",
    "sample_h_lambda",
    "sample_gaussian_divisible",
    "evolve_ou",
    "block_projector",
    "load_interaction_file",
    "dump_interaction_file",
]

# Every dense matrix the package builds has dimension D*N; callers can lower this.
DEFAULT_MAX_DIM = 8000


class Ensemble(str, enum.Enum):
    GUE = "gue"
    GOE = "goe"

    @classmethod
    def parse(cls, value) -> "Ensemble":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"unknown ensemble {value!r}; expected 'gue' or 'goe'") from None

    @property
    def normalization(self) -> str:
        """Human-readable variance convention, recorded in output metadata."""
        if self is Ensemble.GUE:
            return "E|H_ij|^2 = 1/N for all i,j; diagonal real"
        return "real symmetric; off-diagonal variance 1/N, diagonal variance 2/N"


class InteractionKind(str, enum.Enum):
    ZERO = "zero"
    SCALAR = "scalar"
    DENSE = "dense"


@dataclass(frozen=True, eq=False)
class InteractionSpec:
    """The coupling matrix ``A`` between neighbouring blocks.

    Use the constructors :meth:`zero`, :meth:`scalar` (``A = lam * I``) and
    :meth:`dense`.
    """

    kind: InteractionKind
    lam: float = 0.0
    matrix: Optional[np.ndarray] = None

    @classmethod
    def zero(cls) -> "InteractionSpec":
        return cls(InteractionKind.ZERO)

    @classmethod
    def scalar(cls, lam: float) -> "InteractionSpec":
        lam = float(lam)
        if not np.isfinite(lam):
            raise ConfigError(f"interaction strength must be finite, got {lam}")
        return cls(InteractionKind.SCALAR, lam=lam)

    @classmethod
    def dense(cls, matrix) -> "InteractionSpec":
        a = np.asarray(matrix)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"interaction matrix must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ConfigError("interaction matrix has non-finite entries")
        a = a.astype(np.complex128 if np.iscomplexobj(a) else np.float64, copy=True)
        a.setflags(write=False)
        return cls(InteractionKind.DENSE, matrix=a)

    @property
    def is_zero(self) -> bool:
        if self.kind is InteractionKind.ZERO:
            return True
        if self.kind is InteractionKind.SCALAR:
            return self.lam == 0.0
        return not np.any(self.matrix)

    def check_size(self, n: int) -> None:
        if self.kind is InteractionKind.DENSE and self.matrix.shape[0] != n:
            raise DimensionError(
                f"dimension mismatch: interaction matrix is {self.matrix.shape[0]}x{self.matrix.shape[0]} "
                f"but block_size is {n}"
            )

    def a_matrix(self, n: int) -> np.ndarray:
        """The N x N matrix A."""
        self.check_size(n)
        if self.kind is InteractionKind.ZERO:
            return np.zeros((n, n))
        if self.kind is InteractionKind.SCALAR:
            return self.lam * np.eye(n)
        return np.array(self.matrix)

    def op_norm(self, n: int) -> float:
        self.check_size(n)
        if self.kind is InteractionKind.DENSE:
            return float(np.linalg.norm(self.matrix, 2))
        return abs(self.lam)

    def hs_norm(self, n: int) -> float:
        self.check_size(n)
        if self.kind is InteractionKind.DENSE:
            return float(np.linalg.norm(self.matrix, "fro"))
        return abs(self.lam) * np.sqrt(n)

    def scaled(self, factor: float) -> "InteractionSpec":
        if self.kind is InteractionKind.ZERO:
            return self
        if self.kind is InteractionKind.SCALAR:
            return InteractionSpec.scalar(self.lam * factor)
        return InteractionSpec.dense(self.matrix * factor)

    def to_dict(self) -> dict:
        if self.kind is InteractionKind.ZERO:
            return {"kind": "zero"}
        if self.kind is InteractionKind.SCALAR:
            return {"kind": "scalar", "lambda": self.lam}
        return {"kind": "dense", **_matrix_to_json(self.matrix)}

    @classmethod
    def from_dict(cls, data: dict) -> "InteractionSpec":
        kind = str(data.get("kind", "")).lower()
        if kind == "zero":
            return cls.zero()
        if kind == "scalar":
            if "lambda" not in data:
                raise ConfigError("interaction.lambda is required for kind 'scalar'")
            return cls.scalar(data["lambda"])
        if kind == "dense":
            return cls.dense(_matrix_from_json(data, "interaction"))
        raise ConfigError(f"interaction.kind must be zero, scalar or dense, got {kind!r}")

    def __repr__(self):
        if self.kind is InteractionKind.DENSE:
            return f"InteractionSpec(dense, n={self.matrix.shape[0]})"
        if self.kind is InteractionKind.SCALAR:
            return f"InteractionSpec(scalar, lam={self.lam!r})"
        return "InteractionSpec(zero)"


def _matrix_to_json(a: np.ndarray) -> dict:
    a = np.asarray(a)
    if np.iscomplexobj(a):
        entries = [[[float(x.real), float(x.imag)] for x in row] for row in a]
    else:
        entries = [[float(x) for x in row] for row in a]
    return {"n": int(a.shape[0]), "entries": entries}


def _matrix_from_json(data: dict, where: str = "") -> np.ndarray:
    prefix = f"{where}." if where else ""
    if "n" not in data or "entries" not in data:
        raise ConfigError(f"{prefix}n and {prefix}entries are required")
    n = data["n"]
    if not isinstance(n, int) or n < 1:
        raise ConfigError(f"{prefix}n must be a positive integer, got {n!r}")
    rows = data["entries"]
    if not isinstance(rows, list) or len(rows) != n:
        raise DimensionError(f"{prefix}entries must have {n} rows, got {len(rows) if isinstance(rows, list) else rows!r}")
    out = np.zeros((n, n), dtype=np.complex128)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise DimensionError(f"{prefix}entries[{i}] must have {n} entries")
        for j, x in enumerate(row):
            if isinstance(x, (int, float)) and not isinstance(x, bool):
                out[i, j] = x
            elif isinstance(x, list) and len(x) == 2:
                out[i, j] = complex(float(x[0]), float(x[1]))
            else:
                raise ConfigError(f"{prefix}entries[{i}][{j}] must be a number or [re, im]")
    if not np.any(out.imag):
        return out.real.copy()
    return out


def load_interaction_file(path, block_size: Optional[int] = None) -> InteractionSpec:
    """Read a dense interaction matrix from the JSON file format.

    ``{"n": N, "entries": [[[re, im], ...], ...]}``, row-major; real entries may be
    bare numbers.
    """
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read interaction file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"interaction file {path} must contain a JSON object")
    spec = InteractionSpec.dense(_matrix_from_json(data))
    if block_size is not None:
        spec.check_size(block_size)
    return spec


def dump_interaction_file(matrix, path) -> None:
    Path(path).write_text(json.dumps(_matrix_to_json(np.asarray(matrix))))


@dataclass(frozen=True)
class ModelConfig:
    d_blocks: int
    block_size: int
    ensemble: Ensemble = Ensemble.GUE
    interaction: InteractionSpec = field(default_factory=InteractionSpec.zero)
    seed: int = 0

    def __post_init__(self):
        for name in ("d_blocks", "block_size"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise DimensionError(f"{name} must be a positive integer, got {value!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        object.__setattr__(self, "ensemble", Ensemble.parse(self.ensemble))
        self.interaction.check_size(self.block_size)

    @property
    def dim(self) -> int:
        return self.d_blocks * self.block_size

    def check_budget(self, max_dim: int = DEFAULT_MAX_DIM) -> None:
        if self.dim > max_dim:
            raise ConfigError(f"total dimension D*N = {self.dim} exceeds the dense budget {max_dim}")

    def with_interaction(self, interaction: InteractionSpec) -> "ModelConfig":
        return ModelConfig(self.d_blocks, self.block_size, self.ensemble, interaction, self.seed)

    def streams(self, *prefix) -> StreamFactory:
        return StreamFactory(self.seed, *prefix)

    def to_dict(self) -> dict:
        return {
            "d_blocks": int(self.d_blocks),
            "block_size": int(self.block_size),
            "ensemble": self.ensemble.value,
            "interaction": self.interaction.to_dict(),
            "seed": int(self.seed),
        }


class MatrixLabel(str, enum.Enum):
    H = "H"
    LAMBDA = "Lambda"
    H_LAMBDA = "HLambda"


@dataclass
class BlockHermitianMatrix:
    """A dense DN x DN Hermitian matrix carrying its block layout."""

    entries: np.ndarray
    d_blocks: int
    label: MatrixLabel
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.label = MatrixLabel(self.label)
        n_total = self.entries.shape[0]
        if self.entries.shape != (n_total, n_total) or n_total % self.d_blocks:
            raise DimensionError(
                f"entries of shape {self.entries.shape} do not split into {self.d_blocks} blocks"
            )

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def block_size(self) -> int:
        return self.dim // self.d_blocks

    def block(self, a: int, b: int) -> np.ndarray:
        n = self.block_size
        return self.entries[a * n:(a + 1) * n, b * n:(b + 1) * n]

    def blocks(self) -> np.ndarray:
        """View as a (D, N, D, N) array."""
        d, n = self.d_blocks, self.block_size
        return self.entries.reshape(d, n, d, n)

    def hermitian_deviation(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0))


def sample_wigner_block(n: int, ensemble, rng: np.random.Generator) -> np.ndarray:
    """Draw one n x n Wigner block.

    GUE: complex Hermitian with ``E|H_ij|^2 = 1/n`` everywhere, ``E H_ij^2 = 0``
    off the diagonal and a real diagonal. GOE: real symmetric, off-diagonal
    variance ``1/n`` and diagonal variance ``2/n``.

    The matrix is formed as ``(X + X^*) / sqrt(2n)``, which makes it exactly
    conjugate-symmetric in floating point.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise DimensionError(f"block dimension must be a positive integer, got {n!r}")
    ensemble = Ensemble.parse(ensemble)
    scale = 1.0 / np.sqrt(2.0 * n)
    if ensemble is Ensemble.GOE:
        x = rng.standard_normal((n, n))
        return (x + x.T) * scale
    x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    x *= np.sqrt(0.5)
    return (x + x.conj().T) * scale


def sample_blocks(config: ModelConfig, streams: StreamFactory) -> list:
    """Sample the D diagonal blocks, block ``a`` from ``streams.generator(a)``."""
    return [
        sample_wigner_block(config.block_size, config.ensemble, streams.generator(a))
        for a in range(config.d_blocks)
    ]


def _ring_bonds(d: int):
    """(row block, column block) pairs that carry A; the transpose pair carries A*."""
    if d == 1:
        return []
    if d == 2:
        return [(0, 1)]
    return [(a, (a + 1) % d) for a in range(d)]


def build_interaction(spec: InteractionSpec, d_blocks: int, block_size: int) -> BlockHermitianMatrix:
    """Assemble the DN x DN interaction matrix Lambda from A."""
    if d_blocks < 1 or block_size < 1:
        raise DimensionError("d_blocks and block_size must be positive")
    spec.check_size(block_size)
    a = spec.a_matrix(block_size)
    d, n = d_blocks, block_size
    out = np.zeros((d * n, d * n), dtype=a.dtype)
    for row, col in _ring_bonds(d):
        out[row * n:(row + 1) * n, col * n:(col + 1) * n] = a
        out[col * n:(col + 1) * n, row * n:(row + 1) * n] = a.conj().T
    meta = {
        "A_op_norm": spec.op_norm(n),
        "A_hs_norm": spec.hs_norm(n),
        "interaction": spec.kind.value,
    }
    return BlockHermitianMatrix(out, d, MatrixLabel.LAMBDA, meta)


def block_diagonal(blocks: Sequence[np.ndarray]) -> BlockHermitianMatrix:
    d = len(blocks)
    if d == 0:
        raise DimensionError("need at least one block")
    n = blocks[0].shape[0]
    dtype = np.result_type(*blocks)
    out = np.zeros((d * n, d * n), dtype=dtype)
    for a, blk in enumerate(blocks):
        if blk.shape != (n, n):
            raise DimensionError(f"block {a} has shape {blk.shape}, expected {(n, n)}")
        out[a * n:(a + 1) * n, a * n:(a + 1) * n] = blk
    return BlockHermitianMatrix(out, d, MatrixLabel.H)


def assemble_h_lambda(blocks: Sequence[np.ndarray], lambda_matrix: BlockHermitianMatrix) -> BlockHermitianMatrix:
    """``blockdiag(blocks) + Lambda``."""
    h = block_diagonal(blocks)
    if h.d_blocks != lambda_matrix.d_blocks or h.dim != lambda_matrix.dim:
        raise DimensionError(
            f"{h.d_blocks} blocks of size {h.block_size} do not match Lambda "
            f"({lambda_matrix.d_blocks} blocks, dim {lambda_matrix.dim})"
        )
    meta = dict(lambda_matrix.metadata)
    return BlockHermitianMatrix(h.entries + lambda_matrix.entries, h.d_blocks, MatrixLabel.H_LAMBDA, meta)


def sample_h_lambda(config: ModelConfig, streams: StreamFactory, lambda_matrix: Optional[BlockHermitianMatrix] = None):
    """Sample one realization; returns ``(blocks, H_Lambda)``."""
    if lambda_matrix is None:
        lambda_matrix = build_interaction(config.interaction, config.d_blocks, config.block_size)
    blocks = sample_blocks(config, streams)
    h = assemble_h_lambda(blocks, lambda_matrix)
    h.metadata["ensemble"] = config.ensemble.value
    h.metadata["normalization"] = config.ensemble.normalization
    return blocks, h


def sample_gaussian_divisible(base: Sequence[np.ndarray], theta: float, rng: np.random.Generator,
                              ensemble=Ensemble.GUE) -> list:
    """Mix each block with a fresh Gaussian block: ``sqrt(1-theta) H_a + sqrt(theta) W_a``."""
    theta = float(theta)
    if not 0.0 <= theta <= 1.0:
        raise ConfigError(f"mixing weight must lie in [0, 1], got {theta}")
    c0, c1 = np.sqrt(1.0 - theta), np.sqrt(theta)
    out = []
    for blk in base:
        fresh = sample_wigner_block(blk.shape[0], ensemble, rng)
        out.append(c0 * blk + c1 * fresh)
    return out


class OUMode(str, enum.Enum):
    PER_BLOCK = "per_block"
    FULL_MATRIX = "full_matrix"


def evolve_ou(h0: BlockHermitianMatrix, t: float, mode, rng: np.random.Generator,
              lambda_matrix: Optional[BlockHermitianMatrix] = None, ensemble=Ensemble.GUE) -> BlockHermitianMatrix:
    """Sample the matrix Ornstein-Uhlenbeck flow at time ``t`` in closed form.

    ``PER_BLOCK``: ``e^{-t/2} h0 + sqrt(1 - e^{-t}) blockdiag(W_1..W_D)`` with
    independent N x N blocks of variance 1/N. Applied to an ``HLambda`` input this
    also contracts Lambda by ``e^{-t/2}``, as along the characteristic flow.

    ``FULL_MATRIX``: ``h0`` must be the bare ``H``; it is evolved with a single
    DN x DN Gaussian matrix of variance 1/(DN) and ``lambda_matrix`` (if given) is
    added afterwards, unevolved.
    """
    t = float(t)
    if not t >= 0.0:
        raise ConfigError(f"OU time must be nonnegative, got {t}")
    mode = OUMode(mode)
    decay = np.exp(-t / 2.0)
    noise = np.sqrt(-np.expm1(-t))
    d, n = h0.d_blocks, h0.block_size
    if mode is OUMode.PER_BLOCK:
        if lambda_matrix is not None:
            raise ConfigError("lambda_matrix is only used in full_matrix mode")
        w = block_diagonal([sample_wigner_block(n, ensemble, rng) for _ in range(d)]).entries
        entries = decay * h0.entries + noise * w
        return BlockHermitianMatrix(entries, d, h0.label, dict(h0.metadata, ou_time=t, ou_mode=mode.value))
    if h0.label is not MatrixLabel.H:
        raise ConfigError("full_matrix mode evolves the bare H; pass Lambda via lambda_matrix")
    w = sample_wigner_block(d * n, ensemble, rng)
    entries = decay * h0.entries + noise * w
    label = MatrixLabel.H
    meta = dict(h0.metadata, ou_time=t, ou_mode=mode.value)
    if lambda_matrix is not None:
        if lambda_matrix.dim != h0.dim:
            raise DimensionError("lambda_matrix does not match h0")
        entries = entries + lambda_matrix.entries
        label = MatrixLabel.H_LAMBDA
        meta.update(lambda_matrix.metadata)
    return BlockHermitianMatrix(entries, d, label, meta)


def block_projector(a: int, d_blocks: int, block_size: int) -> np.ndarray:
    """Diagonal 0/1 matrix selecting block ``a`` (0-based)."""
    if not 0 <= a < d_blocks:
        raise ConfigError(f"block index {a} out of range for {d_blocks} blocks")
    diag = np.zeros(d_blocks * block_size)
    diag[a * block_size:(a + 1) * block_size] = 1.0
    return np.diag(diag)
