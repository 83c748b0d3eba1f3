"""Dense complex linear algebra for small open quantum systems.

All states and operators in this package are plain ``numpy`` arrays of
``complex128``; nothing here is sparse, symbolic, or GPU-aware, and the
target sizes are tiny (operator dimension <= ~256).  hbar = 1 throughout.

Basis convention
----------------
Composite spaces are built with ``tensor(system, mode)`` and the *second*
factor (the detector mode) is the fastest-varying index: the joint basis
ket ``|i, k>`` sits at position ``i * dim_mode + k``.  With a two-level
mode this makes the four system-sized blocks of a joint operator plain
strided slices, so splitting a joint density matrix into its
mode-indexed blocks is pure reindexing with no arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

# Structural checks (hermiticity, trace, completeness) use this tolerance;
# eigenvalue positivity checks allow -DEFAULT_TOL.  Dimensions <= 256 keep
# dense double-precision arithmetic far inside these bounds.
DEFAULT_TOL = 1e-10


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex)


def basis_state(dim: int, n: int) -> np.ndarray:
    """Computational basis ket |n> as a complex vector."""
    if not 0 <= n < dim:
        raise ValueError(f"basis index {n} outside dimension {dim}")
    v = np.zeros(dim, dtype=complex)
    v[n] = 1.0
    return v


def lowering(dim: int) -> np.ndarray:
    """Lowering operator with <n-1| a |n> = sqrt(n).

    For ``dim == 2`` this is the qubit lowering operator |0><1|; for larger
    dimensions it is the truncated harmonic-oscillator ladder operator.
    """
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def raising(dim: int) -> np.ndarray:
    return lowering(dim).conj().T


def number_op(dim: int) -> np.ndarray:
    """Excitation-number operator a^dag a."""
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def pauli_z() -> np.ndarray:
    """sigma_z on a two-level space, +1 on the ground state |0>."""
    return np.diag([1.0, -1.0]).astype(complex)


def dag(a: np.ndarray) -> np.ndarray:
    return np.asarray(a).conj().T


def is_hermitian(a: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    a = np.asarray(a)
    return bool(np.max(np.abs(a - a.conj().T)) <= tol)


def is_unitary(a: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    a = np.asarray(a)
    return bool(np.max(np.abs(a.conj().T @ a - np.eye(a.shape[0]))) <= tol)


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; the second factor is the fast (rightmost) index.

    Entry ((i*dim_b + k), (j*dim_b + l)) equals a[i, j] * b[k, l].
    """
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def matrix_exponential(m: np.ndarray, t: float = 1.0) -> np.ndarray:
    """exp(m * t) by scaling-and-squaring with a Pade approximant.

    Accuracy target: 1e-12 relative in the matrix 1-norm for the sizes used
    here (dim <= 256).  Raises if the result overflows to non-finite values.
    """
    m = np.asarray(m, dtype=complex)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix exponential input has non-finite entries")
    out = scipy.linalg.expm(m * t)
    if not np.all(np.isfinite(out)):
        raise ValueError("matrix exponential overflowed the representable range")
    return out


@dataclass(frozen=True)
class BlockState:
    """Mode-indexed blocks of a joint (system x two-level mode) operator.

    ``rho_ab`` is the system-sized block multiplying |a><b| of the mode.
    For a Hermitian joint operator rho10 == rho01^dag and
    tr(rho00) + tr(rho11) equals the joint trace.
    """

    rho00: np.ndarray
    rho01: np.ndarray
    rho10: np.ndarray
    rho11: np.ndarray

    def __post_init__(self):
        for name in ("rho00", "rho01", "rho10", "rho11"):
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
                raise ValueError(f"{name} must be a square matrix")
            object.__setattr__(self, name, arr)
        d = self.rho00.shape[0]
        if any(getattr(self, n).shape[0] != d for n in ("rho01", "rho10", "rho11")):
            raise ValueError("all blocks must share one system dimension")

    @property
    def d_sys(self) -> int:
        return self.rho00.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.rho00) + np.trace(self.rho11))


def block_decompose(rho: np.ndarray) -> BlockState:
    """Split a joint operator into its four mode-indexed system blocks.

    Pure reindexing (strided slices); ``block_compose`` inverts it exactly.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] % 2 != 0:
        raise ValueError("expected a square matrix on a (system x 2-level mode) space")
    return BlockState(
        rho00=rho[0::2, 0::2].copy(),
        rho01=rho[0::2, 1::2].copy(),
        rho10=rho[1::2, 0::2].copy(),
        rho11=rho[1::2, 1::2].copy(),
    )


def block_compose(blocks: BlockState) -> np.ndarray:
    d = blocks.d_sys
    out = np.zeros((2 * d, 2 * d), dtype=complex)
    out[0::2, 0::2] = blocks.rho00
    out[0::2, 1::2] = blocks.rho01
    out[1::2, 0::2] = blocks.rho10
    out[1::2, 1::2] = blocks.rho11
    return out


def trace_distance(rho1: np.ndarray, rho2: np.ndarray, herm_tol: float = 1e-8) -> float:
    """(1/2) * sum of absolute eigenvalues of rho1 - rho2.

    Both inputs must be Hermitian (within ``herm_tol``) and equal-sized.
    """
    rho1 = np.asarray(rho1, dtype=complex)
    rho2 = np.asarray(rho2, dtype=complex)
    if rho1.shape != rho2.shape:
        raise ValueError("trace_distance requires equal dimensions")
    diff = rho1 - rho2
    if np.max(np.abs(diff - diff.conj().T)) > herm_tol:
        raise ValueError("trace_distance difference is not Hermitian within tolerance")
    evals = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(0.5 * np.sum(np.abs(evals)))
