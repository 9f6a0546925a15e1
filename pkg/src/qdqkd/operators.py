"""Dense operators on the quantum-dot x H-mode x V-mode Hilbert space.

Tensor ordering is fixed as ``QD (4 levels) ⊗ H-mode ⊗ V-mode``. Density
matrices are vectorised row-major, so ``vec(A @ X @ B) == kron(A, B.T) @ vec(X)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

QD_DIM = 4


class DimensionError(ValueError):
    """Raised when operator or state dimensions are incompatible."""


@dataclass(frozen=True)
class HilbertLayout:
    """Dimensions and index map of the composite space."""

    fock_dim_h: int = 3
    fock_dim_v: int = 3
    qd_dim: int = QD_DIM

    def __post_init__(self):
        if self.qd_dim != QD_DIM:
            raise DimensionError(f"qd_dim is fixed at {QD_DIM}, got {self.qd_dim}")
        if self.fock_dim_h < 2 or self.fock_dim_v < 2:
            raise DimensionError("Fock truncations must be >= 2")

    @property
    def total_dim(self) -> int:
        return self.qd_dim * self.fock_dim_h * self.fock_dim_v

    def index(self, level: int, n_h: int, n_v: int) -> int:
        """Flat index of ``|level, n_h, n_v>``; ``level`` counts from 1."""
        if not 1 <= level <= self.qd_dim:
            raise IndexError(f"QD level {level} outside 1..{self.qd_dim}")
        if not (0 <= n_h < self.fock_dim_h and 0 <= n_v < self.fock_dim_v):
            raise IndexError(f"photon numbers ({n_h}, {n_v}) outside truncation")
        return ((level - 1) * self.fock_dim_h + n_h) * self.fock_dim_v + n_v

    def unpack(self, flat: int) -> tuple[int, int, int]:
        """Inverse of :meth:`index`."""
        if not 0 <= flat < self.total_dim:
            raise IndexError(f"flat index {flat} outside 0..{self.total_dim - 1}")
        q, rest = divmod(flat, self.fock_dim_h * self.fock_dim_v)
        n_h, n_v = divmod(rest, self.fock_dim_v)
        return q + 1, n_h, n_v

    def basis_state(self, level: int, n_h: int = 0, n_v: int = 0) -> np.ndarray:
        psi = np.zeros(self.total_dim, dtype=complex)
        psi[self.index(level, n_h, n_v)] = 1.0
        return psi

    def embed(self, qd=None, h=None, v=None) -> np.ndarray:
        """Tensor product of factor operators, identity where omitted."""
        qd = np.eye(self.qd_dim) if qd is None else qd
        h = np.eye(self.fock_dim_h) if h is None else h
        v = np.eye(self.fock_dim_v) if v is None else v
        return np.kron(np.kron(qd, h), v).astype(complex)

    def mode_h(self) -> np.ndarray:
        """H-mode annihilation operator ``a`` on the full space."""
        return self.embed(h=build_annihilation(self.fock_dim_h))

    def mode_v(self) -> np.ndarray:
        """V-mode annihilation operator ``b`` on the full space."""
        return self.embed(v=build_annihilation(self.fock_dim_v))


def build_annihilation(fock_dim: int) -> np.ndarray:
    """Truncated ladder operator with ``sqrt(n)`` on the superdiagonal."""
    if fock_dim < 2:
        raise DimensionError(f"fock_dim must be >= 2, got {fock_dim}")
    return np.diag(np.sqrt(np.arange(1, fock_dim)), 1).astype(complex)


def build_sigma(i: int, j: int, layout: HilbertLayout) -> np.ndarray:
    """QD projector/transition operator ``|i><j|`` on the full space."""
    for level in (i, j):
        if not 1 <= level <= layout.qd_dim:
            raise IndexError(f"QD level {level} outside 1..{layout.qd_dim}")
    s = np.zeros((layout.qd_dim, layout.qd_dim))
    s[i - 1, j - 1] = 1.0
    return layout.embed(qd=s)


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def lindblad_dissipator(o: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """``2 o rho o† - o†o rho - rho o†o`` (no rate prefactor)."""
    o = np.asarray(o)
    rho = np.asarray(rho)
    if o.ndim != 2 or o.shape[0] != o.shape[1] or o.shape != rho.shape:
        raise DimensionError(f"shape mismatch: jump {o.shape}, rho {rho.shape}")
    od = dagger(o)
    odo = od @ o
    return 2.0 * o @ rho @ od - odo @ rho - rho @ odo


def is_hermitian(m: np.ndarray, atol: float = 1e-12) -> bool:
    return bool(np.allclose(m, dagger(m), rtol=0.0, atol=atol))


# Superoperators acting on row-major vectorised matrices.

def spre(a) -> sp.csr_matrix:
    """Left multiplication ``X -> a X``."""
    a = sp.csr_matrix(a)
    return sp.kron(a, sp.identity(a.shape[0], format="csr"), format="csr")


def spost(b) -> sp.csr_matrix:
    """Right multiplication ``X -> X b``."""
    b = sp.csr_matrix(b)
    return sp.kron(sp.identity(b.shape[0], format="csr"), b.T, format="csr")


def commutator_super(h) -> sp.csr_matrix:
    """``X -> -i [h, X]``."""
    return (-1j * (spre(h) - spost(h))).tocsr()


def dissipator_super(o) -> sp.csr_matrix:
    """Superoperator of :func:`lindblad_dissipator` for jump ``o``."""
    o = np.asarray(o)
    od = dagger(o)
    odo = od @ o
    jump = sp.kron(sp.csr_matrix(o), sp.csr_matrix(od).T, format="csr")
    return (2.0 * jump - spre(odo) - spost(odo)).tocsr()


@dataclass
class DensityState:
    """Density matrix on the composite space at time ``time`` (ps)."""

    rho: np.ndarray
    time: float = 0.0

    @classmethod
    def pure(cls, psi: np.ndarray, time: float = 0.0) -> "DensityState":
        psi = np.asarray(psi, dtype=complex)
        return cls(np.outer(psi, psi.conj()), time)

    def check(self, trace_tol=1e-8, herm_tol=1e-10, pos_tol=1e-8):
        """Raise ``ValueError`` if trace, Hermiticity or positivity fail."""
        problems = state_violations(self.rho, trace_tol, herm_tol, pos_tol)
        if problems:
            raise ValueError(f"invalid density matrix at t={self.time:g} ps: "
                             + "; ".join(problems))
        return self


def state_violations(rho, trace_tol=1e-8, herm_tol=1e-10, pos_tol=1e-8) -> list[str]:
    out = []
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        out.append(f"trace {tr:.3e}")
    herm = np.max(np.abs(rho - dagger(rho)))
    if herm > herm_tol:
        out.append(f"non-Hermitian by {herm:.1e}")
    lam = np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))[0]
    if lam < -pos_tol:
        out.append(f"min eigenvalue {lam:.2e}")
    return out
