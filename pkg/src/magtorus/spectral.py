"""Galerkin assembly and spectral routines for the magnetic Schrödinger
operator H = (D - A)² + V on the 2-torus, in the Fourier mode basis.

Expanding the square gives H = D² - (D·A + A·D) + (|A|² + V); in modes

    H[k, k'] = |k'|² δ_{k,k'} - (k + k')·Â(k - k') + Ŵ(k - k'),

with W = A1² + A2² + V assembled by coefficient convolution.  The matrix is
Hermitian whenever A and V are real-valued.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import ModeBasis, ModeVector
from .fields import FourierField2D, TruncationRiskError, VectorPotential


@dataclass
class HermitianOperator:
    """Dense Hermitian matrix on a mode basis."""

    basis: ModeBasis
    entries: np.ndarray

    def __post_init__(self):
        n = self.basis.size
        if self.entries.shape != (n, n):
            raise ValueError("entry matrix does not match the basis size")

    def hermiticity_defect(self) -> float:
        return float(np.abs(self.entries - self.entries.conj().T).max())

    def apply(self, v: ModeVector) -> ModeVector:
        if v.basis is not self.basis and v.basis != self.basis:
            raise ValueError("state lives on a different basis")
        return ModeVector(self.basis, self.entries @ v.coeffs)


@dataclass
class EigenDecomposition:
    basis: ModeBasis
    eigenvalues: np.ndarray       # ascending, real
    eigenvectors: np.ndarray      # columns, orthonormal

    def in_window(self, lo: float, hi: float) -> np.ndarray:
        """Indices of eigenvalues in [lo, hi]."""
        return np.nonzero((self.eigenvalues >= lo) & (self.eigenvalues <= hi))[0]


def _check_truncation(basis: ModeBasis, *fields: FourierField2D) -> None:
    bw = max((f.bandwidth for f in fields), default=0)
    if basis.N < 2 * bw:
        raise TruncationRiskError(
            f"basis size N={basis.N} is below twice the coefficient "
            f"bandwidth {bw}; the truncated matrix would misrepresent "
            "the operator on half the modes")


def assemble(A: VectorPotential, V: FourierField2D,
             basis: ModeBasis | None = None, N: int | None = None) -> HermitianOperator:
    """Galerkin matrix of (D - A)² + V on the given (or fresh size-N) basis."""
    if basis is None:
        if N is None:
            raise ValueError("provide either a basis or a size N")
        basis = ModeBasis(N)
    W = A.squared_norm_field() + V
    _check_truncation(basis, A.a1, A.a2, V, W)

    n = basis.size
    k = basis.modes
    H = np.zeros((n, n), dtype=complex)
    H[np.arange(n), np.arange(n)] = np.sum(k.astype(float) ** 2, axis=1)

    for m, c1 in A.a1.coeffs.items():
        rows, cols = basis.shift_indices(m)
        if len(cols):
            ksum = k[rows, 0] + k[cols, 0]
            H[rows, cols] -= ksum * c1
    for m, c2 in A.a2.coeffs.items():
        rows, cols = basis.shift_indices(m)
        if len(cols):
            ksum = k[rows, 1] + k[cols, 1]
            H[rows, cols] -= ksum * c2
    for m, w in W.coeffs.items():
        rows, cols = basis.shift_indices(m)
        if len(cols):
            H[rows, cols] += w
    return HermitianOperator(basis, H)


def eigendecompose(op: HermitianOperator, tol: float = 1e-10) -> EigenDecomposition:
    defect = op.hermiticity_defect()
    if defect > tol:
        raise ValueError(f"operator is not Hermitian (defect {defect:.2e})")
    H = (op.entries + op.entries.conj().T) / 2
    vals, vecs = np.linalg.eigh(H)
    return EigenDecomposition(op.basis, vals, vecs)


def propagate(eig: EigenDecomposition, state: ModeVector, t: float) -> ModeVector:
    """e^{-i t H} applied through the eigendecomposition."""
    Q = eig.eigenvectors
    c = Q.conj().T @ state.coeffs
    c *= np.exp(-1j * t * eig.eigenvalues)
    return ModeVector(eig.basis, Q @ c)


@dataclass
class ProjectorSpec:
    """Window |h²λ - 1| <= ρ, hard indicator or smoothed edge."""

    h: float
    rho: float
    smooth: bool = False

    def __post_init__(self):
        if self.h <= 0 or self.rho <= 0:
            raise ValueError("h and rho must be positive")


def _projector_weight(t: np.ndarray) -> np.ndarray:
    """Smooth even window: 1 for |t| <= 1/4, 0 for |t| >= 1."""
    from .weyl import plateau_bump
    return plateau_bump(t, 0.25, 1.0)


def spectral_projector(eig: EigenDecomposition, spec: ProjectorSpec) -> np.ndarray:
    """Projector (or smoothed quasi-projector) onto the shell h²λ ≈ 1."""
    t = (spec.h ** 2 * eig.eigenvalues - 1.0) / spec.rho
    if spec.smooth:
        w = _projector_weight(t)
    else:
        w = (np.abs(t) <= 1.0).astype(float)
    Q = eig.eigenvectors
    return (Q * w) @ Q.conj().T


# ---------------------------------------------------------------------------
# Separable case: potentials independent of x decouple into 1D blocks in the
# transversal modes, one block per x-frequency k.
# ---------------------------------------------------------------------------

def _check_separable(*fields: FourierField2D) -> None:
    for f in fields:
        if any(k1 != 0 and abs(v) > 1e-13 for (k1, _), v in f.coeffs.items()):
            raise ValueError("separable assembly requires x-independent data")


def _coeffs_1d(f: FourierField2D) -> dict:
    return {k2: v for (k1, k2), v in f.coeffs.items() if k1 == 0}


def assemble_1d(A: VectorPotential, V: FourierField2D, k: int, N: int) -> np.ndarray:
    """Block of H at x-frequency k for x-independent A, V; modes n = -N..N.

    H_k[n, n'] = (k² + n'²) δ + Ŵ_eff(n - n') - (n + n') Â2(n - n'),
    with W_eff = -2k A1 + A1² + A2² + V.
    """
    _check_separable(A.a1, A.a2, V)
    a1 = _coeffs_1d(A.a1)
    a2 = _coeffs_1d(A.a2)
    weff = _coeffs_1d(A.squared_norm_field() + V)
    for m, c in a1.items():
        weff[m] = weff.get(m, 0.0) - 2 * k * c

    ns = np.arange(-N, N + 1)
    size = 2 * N + 1
    H = np.zeros((size, size), dtype=complex)
    H[np.arange(size), np.arange(size)] = k ** 2 + ns.astype(float) ** 2
    for m, w in weff.items():
        idx = np.arange(max(0, -m), min(size, size - m))
        H[idx + m, idx] += w
    for m, c in a2.items():
        idx = np.arange(max(0, -m), min(size, size - m))
        H[idx + m, idx] -= (ns[idx + m] + ns[idx]) * c
    return H


def _circle_to_field(f) -> FourierField2D:
    """Lift a function of y on the 2π circle to an x-independent 2D field."""
    if getattr(f, "ell", None) is not None:
        if abs(f.ell - 2 * np.pi) > 1e-12:
            raise ValueError("separable data must live on the 2π circle")
        table = {(0, m): v for m, v in f.coeffs.items()}
        return FourierField2D.from_coeffs(table, is_real=f.is_real)
    return f


def separable_blocks(A1, A2, V, k_list, M: int) -> dict:
    """1D blocks H_k = (k - A1(y))² + (D_y - A2(y))² + V(y), y-modes |n| <= M.

    Accepts functions of y (circle coefficient tables) or x-independent 2D
    fields.  The spectra of the blocks coincide with the 2D assembly
    restricted to the corresponding x-frequencies.
    """
    A = VectorPotential(_circle_to_field(A1), _circle_to_field(A2))
    Vf = _circle_to_field(V)
    return {k: assemble_1d(A, Vf, k, M) for k in k_list}


# ---------------------------------------------------------------------------
# Damped wave-type generator: H - i a(z) with a >= 0 acting as absorption.
# ---------------------------------------------------------------------------

@dataclass
class DampedOperator:
    basis: ModeBasis
    entries: np.ndarray          # H - i·Toeplitz(â), non-Hermitian
    eigenvalues: np.ndarray      # full non-Hermitian spectrum

    @property
    def spectral_abscissa(self) -> float:
        """Slowest decay rate: min of -Im λ over the spectrum."""
        return float((-self.eigenvalues.imag).min())


def damped_operator(op: HermitianOperator, damping: FourierField2D,
                    grid: int = 128) -> DampedOperator:
    """Generator H - i a(z) of the damped flow e^{-it(H - ia)}.

    The damping a must be real, non-negative (checked on a verification
    grid), and not identically zero.
    """
    basis = op.basis
    _check_truncation(basis, damping)
    if not damping.is_real:
        raise ValueError("damping must be real-valued")
    xs = 2 * np.pi * np.arange(grid) / grid
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    vals_grid = np.real(damping.evaluate(X, Y))
    if vals_grid.min() < -1e-10:
        raise ValueError(f"damping is negative on the grid "
                         f"(min {vals_grid.min():.3e})")
    if vals_grid.max() <= 1e-14:
        raise ValueError("damping is identically zero")
    M = op.entries.astype(complex).copy()
    for m, c in damping.coeffs.items():
        rows, cols = basis.shift_indices(m)
        if len(cols):
            M[rows, cols] -= 1j * c
    vals = np.linalg.eigvals(M)
    return DampedOperator(basis, M, vals)
