"""Observability, control, and resolvent diagnostics for the torus operator.

Everything is computed in the truncated mode basis.  The observation Gramian

    G_T = ∫₀ᵀ e^{isH} 1_ω e^{-isH} ds

is evaluated exactly in time through the eigendecomposition: in the
eigenbasis its entries are M̃[b,a]·φ(λ_b - λ_a) with φ(Δ) = (e^{iΔT}-1)/(iΔ)
and φ(0) = T.  Observability on ω in time T is quantified by λ_min(G_T);
control synthesis inverts the adjoint Gramian (HUM).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import ModeBasis, ModeVector
from .fields import FourierField2D
from .geometry import Region
from .spectral import EigenDecomposition, HermitianOperator, ProjectorSpec, spectral_projector


@dataclass
class MassMatrix:
    """Galerkin matrix of multiplication by the indicator of a region."""

    basis: ModeBasis
    region: Region
    entries: np.ndarray

    def hermiticity_defect(self) -> float:
        return float(np.abs(self.entries - self.entries.conj().T).max())


def _interval_phase(k: np.ndarray, a: float, b: float) -> np.ndarray:
    """∫_a^b e^{ikx} dx for an integer frequency array k."""
    out = np.empty(k.shape, dtype=complex)
    zero = k == 0
    out[zero] = b - a
    kk = k[~zero].astype(float)
    out[~zero] = (np.exp(1j * kk * b) - np.exp(1j * kk * a)) / (1j * kk)
    return out


def region_mass_matrix(region: Region, basis: ModeBasis) -> MassMatrix:
    """Closed-form entries M[a,b] = (2π)^{-2} ∫_ω e^{i(k_b - k_a)·z} dz."""
    k = basis.modes
    d1 = k[None, :, 0] - k[:, None, 0]
    d2 = k[None, :, 1] - k[:, None, 1]
    M = np.zeros((basis.size, basis.size), dtype=complex)
    for (x0, x1, y0, y1) in region.rects:
        M += _interval_phase(d1, x0, x1) * _interval_phase(d2, y0, y1)
    M /= (2 * np.pi) ** 2
    return MassMatrix(basis, region, M)


def _phi_factors(lam: np.ndarray, T: float) -> np.ndarray:
    """Matrix of φ(λ_b - λ_a), φ(Δ) = (e^{iΔT}-1)/(iΔ), φ(0) = T."""
    delta = lam[:, None] - lam[None, :]
    scale = max(1.0, float(np.abs(lam).max()))
    small = np.abs(delta) < 1e-12 * scale
    safe = np.where(small, 1.0, delta)
    phi = (np.exp(1j * safe * T) - 1.0) / (1j * safe)
    phi[small] = T
    return phi


def gramian(eig: EigenDecomposition, mass: MassMatrix | np.ndarray, T: float) -> np.ndarray:
    """Exact-in-time observation Gramian ∫₀ᵀ e^{isH} M e^{-isH} ds."""
    if T <= 0:
        raise ValueError("observation time must be positive")
    M = mass.entries if isinstance(mass, MassMatrix) else mass
    Q = eig.eigenvectors
    Mt = Q.conj().T @ M @ Q
    Gt = Mt * _phi_factors(eig.eigenvalues, T)
    G = Q @ Gt @ Q.conj().T
    return (G + G.conj().T) / 2


@dataclass
class ObsReport:
    T: float
    lambda_min: float
    constant: float          # observability constant: 1 / λ_min
    dim: int                 # dimension of the observed subspace
    h: float | None = None
    rho: float | None = None
    geometry_id: str = ""


def observability_constant(G: np.ndarray, T: float,
                           subspace: np.ndarray | None = None,
                           geometry_id: str = "") -> ObsReport:
    """Observability constant 1/λ_min of the Gramian on a subspace.

    `subspace` is a matrix whose columns span the observed subspace (e.g.
    selected eigenvectors, or the columns of a spectral projector); None
    means the whole truncated space.
    """
    if subspace is None:
        Gc = G
        dim = G.shape[0]
    else:
        if subspace.ndim == 1:
            subspace = subspace[:, None]
        Q, R = np.linalg.qr(subspace)
        keep = np.abs(np.diag(R)) > 1e-12 * max(1.0, float(np.abs(R).max()))
        Q = Q[:, keep]
        dim = Q.shape[1]
        if dim == 0:
            raise ValueError("observed subspace is trivial")
        Gc = Q.conj().T @ G @ Q
    lam = float(np.linalg.eigvalsh((Gc + Gc.conj().T) / 2)[0])
    c = float("inf") if lam <= 0 else 1.0 / lam
    return ObsReport(T=T, lambda_min=lam, constant=c, dim=dim,
                     geometry_id=geometry_id)


@dataclass
class SharpObsResult:
    h: float
    rho: float
    T: float
    shell_dimension: int
    rate: float          # λ_min(G restricted to the shell) / (T √h)


def sharp_obs_experiment(eig: EigenDecomposition, mass: MassMatrix,
                         h: float, rho: float, T: float) -> SharpObsResult:
    """Observability rate of the frequency shell h²λ ≈ 1 at time T·√h.

    The Gramian over [0, T√h] is compressed onto the eigenvectors selected
    by the hard shell window; the reported rate is λ_min normalized by the
    window length, so the full torus (M = I) gives rate 1.
    """
    spec = ProjectorSpec(h=h, rho=rho, smooth=False)
    t = np.abs(h ** 2 * eig.eigenvalues - 1.0)
    sel = np.nonzero(t <= rho)[0]
    if len(sel) == 0:
        raise ValueError("no eigenvalues in the frequency shell; enlarge the basis")
    window = T * np.sqrt(h)
    Q = eig.eigenvectors[:, sel]
    Mt = Q.conj().T @ mass.entries @ Q
    lam = eig.eigenvalues[sel]
    Gt = Mt * _phi_factors(lam, window)
    Gt = (Gt + Gt.conj().T) / 2
    lmin = float(np.linalg.eigvalsh(Gt)[0])
    return SharpObsResult(h=h, rho=rho, T=T, shell_dimension=len(sel),
                          rate=lmin / window)


@dataclass
class ResolventScan:
    lambdas: np.ndarray
    constants: np.ndarray

    def max_constant(self) -> float:
        return float(self.constants.max())

    def csv_rows(self):
        yield ("lambda", "C")
        for lam, c in zip(self.lambdas, self.constants):
            yield (f"{lam:.6g}", f"{c:.10g}")


def resolvent_constant(op: HermitianOperator, mass: MassMatrix, lam: float) -> float:
    """Best constant C(λ) in ‖u‖ ≤ C(λ)[(1+|λ|^{1/4})^{-1}‖(H+λ)u‖ + ‖u‖_{L²(ω)}].

    Computed as λ_min(K)^{-1/2} with
    K = (1+|λ|^{1/4})^{-2} (H+λ)†(H+λ) + M.
    """
    H = op.entries
    n = H.shape[0]
    R = H + lam * np.eye(n)
    w = (1.0 + abs(lam) ** 0.25) ** (-2)
    K = w * (R.conj().T @ R) + mass.entries
    K = (K + K.conj().T) / 2
    lmin = float(np.linalg.eigvalsh(K)[0])
    if lmin <= 0:
        return float("inf")
    return lmin ** -0.5


def resolvent_scan(op: HermitianOperator, mass: MassMatrix,
                   lambdas) -> ResolventScan:
    """C(λ) over a grid, via one diagonalization of H.

    In the eigenbasis of H the form K(λ) becomes
    w(λ)·diag((λ_j + λ)²) + M̃ with M̃ fixed, so each grid point costs one
    Hermitian eigenvalue solve and no reassembly.  Values agree with
    resolvent_constant exactly (unitary conjugation).
    """
    lambdas = np.asarray(list(lambdas), dtype=float)
    vals, vecs = np.linalg.eigh((op.entries + op.entries.conj().T) / 2)
    Mt = vecs.conj().T @ mass.entries @ vecs
    Mt = (Mt + Mt.conj().T) / 2
    consts = np.empty(len(lambdas))
    for i, lam in enumerate(lambdas):
        w = (1.0 + abs(lam) ** 0.25) ** (-2)
        K = Mt + np.diag(w * (vals + lam) ** 2)
        lmin = float(np.linalg.eigvalsh(K)[0])
        consts[i] = float("inf") if lmin <= 0 else lmin ** -0.5
    return ResolventScan(lambdas, consts)


# ---------------------------------------------------------------------------
# HUM control: steer ψ0 to ψ1 in time T with a forcing supported in ω.
# ---------------------------------------------------------------------------

@dataclass
class ControlResult:
    T: float
    regularization: float
    costate: np.ndarray      # φ with (G' + reg I) φ = d
    error: float             # ‖achieved final state - target‖

    def control_at(self, eig: EigenDecomposition, mass: MassMatrix, t: float) -> np.ndarray:
        """Control profile h(t) = i · M e^{i(T-t)H} φ (as mode coefficients)."""
        Q = eig.eigenvectors
        c = Q.conj().T @ self.costate
        c *= np.exp(1j * (self.T - t) * eig.eigenvalues)
        return 1j * (mass.entries @ (Q @ c))


def hum_control(eig: EigenDecomposition, mass: MassMatrix, T: float,
                psi0: np.ndarray, psi1: np.ndarray,
                regularization: float = 1e-10) -> ControlResult:
    """Minimal-norm control for i∂_t ψ = Hψ + 1_ω h steering ψ0 to ψ1.

    Solves (G' + reg·I) φ = ψ1 - e^{-iTH} ψ0 with the adjoint Gramian
    G' = ∫₀ᵀ e^{-isH} M e^{isH} ds; the residual steering error equals
    reg·(G' + reg·I)^{-1} d and vanishes with the regularization whenever
    the Gramian is invertible.
    """
    Q = eig.eigenvectors
    lam = eig.eigenvalues
    free = Q @ (np.exp(-1j * T * lam) * (Q.conj().T @ psi0))
    d = psi1 - free

    Mt = Q.conj().T @ mass.entries @ Q
    Gt = Mt * _phi_factors(-lam, T)     # ∫ e^{-is λ_b} M̃ e^{is λ_a} ds
    Gt = (Gt + Gt.conj().T) / 2
    Gp = Q @ Gt @ Q.conj().T
    n = Gp.shape[0]
    phi = np.linalg.solve(Gp + regularization * np.eye(n), d)
    err = float(np.linalg.norm(d - Gp @ phi))
    return ControlResult(T=T, regularization=regularization, costate=phi, error=err)
