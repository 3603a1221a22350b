"""Semiclassical Weyl quantization on the torus, in a truncated mode basis.

A symbol a(z, ζ) is stored by its z-Fourier modes: a(z, ζ) = Σ_m e^{i m·z}
â_m(ζ), with each â_m an evaluable profile on R².  Its quantization acts on
mode vectors by

    (Op_h(a) u)_{k+m} += â_m(h(k + m/2)) u_k,

i.e. each z-mode m contributes a shifted band whose entries sample the
profile at the midpoint frequency.  Entries leaving the basis are dropped,
so conjugation experiments must keep their test states away from the edge.

The module also carries the averaging conjugation that removes the
x-dependence of the second potential component at frequencies ξ ≈ ±1,
together with a measured remainder report.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.linalg import expm
from scipy.sparse.linalg import LinearOperator, expm_multiply, svds

from .basis import ModeBasis, ModeVector
from .fields import FourierField2D, VectorPotential


def _bump_weight(u: np.ndarray) -> np.ndarray:
    """exp(-1/u) extended by 0 for u <= 0; the standard smooth step weight."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def plateau_bump(t, inner: float, outer: float) -> np.ndarray:
    """Smooth even cutoff: 1 for |t| <= inner, 0 for |t| >= outer."""
    t = np.abs(np.asarray(t, dtype=float))
    u = (t - inner) / (outer - inner)
    lo = _bump_weight(1.0 - u)
    hi = _bump_weight(u)
    return lo / (lo + hi + 1e-300)


def standard_psi(xi) -> np.ndarray:
    """Cutoff to the frequency shells ξ ≈ ±1: 1 on |ξ∓1|<=1/16, 0 outside 1/8."""
    xi = np.asarray(xi, dtype=float)
    return plateau_bump(xi - 1.0, 1 / 16, 1 / 8) + plateau_bump(xi + 1.0, 1 / 16, 1 / 8)


def standard_vartheta(eta) -> np.ndarray:
    """Transversal low-frequency cutoff: 1 on |η|<=1, 0 outside |η|<=2."""
    return plateau_bump(eta, 1.0, 2.0)


@dataclass
class Symbol:
    """z-mode table m -> profile(ξ, η), finite support in m."""

    zmodes: dict

    @classmethod
    def from_zeta(cls, profile) -> "Symbol":
        """Symbol depending on ζ only."""
        return cls({(0, 0): profile})

    @classmethod
    def from_field(cls, f: FourierField2D, zeta_profile=None) -> "Symbol":
        """Symbol a(z)·g(ζ) from a coefficient table (g defaults to 1)."""
        if zeta_profile is None:
            def zeta_profile(xi, eta):
                return np.ones_like(np.asarray(xi, dtype=float), dtype=complex)
        return cls({
            m: (lambda xi, eta, c=c: c * zeta_profile(xi, eta))
            for m, c in f.coeffs.items()
        })

    def sup_norm(self, xi_grid=None, eta_grid=None) -> float:
        """Sup of |a| estimated on a grid (for boundedness checks)."""
        if xi_grid is None:
            xi_grid = np.linspace(-3, 3, 121)
        if eta_grid is None:
            eta_grid = np.linspace(-3, 3, 121)
        X, E = np.meshgrid(xi_grid, eta_grid, indexing="ij")
        xs = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        total = np.zeros(X.shape, dtype=complex)
        sup = 0.0
        for x in xs:
            for y in xs:
                total[:] = 0
                for (m1, m2), prof in self.zmodes.items():
                    total += np.exp(1j * (m1 * x + m2 * y)) * np.asarray(prof(X, E))
                sup = max(sup, float(np.abs(total).max()))
        return sup


def quantize(a: Symbol, h: float, basis: ModeBasis) -> np.ndarray:
    """Galerkin matrix of the Weyl quantization of a at semiclassical scale h."""
    if h <= 0:
        raise ValueError("semiclassical parameter h must be positive")
    n = basis.size
    M = np.zeros((n, n), dtype=complex)
    k = basis.modes.astype(float)
    for m, profile in a.zmodes.items():
        rows, cols = basis.shift_indices(m)
        if len(cols) == 0:
            continue
        mid = h * (k[cols] + np.array(m, dtype=float) / 2)
        vals = np.asarray(profile(mid[:, 0], mid[:, 1]), dtype=complex)
        M[rows, cols] += np.broadcast_to(vals, (len(cols),))
    return M


def commutator(m1: np.ndarray, m2: np.ndarray) -> np.ndarray:
    if m1.shape != m2.shape or m1.shape[0] != m1.shape[1]:
        raise ValueError("commutator requires square matrices on the same basis")
    return m1 @ m2 - m2 @ m1


def conjugate_exp(g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """e^G H e^{-G} via the scaling-and-squaring matrix exponential."""
    if g.shape != h.shape or g.shape[0] != g.shape[1]:
        raise ValueError("conjugation requires square matrices on the same basis")
    eg = expm(g)
    eminus = expm(-g)
    return eg @ h @ eminus


def operator_norm(m: np.ndarray, tol: float = 1e-8) -> float:
    """Largest singular value; Lanczos for big matrices, exact below 256."""
    if not np.any(m):
        return 0.0
    if m.shape[0] < 256:
        return float(np.linalg.norm(m, 2))
    s = svds(LinearOperator(m.shape, matvec=lambda v: m @ v,
                            rmatvec=lambda v: m.conj().T @ v),
             k=1, return_singular_vectors=False, tol=tol)
    return float(s[0])


@dataclass
class WignerSample:
    symbol_id: str
    h: float
    value: complex


def wigner_eval(state: ModeVector, a: Symbol, h: float,
                symbol_id: str = "") -> WignerSample:
    """Phase-space average ⟨Op_h(a) v, v⟩ of the state against the symbol."""
    op = quantize(a, h, state.basis)
    v = state.coeffs
    return WignerSample(symbol_id, h, complex(np.vdot(v, op @ v)))


@dataclass
class NormalFormSpec:
    """Parameters of the second averaging conjugation."""

    h: float
    alpha: float
    rho: float = 0.3                            # frequency-shell half width
    psi: object = dc_field(default=None)       # cutoff in ξ, plateau around ±1
    vartheta: object = dc_field(default=None)  # cutoff in η, plateau around 0

    def __post_init__(self):
        if not 0 < self.alpha < 0.5:
            raise ValueError("alpha must lie in (0, 1/2)")
        if self.h <= 0:
            raise ValueError("h must be positive")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if self.psi is None:
            self.psi = standard_psi
        if self.vartheta is None:
            self.vartheta = standard_vartheta
        self.verify_cutoffs()

    def verify_cutoffs(self, n: int = 401, tol: float = 1e-12) -> None:
        """Pointwise plateau/support checks of ψ and ϑ on a grid."""
        t = np.linspace(-3, 3, n)
        psi = np.asarray(self.psi(t), dtype=float)
        plateau = (np.abs(np.abs(t) - 1.0) <= 1 / 16 - 1e-9)
        outside = (np.abs(np.abs(t) - 1.0) >= 1 / 8 + 1e-9)
        if np.abs(psi[plateau] - 1.0).max() > tol or np.abs(psi[outside]).max() > tol:
            raise ValueError("psi violates its plateau/support contract")
        th = np.asarray(self.vartheta(t), dtype=float)
        if (np.abs(th[np.abs(t) <= 1 - 1e-9] - 1.0).max() > tol
                or np.abs(th[np.abs(t) >= 2 + 1e-9]).max() > tol):
            raise ValueError("vartheta violates its plateau/support contract")


@dataclass
class NormalFormReport:
    h: float
    alpha: float
    remainder_norms: list
    g2_norm: float

    @property
    def max_remainder(self) -> float:
        return max(self.remainder_norms) if self.remainder_norms else 0.0


def localized_packet(basis: ModeBasis, h: float, alpha: float,
                     rng: np.random.Generator | None = None) -> np.ndarray:
    """Gaussian mode packet centered at ξ ≈ 1, η ≈ 0 with width h^alpha.

    These are the states on which the averaging remainder is measured; they
    live where the ξ-cutoff plateaus and the η-cutoff equals one.
    """
    k = basis.modes.astype(float)
    xi = h * k[:, 0]
    eta = h * k[:, 1]
    w = h ** alpha
    amp = np.exp(-((xi - 1.0) ** 2 + eta ** 2) / (2 * w ** 2))
    if rng is not None:
        amp = amp * np.exp(2j * np.pi * rng.random(len(amp)))
    amp = amp.astype(complex)
    return amp / np.linalg.norm(amp)


def _antiderivative_x(f: FourierField2D) -> FourierField2D:
    """Zero-mean x-antiderivative of a field with zero x-average."""
    out = {}
    for (k1, k2), v in f.coeffs.items():
        if k1 == 0:
            if abs(v) > 1e-13:
                raise ValueError("x-antiderivative requires zero x-average")
            continue
        out[(k1, k2)] = v / (1j * k1)
    return FourierField2D.from_coeffs(out, is_real=f.is_real)


def averaging_generator_symbol(A: VectorPotential, spec: NormalFormSpec) -> Symbol:
    """Symbol g2(x,y,ξ)·ϑ(η)·η whose exponential averages out the
    x-dependence of A2 on the shells ξ ≈ ±1.

    g2 = ψ(ξ)/(2iξ) · ∂_x^{-1}(⟨A2⟩ - A2), where ⟨A2⟩ is the x-average and
    ∂_x^{-1} the zero-mean antiderivative.
    """
    a2 = A.a2
    fluct = FourierField2D.from_coeffs(
        {k: -v for k, v in a2.coeffs.items() if k[0] != 0}, is_real=True)
    d = _antiderivative_x(fluct)
    psi, vartheta = spec.psi, spec.vartheta

    def make_profile(c):
        def profile(xi, eta):
            xi = np.asarray(xi, dtype=float)
            eta = np.asarray(eta, dtype=float)
            p = psi(xi)
            # psi vanishes near ξ = 0, so the division is safe there
            denom = np.where(np.abs(xi) < 1e-12, 1.0, xi)
            return c * p / (2j * denom) * vartheta(eta) * eta
        return profile

    return Symbol({m: make_profile(c) for m, c in d.coeffs.items()})


def model_operator(A: VectorPotential, h: float, basis: ModeBasis) -> np.ndarray:
    """Fully averaged quadratic model: h²D² - 2h·Op_h(⟨A1⟩ξ + ⟨A2⟩η)."""
    a1_avg = FourierField2D.from_coeffs(
        {k: v for k, v in A.a1.coeffs.items() if k[0] == 0}, is_real=True)
    a2_avg = FourierField2D.from_coeffs(
        {k: v for k, v in A.a2.coeffs.items() if k[0] == 0}, is_real=True)
    free = quantize(Symbol.from_zeta(lambda xi, eta: xi ** 2 + eta ** 2), h, basis)
    drift1 = quantize(Symbol.from_field(a1_avg, lambda xi, eta: xi + 0j), h, basis)
    drift2 = quantize(Symbol.from_field(a2_avg, lambda xi, eta: eta + 0j), h, basis)
    return free - 2 * h * (drift1 + drift2)


def normal_form_g2(A: VectorPotential, spec: NormalFormSpec, basis: ModeBasis,
                   V: FourierField2D | None = None,
                   n_states: int = 4, seed: int = 0) -> tuple[np.ndarray, NormalFormReport]:
    """Averaging conjugation G2 and its measured remainder.

    Requires A1 already independent of x (gauge first).  Builds
    G2 = Op_h(g2 ϑ(η) η), conjugates the full scaled Hamiltonian h²H by e^{G2}
    and compares against the averaged model operator on localized packets.
    The deliberately uncancelled part scales like h^{1+2α} there.
    """
    if any(k[0] != 0 and abs(v) > 1e-13 for k, v in A.a1.coeffs.items()):
        raise ValueError("first potential component depends on x: apply the gauge first")
    from .spectral import assemble  # deferred to avoid an import cycle

    h = spec.h
    sym = averaging_generator_symbol(A, spec)
    g2 = quantize(sym, h, basis)

    v_field = V if V is not None else FourierField2D.zero()
    full = (h ** 2) * assemble(A, v_field, basis).entries
    model = model_operator(A, h, basis)

    rng = np.random.default_rng(seed)
    norms = []
    for i in range(n_states):
        v = localized_packet(basis, h, spec.alpha, rng if i > 0 else None)
        w = expm_multiply(-g2, v)
        w = full @ w
        w = expm_multiply(g2, w)
        norms.append(float(np.linalg.norm(w - model @ v)))
    report = NormalFormReport(h=h, alpha=spec.alpha, remainder_norms=norms,
                              g2_norm=operator_norm(g2))
    return g2, report
