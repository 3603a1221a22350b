"""Hermite-ladder algebra and WKB quasimode construction.

A non-degenerate maximum of the averaged potential component A1 at y = 0
supports Gaussian beam quasimodes of the one-dimensional model operator

    P_ħ = -ħ²∂²_y - 2 A1(y) + i ħ² (A2 ∂_y + ∂_y(A2·)) + ħ² W(y).

Writing A1(y) = A1(0) - (β²/2) y² + R1(y) with β = √(-A1''(0)), the quadratic
part turns P_ħ into the shifted harmonic oscillator

    L_ħ = -ħ²∂²_y + β² y² - βħ,     L_ħ φ_{j,ħ} = 2jβħ φ_{j,ħ},

and a two-step corrector ansatz v = φ₀ + v₁ + v₂ (v₁ = O(ħ^{1/2}),
v₂ = O(ħ)) removes the residual through order ħ², leaving O(ħ^{5/2}):

    P_ħ v = (βħ - 2A1(0) + Λ₀ħ²) v + O(ħ^{5/2}).

All corrector equations are solved exactly in the finite Hermite ladder; the
residual order is then measured on a fine grid against the full potentials.
The same packet, carried on a single x-frequency k = 1/h with ħ = h^{1/2},
is the travelling witness whose mass on any region avoiding the line y = 0
collapses as k grows.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .fields import CircleFunction, FourierField2D, VectorPotential
from .geometry import Direction, Region, project_region
from .weyl import plateau_bump


# ---------------------------------------------------------------------------
# Hermite ladder
# ---------------------------------------------------------------------------

def hermite_grid(beta: float, hbar: float, J: int, y: np.ndarray) -> np.ndarray:
    """Matrix of normalized oscillator eigenfunctions φ_{j,ħ}(y), j = 0..J.

    φ_j(y) = (β/ħ)^{1/4} h_j(√(β/ħ) y) with h_j the orthonormal Hermite
    functions on R, generated by the stable three-term recurrence.
    """
    t = np.sqrt(beta / hbar) * np.atleast_1d(np.asarray(y, dtype=float))
    out = np.empty((J + 1, len(t)))
    out[0] = np.pi ** -0.25 * np.exp(-t ** 2 / 2)
    if J >= 1:
        out[1] = np.sqrt(2.0) * t * out[0]
    for j in range(2, J + 1):
        out[j] = np.sqrt(2.0 / j) * t * out[j - 1] - np.sqrt((j - 1) / j) * out[j - 2]
    return (beta / hbar) ** 0.25 * out


@dataclass
class HermiteVector:
    """Finite combination Σ c_j φ_{j,ħ} in the oscillator eigenbasis."""

    beta: float
    hbar: float
    coeffs: np.ndarray

    def __post_init__(self):
        if self.beta <= 0 or self.hbar <= 0:
            raise ValueError("beta and hbar must be positive")
        self.coeffs = np.asarray(self.coeffs, dtype=complex)

    @classmethod
    def ground_state(cls, beta: float, hbar: float, levels: int = 8) -> "HermiteVector":
        c = np.zeros(levels + 1, dtype=complex)
        c[0] = 1.0
        return cls(beta, hbar, c)

    def _like(self, coeffs) -> "HermiteVector":
        return HermiteVector(self.beta, self.hbar, coeffs)

    def pad(self, levels: int) -> "HermiteVector":
        c = np.zeros(max(levels + 1, len(self.coeffs)), dtype=complex)
        c[: len(self.coeffs)] = self.coeffs
        return self._like(c)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def __add__(self, other: "HermiteVector") -> "HermiteVector":
        n = max(len(self.coeffs), len(other.coeffs))
        return self.pad(n - 1)._like(self.pad(n - 1).coeffs + other.pad(n - 1).coeffs)

    def scale(self, a: complex) -> "HermiteVector":
        return self._like(a * self.coeffs)

    def mul_y(self) -> "HermiteVector":
        """y · : φ_j ↦ √(ħ/2β)(√j φ_{j-1} + √(j+1) φ_{j+1})."""
        c = self.coeffs
        out = np.zeros(len(c) + 1, dtype=complex)
        j = np.arange(len(c), dtype=float)
        out[:-2] += np.sqrt(j[1:]) * c[1:]        # lowering
        out[1:] += np.sqrt(j + 1) * c             # raising
        return self._like(np.sqrt(self.hbar / (2 * self.beta)) * out)

    def d_dy(self) -> "HermiteVector":
        """∂_y : φ_j ↦ √(β/2ħ)(√j φ_{j-1} - √(j+1) φ_{j+1})."""
        c = self.coeffs
        out = np.zeros(len(c) + 1, dtype=complex)
        j = np.arange(len(c), dtype=float)
        out[:-2] += np.sqrt(j[1:]) * c[1:]
        out[1:] -= np.sqrt(j + 1) * c
        return self._like(np.sqrt(self.beta / (2 * self.hbar)) * out)

    def apply_L_inverse(self, tol: float = 1e-12) -> "HermiteVector":
        """L_ħ^{-1}: divide the level-j coefficient by 2jβħ (j >= 1)."""
        c = self.coeffs
        if len(c) and abs(c[0]) > tol * max(1.0, float(np.abs(c).max())):
            raise ValueError("L inverse requires a zero ground-level component")
        j = np.arange(len(c), dtype=float)
        out = np.zeros_like(c)
        out[1:] = c[1:] / (2 * j[1:] * self.beta * self.hbar)
        return self._like(out)

    def project_E0(self) -> complex:
        return complex(self.coeffs[0]) if len(self.coeffs) else 0.0

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        phi = hermite_grid(self.beta, self.hbar, len(self.coeffs) - 1, y)
        return self.coeffs @ phi


# ---------------------------------------------------------------------------
# Parameter extraction at a non-degenerate maximum
# ---------------------------------------------------------------------------

@dataclass
class QuasimodeParams:
    """Local data of (A1, A2, W) at a translated critical point y = 0.

    A1(y) = a1_0 - (β²/2) y² + R1(y), R1 = r3_1 y³ + r4_1 y⁴ + ...;
    A2(y) = Σ r2[j] y^j (j = 0..4); w0 = W(0); b = cutoff half-width.
    """

    beta: float
    a1_0: float
    r3_1: float
    r4_1: float
    r2: tuple
    w0: float
    b: float

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if not 0 < self.b < np.pi:
            raise ValueError("cutoff half-width must lie in (0, pi)")


def _derivatives_at_zero(f: CircleFunction, order: int) -> list:
    vals = []
    g = f
    for _ in range(order + 1):
        vals.append(complex(np.asarray(g.evaluate(0.0), dtype=complex)))
        g = g.derivative()
    return vals


def extract_params(A1: CircleFunction, A2: CircleFunction, W: CircleFunction,
                   y_star: float, b: float, tol: float = 1e-8) -> QuasimodeParams:
    """Taylor data of the shifted potentials at a non-degenerate maximum y*.

    Derivatives are spectral (exact for trigonometric polynomials).  A
    minimum is rejected here; reverse the propagation direction (k ↦ -k)
    to turn it into a maximum of the effective potential.
    """
    a1 = A1.translate(y_star)
    a2 = A2.translate(y_star)
    w = W.translate(y_star)

    d1 = _derivatives_at_zero(a1, 4)
    scale = max(1.0, max(abs(v) for v in d1))
    if abs(d1[1]) > 1e-10 * scale:
        raise ValueError(f"y* is not a critical point of A1 (A1' = {d1[1]:.2e})")
    second = d1[2].real
    if abs(second) < tol:
        raise ValueError("degenerate critical point: |A1''| below tolerance")
    if second > 0:
        raise ValueError("critical point is a minimum; reverse the "
                         "propagation direction (k -> -k) to use it")

    d2 = _derivatives_at_zero(a2, 4)
    fact = [1, 1, 2, 6, 24]
    return QuasimodeParams(
        beta=float(np.sqrt(-second)),
        a1_0=float(d1[0].real),
        r3_1=float((d1[3] / 6).real),
        r4_1=float((d1[4] / 24).real),
        r2=tuple(float((d2[j] / fact[j]).real) for j in range(5)),
        w0=float(np.real(np.asarray(w.evaluate(0.0), dtype=complex))),
        b=b,
    )


# ---------------------------------------------------------------------------
# WKB construction
# ---------------------------------------------------------------------------

@dataclass
class WkbSolution:
    params: QuasimodeParams
    hbar: float
    v0: HermiteVector
    v1: HermiteVector
    v2: HermiteVector
    beta1: np.ndarray      # v1 = ħ^{1/2} Σ beta1[j] φ_j, j = 1..3
    beta2: np.ndarray      # v2 = ħ Σ beta2[j] φ_j, j = 1..6
    c0: complex
    Lambda0: complex

    def total(self) -> HermiteVector:
        return self.v0 + self.v1 + self.v2

    def model_eigenvalue(self) -> complex:
        """βħ - 2A1(0) + Λ₀ħ², the quasi-eigenvalue of the 1D model."""
        p, h = self.params, self.hbar
        return p.beta * h - 2 * p.a1_0 + self.Lambda0 * h ** 2

    def to_json(self) -> dict:
        def cl(z):
            return [float(np.real(z)), float(np.imag(z))]
        return {
            "hbar": self.hbar,
            "beta": self.params.beta,
            "a1_0": self.params.a1_0,
            "c0": cl(self.c0),
            "Lambda0": cl(self.Lambda0),
            "beta1": [cl(z) for z in self.beta1],
            "beta2": [cl(z) for z in self.beta2],
            "v_coeffs": [cl(z) for z in self.total().coeffs],
        }


def build_wkb(params: QuasimodeParams, hbar: float) -> WkbSolution:
    """Two-corrector quasimode of the 1D model at scale ħ.

    Solves, in the Hermite ladder,

        L v₁ = 2 r₃ y³ v₀ - 2i r₀ ħ² ∂_y v₀,
        L v₂ = 2 r₃ y³ v₁ - 2i r₀ ħ² ∂_y v₁ + 2 r₄ y⁴ v₀
               - i r₁ ħ² (2y∂_y + 1) v₀ - W(0) ħ² v₀ + Λ₀ ħ² v₀,

    where r₃, r₄ expand the anharmonic part R1 (entering doubled because the
    model carries -2A1) and r₀, r₁ expand A2.  Λ₀ cancels the ground-level
    component of the right-hand side, which makes it ħ-independent; the
    first-order equation needs no such correction by parity.
    """
    if not 0 < hbar < 0.5:
        raise ValueError("hbar must lie in (0, 0.5)")
    b = params.beta
    r3, r4 = params.r3_1, params.r4_1
    r0, r1 = params.r2[0], params.r2[1]

    v0 = HermiteVector.ground_state(b, hbar, levels=8)

    def y3(v):
        return v.mul_y().mul_y().mul_y()

    rhs1 = y3(v0).scale(2 * r3) + v0.d_dy().scale(-2j * r0 * hbar ** 2)
    v1 = rhs1.pad(8).apply_L_inverse()

    ydy = v0.mul_y().d_dy() + v0.d_dy().mul_y()   # (y∂ + ∂y·) v0 = (2y∂ + 1) v0
    rhs2 = (y3(v1).scale(2 * r3)
            + v1.d_dy().scale(-2j * r0 * hbar ** 2)
            + v0.mul_y().mul_y().mul_y().mul_y().scale(2 * r4)
            + ydy.scale(-1j * r1 * hbar ** 2)
            + v0.scale(-params.w0 * hbar ** 2))
    c0 = rhs2.project_E0() / hbar ** 2
    Lambda0 = -c0
    rhs2 = rhs2 + v0.scale(Lambda0 * hbar ** 2)
    v2 = rhs2.pad(8).apply_L_inverse()

    beta1 = v1.coeffs[1:4] / np.sqrt(hbar)
    beta2 = v2.coeffs[1:7] / hbar
    return WkbSolution(params=params, hbar=hbar, v0=v0, v1=v1, v2=v2,
                       beta1=beta1, beta2=beta2, c0=c0, Lambda0=Lambda0)


# ---------------------------------------------------------------------------
# Residual measurement on a grid
# ---------------------------------------------------------------------------

@dataclass
class ResidualRecord:
    hbar: float
    residual_l2: float
    exterior_mass: float


@dataclass
class ResidualScanResult:
    records: list
    slope: float
    solutions: list = dc_field(default_factory=list)

    def csv_rows(self):
        yield ("hbar", "residual_l2", "exterior_mass")
        for r in self.records:
            yield (f"{r.hbar:.10g}", f"{r.residual_l2:.10g}", f"{r.exterior_mass:.10g}")


def _spectral_derivative(vals: np.ndarray, order: int) -> np.ndarray:
    n = len(vals)
    freq = np.fft.fftfreq(n, d=1.0 / n)   # integer frequencies on [-π, π)
    return np.fft.ifft((1j * freq) ** order * np.fft.fft(vals))


def _eval_potential(f, y: np.ndarray) -> np.ndarray:
    if callable(getattr(f, "evaluate", None)):
        return np.asarray(f.evaluate(y), dtype=complex)
    return np.asarray(f(y), dtype=complex)


def model_residual_grid(sol: WkbSolution, A1, A2, W,
                        n_grid: int = 4096) -> tuple:
    """L² residual of the cutoff quasimode under the full 1D operator.

    Returns (residual_l2, exterior_mass); the cutoff equals 1 on |y| < b and
    vanishes for |y| >= min(2b, π - 0.1), so its commutator contribution is
    beyond all orders in ħ.  Exterior mass is ‖v_ħ‖ over b < |y| < π, the
    quasimode's leakage outside its concentration window.
    """
    hbar = sol.hbar
    width = np.sqrt(hbar / sol.params.beta)
    dy = 2 * np.pi / n_grid
    if dy > width / 16:
        raise ValueError("grid too coarse: fewer than 16 points per "
                         "oscillator width; increase the resolution")
    y = -np.pi + dy * np.arange(n_grid)
    b = sol.params.b
    outer = min(2 * b, np.pi - 0.1)
    chi = plateau_bump(y, b, outer)

    v = sol.total().evaluate(y).astype(complex)
    w = chi * v
    a1 = _eval_potential(A1, y)
    a2 = _eval_potential(A2, y)
    wv = _eval_potential(W, y)

    dw = _spectral_derivative(w, 1)
    d2w = _spectral_derivative(w, 2)
    Pw = (-hbar ** 2 * d2w - 2 * a1 * w
          + 1j * hbar ** 2 * (a2 * dw + _spectral_derivative(a2 * w, 1))
          + hbar ** 2 * wv * w)
    resid = Pw - sol.model_eigenvalue() * w

    l2 = float(np.sqrt(dy * np.sum(np.abs(resid) ** 2)))
    ext = np.abs(y) > b
    ext_mass = float(np.sqrt(dy * np.sum(np.abs(v[ext]) ** 2)))
    return l2, ext_mass


def residual_scan(A1: CircleFunction, A2: CircleFunction, W: CircleFunction,
                  y_star: float, b: float, hbar_list,
                  n_grid: int = 4096) -> ResidualScanResult:
    """Residual order of the WKB family: fits log(residual) vs log(ħ).

    The potentials are translated so the critical point sits at 0; the
    residual operator sees the full (not Taylor-truncated) potentials.
    """
    hbar_list = list(hbar_list)
    if len(hbar_list) < 4 or any(b2 >= a for a, b2 in zip(hbar_list, hbar_list[1:])):
        raise ValueError("hbar_list must be decreasing with at least 4 points")
    params = extract_params(A1, A2, W, y_star, b)
    a1 = A1.translate(y_star)
    a2 = A2.translate(y_star)
    w = W.translate(y_star)

    records, sols = [], []
    for hbar in hbar_list:
        sol = build_wkb(params, hbar)
        l2, ext = model_residual_grid(sol, a1, a2, w, n_grid)
        records.append(ResidualRecord(hbar, l2, ext))
        sols.append(sol)
    slope = float(np.polyfit(np.log([r.hbar for r in records]),
                             np.log([max(r.residual_l2, 1e-300) for r in records]),
                             1)[0])
    return ResidualScanResult(records=records, slope=slope, solutions=sols)


# ---------------------------------------------------------------------------
# 2D non-observability witness
# ---------------------------------------------------------------------------

@dataclass
class WitnessRecord:
    k: int
    h: float
    hbar: float
    mass_ratio: float


@dataclass
class WitnessScanResult:
    records: list
    region: Region
    T: float

    def csv_rows(self):
        yield ("k", "mass_ratio")
        for r in self.records:
            yield (str(r.k), f"{r.mass_ratio:.10g}")


def _y_profile(f: FourierField2D) -> CircleFunction:
    """Collapse an x-independent field to a function of y on the 2π circle."""
    if any(k1 != 0 and abs(v) > 1e-13 for (k1, _), v in f.coeffs.items()):
        raise ValueError("witness construction requires y-only potentials")
    return CircleFunction.from_coeffs(
        2 * np.pi, {k2: v for (k1, k2), v in f.coeffs.items() if k1 == 0},
        is_real=f.is_real)


def _mass_matrix_1d(region: Region, M: int) -> np.ndarray:
    """⟨1_ω e^{iny}e^{ikx}, e^{in'y}e^{ikx}⟩/(2π)² for a fixed x-frequency."""
    from .obs import _interval_phase
    ns = np.arange(-M, M + 1)
    d = ns[None, :] - ns[:, None]
    out = np.zeros((2 * M + 1, 2 * M + 1), dtype=complex)
    for (x0, x1, y0, y1) in region.rects:
        out += (x1 - x0) * _interval_phase(d, y0, y1)
    return out / (2 * np.pi) ** 2


def witness_initial_coeffs(sol: WkbSolution, M: int, n_grid: int = 2048) -> np.ndarray:
    """y-Fourier coefficients of the cutoff quasimode, modes -M..M."""
    dy = 2 * np.pi / n_grid
    y = -np.pi + dy * np.arange(n_grid)
    b = sol.params.b
    chi = plateau_bump(y, b, min(2 * b, np.pi - 0.1))
    w = chi * sol.total().evaluate(y)
    # e^{iny} coefficients w.r.t. the grid starting at -π
    raw = np.fft.fft(w) / n_grid
    freq = np.fft.fftfreq(n_grid, d=1.0 / n_grid).astype(int)
    coeffs = np.zeros(2 * M + 1, dtype=complex)
    for i, n in enumerate(freq):
        if -M <= n <= M:
            coeffs[n + M] = raw[i] * np.exp(-1j * n * (-np.pi)) * np.sqrt(2 * np.pi)
    return coeffs


def witness_experiment(A: VectorPotential, V: FourierField2D, region: Region,
                       k_list, T: float, b: float = 2.6,
                       M: int = 28) -> WitnessScanResult:
    """Mass ratio ∫₀ᵀ ∫_ω |u_k|² dt / ‖u_k(0)‖² of the travelling witness.

    The witness u_k(0) = v_ħ(y) e^{ikx} (h = 1/k, ħ = √h) rides the geodesic
    line y = 0; it is evolved exactly in the decoupled x-frequency-k block.
    The region must avoid the concentration line, otherwise the experiment
    does not witness anything.
    """
    from .obs import _phi_factors
    from .spectral import assemble_1d

    k_list = list(k_list)
    if any(b2 <= a for a, b2 in zip(k_list, k_list[1:])):
        raise ValueError("k_list must be increasing")
    # The full torus is allowed as a calibration case (ratio = T exactly);
    # any proper region must avoid the concentration line to witness anything.
    if region.area() < (2 * np.pi) ** 2 - 1e-9:
        proj = project_region(region, Direction.canonical(1, 0))
        if proj.contains(0.0):
            raise ValueError("region meets the concentration line y = 0; "
                             "move it away to run the witness experiment")

    a1 = _y_profile(A.a1)
    a2 = _y_profile(A.a2)
    wfun = _y_profile(A.squared_norm_field() + V)

    # A maximum of A1 pairs with rightward modes (k > 0); a minimum becomes
    # a maximum of the effective potential after flipping the direction.
    k_sign = 1
    try:
        params = extract_params(a1, a2, wfun, 0.0, b)
    except ValueError as exc:
        if "minimum" not in str(exc):
            raise
        k_sign = -1
        a1_flip = CircleFunction.from_coeffs(
            a1.ell, {m: -v for m, v in a1.coeffs.items()}, is_real=a1.is_real)
        params = extract_params(a1_flip, a2, wfun, 0.0, b)

    Mw = _mass_matrix_1d(region, M)
    records = []
    for k in k_list:
        h = 1.0 / k
        hbar = np.sqrt(h)
        sol = build_wkb(params, hbar)
        u0 = witness_initial_coeffs(sol, M)
        nrm2 = float(np.vdot(u0, u0).real)

        Hk = assemble_1d(A, V, k_sign * k, M)
        vals, vecs = np.linalg.eigh((Hk + Hk.conj().T) / 2)
        Mt = vecs.conj().T @ Mw @ vecs
        Gt = Mt * _phi_factors(vals, T)
        G = vecs @ ((Gt + Gt.conj().T) / 2) @ vecs.conj().T
        mass = float(np.vdot(u0, G @ u0).real)
        records.append(WitnessRecord(k=k, h=h, hbar=hbar, mass_ratio=mass / nrm2))
    return WitnessScanResult(records=records, region=region, T=T)
