"""Band-limited functions on the 2-torus and on circles.

Everything here is a trigonometric polynomial: a finite table of Fourier
coefficients.  Directional averages are then exact Fourier projections, the
magnetic field is an exact coefficient-level curl, and gauge potentials come
out in closed form.

Conventions, fixed once and for all:
  * T^2 = R^2/(2πZ)^2, with f(z) = Σ_k f̂(k) e^{i k·z}.
  * A primitive direction (p, q) has unit vectors γ = (p,q)/√(p²+q²) and
    γ⊥ = (-q,p)/√(p²+q²); the transversal coordinate is s = z·γ⊥, living on
    a circle of circumference ℓ = 2π/√(p²+q²).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import ModeBasis, ModeVector

_REALITY_TOL = 1e-12


class TruncationRiskError(RuntimeError):
    """An operation would push significant coefficient mass outside the basis."""


class ConstantFunctionError(ValueError):
    """Raised where a non-constant function is required (every point is critical)."""


def _as_key(k) -> tuple[int, int]:
    return (int(k[0]), int(k[1]))


@dataclass
class FourierField2D:
    """Function on T^2 stored as a truncated Fourier coefficient table."""

    coeffs: dict
    bandwidth: int
    is_real: bool

    @classmethod
    def from_coeffs(cls, coeffs: dict, is_real: bool | None = None) -> "FourierField2D":
        clean = {_as_key(k): complex(v) for k, v in coeffs.items() if v != 0}
        bw = max((max(abs(k[0]), abs(k[1])) for k in clean), default=0)
        if is_real is None:
            is_real = all(
                abs(clean.get((-k[0], -k[1]), 0.0) - np.conj(v)) <= _REALITY_TOL
                for k, v in clean.items()
            )
        f = cls(clean, bw, bool(is_real))
        if is_real:
            f._check_reality()
        return f

    @classmethod
    def zero(cls) -> "FourierField2D":
        return cls({}, 0, True)

    @classmethod
    def constant(cls, value: float) -> "FourierField2D":
        if value == 0:
            return cls.zero()
        return cls.from_coeffs({(0, 0): value})

    @classmethod
    def random_real(cls, bandwidth: int, rng: np.random.Generator,
                    amplitude: float = 1.0, zero_mean: bool = False) -> "FourierField2D":
        """Real trig polynomial with iid Gaussian coefficients up to bandwidth."""
        coeffs: dict = {}
        for k1 in range(-bandwidth, bandwidth + 1):
            for k2 in range(-bandwidth, bandwidth + 1):
                if (k1, k2) <= (0, 0):
                    continue
                c = amplitude * (rng.standard_normal() + 1j * rng.standard_normal())
                coeffs[(k1, k2)] = c
                coeffs[(-k1, -k2)] = np.conj(c)
        if not zero_mean:
            coeffs[(0, 0)] = complex(amplitude * rng.standard_normal())
        return cls.from_coeffs(coeffs, is_real=True)

    def _check_reality(self):
        for k, v in self.coeffs.items():
            if abs(self.coeffs.get((-k[0], -k[1]), 0.0) - np.conj(v)) > _REALITY_TOL:
                raise ValueError(f"coefficients not Hermitian-symmetric at mode {k}")

    def coeff(self, k) -> complex:
        return self.coeffs.get(_as_key(k), 0.0 + 0.0j)

    def mean(self) -> complex:
        return self.coeff((0, 0))

    def __add__(self, other: "FourierField2D") -> "FourierField2D":
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0.0) + v
        return FourierField2D.from_coeffs(out, is_real=self.is_real and other.is_real)

    def __sub__(self, other: "FourierField2D") -> "FourierField2D":
        return self + other.scale(-1.0)

    def scale(self, a: complex) -> "FourierField2D":
        real = self.is_real and abs(np.imag(a)) <= _REALITY_TOL
        return FourierField2D.from_coeffs(
            {k: a * v for k, v in self.coeffs.items()}, is_real=real)

    def convolve(self, other: "FourierField2D") -> "FourierField2D":
        """Coefficient table of the pointwise product."""
        out: dict = {}
        for ka, va in self.coeffs.items():
            for kb, vb in other.coeffs.items():
                k = (ka[0] + kb[0], ka[1] + kb[1])
                out[k] = out.get(k, 0.0) + va * vb
        return FourierField2D.from_coeffs(out, is_real=self.is_real and other.is_real)

    def derivative(self, axis: int) -> "FourierField2D":
        return FourierField2D.from_coeffs(
            {k: 1j * k[axis] * v for k, v in self.coeffs.items()},
            is_real=self.is_real)

    def gradient(self) -> "VectorPotential":
        return VectorPotential(self.derivative(0), self.derivative(1))

    def evaluate(self, x, y):
        """Pointwise values; x, y broadcastable arrays of torus coordinates."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape, dtype=complex)
        for (k1, k2), v in self.coeffs.items():
            out += v * np.exp(1j * (k1 * x + k2 * y))
        if self.is_real:
            return out.real
        return out

    def to_json(self) -> list:
        return [
            {"k1": k[0], "k2": k[1], "re": float(v.real), "im": float(v.imag)}
            for k, v in sorted(self.coeffs.items())
        ]

    @classmethod
    def from_json(cls, records: list, is_real: bool | None = None) -> "FourierField2D":
        return cls.from_coeffs(
            {(r["k1"], r["k2"]): r["re"] + 1j * r.get("im", 0.0) for r in records},
            is_real=is_real)


@dataclass
class VectorPotential:
    """Pair of real fields (A1, A2) on T^2."""

    a1: FourierField2D
    a2: FourierField2D

    def __post_init__(self):
        if not (self.a1.is_real and self.a2.is_real):
            raise ValueError("vector potential components must be real-valued")

    @property
    def bandwidth(self) -> int:
        return max(self.a1.bandwidth, self.a2.bandwidth)

    def __add__(self, other: "VectorPotential") -> "VectorPotential":
        return VectorPotential(self.a1 + other.a1, self.a2 + other.a2)

    def squared_norm_field(self) -> FourierField2D:
        """|A|^2 = A1^2 + A2^2 as a coefficient table."""
        return self.a1.convolve(self.a1) + self.a2.convolve(self.a2)


@dataclass
class CircleFunction:
    """Trig polynomial f(s) = Σ_m c_m e^{i m (2π/ℓ) s} on a circle of length ℓ."""

    ell: float
    coeffs: dict
    is_real: bool

    @classmethod
    def from_coeffs(cls, ell: float, coeffs: dict,
                    is_real: bool | None = None) -> "CircleFunction":
        if ell <= 0:
            raise ValueError("circumference must be positive")
        clean = {int(m): complex(v) for m, v in coeffs.items() if v != 0}
        if is_real is None:
            is_real = all(
                abs(clean.get(-m, 0.0) - np.conj(v)) <= _REALITY_TOL
                for m, v in clean.items()
            )
        return cls(float(ell), clean, bool(is_real))

    @property
    def degree(self) -> int:
        return max((abs(m) for m in self.coeffs), default=0)

    def coeff(self, m: int) -> complex:
        return self.coeffs.get(int(m), 0.0 + 0.0j)

    def evaluate(self, s):
        s = np.asarray(s, dtype=float)
        w = 2 * np.pi / self.ell
        out = np.zeros(s.shape, dtype=complex)
        for m, v in self.coeffs.items():
            out += v * np.exp(1j * m * w * s)
        return out.real if self.is_real else out

    def derivative(self) -> "CircleFunction":
        w = 2 * np.pi / self.ell
        return CircleFunction.from_coeffs(
            self.ell, {m: 1j * m * w * v for m, v in self.coeffs.items()},
            is_real=self.is_real)

    def translate(self, s0: float) -> "CircleFunction":
        """f(s + s0) as a new table."""
        w = 2 * np.pi / self.ell
        return CircleFunction.from_coeffs(
            self.ell, {m: v * np.exp(1j * m * w * s0) for m, v in self.coeffs.items()},
            is_real=self.is_real)

    def is_constant(self, tol: float = 1e-12) -> bool:
        return all(abs(v) <= tol for m, v in self.coeffs.items() if m != 0)

    def to_json(self) -> dict:
        return {
            "ell": self.ell,
            "modes": [
                {"m": m, "re": float(v.real), "im": float(v.imag)}
                for m, v in sorted(self.coeffs.items())
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CircleFunction":
        return cls.from_coeffs(
            obj["ell"],
            {r["m"]: r["re"] + 1j * r.get("im", 0.0) for r in obj["modes"]})


@dataclass
class CriticalPoint:
    position: float
    second_derivative: float
    degenerate: bool


def _require_primitive(direction) -> tuple[int, int]:
    if hasattr(direction, "as_tuple"):
        direction = direction.as_tuple()
    p, q = int(direction[0]), int(direction[1])
    if (p, q) == (0, 0) or math.gcd(abs(p), abs(q)) != 1:
        raise ValueError(f"direction {(p, q)} is not a primitive integer pair")
    return p, q


def directional_average(f: FourierField2D, direction) -> FourierField2D:
    """Long-time average of f along lines of the given primitive direction.

    For a trig polynomial this is exactly the projection onto modes k with
    k·(p,q) = 0, i.e. k = m(-q, p).
    """
    p, q = _require_primitive(direction)
    kept = {k: v for k, v in f.coeffs.items() if k[0] * p + k[1] * q == 0}
    return FourierField2D.from_coeffs(kept, is_real=f.is_real)


def a_gamma(A: VectorPotential, direction) -> CircleFunction:
    """Averaged tangential component of A, as a function of s = z·γ⊥.

    The average of A along γ keeps only modes m(-q, p); dotting with γ gives
    c_m = (Â1(m(-q,p)) p + Â2(m(-q,p)) q)/√(p²+q²) on the circle of
    circumference 2π/√(p²+q²).
    """
    p, q = _require_primitive(direction)
    norm = math.hypot(p, q)
    coeffs = {}
    for m in range(-max(A.bandwidth, 0) - 1, max(A.bandwidth, 0) + 2):
        k = (-m * q, m * p)
        c = (A.a1.coeff(k) * p + A.a2.coeff(k) * q) / norm
        if c != 0:
            coeffs[m] = c
    return CircleFunction.from_coeffs(2 * np.pi / norm, coeffs, is_real=True)


def magnetic_field(A: VectorPotential) -> FourierField2D:
    """Scalar curl B = ∂x A2 - ∂y A1; always real with zero mean."""
    return A.a2.derivative(0) - A.a1.derivative(1)


def b_gamma_average(A: VectorPotential, direction) -> CircleFunction:
    """Directional average of the magnetic field, restricted to s = z·γ⊥.

    Equals -d/ds of a_gamma identically.
    """
    p, q = _require_primitive(direction)
    norm = math.hypot(p, q)
    B = magnetic_field(A)
    coeffs = {}
    for (k1, k2), v in B.coeffs.items():
        if k1 * p + k2 * q != 0:
            continue
        # k = m(-q, p); recover m from whichever component is nonzero
        m = k2 // p if p != 0 else -(k1 // q)
        coeffs[m] = v
    return CircleFunction.from_coeffs(2 * np.pi / norm, coeffs, is_real=True)


def gauge_g1(A: VectorPotential) -> FourierField2D:
    """Periodic gauge that removes the x-dependence of A1.

    g1(x, y) = ∫_{-π}^x (⟨A1⟩(y) - A1(s, y)) ds, where ⟨A1⟩ is the x-average.
    Thus A1 + ∂x g1 = ⟨A1⟩.  Coefficients: ĝ1(k) = -Â1(k)/(i k1) for k1 ≠ 0,
    and the lower limit contributes Σ_{k1≠0} (-1)^{k1} Â1(k1,k2)/(i k1) to
    the modes (0, k2).
    """
    coeffs: dict = {}
    for (k1, k2), v in A.a1.coeffs.items():
        if k1 == 0:
            continue
        coeffs[(k1, k2)] = coeffs.get((k1, k2), 0.0) - v / (1j * k1)
        base = (0, k2)
        coeffs[base] = coeffs.get(base, 0.0) + ((-1) ** k1) * v / (1j * k1)
    return FourierField2D.from_coeffs(coeffs, is_real=True)


def apply_gauge(state: ModeVector, g: FourierField2D, sign: int = 1) -> ModeVector:
    """Fourier coefficients of e^{i·sign·g} times the state.

    Evaluated on an oversampled grid (≥ 4(N + bandwidth(g)) points per axis)
    and transformed back; output modes outside the basis are dropped, so the
    caller must leave margin for the support widening.
    """
    if sign not in (-1, 1):
        raise ValueError("sign must be +1 or -1")
    basis = state.basis
    if basis.center != (0, 0):
        raise ValueError("gauge application requires an uncentered basis")
    eff = state.effective_bandwidth()
    if eff + g.bandwidth > basis.N:
        raise TruncationRiskError(
            f"state support {eff} plus gauge bandwidth {g.bandwidth} exceeds basis N={basis.N}")
    n = 4 * (basis.N + g.bandwidth) + 1
    n = max(n, 8)
    xs = 2 * np.pi * np.arange(n) / n
    X, Y = np.meshgrid(xs, xs, indexing="ij")

    grid = np.zeros((n, n), dtype=complex)
    for i, (k1, k2) in enumerate(basis.modes):
        c = state.coeffs[i]
        if c != 0:
            grid[k1 % n, k2 % n] += c
    values = np.fft.ifft2(grid) * n * n
    values *= np.exp(1j * sign * g.evaluate(X, Y))
    spec = np.fft.fft2(values) / (n * n)

    out = np.empty(basis.size, dtype=complex)
    for i, (k1, k2) in enumerate(basis.modes):
        out[i] = spec[k1 % n, k2 % n]
    return ModeVector(basis, out)


def critical_points(f: CircleFunction, tol: float = 1e-8,
                    root_tol: float = 1e-10) -> list[CriticalPoint]:
    """All critical points of a real circle function in [0, ℓ).

    Zeros of f' are found as unit-circle roots of the associated Laurent
    polynomial in w = e^{i(2π/ℓ)s} via the companion matrix, then polished by
    Newton iteration on f'.  Each point is classified by the sign of f'';
    |f''| < tol marks it degenerate.
    """
    if not f.is_real:
        raise ValueError("critical point search requires a real function")
    if f.is_constant():
        raise ConstantFunctionError("function is constant: every point is critical")

    df = f.derivative()
    d2f = df.derivative()
    M = df.degree
    # p(w) = Σ_{m=-M..M} d_m w^{m+M}, roots on |w| = 1 give the zeros of f'
    poly = np.zeros(2 * M + 1, dtype=complex)
    for m, v in df.coeffs.items():
        poly[m + M] = v
    poly = np.trim_zeros(poly, "f")  # leading (highest-degree) zeros
    roots = np.roots(poly[::-1]) if len(poly) > 1 else np.array([])

    w = 2 * np.pi / f.ell
    candidates = []
    for r in roots:
        # a root of multiplicity m drifts off the circle like eps^(1/m);
        # spurious near-circle roots are discarded by the residual check below
        if abs(abs(r) - 1.0) > 1e-4:
            continue
        s = float(np.angle(r)) / w % f.ell
        for _ in range(20):
            d1 = float(np.real(df.evaluate(s)))
            d2 = float(np.real(d2f.evaluate(s)))
            if abs(d2) < 1e-14:
                break
            s = (s - d1 / d2) % f.ell
        if abs(float(np.real(df.evaluate(s)))) <= root_tol:
            candidates.append(s)

    # collapse duplicates (conjugate root pairs land on the same point)
    candidates.sort()
    points: list[CriticalPoint] = []
    for s in candidates:
        # degenerate clusters polish imperfectly, so merge generously
        if any(min(abs(s - p.position), f.ell - abs(s - p.position))
               < 1e-5 * f.ell for p in points):
            continue
        d2 = float(np.real(d2f.evaluate(s)))
        points.append(CriticalPoint(s, d2, abs(d2) < tol))
    return points
