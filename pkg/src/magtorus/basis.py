"""Truncated Fourier mode bases on the 2-torus and coefficient vectors over them.

The torus is R^2/(2πZ)^2 throughout.  A basis collects every integer mode
k = (k1, k2) with |k - center|_inf <= N, ordered lexicographically, so its
size is (2N+1)^2.  The optional center lets experiments work in a window of
modes around a large carrier frequency without paying for all modes below it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ModeBasis:
    """Lexicographically ordered square block of Fourier modes."""

    N: int
    center: tuple[int, int] = (0, 0)
    modes: np.ndarray = field(init=False, repr=False, compare=False)
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.N < 0:
            raise ValueError("bandwidth N must be nonnegative")
        c1, c2 = self.center
        r = np.arange(-self.N, self.N + 1)
        k1, k2 = np.meshgrid(r + c1, r + c2, indexing="ij")
        modes = np.column_stack([k1.ravel(), k2.ravel()])
        object.__setattr__(self, "modes", modes)
        object.__setattr__(
            self, "_index", {(int(a), int(b)): i for i, (a, b) in enumerate(modes)}
        )

    @property
    def size(self) -> int:
        return (2 * self.N + 1) ** 2

    def index(self, k) -> int:
        return self._index[(int(k[0]), int(k[1]))]

    def contains(self, k) -> bool:
        return (int(k[0]), int(k[1])) in self._index

    def shift_indices(self, m: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
        """Index pairs (row, col) such that modes[row] = modes[col] + m.

        Used to place the band of a multiplication/quantization operator:
        column modes whose shift by m stays inside the basis.
        """
        m1, m2 = int(m[0]), int(m[1])
        k = self.modes
        c1, c2 = self.center
        ok = (np.abs(k[:, 0] + m1 - c1) <= self.N) & (np.abs(k[:, 1] + m2 - c2) <= self.N)
        cols = np.nonzero(ok)[0]
        side = 2 * self.N + 1
        rows = cols + m1 * side + m2
        return rows, cols


@dataclass
class ModeVector:
    """Complex coefficient vector over a ModeBasis."""

    basis: ModeBasis
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (self.basis.size,):
            raise ValueError("coefficient vector does not match basis size")

    @classmethod
    def single_mode(cls, basis: ModeBasis, k, amplitude: complex = 1.0) -> "ModeVector":
        c = np.zeros(basis.size, dtype=complex)
        c[basis.index(k)] = amplitude
        return cls(basis, c)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def effective_bandwidth(self, tol: float = 1e-13) -> int:
        """Largest |k - center|_inf carrying a coefficient above tol."""
        live = np.abs(self.coeffs) > tol
        if not live.any():
            return 0
        k = self.basis.modes[live] - np.asarray(self.basis.center)
        return int(np.abs(k).max())
