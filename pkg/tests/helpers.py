"""Shared builders for the test suite."""

import numpy as np

from magtorus import FourierField2D, VectorPotential

TWO_PI = 2 * np.pi


def cos_field(k, amp=1.0):
    """amp * cos(k . z) as a coefficient table."""
    k = (int(k[0]), int(k[1]))
    mk = (-k[0], -k[1])
    if k == (0, 0):
        return FourierField2D.from_coeffs({k: amp})
    return FourierField2D.from_coeffs({k: amp / 2, mk: amp / 2})


def sin_field(k, amp=1.0):
    """amp * sin(k . z) as a coefficient table."""
    k = (int(k[0]), int(k[1]))
    mk = (-k[0], -k[1])
    return FourierField2D.from_coeffs({k: -0.5j * amp, mk: 0.5j * amp})


def zero_field():
    return FourierField2D.zero()


def random_potential(rng, bandwidth=2, amplitude=0.3):
    return VectorPotential(
        FourierField2D.random_real(bandwidth, rng, amplitude=amplitude),
        FourierField2D.random_real(bandwidth, rng, amplitude=amplitude),
    )


def grid(n):
    """Uniform n x n tensor grid on the torus (indexing='ij')."""
    xs = TWO_PI * np.arange(n) / n
    return np.meshgrid(xs, xs, indexing="ij")
