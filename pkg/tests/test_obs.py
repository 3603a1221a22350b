"""Mass matrices, Gramians, observability constants, resolvent bound, HUM."""

import numpy as np
import pytest

from magtorus import (
    FourierField2D,
    ModeBasis,
    ModeVector,
    Region,
    VectorPotential,
    assemble,
    eigendecompose,
    gramian,
    hum_control,
    observability_constant,
    region_mass_matrix,
    resolvent_constant,
    resolvent_scan,
    sharp_obs_experiment,
)

from helpers import cos_field, random_potential, zero_field

TWO_PI = 2 * np.pi


def _free_eig(N):
    A = VectorPotential(zero_field(), zero_field())
    return eigendecompose(assemble(A, zero_field(), N=N))


# ---------------------------------------------------------------------------
# Mass matrix
# ---------------------------------------------------------------------------

def test_mass_matrix_full_torus_is_identity():
    b = ModeBasis(4)
    M = region_mass_matrix(Region.full_torus(), b)
    assert np.abs(M.entries - np.eye(b.size)).max() < 1e-14


def test_mass_matrix_half_torus_diagonal():
    b = ModeBasis(3)
    M = region_mass_matrix(Region([(0.0, TWO_PI, 0.0, np.pi)]), b)
    assert abs(M.entries[b.index((0, 0)), b.index((0, 0))] - 0.5) < 1e-14
    assert M.hermiticity_defect() < 1e-14
    lam = np.linalg.eigvalsh(M.entries)
    assert lam.min() > -1e-12 and lam.max() < 1 + 1e-12


def test_mass_matrix_matches_grid_quadrature():
    # oracle: composite Simpson quadrature of |u|^2 over the rectangles
    rng = np.random.default_rng(107)
    b = ModeBasis(3)
    region = Region([(0.5, 2.0, 1.0, 2.5), (4.0, 5.5, 3.0, 5.0)])
    M = region_mass_matrix(region, b)
    n = 1024

    def simpson_2d(f, x0, x1, y0, y1):
        from scipy.integrate import simpson
        xs = np.linspace(x0, x1, n + 1)
        ys = np.linspace(y0, y1, n + 1)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return simpson(simpson(f(X, Y), ys, axis=1), xs)

    for _ in range(4):
        c = rng.standard_normal(b.size) + 1j * rng.standard_normal(b.size)
        c /= np.linalg.norm(c)
        quad = float(np.vdot(c, M.entries @ c).real)

        def dens(X, Y, c=c):
            u = np.zeros(X.shape, dtype=complex)
            for i, (k1, k2) in enumerate(b.modes):
                u += c[i] * np.exp(1j * (k1 * X + k2 * Y))
            return np.abs(u) ** 2

        oracle = sum(simpson_2d(dens, *r[:2], *r[2:]) for r in
                     [(x0, x1, y0, y1) for x0, x1, y0, y1 in region.rects])
        oracle /= TWO_PI ** 2
        assert abs(quad - oracle) < 1e-6


def test_mass_matrix_monotone_in_the_region():
    b = ModeBasis(3)
    small = region_mass_matrix(Region([(0.0, 1.0, 0.0, 1.0)]), b).entries
    big = region_mass_matrix(Region([(0.0, 2.0, 0.0, 2.0)]), b).entries
    lam = np.linalg.eigvalsh(big - small)
    assert lam.min() > -1e-12


# ---------------------------------------------------------------------------
# Gramian
# ---------------------------------------------------------------------------

def test_gramian_identity_mass_gives_T_identity():
    eig = _free_eig(4)
    n = eig.basis.size
    G = gramian(eig, np.eye(n), 2.7)
    assert np.abs(G - 2.7 * np.eye(n)).max() < 1e-12


def test_gramian_matches_trapezoid_time_integration():
    # oracle: 10^4-step trapezoid rule for int_0^T e^{isH} M e^{-isH} ds
    rng = np.random.default_rng(109)
    A = random_potential(rng, bandwidth=2, amplitude=0.2)
    eig = eigendecompose(assemble(A, zero_field(), N=8))
    Mw = region_mass_matrix(Region([(0.0, TWO_PI, 1.0, 2.5)]), eig.basis)
    T = 1.0
    G = gramian(eig, Mw, T)

    steps = 10_000
    t = np.linspace(0.0, T, steps + 1)
    w = np.full(steps + 1, T / steps)
    w[0] = w[-1] = T / (2 * steps)
    lam = eig.eigenvalues
    Q = eig.eigenvectors
    Mt = Q.conj().T @ Mw.entries @ Q
    # G~[b,a] = M~[b,a] * sum_i w_i e^{i(lam_b - lam_a) t_i}, accumulated as
    # a weighted outer product of the phase matrix U[i,a] = e^{i lam_a t_i}
    U = np.exp(1j * np.outer(t, lam))
    phases = U.T @ (w[:, None] * U.conj())
    G_oracle = Q @ (Mt * phases) @ Q.conj().T
    rel = np.linalg.norm(G - G_oracle) / np.linalg.norm(G_oracle)
    assert rel < 1e-6


def test_gramian_small_time_limit_and_additivity():
    eig = _free_eig(4)
    Mw = region_mass_matrix(Region([(0.0, 2.0, 0.0, TWO_PI)]), eig.basis)
    # G(T)/T -> M as T -> 0
    T = 1e-4
    G = gramian(eig, Mw, T)
    assert np.abs(G / T - Mw.entries).max() < 1e-3
    # additivity: G(2T) = G(T) + e^{iTH} G(T) e^{-iTH}
    T = 0.7
    G1 = gramian(eig, Mw, T)
    G2 = gramian(eig, Mw, 2 * T)
    Q, lam = eig.eigenvectors, eig.eigenvalues
    U = Q @ np.diag(np.exp(1j * T * lam)) @ Q.conj().T
    assert np.abs(G2 - (G1 + U @ G1 @ U.conj().T)).max() < 1e-10


def test_gramian_monotone_in_time_and_region():
    eig = _free_eig(3)
    small = region_mass_matrix(Region([(0.0, 1.5, 0.0, TWO_PI)]), eig.basis)
    big = region_mass_matrix(Region([(0.0, 3.0, 0.0, TWO_PI)]), eig.basis)
    G1 = gramian(eig, small, 1.0)
    G2 = gramian(eig, small, 2.0)
    G3 = gramian(eig, big, 1.0)
    assert np.linalg.eigvalsh(G2 - G1).min() > -1e-10
    assert np.linalg.eigvalsh(G3 - G1).min() > -1e-10
    assert np.linalg.eigvalsh(G1).min() > -1e-12
    with pytest.raises(ValueError):
        gramian(eig, small, 0.0)


# ---------------------------------------------------------------------------
# Observability constant
# ---------------------------------------------------------------------------

def test_observability_constant_examples():
    n = 5
    G = 2.0 * np.eye(n)
    rep = observability_constant(G, T=2.0)
    assert rep.lambda_min == pytest.approx(2.0)
    assert rep.constant == pytest.approx(0.5)
    assert rep.dim == n
    # restriction to a subspace picks up its own lambda_min
    G = np.diag([1.0, 3.0, 5.0])
    sub = np.eye(3)[:, 1:]
    rep2 = observability_constant(G, T=1.0, subspace=sub)
    assert rep2.lambda_min == pytest.approx(3.0)
    assert rep2.dim == 2
    # rank-deficient spanning sets are reduced, not double counted
    sub3 = np.array([[1.0, 2.0], [0.0, 0.0], [0.0, 0.0]])
    rep3 = observability_constant(G, T=1.0, subspace=sub3)
    assert rep3.dim == 1
    assert rep3.lambda_min == pytest.approx(1.0)


def test_observability_full_torus_constant():
    eig = _free_eig(4)
    Mw = region_mass_matrix(Region.full_torus(), eig.basis)
    rep = observability_constant(gramian(eig, Mw, 2.0), 2.0)
    assert rep.lambda_min == pytest.approx(2.0, abs=1e-10)
    assert rep.constant == pytest.approx(0.5, abs=1e-10)


def test_observability_stable_across_truncations_without_electric_field():
    # electric-potential-free operator over a vertical strip: the constant on
    # the common low-frequency block is stable across N
    region = Region([(1.0, 3.0, 0.0, TWO_PI)])
    T = 4.0
    vals = {}
    for N in (8, 12, 16):
        eig = _free_eig(N)
        Mw = region_mass_matrix(region, eig.basis)
        G = gramian(eig, Mw, T)
        # compress on the modes with max|k| <= 4 shared by all three bases
        b = eig.basis
        cols = [i for i, k in enumerate(b.modes) if max(abs(k[0]), abs(k[1])) <= 4]
        sub = np.eye(b.size)[:, cols]
        vals[N] = observability_constant(G, T, subspace=sub).constant
    ratios = [vals[12] / vals[8], vals[16] / vals[12]]
    assert all(1 / 2 < r < 2 for r in ratios)


# ---------------------------------------------------------------------------
# Sharp-time shell observability
# ---------------------------------------------------------------------------

def test_sharp_obs_full_torus_rate_is_one():
    eig = _free_eig(10)
    Mw = region_mass_matrix(Region.full_torus(), eig.basis)
    r = sharp_obs_experiment(eig, Mw, h=0.25, rho=0.3, T=1.0)
    assert r.rate == pytest.approx(1.0, abs=1e-10)
    assert r.shell_dimension > 0


def test_sharp_obs_empty_shell_raises():
    eig = _free_eig(3)
    Mw = region_mass_matrix(Region.full_torus(), eig.basis)
    with pytest.raises(ValueError):
        sharp_obs_experiment(eig, Mw, h=1e-3, rho=0.1, T=1.0)


# ---------------------------------------------------------------------------
# Resolvent-style quantitative bound
# ---------------------------------------------------------------------------

def test_resolvent_constant_full_torus_bounded_by_one():
    A = VectorPotential(zero_field(), zero_field())
    op = assemble(A, zero_field(), N=5)
    Mw = region_mass_matrix(Region.full_torus(), op.basis)
    for lam in (-10.0, 0.0, 17.3):
        c = resolvent_constant(op, Mw, lam)
        # ||u||_{L^2(omega)} = ||u|| already gives the bound with C = 1
        assert c <= 1.0 + 1e-10


def test_resolvent_constant_eigenvector_lower_bound():
    # at lam = -lam_j the eigenvector kills the resolvent term, so
    # C(lam) >= 1/sqrt(<M v, v>)
    rng = np.random.default_rng(113)
    A = random_potential(rng, bandwidth=2, amplitude=0.2)
    op = assemble(A, zero_field(), N=8)
    eig = eigendecompose(op)
    region = Region([(0.0, TWO_PI, 1.0, 3.0)])
    Mw = region_mass_matrix(region, op.basis)
    j = 7
    v = eig.eigenvectors[:, j]
    lower = 1.0 / np.sqrt(float(np.vdot(v, Mw.entries @ v).real))
    c = resolvent_constant(op, Mw, -eig.eigenvalues[j])
    assert c >= lower - 1e-8


def test_resolvent_scan_agrees_with_direct_evaluation():
    rng = np.random.default_rng(127)
    A = random_potential(rng, bandwidth=2, amplitude=0.2)
    op = assemble(A, zero_field(), N=8)
    Mw = region_mass_matrix(Region([(0.0, TWO_PI, 1.0, 3.0)]), op.basis)
    lambdas = [-20.0, -3.0, 0.0, 5.0, 12.5]
    scan = resolvent_scan(op, Mw, lambdas)
    for lam, c in zip(scan.lambdas, scan.constants):
        assert c == pytest.approx(resolvent_constant(op, Mw, lam), rel=1e-9)
    rows = list(scan.csv_rows())
    assert rows[0] == ("lambda", "C")
    assert len(rows) == len(lambdas) + 1
    assert scan.max_constant() == pytest.approx(max(scan.constants))


# ---------------------------------------------------------------------------
# HUM control
# ---------------------------------------------------------------------------

def test_hum_control_zero_distance_needs_no_control():
    eig = _free_eig(4)
    Mw = region_mass_matrix(Region([(0.0, 2.0, 0.0, TWO_PI)]), eig.basis)
    b = eig.basis
    psi0 = ModeVector.single_mode(b, (1, 0)).coeffs
    # target = free evolution of psi0: d = 0, costate = 0, error = 0
    lam0 = 1.0
    T = 0.8
    psi1 = psi0 * np.exp(-1j * T * lam0)
    res = hum_control(eig, Mw, T, psi0, psi1)
    assert res.error < 1e-12
    assert np.abs(res.costate).max() < 1e-12
    assert np.abs(res.control_at(eig, Mw, 0.3)).max() < 1e-12


def test_hum_control_full_torus_exact():
    eig = _free_eig(3)
    Mw = region_mass_matrix(Region.full_torus(), eig.basis)
    b = eig.basis
    psi0 = ModeVector.single_mode(b, (0, 0)).coeffs
    psi1 = ModeVector.single_mode(b, (1, 0)).coeffs
    res = hum_control(eig, Mw, 1.0, psi0, psi1, regularization=0.0)
    assert res.error < 1e-10


def test_hum_control_steers_the_state():
    # integrate the controlled dynamics and verify the final state hits the
    # target up to the regularization-induced error
    rng = np.random.default_rng(131)
    A = random_potential(rng, bandwidth=1, amplitude=0.2)
    op = assemble(A, zero_field(), N=4)
    eig = eigendecompose(op)
    b = op.basis
    Mw = region_mass_matrix(Region([(0.0, 4.0, 0.0, TWO_PI)]), b)
    T = 2.0
    psi0 = ModeVector.single_mode(b, (0, 0)).coeffs
    psi1 = ModeVector.single_mode(b, (1, 1)).coeffs
    res = hum_control(eig, Mw, T, psi0, psi1, regularization=1e-10)
    assert res.error < 1e-6

    # Duhamel integration: psi(T) = e^{-iTH} psi0 + int_0^T e^{-i(T-t)H} h(t) dt
    Q, lam = eig.eigenvectors, eig.eigenvalues
    steps = 4000
    dt = T / steps
    t_nodes = np.linspace(0.0, T, steps + 1)
    acc = np.zeros_like(psi0, dtype=complex)
    for i, t in enumerate(t_nodes):
        weight = dt if 0 < i < steps else dt / 2
        # i psi' = H psi + h: the forcing enters Duhamel with a factor -i
        h = -1j * res.control_at(eig, Mw, float(t))
        prop = Q @ (np.exp(-1j * (T - t) * lam) * (Q.conj().T @ h))
        acc += weight * prop
    free = Q @ (np.exp(-1j * T * lam) * (Q.conj().T @ psi0))
    final = free + acc
    assert np.linalg.norm(final - psi1) < 1e-4
