import numpy as np
import pytest
from numpy.testing import assert_allclose

from elastodesign.bayes import (
    BayesError,
    a_optimality_gradient,
    a_optimality_gradient_expanded,
    a_optimality_target,
    build_prior,
    posterior,
    posterior_mean,
    roi_weights,
    woodbury_covariance,
)
from elastodesign.fem import LameBackground, assemble_stiffness
from elastodesign.forward import LinearizedMapAssembler, precompute_sensors
from elastodesign.geometry import ActivationShape, BoundaryGeometry
from elastodesign.meshing import build_mesh, build_subdomains, roi_mask

GEOM = BoundaryGeometry(radius=1e-3)
SHAPE = ActivationShape(sigma=0.01)
LAME = LameBackground(lambda0=2.7654, mu0=1.1852)
L = GEOM.circumference
GAIN = 1e4
NOISE = 1e-3


@pytest.fixture(scope="module")
def coarse():
    # 18 subdomains (k=3): the clamp-adjacent exclusion keeps 14 live ones,
    # so weighted quantities are nontrivial
    mesh = build_mesh(GEOM, 800)
    part = build_subdomains(mesh, 18)
    op = assemble_stiffness(mesh, LAME)
    sensors = precompute_sensors(mesh, op, 6, SHAPE)
    asm = LinearizedMapAssembler(mesh, part, op, SHAPE, sensors)
    prior = build_prior(part.midpoints, 0.1, jitter=1e-6)
    weights = roi_weights(roi_mask(part))
    assert weights.sum() == 28  # guard against a vacuous all-zero ROI
    return part, asm, prior, weights


def scaled_stack(asm, design):
    return GAIN * asm.stack(design).matrix


def test_prior_diagonal_and_blocks():
    pts = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.25]])
    prior = build_prior(pts, 0.1, jitter=0.0)
    P = prior.matrix
    assert_allclose(np.diag(P), np.ones(6), rtol=0, atol=0)
    assert P[0, 1] == pytest.approx(np.exp(-0.5), abs=1e-15)  # distance = length scale
    assert np.all(P[:3, 3:] == 0.0)  # no cross-parameter correlation
    assert np.all(P[3:, :3] == 0.0)


def test_prior_scaling():
    pts = np.array([[0.0, 0.0], [0.3, 0.4]])
    prior = build_prior(pts, 0.1, std_lambda=2.0, std_mu=3.0, jitter=0.0)
    assert prior.matrix[0, 0] == 4.0
    assert prior.matrix[2, 2] == 9.0


def test_prior_invalid_length_scale():
    with pytest.raises(BayesError):
        build_prior(np.zeros((3, 2)), -1.0)


def test_prior_jitter_keeps_duplicates_factorizable():
    pts = np.array([[0.0, 0.0], [0.0, 0.0], [0.2, 0.2], [0.2, 0.2]])
    with pytest.raises(BayesError):
        build_prior(pts, 0.1, jitter=0.0)
    prior = build_prior(pts, 0.1, jitter=1e-6)
    np.linalg.cholesky(prior.matrix)


def test_posterior_with_zero_map(coarse):
    part, _, prior, _ = coarse
    n2 = prior.size
    F = np.zeros((12, n2))
    summary = posterior(F, prior, NOISE, measurements=np.zeros(12))
    assert_allclose(summary.covariance, prior.matrix, rtol=0, atol=0)
    assert_allclose(summary.mean, np.zeros(n2), rtol=0, atol=0)


def test_posterior_symmetry_and_ordering(coarse):
    _, asm, prior, _ = coarse
    F = scaled_stack(asm, [0.7, 2.1])
    cov = posterior(F, prior, NOISE).covariance
    assert np.max(np.abs(cov - cov.T)) <= 1e-12 * np.max(np.abs(cov))
    gap_eigs = np.linalg.eigvalsh(prior.matrix - cov)
    assert gap_eigs.min() >= -1e-10 * np.trace(prior.matrix)


def test_woodbury_equivalence(coarse):
    _, asm, prior, _ = coarse
    F = scaled_stack(asm, [0.7, 2.1])
    cov = posterior(F, prior, NOISE).covariance
    alt = woodbury_covariance(F, prior, NOISE)
    assert np.linalg.norm(cov - alt) <= 1e-8 * np.linalg.norm(cov)


def test_huge_noise_returns_prior(coarse):
    # uninformative-data limit; the gain on F shifts what counts as "huge"
    _, asm, prior, _ = coarse
    F = scaled_stack(asm, [0.7])
    cov = posterior(F, prior, 1e9 * GAIN**2).covariance
    assert np.max(np.abs(cov - prior.matrix)) <= 1e-6


def test_target_zero_map_equals_coefficient_count():
    pts = np.array([[0.0, 0.0], [0.2, 0.0], [0.0, 0.2], [0.2, 0.2]])
    prior = build_prior(pts, 0.1, jitter=0.0)  # exact unit diagonal
    phi = a_optimality_target(np.zeros((6, 8)), prior, NOISE)
    assert phi == 2 * 4


def test_trace_cyclic_identity(coarse):
    _, asm, prior, weights = coarse
    F = scaled_stack(asm, [0.7, 2.1])
    cov = posterior(F, prior, NOISE).covariance
    A = np.diag(weights)
    t1 = np.trace(A @ cov @ A.T)
    t2 = np.trace(cov @ A.T @ A)
    assert abs(t1 - t2) <= 1e-12 * abs(t1)
    assert abs(a_optimality_target(F, prior, NOISE, weights) - t1) <= 1e-12 * abs(t1)


def test_gradient_reduced_matches_expanded(coarse):
    _, asm, prior, weights = coarse
    design = np.array([0.7, 2.1, 3.3])
    F = scaled_stack(asm, design)
    dblocks = GAIN * asm.derivative_blocks(design)
    g1 = a_optimality_gradient(F, dblocks, prior, NOISE, weights)
    g2 = a_optimality_gradient_expanded(F, dblocks, prior, NOISE, weights)
    assert np.max(np.abs(g1 - g2)) <= 1e-12 * np.max(np.abs(g2))


def test_gradient_matches_finite_differences(coarse):
    _, asm, prior, weights = coarse
    rng = np.random.default_rng(5)
    for _ in range(3):
        design = rng.uniform(0.0, L, 3)
        F = scaled_stack(asm, design)
        dblocks = GAIN * asm.derivative_blocks(design)
        grad = a_optimality_gradient(F, dblocks, prior, NOISE, weights)
        h = 1e-4
        fd = np.empty(3)
        for k in range(3):
            shift = np.zeros(3)
            shift[k] = h
            up = a_optimality_target(scaled_stack(asm, design + shift), prior, NOISE, weights)
            dn = a_optimality_target(scaled_stack(asm, design - shift), prior, NOISE, weights)
            fd[k] = (up - dn) / (2 * h)
        assert np.linalg.norm(grad - fd) <= 1e-4 * np.linalg.norm(fd)


def test_gradient_symmetric_under_half_perimeter_rotation(coarse):
    # Mesh, clamps, sensors, partition and ROI are all invariant under the
    # 180-degree rotation t -> t + L/2, so a design closed under that map
    # has pairwise equal gradient components.
    _, asm, prior, weights = coarse
    p1, p2 = 0.63, 1.71
    design = np.array([p1, p1 + L / 2, p2, p2 + L / 2])
    F = scaled_stack(asm, design)
    dblocks = GAIN * asm.derivative_blocks(design)
    g = a_optimality_gradient(F, dblocks, prior, NOISE, weights)
    scale = np.abs(g).max()
    assert abs(g[0] - g[1]) <= 1e-6 * scale
    assert abs(g[2] - g[3]) <= 1e-6 * scale


def test_gradient_zero_for_frozen_blocks(coarse):
    _, asm, prior, weights = coarse
    design = np.array([0.7, 2.1])
    F = scaled_stack(asm, design)
    dblocks = np.zeros((2,) + asm.block(0.7).shape)
    assert_allclose(
        a_optimality_gradient(F, dblocks, prior, NOISE, weights), np.zeros(2), rtol=0, atol=0
    )


def test_information_monotonicity(coarse):
    _, asm, prior, weights = coarse
    rng = np.random.default_rng(9)
    for _ in range(5):
        design = rng.uniform(0.0, L, 3)
        extra = rng.uniform(0.0, L)
        phi = a_optimality_target(scaled_stack(asm, design), prior, NOISE, weights)
        phi_ext = a_optimality_target(
            scaled_stack(asm, np.append(design, extra)), prior, NOISE, weights
        )
        assert phi_ext <= phi + 1e-10


def test_posterior_mean_zero_measurements(coarse):
    _, asm, prior, _ = coarse
    F = scaled_stack(asm, [0.7])
    mean = posterior_mean(F, prior, NOISE, np.zeros(F.shape[0]))
    assert_allclose(mean, np.zeros(prior.size), rtol=0, atol=0)


def test_posterior_mean_linearity(coarse):
    _, asm, prior, _ = coarse
    F = scaled_stack(asm, [0.7, 1.9])
    rng = np.random.default_rng(2)
    y1, y2 = rng.standard_normal((2, F.shape[0]))
    m = posterior_mean(F, prior, NOISE, y1 + y2)
    m12 = posterior_mean(F, prior, NOISE, y1) + posterior_mean(F, prior, NOISE, y2)
    assert_allclose(m, m12, atol=1e-12 * np.max(np.abs(m)))


def test_posterior_mean_recovers_coefficients_in_low_noise_limit(coarse):
    # full-column-rank map (many activations vs few coefficients) with tiny
    # noise: the reconstruction approaches the true coefficient vector
    _, asm, prior, _ = coarse
    design = np.linspace(0.2, L - 0.2, 12)
    F = scaled_stack(asm, design)
    assert np.linalg.matrix_rank(F) == prior.size
    rng = np.random.default_rng(4)
    alpha = rng.standard_normal(prior.size)
    y = F @ alpha
    est = posterior_mean(F, prior, 1e-12, y)
    assert np.linalg.norm(est - alpha) <= 1e-3 * np.linalg.norm(alpha)
