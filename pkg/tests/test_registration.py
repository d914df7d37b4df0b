import numpy as np
import pytest

from conftest import ring_landmarks, textured_image
from cephaloqc.errors import InvalidInputError, InvalidLandmarkError
from cephaloqc.grid import build_grid
from cephaloqc.kernels import bilinear
from cephaloqc.registration import (
    ImageGray,
    RegParams,
    register,
    registration_energy,
)


def warp_pair(n, seed=0):
    """Reference image plus a 0.2-anisotropy warped copy with landmarks."""
    ref = textured_image(n, seed)
    c = (n - 1) / 2.0
    lms = ring_landmarks(n)

    def fwd(p):
        return np.column_stack([c + 1.2 * (p[:, 0] - c), c + 0.8 * (p[:, 1] - c)])

    def inv(p):
        return np.column_stack([c + (p[:, 0] - c) / 1.2, c + (p[:, 1] - c) / 0.8])

    yy, xx = np.mgrid[0:n, 0:n].astype(float)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    src = inv(pts)
    subj = bilinear(ref, src[:, 0], src[:, 1]).reshape(n, n)
    return ref, subj, lms, fwd(lms), fwd


def test_self_registration_is_identity():
    n = 49
    img = textured_image(n)
    lms = ring_landmarks(n)
    res = register(ImageGray.from_array(img), ImageGray.from_array(img), lms, lms)
    assert np.abs(res.mu.values).max() < 1e-3
    assert res.landmark_residual < 1e-6
    assert res.map.is_orientation_preserving


def test_affine_warp_recovery():
    n = 65
    ref, subj, lms, subj_lms, _fwd = warp_pair(n)
    res = register(
        ImageGray.from_array(ref), ImageGray.from_array(subj), lms, subj_lms
    )
    g = build_grid(n, n)
    cen = g.vertices[g.faces].mean(axis=1)
    c = (n - 1) / 2.0
    hw = (n - 1) / 8.0
    interior = (np.abs(cen[:, 0] - c) <= hw) & (np.abs(cen[:, 1] - c) <= hw)
    err = np.abs(res.mu.values[interior] - 0.2)
    assert err.max() < 0.05
    assert res.landmark_residual < 0.5


def test_energy_trace_monotone_on_random_pairs():
    n = 33
    rng = np.random.default_rng(7)
    params = RegParams(outer_iters=8)
    for trial in range(20):
        ref = textured_image(n, seed=trial)
        lms = ring_landmarks(n)
        # random smooth small warp of the subject landmarks and image
        amp = rng.uniform(0.3, 1.2)
        phase = rng.uniform(0, 2 * np.pi, 2)

        def fwd(p):
            u = p / (n - 1)
            dx = amp * np.sin(2 * np.pi * u[:, 1] + phase[0])
            dy = amp * np.sin(2 * np.pi * u[:, 0] + phase[1])
            return p + np.column_stack([dx, dy])

        yy, xx = np.mgrid[0:n, 0:n].astype(float)
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        # cheap backward warp: subject sampled through the forward field
        subj = bilinear(ref, fwd(pts)[:, 0], fwd(pts)[:, 1]).reshape(n, n)
        subj_lms = np.clip(fwd(lms), 0, n - 1)
        res = register(
            ImageGray.from_array(ref), ImageGray.from_array(subj), lms, subj_lms,
            params,
        )
        trace = np.array(res.energy_trace)
        assert np.all(np.diff(trace) <= trace[:-1] * 1e-6 + 1e-15)
        assert res.map.is_orientation_preserving


def test_calibration_invariance_similarity_vs_anisotropy():
    n = 65
    ref = textured_image(n)
    lms = ring_landmarks(n)
    c = (n - 1) / 2.0

    theta, scale, shift = np.deg2rad(0.8), 1.004, np.array([0.4, -0.3])
    rot = np.array(
        [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
    )

    def sim_fwd(p):
        return (p - c) @ (scale * rot).T + c + shift

    def sim_inv(p):
        return (p - c - shift) @ np.linalg.inv(scale * rot).T + c

    yy, xx = np.mgrid[0:n, 0:n].astype(float)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    subj = bilinear(ref, sim_inv(pts)[:, 0], sim_inv(pts)[:, 1]).reshape(n, n)
    res_sim = register(
        ImageGray.from_array(ref), ImageGray.from_array(subj), lms, sim_fwd(lms)
    )
    sim_mu = np.abs(res_sim.mu.values).max()
    sim_norm = np.linalg.norm(sim_fwd(lms) - lms)

    # anisotropic warp (a local shear bump between two landmarks) scaled to
    # the same aggregate landmark displacement; the similarity spreads its
    # displacement uniformly, the shear concentrates it
    site = (lms[10] + lms[11]) / 2.0
    sigma = 4.0

    def shear_fwd(p, kappa):
        rel = p - site
        env = np.exp(-np.sum(rel**2, axis=1) / (2 * sigma**2))
        zc = rel[:, 0] + 1j * rel[:, 1]
        d = kappa * env * np.conj(zc)
        return p + np.column_stack([d.real, d.imag])

    kappa = sim_norm / np.linalg.norm(shear_fwd(lms, 1.0) - lms)
    q = pts.copy()
    for _ in range(40):  # fixed-point inversion of the forward warp
        q = pts - (shear_fwd(q, kappa) - q)
    subj2 = bilinear(ref, q[:, 0], q[:, 1]).reshape(n, n)
    moved = np.clip(shear_fwd(lms, kappa), 0, n - 1)
    res_aniso = register(
        ImageGray.from_array(ref), ImageGray.from_array(subj2), lms, moved
    )
    aniso_mu = np.abs(res_aniso.mu.values).max()
    assert np.linalg.norm(moved - lms) == pytest.approx(sim_norm, rel=0.01)
    assert sim_mu < 0.05
    assert aniso_mu >= 0.2


def test_energy_terms():
    n = 17
    img = ImageGray.from_array(textured_image(n))
    g = build_grid(n, n)
    from cephaloqc.grid import QCMap

    ident = QCMap(g, g.identity_targets())
    zero_nu = np.zeros((n, n), dtype=complex)
    params = RegParams()
    assert registration_energy(ident, zero_nu, img, img, params) == pytest.approx(0.0)

    # constant nu with sigma = 0: only the alpha term survives
    params0 = RegParams(reg_sigma=0.0)
    const = np.full((n, n), 0.3 + 0.2j)
    expected = params0.reg_alpha * abs(0.3 + 0.2j) ** 2 * (n - 1) ** 2
    got = registration_energy(ident, const, img, img, params0)
    assert got == pytest.approx(expected)

    # with the coupling on, the sigma term adds |nu - 0|^2 over the domain
    got2 = registration_energy(ident, const, img, img, RegParams(reg_sigma=2.0))
    expected2 = expected + 2.0 * abs(0.3 + 0.2j) ** 2 * (n - 1) ** 2
    assert got2 == pytest.approx(expected2)


def test_energy_matches_independent_quadrature():
    n = 13
    rng = np.random.default_rng(9)
    ref = ImageGray.from_array(rng.random((n, n)))
    subj = ImageGray.from_array(rng.random((n, n)))
    g = build_grid(n, n)
    from cephaloqc.grid import QCMap
    from cephaloqc.beltrami import beltrami_unchecked, face_to_vertex
    from cephaloqc.registration import SMOOTH_LEN_PX

    targets = g.identity_targets() + rng.normal(0, 0.2, (g.n_vertices, 2))
    qcmap = QCMap(g, targets)
    nu = rng.normal(size=(n, n)) * 0.1 + 1j * rng.normal(size=(n, n)) * 0.1
    params = RegParams()
    got = registration_energy(qcmap, nu, ref, subj, params)

    # independent re-implementation of the four quadratures
    areas = np.full(g.n_faces, 0.5)
    grad = g.hat_gradients()
    nu_flat = nu.ravel()
    smooth = 0.0
    for f in range(g.n_faces):
        corners = nu_flat[g.faces[f]]
        gx = grad[f, 0] @ corners
        gy = grad[f, 1] @ corners
        smooth += 0.5 * (abs(gx) ** 2 + abs(gy) ** 2)
    smooth *= SMOOTH_LEN_PX**2 * (params.reg_alpha + params.reg_sigma)
    vw = g.vertex_areas()
    alpha_term = params.reg_alpha * np.sum(vw * np.abs(nu_flat) ** 2)
    mu_v = face_to_vertex(beltrami_unchecked(qcmap, params.mu_cap)).ravel()
    sigma_term = params.reg_sigma * np.sum(vw * np.abs(nu_flat - mu_v) ** 2)
    subj_n = subj.normalized()
    ref_n = ref.normalized().ravel()
    warped = np.array(
        [
            bilinear(subj_n, np.array([t[0]]), np.array([t[1]]))[0]
            for t in targets
        ]
    )
    beta_term = params.reg_beta * np.sum(vw * (ref_n - warped) ** 2)
    expected = smooth + alpha_term + sigma_term + beta_term
    assert got == pytest.approx(expected, rel=1e-12)


def test_input_validation():
    img = ImageGray.from_array(np.zeros((9, 9)))
    other = ImageGray.from_array(np.zeros((8, 8)))
    lms = np.array([[4.0, 4.0]])
    with pytest.raises(InvalidInputError):
        register(img, other, lms, lms)
    with pytest.raises(InvalidLandmarkError):
        register(img, img, np.array([[20.0, 4.0]]), lms)
    with pytest.raises(InvalidLandmarkError):
        register(img, img, lms, np.array([[4.0, -1.0]]))
