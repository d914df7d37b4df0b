"""Landmark-constrained intensity registration.

Registers a subject image onto a reference grid by alternating three
steps on the split energy

    E(mu, nu, f) = int |grad nu|^2 + a int |nu|^2
                   + s int |nu - mu|^2 + b int (I_ref - I_subj o f)^2

with ``mu`` the Beltrami coefficient of the current map ``f``:

    (a) f-step: gradient descent on the intensity mismatch with bilinear
        interpolation of the subject image, then recompute and cap mu;
    (b) nu-step: screened-Poisson solve (-Lap + a + s) nu = s*mu on the
        vertex grid (5-point stencil, Neumann boundary), per component;
    (c) projection: Linear Beltrami Solver with identity boundary and the
        landmark vertices pinned to the subject landmark positions.

A backtracking guard on the descent step keeps the recorded energy trace
non-increasing (up to the relative tolerance); stalled iterations stop
the loop early.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import factorized

from . import kernels
from .beltrami import (
    BeltramiField,
    beltrami_of_map,
    beltrami_unchecked,
    clamp_magnitude,
    face_to_vertex,
    vertex_to_face,
)
from .errors import (
    InvalidInputError,
    InvalidLandmarkError,
    RegistrationFailureError,
)
from .grid import QCMap, TriGrid, build_grid
from .lbs import lbs_solve

__all__ = ["ImageGray", "RegParams", "RegResult", "register", "registration_energy"]

# mapped landmarks may deviate from their pins only through solver tolerance
LANDMARK_TOL = 0.5
# gradient-descent substeps per outer iteration
DESCENT_SUBSTEPS = 5
# screening length (pixels) of the nu-smoothing solve; irons point-pin
# spikes without erasing window-scale deformation structure
SMOOTH_LEN_PX = 3.0


@dataclass
class ImageGray:
    """Grayscale image sampled at grid vertices, intensities in [0, 1]."""

    width: int
    height: int
    intensities: np.ndarray  # (height, width) float64

    def __post_init__(self):
        self.intensities = np.asarray(self.intensities, dtype=np.float64)
        if self.intensities.shape != (self.height, self.width):
            raise InvalidInputError(
                f"intensity shape {self.intensities.shape} does not match "
                f"{self.height}x{self.width}"
            )
        if not np.all(np.isfinite(self.intensities)):
            raise InvalidInputError("image intensities must be finite")

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageGray":
        arr = np.asarray(arr, dtype=np.float64)
        return cls(width=arr.shape[1], height=arr.shape[0], intensities=arr)

    def normalized(self) -> np.ndarray:
        """Min-max normalization of the intensities to [0, 1]."""
        lo = self.intensities.min()
        hi = self.intensities.max()
        if hi > lo:
            return (self.intensities - lo) / (hi - lo)
        return np.zeros_like(self.intensities)


@dataclass
class RegParams:
    """Weights and iteration controls of the registration energy."""

    reg_alpha: float = 1.0  # int |nu|^2 weight
    reg_beta: float = 100.0  # intensity term weight
    reg_sigma: float = 10.0  # mu-nu coupling weight
    outer_iters: int = 30
    intensity_step: float = 0.5
    mu_cap: float = 0.99
    tol: float = 1e-6

    def __post_init__(self):
        if min(self.reg_alpha, self.reg_beta, self.reg_sigma) < 0:
            raise InvalidInputError("registration weights must be nonnegative")
        if not 0 < self.mu_cap < 1:
            raise InvalidInputError("mu_cap must lie in (0, 1)")
        if self.intensity_step <= 0 or self.tol <= 0:
            raise InvalidInputError("intensity_step and tol must be positive")


@dataclass
class RegResult:
    """Registration output: final map, its coefficient, and diagnostics."""

    map: QCMap
    mu: BeltramiField
    energy_trace: list
    landmark_residual: float
    coupling_gap: float  # final int |nu - mu|^2, Eq. splitting diagnostic


_HELMHOLTZ_CACHE = {}


def _helmholtz_solver(width, height, lap_weight, shift):
    """Prefactorized (-lap_weight*Lap + shift), 5-point Neumann stencil."""
    key = (width, height, float(lap_weight), float(shift))
    if key not in _HELMHOLTZ_CACHE:
        n = width * height
        idx = np.arange(n).reshape(height, width)
        rows = []
        cols = []
        deg = np.zeros(n)
        for a, b in ((idx[:, :-1], idx[:, 1:]), (idx[:-1, :], idx[1:, :])):
            a = a.ravel()
            b = b.ravel()
            rows.extend([a, b])
            cols.extend([b, a])
            np.add.at(deg, a, 1.0)
            np.add.at(deg, b, 1.0)
        rows = np.concatenate(rows + [np.arange(n)])
        cols = np.concatenate(cols + [np.arange(n)])
        vals = np.concatenate(
            [np.full(rows.size - n, -lap_weight), lap_weight * deg + shift]
        )
        mat = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()
        _HELMHOLTZ_CACHE[key] = factorized(mat)
    return _HELMHOLTZ_CACHE[key]


def _smooth_coefficient(mu_vertex, params):
    """nu-step: solve (-l^2 Lap + a + s) nu = s * mu per component.

    The Laplacian is scaled by the squared screening length so that nu is
    mu smoothed over ~SMOOTH_LEN_PX pixels and shrunk by s/(a+s).
    """
    height, width = mu_vertex.shape
    shift = params.reg_alpha + params.reg_sigma
    solve = _helmholtz_solver(width, height, SMOOTH_LEN_PX**2 * shift, shift)
    rhs = (params.reg_sigma * mu_vertex).ravel()
    nu = solve(np.ascontiguousarray(rhs.real)) + 1j * solve(
        np.ascontiguousarray(rhs.imag)
    )
    return nu.reshape(height, width)


def registration_energy(
    qcmap: QCMap,
    nu_vertex: np.ndarray,
    reference: ImageGray,
    subject: ImageGray,
    params: RegParams,
) -> float:
    """Discrete quadrature of the four-term split registration energy.

    ``nu_vertex`` is the smoothed coefficient as an (height, width) complex
    array; gradients are face-wise, vertex integrals use lumped areas, and
    the subject image is composed with the map by bilinear interpolation.
    The smoothness term carries the same squared screening length as the
    nu-step so the recorded energy is the one the iteration minimizes.
    """
    grid = qcmap.grid
    if nu_vertex.shape != (grid.height, grid.width):
        raise InvalidInputError("nu field shape does not match the grid")
    if (reference.width, reference.height) != (grid.width, grid.height) or (
        subject.width,
        subject.height,
    ) != (grid.width, grid.height):
        raise InvalidInputError("image dimensions do not match the grid")

    areas = grid.face_areas()
    vw = grid.vertex_areas()
    grad = grid.hat_gradients()
    nu_flat = nu_vertex.ravel()

    corner = nu_flat[grid.faces]
    nux = np.einsum("mi,mi->m", grad[:, 0, :], corner)
    nuy = np.einsum("mi,mi->m", grad[:, 1, :], corner)
    lap_w = SMOOTH_LEN_PX**2 * (params.reg_alpha + params.reg_sigma)
    e_smooth = lap_w * float(np.sum(areas * (np.abs(nux) ** 2 + np.abs(nuy) ** 2)))

    e_norm = float(np.sum(vw * np.abs(nu_flat) ** 2))

    mu_vertex = face_to_vertex(beltrami_unchecked(qcmap, params.mu_cap)).ravel()
    e_couple = float(np.sum(vw * np.abs(nu_flat - mu_vertex) ** 2))

    subj = subject.normalized()
    ref_flat = reference.normalized().ravel()
    warped = kernels.bilinear(subj, qcmap.targets[:, 0], qcmap.targets[:, 1])
    e_fit = float(np.sum(vw * (ref_flat - warped) ** 2))

    return (
        e_smooth
        + params.reg_alpha * e_norm
        + params.reg_sigma * e_couple
        + params.reg_beta * e_fit
    )


def _coupling_gap(qcmap, nu_vertex, params):
    grid = qcmap.grid
    vw = grid.vertex_areas()
    mu_vertex = face_to_vertex(beltrami_unchecked(qcmap, params.mu_cap)).ravel()
    return float(np.sum(vw * np.abs(nu_vertex.ravel() - mu_vertex) ** 2))


class _FoldedMap(Exception):
    pass


def _thin_plate_displacement(grid, centers, displacements):
    """Thin-plate-spline interpolation of landmark displacements.

    Returns an (n, 2) displacement for every grid vertex.  The r^2 log r
    kernel keeps gradients bounded at the centers (a harmonic point-pin
    interpolant would spike and fold there) and reproduces affine landmark
    motion exactly through its polynomial part.
    """
    k = centers.shape[0]
    if k == 0:
        return np.zeros((grid.n_vertices, 2))

    def kernel(d2):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 0.5 * d2 * np.log(d2)
        out[d2 == 0.0] = 0.0
        return out

    d2 = np.sum((centers[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    system = np.zeros((k + 3, k + 3))
    system[:k, :k] = kernel(d2)
    poly = np.column_stack([np.ones(k), centers])
    system[:k, k:] = poly
    system[k:, :k] = poly.T
    rhs = np.zeros((k + 3, 2))
    rhs[:k] = displacements
    coeff = np.linalg.solve(system, rhs)

    d2v = np.sum((grid.vertices[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    basis = np.column_stack([kernel(d2v), np.ones(grid.n_vertices), grid.vertices])
    return basis @ coeff


def _initial_map(grid, boundary_pins, lm_ids, snapped_pos, subj_lm, params):
    """Landmark-matching start map: thin-plate warp, then one projection.

    The TPS displacement is scaled down in stages if it folds; the final
    map always comes from the Linear Beltrami Solver so the boundary and
    landmark pins hold exactly.  Falls back to staged pin continuation
    when the projection of the TPS coefficient folds.
    """
    # anchor the spline with zero-displacement centers along the boundary so
    # the warm start already respects the identity frame
    ring = []
    for x in range(0, grid.width, max(2, grid.width // 8)):
        ring.append((x, 0))
        ring.append((x, grid.height - 1))
    for y in range(0, grid.height, max(2, grid.height // 8)):
        ring.append((0, y))
        ring.append((grid.width - 1, y))
    ring = np.array(sorted(set(ring)), dtype=np.float64)
    seen = {tuple(p) for p in ring}
    keep = np.array([tuple(p) not in seen for p in snapped_pos], dtype=bool)
    centers = np.vstack([snapped_pos[keep], ring])
    disp = np.vstack([(subj_lm - snapped_pos)[keep], np.zeros_like(ring)])
    tps = _thin_plate_displacement(grid, centers, disp)
    scale = 1.0
    warm = None
    for _ in range(6):
        guess = QCMap(grid, grid.vertices + scale * tps)
        if guess.is_orientation_preserving:
            warm = guess
            break
        scale *= 0.5
    if warm is not None:
        nu = _smooth_coefficient(
            face_to_vertex(beltrami_unchecked(warm, params.mu_cap)), params
        )
        field = BeltramiField(
            grid, clamp_magnitude(vertex_to_face(grid, nu), params.mu_cap)
        )
        pins = dict(boundary_pins)
        for vid, p in zip(lm_ids, subj_lm):
            pins[int(vid)] = (float(p[0]), float(p[1]))
        projected = lbs_solve(grid, field, sorted(pins.items()), x0=warm.targets)
        if projected.is_orientation_preserving:
            return projected

    # fallback: ramp the pins, carrying the smoothed coefficient forward
    stages = 2
    while stages <= 16:
        field = BeltramiField(grid, np.zeros(grid.n_faces, dtype=np.complex128))
        current = None
        try:
            for s in range(1, stages + 1):
                t = s / stages
                pins = dict(boundary_pins)
                inter = snapped_pos + t * (subj_lm - snapped_pos)
                for vid, p in zip(lm_ids, inter):
                    pins[int(vid)] = (float(p[0]), float(p[1]))
                cand = lbs_solve(
                    grid,
                    field,
                    sorted(pins.items()),
                    x0=None if current is None else current.targets,
                )
                if not cand.is_orientation_preserving:
                    raise _FoldedMap
                current = cand
                nu = _smooth_coefficient(
                    face_to_vertex(beltrami_unchecked(cand, params.mu_cap)), params
                )
                field = BeltramiField(
                    grid, clamp_magnitude(vertex_to_face(grid, nu), params.mu_cap)
                )
            return current
        except _FoldedMap:
            stages *= 2
    raise RegistrationFailureError(
        "initial landmark-matching map folds even under staged continuation"
    )


def _snap_landmarks(grid, positions, what):
    pos = np.asarray(positions, dtype=np.float64)
    if pos.ndim != 2 or pos.shape[1] != 2:
        raise InvalidLandmarkError(f"{what} landmarks must be (k, 2) positions")
    if not np.all(np.isfinite(pos)):
        raise InvalidLandmarkError(f"{what} landmarks must be finite")
    if (
        pos[:, 0].min() < 0
        or pos[:, 0].max() > grid.width - 1
        or pos[:, 1].min() < 0
        or pos[:, 1].max() > grid.height - 1
    ):
        raise InvalidLandmarkError(f"{what} landmark outside the image domain")
    ids = np.rint(pos[:, 1]) * grid.width + np.rint(pos[:, 0])
    return ids.astype(np.int64)


def register(
    reference: ImageGray,
    subject: ImageGray,
    ref_landmarks: np.ndarray,
    subj_landmarks: np.ndarray,
    params: RegParams = None,
) -> RegResult:
    """Register ``subject`` onto the grid of ``reference``.

    ``ref_landmarks`` are snapped to the nearest grid vertex and pinned
    exactly to the matching ``subj_landmarks`` positions; all boundary
    vertices are pinned to the identity.  Returns the final map, its
    Beltrami coefficient, the (non-increasing) energy trace, and the
    landmark residual in pixels.
    """
    if params is None:
        params = RegParams()
    if (reference.width, reference.height) != (subject.width, subject.height):
        raise InvalidInputError("reference and subject dimensions differ")
    ref_lm = np.asarray(ref_landmarks, dtype=np.float64)
    subj_lm = np.asarray(subj_landmarks, dtype=np.float64)
    if ref_lm.shape != subj_lm.shape:
        raise InvalidLandmarkError("landmark lists must pair up one-to-one")

    grid = build_grid(reference.width, reference.height)
    lm_ids = _snap_landmarks(grid, ref_lm, "reference")
    _snap_landmarks(grid, subj_lm, "subject")  # bounds check only

    ref_img = reference.normalized()
    subj_img = subject.normalized()
    ref_flat = ref_img.ravel()
    grad_x = np.gradient(subj_img, axis=1)
    grad_y = np.gradient(subj_img, axis=0)

    boundary_pins = {
        int(i): tuple(grid.vertices[i]) for i in grid.boundary_vertex_ids()
    }
    pins = dict(boundary_pins)
    for vid, p in zip(lm_ids, subj_lm):
        pins[int(vid)] = (float(p[0]), float(p[1]))  # landmark overrides identity
    constraints = sorted(pins.items())

    current = _initial_map(
        grid, boundary_pins, lm_ids, grid.vertices[lm_ids], subj_lm, params
    )
    nu_vertex = _smooth_coefficient(
        face_to_vertex(beltrami_unchecked(current, params.mu_cap)), params
    )
    trace = [registration_energy(current, nu_vertex, reference, subject, params)]

    for _ in range(params.outer_iters):
        step = params.intensity_step
        accepted = None
        for attempt in range(4):
            if attempt == 3:
                step = 0.0  # pure nu-smoothing and projection, no descent
            targets = current.targets.copy()
            if step > 0.0:
                for _sub in range(DESCENT_SUBSTEPS):
                    vals = kernels.bilinear(subj_img, targets[:, 0], targets[:, 1])
                    gxs = kernels.bilinear(grad_x, targets[:, 0], targets[:, 1])
                    gys = kernels.bilinear(grad_y, targets[:, 0], targets[:, 1])
                    resid = vals - ref_flat
                    # normalized (demons-style) gradient step, at most ~step px
                    coef = step * resid / (gxs * gxs + gys * gys + resid * resid + 1e-12)
                    targets[:, 0] -= coef * gxs
                    targets[:, 1] -= coef * gys
            mu_capped = beltrami_unchecked(QCMap(grid, targets), params.mu_cap)
            nu_new = _smooth_coefficient(face_to_vertex(mu_capped), params)
            nu_face = BeltramiField(
                grid, clamp_magnitude(vertex_to_face(grid, nu_new), params.mu_cap)
            )
            projected = lbs_solve(grid, nu_face, constraints, x0=current.targets)
            energy = registration_energy(projected, nu_new, reference, subject, params)
            decreased = energy <= trace[-1] * (1.0 + params.tol) + 1e-15
            if decreased and projected.is_orientation_preserving:
                accepted = (projected, nu_new, energy)
                break
            step *= 0.5  # folded or increased: damp the descent and retry
        if accepted is None:
            break  # stalled; the last accepted state is returned
        current, nu_vertex, energy = accepted
        previous = trace[-1]
        trace.append(energy)
        if previous > 0 and (previous - energy) / previous < params.tol:
            break

    mu_final = beltrami_of_map(current)
    residual = float(
        np.max(np.linalg.norm(current.targets[lm_ids] - subj_lm, axis=1))
        if lm_ids.size
        else 0.0
    )
    if residual > LANDMARK_TOL:
        raise RegistrationFailureError(
            f"landmark residual {residual:.3g} px exceeds {LANDMARK_TOL} px"
        )
    return RegResult(
        map=current,
        mu=mu_final,
        energy_trace=trace,
        landmark_residual=residual,
        coupling_gap=_coupling_gap(current, nu_vertex, params),
    )
