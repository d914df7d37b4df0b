"""Linear Beltrami Solver.

Reconstructs a piecewise-linear map from a prescribed per-face Beltrami
coefficient under point constraints.  Writing ``mu = rho + i*tau``, each
coordinate of the map satisfies the generalized Laplace equation
``div(A grad u) = 0`` with the per-face diffusion tensor

    A = [[a1, a2], [a2, a3]],
    a1 = ((rho-1)^2 + tau^2) / (1 - rho^2 - tau^2)
    a2 = -2*tau / (1 - rho^2 - tau^2)
    a3 = ((1+rho)^2 + tau^2) / (1 - rho^2 - tau^2)

discretized with linear finite elements on the triangulated grid.  The
constrained systems are symmetric positive-definite and solved by
Jacobi-preconditioned conjugate gradients.

Two boundary treatments are provided:

* ``lbs_solve`` -- every boundary vertex carries a full Dirichlet pin
  (identity when registering whole images), plus optional interior pins.
  Exact point constraints, used for landmark projection.
* ``lbs_solve_sliding`` -- rectangle normalization for prescribing ``mu``
  with no map given: vertical edges are pinned in x only and horizontal
  edges in y only, the tangential coordinate sliding freely through the
  FEM natural boundary condition.  Full Dirichlet data is generally
  incompatible with an arbitrary coefficient field; the sliding map's
  boundary trace is compatible up to discretization error.
"""

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg

from .beltrami import BeltramiField, clamp_magnitude
from .errors import InvalidConstraintError, SolverFailureError
from .grid import QCMap, TriGrid

__all__ = [
    "lbs_solve",
    "lbs_solve_sliding",
    "diffusion_tensors",
    "assemble_stiffness",
]

# ellipticity margin: |mu| is clamped to 1 - MU_EPS before assembly
MU_EPS = 1e-2
CG_RTOL = 1e-10


def diffusion_tensors(mu: np.ndarray) -> np.ndarray:
    """Per-face 2x2 diffusion tensors (unit determinant, SPD for |mu|<1)."""
    rho = mu.real
    tau = mu.imag
    denom = 1.0 - rho * rho - tau * tau
    a1 = ((rho - 1.0) ** 2 + tau * tau) / denom
    a2 = -2.0 * tau / denom
    a3 = ((1.0 + rho) ** 2 + tau * tau) / denom
    tensors = np.empty((mu.shape[0], 2, 2))
    tensors[:, 0, 0] = a1
    tensors[:, 0, 1] = a2
    tensors[:, 1, 0] = a2
    tensors[:, 1, 1] = a3
    return tensors


def assemble_stiffness(grid: TriGrid, mu: np.ndarray) -> sparse.csr_matrix:
    """Assemble the P1 stiffness matrix of ``div(A grad u) = 0``."""
    grad = grid.hat_gradients()  # (m, 2, 3)
    areas = grid.face_areas()
    tensors = diffusion_tensors(mu)
    ag = np.einsum("mkl,mli->mki", tensors, grad)
    local = np.einsum("mki,mkj->mij", grad, ag) * areas[:, None, None]
    rows = np.repeat(grid.faces, 3, axis=1).ravel()
    cols = np.tile(grid.faces, (1, 3)).ravel()
    mat = sparse.coo_matrix(
        (local.ravel(), (rows, cols)),
        shape=(grid.n_vertices, grid.n_vertices),
    )
    return mat.tocsr()


def _solve_component(stiffness, dir_ids, dir_vals, n, x0=None):
    """Solve one coordinate with Dirichlet pins eliminated exactly."""
    fixed = np.zeros(n, dtype=bool)
    fixed[dir_ids] = True
    free = np.flatnonzero(~fixed)
    out = np.empty(n)
    out[dir_ids] = dir_vals
    if free.size == 0:
        return out
    k_ff = stiffness[free][:, free]
    k_fc = stiffness[free][:, dir_ids]
    diag = k_ff.diagonal()
    if np.any(diag <= 0) or not np.all(np.isfinite(k_ff.data)):
        raise SolverFailureError("stiffness matrix lost positive-definiteness")
    sol, info = cg(
        k_ff,
        -k_fc @ dir_vals,
        x0=None if x0 is None else x0[free],
        rtol=CG_RTOL,
        atol=0.0,
        maxiter=10 * n,
        M=sparse.diags(1.0 / diag),
    )
    if info != 0:
        raise SolverFailureError(f"conjugate gradient did not converge (info={info})")
    out[free] = sol
    return out


def lbs_solve(
    grid: TriGrid,
    mu: BeltramiField,
    constraints: list,
    x0: np.ndarray = None,
) -> QCMap:
    """Map with prescribed Beltrami coefficient under exact point constraints.

    ``constraints`` is a sequence of ``(vertex_id, (x, y))`` pairs and must
    cover every boundary vertex; interior pins (landmarks) are optional.
    ``x0`` optionally warm-starts the iterative solver with the targets of
    a previous solution.
    """
    ids = np.array([int(c[0]) for c in constraints], dtype=np.int64)
    pos = np.array([c[1] for c in constraints], dtype=np.float64)
    if ids.size == 0:
        raise InvalidConstraintError("at least the boundary must be constrained")
    if ids.min() < 0 or ids.max() >= grid.n_vertices:
        bad = ids[(ids < 0) | (ids >= grid.n_vertices)]
        raise InvalidConstraintError(f"constraint vertex ids out of range: {bad[:8]}")
    if np.unique(ids).size != ids.size:
        raise InvalidConstraintError("duplicate constraint vertex ids")
    if not np.all(np.isfinite(pos)):
        raise InvalidConstraintError("constraint positions must be finite")
    missing = np.setdiff1d(grid.boundary_vertex_ids(), ids, assume_unique=False)
    if missing.size:
        raise InvalidConstraintError(
            f"{missing.size} boundary vertices are unconstrained"
        )

    values = clamp_magnitude(mu.values, 1.0 - MU_EPS)
    stiffness = assemble_stiffness(grid, values)
    n = grid.n_vertices
    targets = np.empty((n, 2))
    for axis in range(2):
        targets[:, axis] = _solve_component(
            stiffness,
            ids,
            pos[:, axis],
            n,
            x0=None if x0 is None else x0[:, axis],
        )
    return QCMap(grid=grid, targets=targets)


def lbs_solve_sliding(grid: TriGrid, mu: BeltramiField) -> QCMap:
    """Rectangle-normalized map with prescribed Beltrami coefficient.

    Pins the x coordinate on the vertical edges and the y coordinate on the
    horizontal edges (corners fully pinned); the remaining boundary motion
    is tangential sliding via the natural boundary condition.
    """
    values = clamp_magnitude(mu.values, 1.0 - MU_EPS)
    stiffness = assemble_stiffness(grid, values)
    x = grid.vertices[:, 0]
    y = grid.vertices[:, 1]
    n = grid.n_vertices
    u_ids = np.flatnonzero((x == 0) | (x == grid.width - 1))
    v_ids = np.flatnonzero((y == 0) | (y == grid.height - 1))
    targets = np.empty((n, 2))
    targets[:, 0] = _solve_component(stiffness, u_ids, x[u_ids], n)
    targets[:, 1] = _solve_component(stiffness, v_ids, y[v_ids], n)
    return QCMap(grid=grid, targets=targets)
