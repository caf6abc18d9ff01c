"""Vector P2 finite elements for plane isotropic linear elasticity.

The bilinear form is ``2*mu <sym grad w, sym grad v> + lambda (div w)(div v)``
with homogeneous Dirichlet data on the clamped boundary segments and traction
data on the rest.  Stiffness integrands are quadratic per element, integrated
exactly with a degree-5 seven-point triangle rule; boundary loads use a
four-point Gauss rule per edge in the boundary's arclength measure.

Dirichlet constraints are imposed by row/column elimination, so constrained
coefficients are exactly zero.  The factorization of the constrained matrix
is computed once and reused for every load.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .meshing import Mesh, SubdomainPartition

__all__ = [
    "FemError",
    "LameBackground",
    "StiffnessOperator",
    "assemble_stiffness",
    "assemble_perturbed_stiffness",
    "assemble_load",
    "element_strains",
    "bilinear_eval",
    "subdomain_bilinear",
]


class FemError(RuntimeError):
    """Raised for solver configuration failures (singular operator, bad data)."""


@dataclass(frozen=True)
class LameBackground:
    """Spatially constant background Lame pair (lambda0, mu0), both positive."""

    lambda0: float
    mu0: float

    def __post_init__(self):
        if not (self.lambda0 > 0 and self.mu0 > 0):
            raise FemError(
                f"Lame parameters must be positive, got ({self.lambda0}, {self.mu0})"
            )


# Degree-5 seven-point rule on the reference triangle (barycentric weights sum to 1).
_S15 = np.sqrt(15.0)
_QA = (6.0 + _S15) / 21.0
_QB = (6.0 - _S15) / 21.0
_TRI_QP = np.array(
    [
        [1.0 / 3.0, 1.0 / 3.0],
        [_QA, _QA],
        [1.0 - 2.0 * _QA, _QA],
        [_QA, 1.0 - 2.0 * _QA],
        [_QB, _QB],
        [1.0 - 2.0 * _QB, _QB],
        [_QB, 1.0 - 2.0 * _QB],
    ]
)
_TRI_QW = np.array(
    [9.0 / 40.0]
    + [(155.0 + _S15) / 1200.0] * 3
    + [(155.0 - _S15) / 1200.0] * 3
)

# Four-point Gauss rule mapped to [0, 1].
_gx, _gw = np.polynomial.legendre.leggauss(4)
_EDGE_QP = 0.5 * (_gx + 1.0)
_EDGE_QW = 0.5 * _gw


def _p2_reference_gradients() -> np.ndarray:
    """Gradients of the six P2 shape functions at the quadrature points, (7, 6, 2)."""
    xi = _TRI_QP[:, 0]
    eta = _TRI_QP[:, 1]
    z = np.zeros_like(xi)
    dxi = np.stack(
        [
            4.0 * (xi + eta) - 3.0,
            4.0 * xi - 1.0,
            z,
            4.0 * (1.0 - 2.0 * xi - eta),
            4.0 * eta,
            -4.0 * eta,
        ],
        axis=1,
    )
    deta = np.stack(
        [
            4.0 * (xi + eta) - 3.0,
            z,
            4.0 * eta - 1.0,
            -4.0 * xi,
            4.0 * xi,
            4.0 * (1.0 - xi - 2.0 * eta),
        ],
        axis=1,
    )
    return np.stack([dxi, deta], axis=2)


_DREF = _p2_reference_gradients()


def _edge_trace(s: np.ndarray) -> np.ndarray:
    """P2 trace shape functions (endpoint, endpoint, midside) at edge coords s."""
    return np.stack([(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)], axis=1)


@dataclass
class ElementTables:
    """Per-element quadrature data shared by assembly and bilinear evaluation."""

    dof_map: np.ndarray  # (ne, 12) interleaved dof indices
    strain_op: np.ndarray  # (ne, 7, 3, 12) rows: eps_xx, eps_yy, gamma_xy
    weights: np.ndarray  # (ne, 7) quadrature weight times |det J|


def element_tables(mesh: Mesh) -> ElementTables:
    """Build (and cache on the mesh) the strain-displacement tables."""
    cached = mesh._cache.get("tables")
    if cached is not None:
        return cached

    tri = mesh.triangles
    v0 = mesh.vertices[tri[:, 0]]
    v1 = mesh.vertices[tri[:, 1]]
    v2 = mesh.vertices[tri[:, 2]]
    jac = np.stack([v1 - v0, v2 - v0], axis=2)  # (ne, 2, 2), columns are edges
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv_t = np.empty_like(jac)  # J^{-T}
    inv_t[:, 0, 0] = jac[:, 1, 1]
    inv_t[:, 0, 1] = -jac[:, 1, 0]
    inv_t[:, 1, 0] = -jac[:, 0, 1]
    inv_t[:, 1, 1] = jac[:, 0, 0]
    inv_t /= det[:, None, None]

    grads = np.einsum("eab,qib->eqia", inv_t, _DREF)  # (ne, 7, 6, 2)

    ne = tri.shape[0]
    strain = np.zeros((ne, 7, 3, 12))
    strain[:, :, 0, 0::2] = grads[..., 0]  # eps_xx from x-displacements
    strain[:, :, 1, 1::2] = grads[..., 1]  # eps_yy from y-displacements
    strain[:, :, 2, 0::2] = grads[..., 1]  # gamma_xy
    strain[:, :, 2, 1::2] = grads[..., 0]

    dof_map = np.empty((ne, 12), dtype=np.int64)
    dof_map[:, 0::2] = 2 * mesh.tri_nodes
    dof_map[:, 1::2] = 2 * mesh.tri_nodes + 1

    tables = ElementTables(
        dof_map=dof_map,
        strain_op=strain,
        # barycentric weights sum to one; element area is |det J| / 2
        weights=_TRI_QW[None, :] * (0.5 * np.abs(det))[:, None],
    )
    mesh._cache["tables"] = tables
    return tables


def _dirichlet_dofs(mesh: Mesh) -> np.ndarray:
    nodes = mesh.dirichlet_nodes
    return np.concatenate([2 * nodes, 2 * nodes + 1])


def _assemble_matrix(mesh: Mesh, lam_el: np.ndarray, mu_el: np.ndarray) -> sp.csr_matrix:
    """Global stiffness for per-element Lame coefficient arrays."""
    tables = element_tables(mesh)
    ne = mesh.n_elements
    dmat = np.zeros((ne, 3, 3))
    dmat[:, 0, 0] = lam_el + 2 * mu_el
    dmat[:, 1, 1] = lam_el + 2 * mu_el
    dmat[:, 0, 1] = lam_el
    dmat[:, 1, 0] = lam_el
    dmat[:, 2, 2] = mu_el

    ke = np.einsum(
        "eq,eqri,ers,eqsj->eij",
        tables.weights,
        tables.strain_op,
        dmat,
        tables.strain_op,
        optimize=True,
    )
    rows = np.repeat(tables.dof_map, 12, axis=1).ravel()
    cols = np.tile(tables.dof_map, (1, 12)).ravel()
    mat = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(mesh.n_dofs, mesh.n_dofs))
    return mat.tocsr()


class StiffnessOperator:
    """Assembled stiffness with its constrained factorization.

    The full matrix is kept for residual checks and bilinear products; solves
    run on the Dirichlet-eliminated block, factorized lazily and then reused
    (read-only, safe to share across threads once built).
    """

    def __init__(self, mesh: Mesh, lame: LameBackground, matrix: sp.csr_matrix):
        self.mesh = mesh
        self.lame = lame
        self.matrix = matrix
        free = np.ones(mesh.n_dofs, dtype=bool)
        free[_dirichlet_dofs(mesh)] = False
        self.free = free
        self._solver = None

    def _factorize(self):
        if self._solver is None:
            kff = self.matrix[self.free][:, self.free].tocsc()
            try:
                # Symmetric mode with diagonal pivots: valid because the
                # constrained block is positive definite, and it makes the
                # U diagonal a positivity certificate.
                solver = spla.splu(
                    kff,
                    permc_spec="MMD_AT_PLUS_A",
                    diag_pivot_thresh=0.0,
                    options=dict(SymmetricMode=True),
                )
            except RuntimeError as exc:
                raise FemError(
                    f"stiffness factorization failed ({exc}); empty Dirichlet set?"
                ) from exc
            diag = solver.U.diagonal()
            if not np.all(np.isfinite(diag)) or np.min(diag) <= 0.0:
                raise FemError(
                    "stiffness factorization has nonpositive pivots; "
                    "the operator is not positive definite (empty Dirichlet set?)"
                )
            self._solver = solver
        return self._solver

    @property
    def factor_diagonal(self) -> np.ndarray:
        """Diagonal of the U factor; all positive for a positive definite block."""
        return self._factorize().U.diagonal()

    def solve(self, load: np.ndarray) -> np.ndarray:
        """Displacement coefficients for one load vector or a stack of them.

        Accepts (ndofs,) or (ndofs, m); constrained entries of the result are
        exactly zero.
        """
        solver = self._factorize()
        single = load.ndim == 1
        rhs = load[:, None] if single else load
        sol = np.zeros_like(rhs)
        sol[self.free] = solver.solve(np.ascontiguousarray(rhs[self.free]))
        return sol[:, 0] if single else sol

    def residual(self, u: np.ndarray, load: np.ndarray) -> float:
        """Constrained-space residual norm ||K u - f|| over free dofs."""
        res = self.matrix @ u - load
        return float(np.linalg.norm(res[self.free]))


def assemble_stiffness(mesh: Mesh, lame: LameBackground) -> StiffnessOperator:
    """Stiffness operator for a constant background Lame pair."""
    ne = mesh.n_elements
    lam = np.full(ne, float(lame.lambda0))
    mu = np.full(ne, float(lame.mu0))
    return StiffnessOperator(mesh, lame, _assemble_matrix(mesh, lam, mu))


def assemble_perturbed_stiffness(
    mesh: Mesh,
    lame: LameBackground,
    partition: SubdomainPartition,
    lam_coeff: np.ndarray,
    mu_coeff: np.ndarray,
) -> StiffnessOperator:
    """Stiffness with piecewise-constant subdomain perturbations added to the
    background; used by linearization checks, not by the design loop."""
    lam = lame.lambda0 + np.asarray(lam_coeff)[partition.labels]
    mu = lame.mu0 + np.asarray(mu_coeff)[partition.labels]
    if np.any(lam <= 0) or np.any(mu <= 0):
        raise FemError("perturbed Lame coefficients must stay positive")
    return StiffnessOperator(mesh, lame, _assemble_matrix(mesh, lam, mu))


def assemble_load(mesh: Mesh, boundary_field, include_dirichlet: bool = False) -> np.ndarray:
    """Right-hand side for a traction given as a field over arclength.

    ``boundary_field(t)`` must return the traction vector at arclength ``t``,
    vectorized to shape (..., 2).  Integration runs edge by edge in the
    arclength measure with the edge's P2 trace; contributions of clamped
    edges are dropped and constrained entries zeroed unless
    ``include_dirichlet`` is set.
    """
    sel = slice(None) if include_dirichlet else ~mesh.boundary_dirichlet
    edges = mesh.boundary_edges[sel]
    mids = mesh.boundary_mid[sel]
    arc = mesh.boundary_arc[sel]

    t0, t1 = arc[:, 0], arc[:, 1]
    lengths = t1 - t0
    tq = t0[:, None] + _EDGE_QP[None, :] * lengths[:, None]  # (nbe, 4)
    g = np.asarray(boundary_field(tq))  # (nbe, 4, 2)
    shapes = _edge_trace(_EDGE_QP)  # (4, 3)
    contrib = np.einsum("g,egc,gn->enc", _EDGE_QW, g, shapes) * lengths[:, None, None]

    f = np.zeros(mesh.n_dofs)
    edge_nodes = np.column_stack([edges, mids])  # (nbe, 3)
    for c in (0, 1):
        np.add.at(f, 2 * edge_nodes + c, contrib[:, :, c])
    if not include_dirichlet:
        f[_dirichlet_dofs(mesh)] = 0.0
    return f


def element_strains(mesh: Mesh, coeffs: np.ndarray):
    """Engineering strains of one or more fields at all quadrature points.

    ``coeffs`` is (ndofs,) or (ndofs, nf); returns (nf, ne, 7, 3) with rows
    eps_xx, eps_yy, gamma_xy.
    """
    tables = element_tables(mesh)
    single = coeffs.ndim == 1
    u = coeffs[:, None] if single else coeffs
    ue = u[tables.dof_map]  # (ne, 12, nf)
    eps = np.einsum("eqri,eif->feqr", tables.strain_op, ue)
    return eps


def bilinear_eval(
    mesh: Mesh,
    partition: SubdomainPartition,
    component: tuple[int, str],
    u: np.ndarray,
    v: np.ndarray,
) -> float:
    """Perturbation bilinear form of two fields for one subdomain component.

    ``component`` is (subdomain index, "lambda" | "mu"): the integral over
    that subdomain's elements of (div u)(div v), respectively
    2 sym-grad(u) : sym-grad(v).
    """
    n, kind = component
    els = partition.elements(n)
    eps_u = element_strains(mesh, u)[0][els]
    eps_v = element_strains(mesh, v)[0][els]
    w = element_tables(mesh).weights[els]
    mu_density = (
        2.0 * eps_u[..., 0] * eps_v[..., 0]
        + 2.0 * eps_u[..., 1] * eps_v[..., 1]
        + eps_u[..., 2] * eps_v[..., 2]
    )
    div = (eps_u[..., 0] + eps_u[..., 1]) * (eps_v[..., 0] + eps_v[..., 1])
    if kind == "mu":
        return float(np.sum(w * mu_density))
    if kind == "lambda":
        return float(np.sum(w * div))
    raise ValueError(f"component kind must be 'lambda' or 'mu', got {kind!r}")


def subdomain_bilinear(
    mesh: Mesh, partition: SubdomainPartition, eps_u: np.ndarray, eps_v: np.ndarray
):
    """All-subdomain bilinear values of two strain tables, (N,) lambda and mu.

    ``eps_u``/``eps_v`` are single-field tables (ne, 7, 3).
    """
    w = element_tables(mesh).weights
    mu_density = (
        2.0 * eps_u[..., 0] * eps_v[..., 0]
        + 2.0 * eps_u[..., 1] * eps_v[..., 1]
        + eps_u[..., 2] * eps_v[..., 2]
    )
    div = (eps_u[..., 0] + eps_u[..., 1]) * (eps_v[..., 0] + eps_v[..., 1])
    mu_el = np.sum(w * mu_density, axis=1)
    lam_el = np.sum(w * div, axis=1)
    n = partition.count
    return (
        np.bincount(partition.labels, weights=lam_el, minlength=n),
        np.bincount(partition.labels, weights=mu_el, minlength=n),
    )
