"""Plane-stress finite elements on the square grid.

Bilinear quadrilaterals (Q4), 2x2 Gauss integration for stiffness, single
centroid evaluation for strains/stresses so each grid cell yields exactly one
field value. SIMP material interpolation::

    E_e = Emin + y_e**p * (E - Emin)

The element dof order for element (row r, col c) is counterclockwise in
physical (+x right, +y up) coordinates starting at the bottom-left corner:
``[bl_x, bl_y, br_x, br_y, tr_x, tr_y, tl_x, tl_y]``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import DesignDomain, ProblemSpec, as_density, load_components
from .errors import NonFiniteInput, ShapeMismatch, SingularSystem

#: Relative residual every accepted solve must satisfy.
RESIDUAL_RTOL = 1e-8

# Local node order (bl, br, tr, tl) in isoparametric coordinates.
_XI = np.array([-1.0, 1.0, 1.0, -1.0])
_ETA = np.array([-1.0, -1.0, 1.0, 1.0])


def _elasticity_matrix(poisson: float) -> np.ndarray:
    """Unit-modulus plane-stress constitutive matrix (engineering shear)."""
    nu = poisson
    return (1.0 / (1.0 - nu * nu)) * np.array([
        [1.0, nu, 0.0],
        [nu, 1.0, 0.0],
        [0.0, 0.0, (1.0 - nu) / 2.0],
    ])


def _b_matrix(xi: float, eta: float, h: float) -> np.ndarray:
    """Strain-displacement matrix (3x8) at a local point of an h x h element."""
    dn_dx = (2.0 / h) * 0.25 * _XI * (1.0 + eta * _ETA)
    dn_dy = (2.0 / h) * 0.25 * _ETA * (1.0 + xi * _XI)
    b = np.zeros((3, 8))
    b[0, 0::2] = dn_dx
    b[1, 1::2] = dn_dy
    b[2, 0::2] = dn_dy
    b[2, 1::2] = dn_dx
    return b


@lru_cache(maxsize=8)
def _unit_stiffness(poisson: float, element_size: float, thickness: float) -> np.ndarray:
    d = _elasticity_matrix(poisson)
    h = element_size
    gp = 1.0 / np.sqrt(3.0)
    k = np.zeros((8, 8))
    for xi in (-gp, gp):
        for eta in (-gp, gp):
            b = _b_matrix(xi, eta, h)
            k += thickness * (h * h / 4.0) * b.T @ d @ b
    return 0.5 * (k + k.T)  # exact symmetry despite summation roundoff


def element_stiffness(domain: DesignDomain) -> np.ndarray:
    """Unit-modulus Q4 element stiffness k0 (8x8, symmetric, rank 5)."""
    return _unit_stiffness(domain.poisson, domain.element_size, domain.thickness).copy()


@lru_cache(maxsize=8)
def _grid_tables(nelx: int, nely: int):
    """edof matrix (nel x 8) plus the coo index arrays for assembly.

    Elements are ordered row-major, e = r*nelx + c, matching the flattening
    of (nely, nelx) matrices.
    """
    ncols = nelx + 1
    r, c = np.divmod(np.arange(nelx * nely), nelx)
    bl = (r + 1) * ncols + c
    br = (r + 1) * ncols + c + 1
    tr = r * ncols + c + 1
    tl = r * ncols + c
    edof = np.column_stack([
        2 * bl, 2 * bl + 1, 2 * br, 2 * br + 1,
        2 * tr, 2 * tr + 1, 2 * tl, 2 * tl + 1,
    ]).astype(np.int64)
    i_idx = np.repeat(edof, 8, axis=1).ravel()
    j_idx = np.tile(edof, (1, 8)).ravel()
    return edof, i_idx, j_idx


def element_dofs(domain: DesignDomain) -> np.ndarray:
    return _grid_tables(domain.nelx, domain.nely)[0]


def _moduli(density: np.ndarray, domain: DesignDomain, penal: float) -> np.ndarray:
    e0, emin = domain.youngs_modulus, domain.youngs_min
    return emin + density.ravel() ** penal * (e0 - emin)


def assemble_stiffness(density: np.ndarray, domain: DesignDomain,
                       penal: float) -> sp.csc_matrix:
    """Global stiffness matrix for a density field (SIMP interpolation)."""
    y = np.asarray(density, dtype=np.float64)
    if y.shape != (domain.nely, domain.nelx):
        raise ShapeMismatch(f"density shape {y.shape} vs domain grid")
    if not np.all(np.isfinite(y)):
        raise NonFiniteInput("density contains NaN or inf")
    k0 = element_stiffness(domain)
    _, i_idx, j_idx = _grid_tables(domain.nelx, domain.nely)
    values = (k0.ravel()[None, :] * _moduli(y, domain, penal)[:, None]).ravel()
    n = domain.num_dofs
    return sp.coo_matrix((values, (i_idx, j_idx)), shape=(n, n)).tocsc()


def build_load_vector(spec: ProblemSpec, domain: DesignDomain) -> np.ndarray:
    """Nodal force vector for a point load."""
    f = np.zeros(domain.num_dofs)
    cx, cy = load_components(spec.load_angle)
    f[2 * spec.load_node] = cx * spec.load_magnitude
    f[2 * spec.load_node + 1] = cy * spec.load_magnitude
    return f


@dataclass(frozen=True)
class StiffnessSystem:
    """Assembled global system: symmetric K, force vector, constrained dofs."""

    stiffness: sp.csc_matrix
    force: np.ndarray
    fixed_dofs: np.ndarray


def assemble_system(density: np.ndarray, spec: ProblemSpec,
                    domain: DesignDomain, penal: float) -> StiffnessSystem:
    return StiffnessSystem(
        stiffness=assemble_stiffness(density, domain, penal),
        force=build_load_vector(spec, domain),
        fixed_dofs=spec.scenario.fixed_dofs(domain),
    )


def solve_constrained(k: sp.csc_matrix, f: np.ndarray,
                      fixed_dofs: np.ndarray) -> np.ndarray:
    """Solve KU=F with the given dofs eliminated (held at exactly zero).

    Raises SingularSystem when the factorization fails or the relative
    residual exceeds RESIDUAL_RTOL; both signal remaining rigid-body modes.
    """
    if not np.all(np.isfinite(f)):
        raise NonFiniteInput("force vector contains NaN or inf")
    n = k.shape[0]
    u = np.zeros(n)
    f_norm = np.linalg.norm(f)
    if f_norm == 0.0:
        return u
    free = np.setdiff1d(np.arange(n, dtype=np.int64), fixed_dofs,
                        assume_unique=False)
    k_red = k[free, :][:, free].tocsc()
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            # MMD_AT_PLUS_A suits the symmetric sparsity of elasticity grids
            # (about 1.5x faster than the COLAMD default here).
            lu = spla.splu(k_red, permc_spec="MMD_AT_PLUS_A")
            u_free = lu.solve(f[free])
        except (spla.MatrixRankWarning, RuntimeError) as exc:
            raise SingularSystem(
                "constrained stiffness is singular; scenario leaves rigid modes"
            ) from exc
    if not np.all(np.isfinite(u_free)):
        raise SingularSystem("solver returned non-finite displacements")
    u[free] = u_free
    # reactions live at the fixed dofs; the equilibrium residual is over free dofs
    residual = np.linalg.norm((k @ u - f)[free])
    if residual > RESIDUAL_RTOL * f_norm:
        raise SingularSystem(
            f"solve residual {residual:.3e} exceeds {RESIDUAL_RTOL:.0e}*|F|; "
            "system is numerically singular"
        )
    return u


def assemble_and_solve(density: np.ndarray, spec: ProblemSpec,
                       domain: DesignDomain, penal: float) -> np.ndarray:
    """Full pipeline: SIMP-interpolated assembly, constraint elimination, solve."""
    system = assemble_system(density, spec, domain, penal)
    return solve_constrained(system.stiffness, system.force, system.fixed_dofs)


def von_mises(s11, s22, s12):
    """Equivalent stress sqrt(s11^2 - s11*s22 + s22^2 + 3*s12^2)."""
    return np.sqrt(s11 * s11 - s11 * s22 + s22 * s22 + 3.0 * s12 * s12)


def strain_energy_density(s11, s22, s12, e11, e22, e12):
    """W = (s11*e11 + s22*e22 + 2*s12*e12) / 2 with tensor shear strain e12."""
    return 0.5 * (s11 * e11 + s22 * e22 + 2.0 * s12 * e12)


@dataclass(frozen=True)
class FieldBundle:
    """Element-centroid physical fields, each a (nely, nelx) matrix.

    ``e12`` is the tensor shear strain (half the engineering shear angle),
    matching the factor-2 convention in the energy density.
    """

    ux: np.ndarray
    uy: np.ndarray
    s11: np.ndarray
    s22: np.ndarray
    s12: np.ndarray
    e11: np.ndarray
    e22: np.ndarray
    e12: np.ndarray
    svm: np.ndarray
    w: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {
            "ux": self.ux, "uy": self.uy,
            "s11": self.s11, "s22": self.s22, "s12": self.s12,
            "e11": self.e11, "e22": self.e22, "e12": self.e12,
            "svm": self.svm, "w": self.w,
        }


def compute_fields(u: np.ndarray, density: np.ndarray, domain: DesignDomain,
                   penal: float = 1.0) -> FieldBundle:
    """Centroid strains/stresses, von Mises stress, and strain energy density.

    Stress uses the element's SIMP-penalized modulus. With the default
    full-density evaluation the choice of ``penal`` is immaterial.
    """
    y = as_density(density, domain)
    edof, _, _ = _grid_tables(domain.nelx, domain.nely)
    u_el = u[edof]                                   # (nel, 8)
    b0 = _b_matrix(0.0, 0.0, domain.element_size)
    strains = u_el @ b0.T                            # rows: e11, e22, gamma12
    d = _elasticity_matrix(domain.poisson)
    stresses = (strains @ d.T) * _moduli(y, domain, penal)[:, None]

    shape = (domain.nely, domain.nelx)
    e11 = strains[:, 0].reshape(shape)
    e22 = strains[:, 1].reshape(shape)
    e12 = (0.5 * strains[:, 2]).reshape(shape)       # tensor shear
    s11 = stresses[:, 0].reshape(shape)
    s22 = stresses[:, 1].reshape(shape)
    s12 = stresses[:, 2].reshape(shape)
    return FieldBundle(
        ux=u_el[:, 0::2].mean(axis=1).reshape(shape),
        uy=u_el[:, 1::2].mean(axis=1).reshape(shape),
        s11=s11, s22=s22, s12=s12,
        e11=e11, e22=e22, e12=e12,
        svm=von_mises(s11, s22, s12),
        w=strain_energy_density(s11, s22, s12, e11, e22, e12),
    )


def element_strain_energies(u: np.ndarray, domain: DesignDomain) -> np.ndarray:
    """Unit-modulus quadratic forms u_e^T k0 u_e, one per element (flat)."""
    edof, _, _ = _grid_tables(domain.nelx, domain.nely)
    u_el = u[edof]
    k0 = element_stiffness(domain)
    return np.einsum("ij,jk,ik->i", u_el, k0, u_el)


def compliance(density: np.ndarray, u: np.ndarray, domain: DesignDomain,
               penal: float) -> float:
    """Compliance U^T K U via the per-element energies.

    Uses the same interpolated modulus as the assembly, so the value equals
    F.U to solver precision; it differs from the bare sum of y^p terms only
    by the Emin floor (<= ~1e-9 relative for connected structures).
    """
    y = as_density(density, domain)
    ce = element_strain_energies(u, domain)
    return float(np.dot(_moduli(y, domain, penal), ce))


def dump_stiffness(k: sp.spmatrix, path) -> None:
    """Coordinate-triplet text dump (row col value per line)."""
    coo = k.tocoo()
    with open(path, "w") as fh:
        fh.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {float(v)!r}\n")


def dump_vector(u: np.ndarray, path) -> None:
    """Flat text dump, one value per line."""
    with open(path, "w") as fh:
        for v in u:
            fh.write(f"{float(v)!r}\n")
