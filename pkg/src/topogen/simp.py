"""SIMP compliance minimization with optimality-criteria updates.

Ground-truth generator for the dataset: density field of mean ``vf_target``
iterated with solve -> sensitivity -> radius filter -> OC update until the
largest density change drops below ``change_tol`` or ``max_iters`` is hit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import fem
from .domain import DesignDomain, ProblemSpec, as_density
from .errors import BisectionFailure

#: Density floor used only in the filter denominator; densities themselves
#: may legitimately sit at the OC lower clamp 0.
_FILTER_DENSITY_FLOOR = 1e-3


@dataclass(frozen=True)
class SimpConfig:
    """Optimizer settings. Defaults follow the dataset-generation protocol
    (penalty 2, filter radius 1.5); the classic benchmark value penal=3 is a
    caller choice."""

    penal: float = 2.0
    filter_radius: float = 1.5
    move_limit: float = 0.2
    oc_damping: float = 0.5
    max_iters: int = 100
    change_tol: float = 0.01
    vf_bisect_tol: float = 1e-4

    def __post_init__(self):
        if self.penal < 1.0:
            raise ValueError("penal must be >= 1")
        if self.filter_radius <= 0.0:
            raise ValueError("filter_radius must be positive")
        if not 0.0 < self.move_limit <= 1.0:
            raise ValueError("move_limit must be in (0, 1]")
        if not 0.0 < self.oc_damping <= 1.0:
            raise ValueError("oc_damping must be in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "penal": self.penal,
            "filter_radius": self.filter_radius,
            "move_limit": self.move_limit,
            "oc_damping": self.oc_damping,
            "max_iters": self.max_iters,
            "change_tol": self.change_tol,
            "vf_bisect_tol": self.vf_bisect_tol,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimpConfig":
        return cls(**d)


@dataclass
class OptimizationTrace:
    """Per-iteration record of one optimize() run."""

    compliances: list[float] = field(default_factory=list)
    volume_fractions: list[float] = field(default_factory=list)
    max_changes: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    final_compliance: float = float("nan")

    def rows(self) -> list[tuple[int, float, float, float]]:
        return list(zip(range(1, self.iterations + 1), self.compliances,
                        self.volume_fractions, self.max_changes))

    def export_text(self, path) -> None:
        """Delimited text (iteration, compliance, vf, change) for plotting."""
        with open(path, "w") as fh:
            fh.write("iteration\tcompliance\tvolume_fraction\tmax_change\n")
            for it, c, vf, ch in self.rows():
                fh.write(f"{it}\t{c!r}\t{vf!r}\t{ch!r}\n")


def sensitivity(density: np.ndarray, u: np.ndarray, domain: DesignDomain,
                penal: float) -> np.ndarray:
    """Compliance gradient dC/dy_e = -p y^(p-1) (E-Emin) u_e^T k0 u_e, <= 0."""
    y = as_density(density, domain)
    ce = fem.element_strain_energies(u, domain).reshape(y.shape)
    de = domain.youngs_modulus - domain.youngs_min
    return -penal * y ** (penal - 1.0) * de * ce


@lru_cache(maxsize=8)
def _filter_weights(nelx: int, nely: int, rmin: float) -> tuple[sp.csr_matrix, np.ndarray]:
    """Sparse weight matrix H with w = max(0, rmin - dist) and its row sums."""
    reach = int(np.ceil(rmin)) - 1
    rows, cols, vals = [], [], []
    for r in range(nely):
        for c in range(nelx):
            e = r * nelx + c
            for rr in range(max(r - reach, 0), min(r + reach + 1, nely)):
                for cc in range(max(c - reach, 0), min(c + reach + 1, nelx)):
                    w = rmin - np.sqrt((r - rr) ** 2 + (c - cc) ** 2)
                    if w > 0.0:
                        rows.append(e)
                        cols.append(rr * nelx + cc)
                        vals.append(w)
    h = sp.csr_matrix((vals, (rows, cols)), shape=(nelx * nely, nelx * nely))
    return h, np.asarray(h.sum(axis=1)).ravel()


def filter_sensitivity(dc: np.ndarray, density: np.ndarray, rmin: float) -> np.ndarray:
    """Radius-weighted sensitivity averaging (checkerboard suppression).

    dĉ_e = sum_i w_i y_i dc_i / (y_e sum_i w_i), w_i = max(0, rmin - dist).
    The denominator density is floored at 1e-3 to stay finite at void
    elements; a constant dc over constant density passes through unchanged.
    """
    dc = np.asarray(dc, dtype=np.float64)
    y = np.asarray(density, dtype=np.float64)
    nely, nelx = dc.shape
    h, h_sums = _filter_weights(nelx, nely, rmin)
    num = h @ (y.ravel() * dc.ravel())
    den = np.maximum(y.ravel(), _FILTER_DENSITY_FLOOR) * h_sums
    return (num / den).reshape(dc.shape)


def oc_update(density: np.ndarray, dc: np.ndarray, vf_target: float,
              config: SimpConfig) -> np.ndarray:
    """Optimality-criteria density update.

    Multiplicative step y*(-dc/lam)^eta clamped to the move limit and [0, 1],
    with the Lagrange multiplier bisected until the mean density meets
    ``vf_target`` within ``vf_bisect_tol``. The target must be reachable
    within the move envelope of ``density`` (always true inside optimize,
    which keeps the mean on target every iteration); otherwise the bracket
    cannot be established and BisectionFailure is raised.
    """
    y = np.asarray(density, dtype=np.float64)
    dc = np.asarray(dc, dtype=np.float64)
    if np.any(dc > 0.0):
        raise ValueError("dc must be <= 0 elementwise")
    if not np.any(dc < 0.0):
        raise BisectionFailure("dc is identically zero; no descent information")

    move, eta, tol = config.move_limit, config.oc_damping, config.vf_bisect_tol
    lo = np.maximum(y - move, 0.0)
    hi = np.minimum(y + move, 1.0)

    def candidate(lam: float) -> np.ndarray:
        return np.clip(y * (-dc / lam) ** eta, lo, hi)

    lam1, lam2 = 0.0, np.max(-dc)
    # Grow the upper bound until its candidate undershoots the target.
    for _ in range(200):
        if candidate(lam2).mean() < vf_target:
            break
        lam2 *= 2.0
    else:
        raise BisectionFailure("could not bracket the volume multiplier")

    y_new = candidate(lam2)
    for _ in range(200):
        lam_mid = 0.5 * (lam1 + lam2)
        y_new = candidate(lam_mid)
        vol = y_new.mean()
        if abs(vol - vf_target) <= tol:
            return y_new
        if vol > vf_target:
            lam1 = lam_mid
        else:
            lam2 = lam_mid
    raise BisectionFailure(
        f"bisection did not reach vf={vf_target} within tolerance {tol}"
    )


def optimize(spec: ProblemSpec, domain: DesignDomain,
             config: SimpConfig) -> tuple[np.ndarray, OptimizationTrace]:
    """Run SIMP from a uniform start at the target volume fraction.

    Returns the final density field and the iteration trace; the trace also
    carries the compliance of the returned field (one extra solve).
    """
    spec.validate(domain)
    y = np.full((domain.nely, domain.nelx), spec.vf_target)
    trace = OptimizationTrace()

    for _ in range(config.max_iters):
        u = fem.assemble_and_solve(y, spec, domain, config.penal)
        c = fem.compliance(y, u, domain, config.penal)
        dc = sensitivity(y, u, domain, config.penal)
        dc = filter_sensitivity(dc, y, config.filter_radius)
        y_new = oc_update(y, dc, spec.vf_target, config)
        change = float(np.abs(y_new - y).max())

        trace.iterations += 1
        trace.compliances.append(c)
        trace.volume_fractions.append(float(y_new.mean()))
        trace.max_changes.append(change)
        y = y_new
        if change < config.change_tol:
            trace.converged = True
            break

    u = fem.assemble_and_solve(y, spec, domain, config.penal)
    trace.final_compliance = fem.compliance(y, u, domain, config.penal)
    return y, trace
