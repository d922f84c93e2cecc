"""Grid geometry, boundary-condition scenarios, and their image encodings.

Conventions used throughout the package:

* Element matrices are ``(nely, nelx)``, row 0 = top of the domain, row-major
  (image layout). Physical axes: +x to the right, +y upward, so element row
  ``r`` spans heights ``[(nely-r-1)*h, (nely-r)*h]``.
* Nodes form a ``(nely+1) x (nelx+1)`` grid; node ``(i, j)`` (row i from the
  top, column j from the left) has id ``i*(nelx+1) + j`` and carries dofs
  ``2*id`` (ux) and ``2*id + 1`` (uy).
* Edge positions are parameterized by a fraction ``t`` in [0, 1]: top/bottom
  edges run left to right (``t = j/nelx``), left/right edges run top to
  bottom (``t = i/nely``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch

EDGES = ("left", "right", "top", "bottom")
FIXITIES = ("ux", "uy", "pin")

#: Admissible load angles, radians: k*pi/6 for k = 0..6.
LOAD_ANGLES = tuple(k * math.pi / 6.0 for k in range(7))

#: Admissible volume-fraction targets: 0.30, 0.32, ..., 0.50.
VF_GRID = tuple(float(np.round(0.30 + 0.02 * k, 2)) for k in range(11))

# cos/sin of k*pi/6 with the exact zeros/halves the float library misses
# (cos(pi/2) would otherwise be 6.1e-17 and leak into "all-zero" channels).
_COS_TABLE = (1.0, math.sqrt(3) / 2, 0.5, 0.0, -0.5, -math.sqrt(3) / 2, -1.0)
_SIN_TABLE = (0.0, 0.5, math.sqrt(3) / 2, 1.0, math.sqrt(3) / 2, 0.5, 0.0)


def load_components(angle: float) -> tuple[float, float]:
    """(cos, sin) of a load angle, exact on the k*pi/6 grid."""
    k = int(round(angle / (math.pi / 6.0)))
    if 0 <= k <= 6 and abs(angle - k * math.pi / 6.0) < 1e-12:
        return _COS_TABLE[k], _SIN_TABLE[k]
    return math.cos(angle), math.sin(angle)


@dataclass(frozen=True)
class DesignDomain:
    """Rectangular grid of square plane-stress elements."""

    nelx: int = 128
    nely: int = 64
    element_size: float = 1.0
    thickness: float = 1.0
    youngs_modulus: float = 1.0
    youngs_min: float = 1e-9
    poisson: float = 0.3

    def __post_init__(self):
        if self.nelx < 1 or self.nely < 1:
            raise ValueError("nelx and nely must be >= 1")
        if not 0.0 < self.youngs_min < self.youngs_modulus:
            raise ValueError("require 0 < Emin < E")
        if not 0.0 <= self.poisson < 0.5:
            raise ValueError("require 0 <= poisson < 0.5")

    @property
    def num_elements(self) -> int:
        return self.nelx * self.nely

    @property
    def num_nodes(self) -> int:
        return (self.nelx + 1) * (self.nely + 1)

    @property
    def num_dofs(self) -> int:
        return 2 * self.num_nodes

    def node_id(self, i: int, j: int) -> int:
        return i * (self.nelx + 1) + j

    def node_ij(self, node: int) -> tuple[int, int]:
        return divmod(node, self.nelx + 1)

    def boundary_nodes(self) -> np.ndarray:
        """Ids of all nodes on the domain boundary, ascending."""
        ids = []
        for i in range(self.nely + 1):
            for j in range(self.nelx + 1):
                if i in (0, self.nely) or j in (0, self.nelx):
                    ids.append(self.node_id(i, j))
        return np.asarray(ids, dtype=np.int64)

    def to_dict(self) -> dict:
        return {
            "nelx": self.nelx,
            "nely": self.nely,
            "element_size": self.element_size,
            "thickness": self.thickness,
            "youngs_modulus": self.youngs_modulus,
            "youngs_min": self.youngs_min,
            "poisson": self.poisson,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DesignDomain":
        return cls(**d)


@dataclass(frozen=True)
class BcConstraint:
    """Fixity applied to a span of nodes along one edge.

    ``lo == hi`` selects a single node (a corner when the value is 0 or 1).
    """

    edge: str
    lo: float
    hi: float
    fixity: str

    def __post_init__(self):
        if self.edge not in EDGES:
            raise ValueError(f"unknown edge {self.edge!r}")
        if self.fixity not in FIXITIES:
            raise ValueError(f"unknown fixity {self.fixity!r}")
        if not 0.0 <= self.lo <= self.hi <= 1.0:
            raise ValueError("require 0 <= lo <= hi <= 1")

    def node_ids(self, domain: DesignDomain) -> list[int]:
        """Grid nodes covered by the span, in ascending edge parameter."""
        if self.edge in ("top", "bottom"):
            n = domain.nelx
            i = 0 if self.edge == "top" else domain.nely
            mk = lambda k: domain.node_id(i, k)
        else:
            n = domain.nely
            j = 0 if self.edge == "left" else domain.nelx
            mk = lambda k: domain.node_id(k, j)
        eps = 1e-9
        first = math.ceil(self.lo * n - eps)
        last = math.floor(self.hi * n + eps)
        return [mk(k) for k in range(max(first, 0), min(last, n) + 1)]

    def to_dict(self) -> dict:
        return {"edge": self.edge, "lo": self.lo, "hi": self.hi, "fixity": self.fixity}

    @classmethod
    def from_dict(cls, d: dict) -> "BcConstraint":
        return cls(d["edge"], d["lo"], d["hi"], d["fixity"])


@dataclass(frozen=True)
class BcScenario:
    scenario_id: int
    constraints: tuple[BcConstraint, ...]

    def fixed_dofs(self, domain: DesignDomain) -> np.ndarray:
        """Sorted unique constrained dof indices on the given grid."""
        dofs: set[int] = set()
        for c in self.constraints:
            for node in c.node_ids(domain):
                if c.fixity in ("ux", "pin"):
                    dofs.add(2 * node)
                if c.fixity in ("uy", "pin"):
                    dofs.add(2 * node + 1)
        return np.asarray(sorted(dofs), dtype=np.int64)

    def node_fixity(self, domain: DesignDomain) -> dict[int, set[str]]:
        """Map node id -> accumulated fixed directions {'ux','uy'}."""
        acc: dict[int, set[str]] = {}
        for c in self.constraints:
            dirs = {"ux", "uy"} if c.fixity == "pin" else {c.fixity}
            for node in c.node_ids(domain):
                acc.setdefault(node, set()).update(dirs)
        return acc

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "constraints": [c.to_dict() for c in self.constraints],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BcScenario":
        return cls(
            d["scenario_id"],
            tuple(BcConstraint.from_dict(c) for c in d["constraints"]),
        )


# Corner handles as single-node edge spans.
_TL = ("top", 0.0, 0.0)
_TR = ("top", 1.0, 1.0)
_BL = ("bottom", 0.0, 0.0)
_BR = ("bottom", 1.0, 1.0)


def _pin(span) -> BcConstraint:
    return BcConstraint(span[0], span[1], span[2], "pin")


def enumerate_bc_scenarios() -> list[BcScenario]:
    """The deterministic 42-scenario displacement-BC catalog.

    Built from support primitives in a fixed, documented order; every entry
    removes both rigid translations and the rigid rotation:

    * ids 0-3    full-edge clamps (left, right, top, bottom)
    * ids 4-11   half-edge clamps (two halves per edge)
    * ids 12-15  centered half-edge clamps
    * ids 16-17  opposite full-edge clamp pairs
    * ids 18-21  adjacent full-edge clamp pairs
    * ids 22-29  full-edge normal rollers plus one far-corner pin
    * ids 30-33  adjacent normal-roller pairs
    * ids 34-39  two-corner pin pairs
    * id  40     all four corners pinned
    * id  41     normal rollers on all four edges
    """
    specs: list[tuple[BcConstraint, ...]] = []

    def clamp(edge, lo=0.0, hi=1.0):
        return BcConstraint(edge, lo, hi, "pin")

    def roller(edge):
        fix = "ux" if edge in ("left", "right") else "uy"
        return BcConstraint(edge, 0.0, 1.0, fix)

    # 0-3: full-edge clamps
    for edge in EDGES:
        specs.append((clamp(edge),))
    # 4-11: half-edge clamps
    for edge in EDGES:
        specs.append((clamp(edge, 0.0, 0.5),))
        specs.append((clamp(edge, 0.5, 1.0),))
    # 12-15: centered half-edge clamps
    for edge in EDGES:
        specs.append((clamp(edge, 0.25, 0.75),))
    # 16-17: opposite edge pairs
    specs.append((clamp("left"), clamp("right")))
    specs.append((clamp("top"), clamp("bottom")))
    # 18-21: adjacent edge pairs
    specs.append((clamp("left"), clamp("top")))
    specs.append((clamp("left"), clamp("bottom")))
    specs.append((clamp("right"), clamp("top")))
    specs.append((clamp("right"), clamp("bottom")))
    # 22-29: edge roller + far corner pin
    specs.append((roller("left"), _pin(_TR)))
    specs.append((roller("left"), _pin(_BR)))
    specs.append((roller("right"), _pin(_TL)))
    specs.append((roller("right"), _pin(_BL)))
    specs.append((roller("top"), _pin(_BL)))
    specs.append((roller("top"), _pin(_BR)))
    specs.append((roller("bottom"), _pin(_TL)))
    specs.append((roller("bottom"), _pin(_TR)))
    # 30-33: adjacent roller pairs
    specs.append((roller("left"), roller("bottom")))
    specs.append((roller("left"), roller("top")))
    specs.append((roller("right"), roller("bottom")))
    specs.append((roller("right"), roller("top")))
    # 34-39: two-corner pin pairs
    corners = (_TL, _TR, _BL, _BR)
    for a in range(4):
        for b in range(a + 1, 4):
            specs.append((_pin(corners[a]), _pin(corners[b])))
    # 40: four corners
    specs.append(tuple(_pin(c) for c in corners))
    # 41: rollers all around
    specs.append(tuple(roller(e) for e in EDGES))

    assert len(specs) == 42
    return [BcScenario(i, s) for i, s in enumerate(specs)]


def catalog_json(catalog: list[BcScenario]) -> str:
    """Canonical serialization of a catalog (stable across runs/platforms)."""
    return json.dumps([s.to_dict() for s in catalog], sort_keys=True,
                      separators=(",", ":"))


def format_catalog(catalog: list[BcScenario]) -> str:
    """Human-readable catalog listing, one record per scenario."""
    lines = []
    for s in catalog:
        parts = ", ".join(
            f"{c.fixity.upper()} {c.edge}[{c.lo:.2f},{c.hi:.2f}]"
            for c in s.constraints
        )
        lines.append(f"scenario {s.scenario_id:02d}: {parts}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ProblemSpec:
    """One optimization problem: volume target, supports, and one point load."""

    vf_target: float
    scenario: BcScenario
    load_node: int
    load_angle: float
    load_magnitude: float = 1.0

    def validate(self, domain: DesignDomain) -> None:
        if not any(abs(self.vf_target - v) < 1e-12 for v in VF_GRID):
            raise ValueError(f"vf_target {self.vf_target} not on the 0.30:0.02:0.50 grid")
        if not any(abs(self.load_angle - a) < 1e-12 for a in LOAD_ANGLES):
            raise ValueError(f"load_angle {self.load_angle} not a multiple of pi/6 in [0, pi]")
        i, j = domain.node_ij(self.load_node)
        if not (0 <= i <= domain.nely and 0 <= j <= domain.nelx):
            raise ValueError("load_node outside the node grid")
        if i not in (0, domain.nely) and j not in (0, domain.nelx):
            raise ValueError("load_node must lie on the domain boundary")
        fixity = self.scenario.node_fixity(domain).get(self.load_node, set())
        if fixity == {"ux", "uy"}:
            raise ValueError("load_node is fully pinned by the scenario")
        cx, cy = load_components(self.load_angle)
        free_x = "ux" not in fixity
        free_y = "uy" not in fixity
        if not ((free_x and cx != 0.0) or (free_y and cy != 0.0)):
            raise ValueError(
                "degenerate problem: every nonzero load component acts on a "
                "fixed direction of load_node, so the load does no work"
            )

    def to_dict(self) -> dict:
        return {
            "vf_target": self.vf_target,
            "scenario": self.scenario.to_dict(),
            "load_node": self.load_node,
            "load_angle": self.load_angle,
            "load_magnitude": self.load_magnitude,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        return cls(
            vf_target=d["vf_target"],
            scenario=BcScenario.from_dict(d["scenario"]),
            load_node=d["load_node"],
            load_angle=d["load_angle"],
            load_magnitude=d["load_magnitude"],
        )


def as_density(values: np.ndarray, domain: DesignDomain | None = None) -> np.ndarray:
    """Validate a density matrix: shape (nely, nelx), entries in [0, 1]."""
    y = np.asarray(values, dtype=np.float64)
    if y.ndim != 2:
        raise ShapeMismatch(f"density must be 2-D, got shape {y.shape}")
    if domain is not None and y.shape != (domain.nely, domain.nelx):
        raise ShapeMismatch(
            f"density shape {y.shape} != (nely, nelx) = {(domain.nely, domain.nelx)}"
        )
    if not np.all(np.isfinite(y)):
        raise ValueError("density contains non-finite entries")
    if y.min() < 0.0 or y.max() > 1.0:
        raise ValueError("density entries must lie in [0, 1]")
    return y


def rasterize_bc(scenario: BcScenario, domain: DesignDomain) -> np.ndarray:
    """Element-wise constraint codes: 0 free, 1 ux=0, 2 uy=0, 3 both.

    An element is coded from its four corner nodes; a pinned node (or a
    ux-fixed node together with a uy-fixed node) dominates with code 3.
    """
    fix = scenario.node_fixity(domain)
    ncols = domain.nelx + 1
    out = np.zeros((domain.nely, domain.nelx), dtype=np.int64)
    for r in range(domain.nely):
        for c in range(domain.nelx):
            nodes = (r * ncols + c, r * ncols + c + 1,
                     (r + 1) * ncols + c, (r + 1) * ncols + c + 1)
            has_ux = has_uy = pinned = False
            for n in nodes:
                s = fix.get(n)
                if not s:
                    continue
                if "ux" in s:
                    has_ux = True
                if "uy" in s:
                    has_uy = True
                if len(s) == 2:
                    pinned = True
            if pinned or (has_ux and has_uy):
                out[r, c] = 3
            elif has_ux:
                out[r, c] = 1
            elif has_uy:
                out[r, c] = 2
    return out


def rasterize_load(spec: ProblemSpec, domain: DesignDomain) -> tuple[np.ndarray, np.ndarray]:
    """Load image channels (Fx, Fy): the total load split equally over the
    elements adjacent to the load node; zero elsewhere."""
    fx = np.zeros((domain.nely, domain.nelx))
    fy = np.zeros((domain.nely, domain.nelx))
    i, j = domain.node_ij(spec.load_node)
    cells = [(r, c)
             for r in (i - 1, i) if 0 <= r < domain.nely
             for c in (j - 1, j) if 0 <= c < domain.nelx]
    cx, cy = load_components(spec.load_angle)
    for r, c in cells:
        fx[r, c] = cx * spec.load_magnitude / len(cells)
        fy[r, c] = cy * spec.load_magnitude / len(cells)
    return fx, fy
