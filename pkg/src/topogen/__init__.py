"""Topology-optimization dataset factory.

Plane-stress FEM initial fields, SIMP ground-truth structures, channel-encoded
TOPO1 samples, scenario-held-out splits, and the structure metrics used to
score predictions.
"""

from .domain import (
    LOAD_ANGLES,
    VF_GRID,
    BcConstraint,
    BcScenario,
    DesignDomain,
    ProblemSpec,
    enumerate_bc_scenarios,
    rasterize_bc,
    rasterize_load,
)
from .fem import (
    FieldBundle,
    StiffnessSystem,
    assemble_and_solve,
    compliance,
    compute_fields,
    element_stiffness,
    von_mises,
)
from .simp import OptimizationTrace, SimpConfig, optimize
from .sampling import ProblemSampler, SplitPlan, plan_splits, sample_problem, spawn_rngs
from .dataset import (
    CHANNEL_ORDER,
    COMBO_CHANNELS,
    SampleRecord,
    encode_sample,
    read_manifest,
    read_sample,
    select_field_combo,
    write_manifest,
    write_sample,
)
from .metrics import MetricsReport, evaluate_batch, mae, mse, re_c, re_vf, volume_fraction
from .pipeline import build_sample, generate_dataset

__version__ = "0.1.0"
