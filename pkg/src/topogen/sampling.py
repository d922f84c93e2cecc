"""Randomized problem draws and scenario-held-out dataset splits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import (
    LOAD_ANGLES,
    VF_GRID,
    BcScenario,
    DesignDomain,
    ProblemSpec,
    enumerate_bc_scenarios,
)
from .errors import InsufficientScenarios

TEST_SCENARIO_COUNT = 4
TRAIN_FRACTION = 0.8


def spawn_rngs(seed: int, count: int) -> list[np.random.Generator]:
    """Independent per-sample generators, deterministic under the root seed
    and independent of worker scheduling."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


class ProblemSampler:
    """Draws ProblemSpecs per the dataset protocol.

    Volume fraction uniform over the 11-value grid, scenario uniform over the
    catalog, load node uniform over boundary nodes the scenario leaves
    loadable, load angle uniform over the seven pi/6 multiples.
    """

    def __init__(self, domain: DesignDomain, catalog: list[BcScenario] | None = None):
        self.domain = domain
        self.catalog = catalog if catalog is not None else enumerate_bc_scenarios()
        boundary = domain.boundary_nodes()
        self._admissible: list[np.ndarray] = []
        self._fixity: list[dict[int, set[str]]] = []
        for scenario in self.catalog:
            fixity = scenario.node_fixity(domain)
            free = [n for n in boundary if fixity.get(int(n)) != {"ux", "uy"}]
            self._admissible.append(np.asarray(free, dtype=np.int64))
            self._fixity.append(fixity)

    def sample(self, rng: np.random.Generator) -> ProblemSpec:
        from .domain import load_components

        vf = VF_GRID[rng.integers(len(VF_GRID))]
        scenario = self.catalog[rng.integers(len(self.catalog))]
        nodes = self._admissible[scenario.scenario_id]
        fixity = self._fixity[scenario.scenario_id]
        # redraw (node, angle) pairs whose load would act only on fixed
        # directions (e.g. a vertical pull on a uy-roller edge): such a
        # problem has U = 0 and nothing to optimize
        for _ in range(1000):
            load_node = int(nodes[rng.integers(len(nodes))])
            angle = LOAD_ANGLES[rng.integers(len(LOAD_ANGLES))]
            cx, cy = load_components(angle)
            fixed = fixity.get(load_node, set())
            if ("ux" not in fixed and cx != 0.0) or ("uy" not in fixed and cy != 0.0):
                return ProblemSpec(vf_target=vf, scenario=scenario,
                                   load_node=load_node, load_angle=angle)
        raise RuntimeError("could not draw a working load for the scenario")


def sample_problem(rng: np.random.Generator, domain: DesignDomain,
                   sampler: ProblemSampler | None = None) -> ProblemSpec:
    if sampler is None:
        sampler = ProblemSampler(domain)
    return sampler.sample(rng)


@dataclass(frozen=True)
class SplitPlan:
    test_scenarios: tuple[int, ...]
    train_fraction: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "test_scenarios": list(self.test_scenarios),
            "train_fraction": self.train_fraction,
            "seed": self.seed,
        }


def plan_splits(samples: dict[int, int], seed: int) -> tuple[SplitPlan, dict[int, str]]:
    """Assign one of train/val/test to every sample.

    ``samples`` maps sample id -> scenario id. Four scenarios are held out
    entirely for test; the rest are shuffled and labeled 80/20 train/val.
    Labels are a pure function of the id set and the seed.
    """
    scenario_ids = sorted({int(s) for s in samples.values()})
    if len(scenario_ids) < TEST_SCENARIO_COUNT + 1:
        raise InsufficientScenarios(
            f"need at least {TEST_SCENARIO_COUNT + 1} scenarios, got {len(scenario_ids)}"
        )
    rng = np.random.default_rng(seed)
    test_scenarios = tuple(sorted(
        int(s) for s in rng.choice(scenario_ids, size=TEST_SCENARIO_COUNT, replace=False)
    ))

    labels: dict[int, str] = {}
    remaining = []
    for sid in sorted(samples):
        if int(samples[sid]) in test_scenarios:
            labels[sid] = "test"
        else:
            remaining.append(sid)
    order = rng.permutation(len(remaining))
    n_train = int(round(TRAIN_FRACTION * len(remaining)))
    for pos, idx in enumerate(order):
        labels[remaining[idx]] = "train" if pos < n_train else "val"

    plan = SplitPlan(test_scenarios=test_scenarios,
                     train_fraction=TRAIN_FRACTION, seed=seed)
    return plan, labels
