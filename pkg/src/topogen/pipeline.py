"""Dataset generation: sample drawing, solving, encoding, manifest assembly."""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import fem, simp
from .dataset import (
    FORMAT_VERSION,
    GENERATOR_VERSION,
    catalog_hash,
    encode_sample,
    sample_filename,
    write_manifest,
    write_sample,
)
from .domain import DesignDomain, ProblemSpec, enumerate_bc_scenarios
from .errors import TopogenError
from .sampling import ProblemSampler, spawn_rngs

#: Generation aborts when more than this fraction of samples fail.
MAX_FAILURE_RATE = 0.01


def build_sample(sample_id: int, spec: ProblemSpec, domain: DesignDomain,
                 config: simp.SimpConfig, root_seed: int | None = None):
    """One end-to-end sample: initial fields on the solid domain, SIMP ground
    truth, channel encoding. Returns (record, trace)."""
    solid = np.ones((domain.nely, domain.nelx))
    u = fem.assemble_and_solve(solid, spec, domain, config.penal)
    fields = fem.compute_fields(u, solid, domain, config.penal)
    target, trace = simp.optimize(spec, domain, config)
    record = encode_sample(
        spec, fields, target, domain, sample_id,
        extra_meta={
            "seeds": {"root": root_seed, "sample_index": sample_id},
            "simp": {
                "iterations": trace.iterations,
                "converged": trace.converged,
                "final_compliance": trace.final_compliance,
            },
        },
    )
    return record, trace


def _generate_one(task):
    sample_id, spec, domain, config, out_dir, root_seed = task
    start = time.perf_counter()
    try:
        record, trace = build_sample(sample_id, spec, domain, config, root_seed)
        path = os.path.join(out_dir, sample_filename(sample_id))
        write_sample(record, path)
        return {
            "id": sample_id,
            "file": sample_filename(sample_id),
            "scenario_id": spec.scenario.scenario_id,
            "vf_target": spec.vf_target,
            "iterations": trace.iterations,
            "converged": trace.converged,
            "compliance": trace.final_compliance,
            "wall_time": time.perf_counter() - start,
        }
    except TopogenError as exc:
        return {"id": sample_id, "error": f"{type(exc).__name__}: {exc}",
                "scenario_id": spec.scenario.scenario_id,
                "wall_time": time.perf_counter() - start}


def generate_dataset(out_dir, count: int, seed: int, domain: DesignDomain,
                     config: simp.SimpConfig, workers: int = 1,
                     log=None) -> dict:
    """Generate ``count`` samples into ``out_dir`` and write the manifest last.

    Fully deterministic under (count, seed, domain, config): problem draws
    happen up front from per-sample generators spawned off the root seed, so
    neither worker count nor scheduling order can change any output byte.
    Failed samples are recorded in the manifest and the run log, not dropped
    silently; a failure rate above MAX_FAILURE_RATE raises.
    """
    out_dir = str(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    catalog = enumerate_bc_scenarios()
    sampler = ProblemSampler(domain, catalog)
    specs = [sampler.sample(rng) for rng in spawn_rngs(seed, count)]
    tasks = [(i, specs[i], domain, config, out_dir, seed) for i in range(count)]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_generate_one, tasks))
    else:
        results = []
        for task in tasks:
            results.append(_generate_one(task))
            if log:
                log(f"sample {task[0] + 1}/{count} done "
                    f"({results[-1].get('wall_time', 0.0):.1f}s)")

    results.sort(key=lambda r: r["id"])
    _write_run_log(results, out_dir)

    ok = [r for r in results if "error" not in r]
    failures = [r for r in results if "error" in r]
    manifest = {
        "format_version": FORMAT_VERSION,
        "generator_version": GENERATOR_VERSION,
        "domain": domain.to_dict(),
        "simp_config": config.to_dict(),
        "catalog_sha256": catalog_hash(catalog),
        "global_seed": seed,
        "requested_count": count,
        "sample_count": len(ok),
        "samples": [{
            "id": r["id"],
            "file": r["file"],
            "scenario_id": r["scenario_id"],
            "vf_target": r["vf_target"],
            "split": None,
        } for r in ok],
        "failures": [{"id": r["id"], "error": r["error"]} for r in failures],
        "split_plan": None,
        "normalization": None,
    }
    write_manifest(manifest, out_dir)
    if count and len(failures) / count > MAX_FAILURE_RATE:
        raise TopogenError(
            f"{len(failures)}/{count} samples failed (> {MAX_FAILURE_RATE:.0%})"
        )
    return manifest


def _write_run_log(results, out_dir) -> None:
    import json

    with open(os.path.join(out_dir, "run_log.jsonl"), "w") as fh:
        for row in results:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
