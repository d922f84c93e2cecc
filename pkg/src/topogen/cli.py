"""Command-line entry point: generate / solve / fields / split / evaluate / scenarios."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import fem, metrics, pipeline, simp
from .dataset import (
    compute_normalization,
    encode_sample,
    load_dataset,
    read_manifest,
    read_sample,
    write_manifest,
    write_pgm,
    write_sample,
)
from .domain import DesignDomain, ProblemSpec, enumerate_bc_scenarios, format_catalog
from .errors import TopogenError
from .sampling import plan_splits

ANGLE_DEGREES = tuple(range(0, 181, 30))


def _domain_from(args) -> DesignDomain:
    return DesignDomain(nelx=args.nelx, nely=args.nely)


def _simp_from(args) -> simp.SimpConfig:
    return simp.SimpConfig(penal=args.penal, filter_radius=args.rmin,
                           move_limit=args.move, max_iters=args.max_iters,
                           change_tol=args.change_tol)


def _add_domain_flags(p):
    p.add_argument("--nelx", type=int, default=128, help="elements along x")
    p.add_argument("--nely", type=int, default=64, help="elements along y")


def _add_simp_flags(p):
    p.add_argument("--penal", type=float, default=2.0, help="SIMP penalty exponent")
    p.add_argument("--rmin", type=float, default=1.5, help="sensitivity filter radius")
    p.add_argument("--move", type=float, default=0.2, help="OC move limit")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--change-tol", type=float, default=0.01)


def _add_problem_flags(p):
    p.add_argument("--preset", choices=["cantilever"], default=None,
                   help="documented problem preset (left edge clamped, upward tip load)")
    p.add_argument("--scenario-id", type=int, default=None)
    p.add_argument("--load-node", type=int, default=None)
    p.add_argument("--load-angle-deg", type=int, choices=ANGLE_DEGREES, default=None,
                   help="load direction in degrees from +x, 30-degree steps")
    p.add_argument("--vf", type=float, default=0.5, help="volume-fraction target")


def _problem_from(args, domain: DesignDomain) -> ProblemSpec:
    """Resolve preset defaults (cantilever) with explicit flags overriding."""
    catalog = enumerate_bc_scenarios()
    if args.scenario_id is not None:
        scenario = catalog[args.scenario_id]
    else:
        scenario = catalog[0]  # cantilever preset: left edge fully clamped
    if args.load_node is not None:
        load_node = args.load_node
    else:
        load_node = domain.node_id(domain.nely // 2, domain.nelx)  # right-edge mid
    if args.load_angle_deg is not None:
        angle = (args.load_angle_deg // 30) * math.pi / 6
    else:
        angle = math.pi / 2
    spec = ProblemSpec(vf_target=args.vf, scenario=scenario,
                       load_node=load_node, load_angle=angle)
    spec.validate(domain)
    return spec


def _apply_config_file(args, argv):
    """Optional JSON config file supplies defaults; explicit flags win."""
    if not getattr(args, "config", None):
        return args
    with open(args.config) as fh:
        file_conf = json.load(fh)
    unknown = set(file_conf) - set(vars(args))
    if unknown:
        raise TopogenError(f"unknown config keys: {sorted(unknown)}")
    explicit = {tok.lstrip("-").replace("-", "_").split("=")[0]
                for tok in argv if tok.startswith("--")}
    for key, value in file_conf.items():
        if key not in explicit:
            setattr(args, key, value)
    return args


def cmd_generate(args, argv) -> int:
    args = _apply_config_file(args, argv)
    domain = _domain_from(args)
    config = _simp_from(args)
    log = (lambda msg: print(msg, file=sys.stderr)) if args.progress else None
    manifest = pipeline.generate_dataset(args.out, args.count, args.seed,
                                         domain, config, workers=args.workers,
                                         log=log)
    print(f"wrote {manifest['sample_count']}/{args.count} samples to {args.out}")
    return 0


def cmd_solve(args) -> int:
    domain = _domain_from(args)
    config = _simp_from(args)
    spec = _problem_from(args, domain)
    os.makedirs(args.out, exist_ok=True)
    record, trace = pipeline.build_sample(0, spec, domain, config)
    density_path = os.path.join(args.out, "solution.topo1")
    write_sample(record, density_path)
    trace_path = os.path.join(args.out, "trace.tsv")
    trace.export_text(trace_path)
    if args.pgm:
        write_pgm(record.target, os.path.join(args.out, "density.pgm"), 0.0, 1.0)
    print(f"density: {density_path}")
    print(f"trace:   {trace_path} ({trace.iterations} iterations, "
          f"compliance {trace.final_compliance:.6g})")
    return 0


def cmd_fields(args) -> int:
    domain = _domain_from(args)
    spec = _problem_from(args, domain)
    os.makedirs(args.out, exist_ok=True)
    solid = np.ones((domain.nely, domain.nelx))
    system = fem.assemble_system(solid, spec, domain, penal=1.0)
    u = fem.solve_constrained(system.stiffness, system.force, system.fixed_dofs)
    fields = fem.compute_fields(u, solid, domain)
    record = encode_sample(spec, fields, np.zeros_like(solid), domain, 0,
                           extra_meta={"fields_only": True})
    path = os.path.join(args.out, "fields.topo1")
    write_sample(record, path)
    if args.pgm:
        for name, channel in record.channels.items():
            write_pgm(channel, os.path.join(args.out, f"{name}.pgm"))
    if args.dump_k:
        fem.dump_stiffness(system.stiffness, args.dump_k)
    if args.dump_u:
        fem.dump_vector(u, args.dump_u)
    print(f"fields: {path}")
    return 0


def cmd_split(args) -> int:
    manifest = read_manifest(args.dataset)
    by_id = {entry["id"]: entry["scenario_id"] for entry in manifest["samples"]}
    plan, labels = plan_splits(by_id, args.seed)
    for entry in manifest["samples"]:
        entry["split"] = labels[entry["id"]]
    manifest["split_plan"] = plan.to_dict()
    train_records = [
        read_sample(os.path.join(args.dataset, entry["file"]))
        for entry in manifest["samples"] if entry["split"] == "train"
    ]
    manifest["normalization"] = compute_normalization(train_records)
    write_manifest(manifest, args.dataset)
    counts = {lbl: sum(1 for v in labels.values() if v == lbl)
              for lbl in ("train", "val", "test")}
    print(f"test scenarios: {list(plan.test_scenarios)}  counts: {counts}")
    return 0


def _load_predictions(directory):
    if os.path.exists(os.path.join(directory, "manifest.json")):
        return load_dataset(directory)
    records = {}
    for name in sorted(os.listdir(directory)):
        if name.endswith(".topo1"):
            rec = read_sample(os.path.join(directory, name))
            records[rec.sample_id] = rec
    return records


def cmd_evaluate(args) -> int:
    truth_manifest = read_manifest(args.truth)
    domain = DesignDomain.from_dict(truth_manifest["domain"])
    penal = args.penal if args.penal is not None else \
        truth_manifest["simp_config"]["penal"]
    truths = load_dataset(args.truth)
    preds = _load_predictions(args.pred)
    report = metrics.evaluate_batch(
        preds, truths, domain, penal,
        with_compliance=not args.no_compliance,
        binarize_prediction=args.binarize,
        split=args.split,
    )
    print(report.summary_text())
    if args.out:
        report.export_csv(args.out + ".csv")
        report.export_json(args.out + ".json")
        print(f"report: {args.out}.csv, {args.out}.json")
    return 0


def cmd_scenarios(args) -> int:
    text = format_catalog(enumerate_bc_scenarios())
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"catalog: {args.out}")
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topogen",
        description="Topology-optimization dataset factory and evaluator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a TOPO1 dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True,
                   help="root seed (mandatory: no wall-clock default)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--config", default=None, help="JSON config file; flags win")
    p.add_argument("--progress", action="store_true")
    _add_domain_flags(p)
    _add_simp_flags(p)

    p = sub.add_parser("solve", help="optimize a single problem")
    p.add_argument("--out", required=True)
    p.add_argument("--pgm", action="store_true", help="also export density.pgm")
    _add_domain_flags(p)
    _add_simp_flags(p)
    _add_problem_flags(p)

    p = sub.add_parser("fields", help="compute initial FEM fields for a problem")
    p.add_argument("--out", required=True)
    p.add_argument("--pgm", action="store_true", help="export every channel as PGM")
    p.add_argument("--dump-k", default=None, help="debug: stiffness triplets text file")
    p.add_argument("--dump-u", default=None, help="debug: displacement text file")
    _add_domain_flags(p)
    _add_problem_flags(p)

    p = sub.add_parser("split", help="label train/val/test by held-out scenarios")
    p.add_argument("--dataset", required=True)
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--penal", type=float, default=None,
                   help="re-analysis penalty (default: the dataset's)")
    p.add_argument("--no-compliance", action="store_true")
    p.add_argument("--binarize", action="store_true",
                   help="threshold predictions at 0.5 before re-analysis")
    p.add_argument("--split", default=None)
    p.add_argument("--out", default=None, help="report file prefix")

    p = sub.add_parser("scenarios", help="export the BC scenario catalog")
    p.add_argument("--out", default=None)

    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            return cmd_generate(args, argv)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "fields":
            return cmd_fields(args)
        if args.command == "split":
            return cmd_split(args)
        if args.command == "evaluate":
            return cmd_evaluate(args)
        if args.command == "scenarios":
            return cmd_scenarios(args)
        parser.error(f"unknown command {args.command}")
    except (TopogenError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
