"""Command-line surface: reproducible experiments with bit-stable output.

Subcommands: ``bmo`` (seminorm of a field file), ``korn`` (quotient
searches), ``material`` (constitutive diagnostics), ``uniqueness``
(energy-gap experiments).  Every command is deterministic given the
config and seed; CSV output uses 17 significant digits, '.' decimals,
and LF line endings so reruns are byte-identical.

Exit codes: 0 success, 2 config error, 3 input-file error,
4 hypothesis-gate failure, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import jsonschema
import numpy as np

from . import __version__
from .bmo import bmo_seminorm
from .energy import BarrierStallError, EnergyProblem, InadmissibleError, solve_equilibrium
from .fileio import FileFormatError, read_field, read_mask, write_field
from .grid import CubeFamily, DIRICHLET, Field, Grid, InvalidCubeError, TRACTION
from .korn import DomainSpec, generate_domain, korn_search
from .materials import (
    SpdBoxSampler,
    derivative_check,
    make_material,
    positivity_margin,
    spatial_identity_check,
    taylor_constants,
)
from .uniqueness import SinePerturbations, uniqueness_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_GATE = 4
EXIT_NUMERICAL = 5


class ConfigError(ValueError):
    """Config file is missing required structure or carries unknown keys."""


def _fmt(x):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if not isinstance(v, str) else v for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_json(path, doc):
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_config(path, schema):
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise FileFormatError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{path}: {exc.message}") from exc
    return doc


_FAMILIES = ("all", "dyadic", "shifted-dyadic")

KORN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["budget", "seed", "domains"],
    "properties": {
        "budget": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "modes": {
            "type": "array",
            "items": {"enum": ["BMO", "LP"]},
            "minItems": 1,
        },
        "p": {"type": "number", "minimum": 1},
        "family": {"enum": list(_FAMILIES)},
        "domains": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind", "resolution"],
                "properties": {
                    "kind": {"enum": ["square", "lshape", "rooms-and-passages"]},
                    "resolution": {"type": "integer", "minimum": 2},
                    "rooms": {"type": "integer", "minimum": 2},
                    "passage_width": {"type": "number", "exclusiveMinimum": 0,
                                      "maximum": 0.5},
                },
            },
        },
    },
}

MATERIAL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["model"],
    "properties": {
        "model": {"enum": ["svk", "neo-hookean"]},
        "lambda": {"type": "number"},
        "mu": {"type": "number"},
        "dimension": {"enum": [2, 3]},
        "seed": {"type": "integer", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "eig_range": {
            "type": "array",
            "items": {"type": "number", "exclusiveMinimum": 0},
            "minItems": 2,
            "maxItems": 2,
        },
        "taylor_trials": {"type": "integer", "minimum": 1},
    },
}

UNIQUENESS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["problem", "experiment"],
    "properties": {
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "required": ["domain", "resolution", "model", "epsilon", "X"],
            "properties": {
                "domain": {"enum": ["square", "lshape"]},
                "resolution": {"type": "integer", "minimum": 2},
                "model": {"enum": ["svk", "neo-hookean"]},
                "lambda": {"type": "number"},
                "mu": {"type": "number"},
                "bc": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "dirichlet": {"type": "string"},
                        "traction": {
                            "type": ["object", "null"],
                            "additionalProperties": False,
                            "properties": {
                                "faces": {
                                    "type": "array",
                                    "items": {"enum": ["left", "right", "bottom", "top"]},
                                    "minItems": 1,
                                },
                                "value": {"type": "array",
                                          "items": {"type": "number"}},
                            },
                            "required": ["faces", "value"],
                        },
                    },
                },
                "b": {"type": ["array", "null"], "items": {"type": "number"}},
                "epsilon": {"type": "number", "exclusiveMinimum": 0,
                            "exclusiveMaximum": 1},
                "X": {"type": "number", "exclusiveMinimum": 1},
            },
        },
        "experiment": {
            "type": "object",
            "additionalProperties": False,
            "required": ["delta_grid", "trials", "seed"],
            "properties": {
                "delta_grid": {"type": "array", "minItems": 1,
                               "items": {"type": "number", "exclusiveMinimum": 0}},
                "trials": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "kmax": {"type": "integer", "minimum": 1},
            },
        },
    },
}


def _family_from_name(name):
    return CubeFamily(name)


def parse_dirichlet_tag(tag):
    """Boundary-deformation expression tags: 'id' or 'scale:<a>'."""
    if tag == "id":
        return lambda x: x
    if tag.startswith("scale:"):
        try:
            a = float(tag.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad scale factor in dirichlet tag {tag!r}") from exc
        return lambda x: a * x
    raise ConfigError(f"unknown dirichlet expression tag {tag!r}")


def _boundary_labeler(grid_cells, traction_doc):
    if not traction_doc:
        return None
    sides = set(traction_doc["faces"])
    name_of = {(0, -1): "left", (0, 1): "right", (1, -1): "bottom", (1, 1): "top"}

    def labeler(face):
        lo = face.cell[face.axis] == 0 and face.sign < 0
        hi = face.cell[face.axis] == grid_cells[face.axis] - 1 and face.sign > 0
        if lo or hi:
            name = name_of.get((face.axis, face.sign))
            if name in sides:
                return TRACTION
        return DIRICHLET

    return labeler


def build_problem(doc):
    """EnergyProblem from the `problem` section of a uniqueness config."""
    res = doc["resolution"]
    if doc["domain"] == "square":
        mask = None
    else:
        mask = np.ones((res, res), dtype=bool)
        mask[res // 2:, res // 2:] = False
    bc = doc.get("bc", {})
    traction_doc = bc.get("traction")
    grid = Grid((res, res), h=1.0 / res, mask=mask,
                boundary=_boundary_labeler((res, res), traction_doc))
    material = make_material({"model": doc["model"],
                              "lambda": doc.get("lambda", 1.0),
                              "mu": doc.get("mu", 1.0)})
    dirichlet = parse_dirichlet_tag(bc.get("dirichlet", "id"))
    body = doc.get("b")
    body_field = None
    if body:
        if len(body) != grid.n:
            raise ConfigError("body force must have one component per axis")
        body_field = Field(grid, "cell", "vector",
                           np.broadcast_to(np.asarray(body, float),
                                           grid.cells + (grid.n,)))
    traction = np.asarray(traction_doc["value"], float) if traction_doc else None
    if traction is not None and traction.shape != (grid.n,):
        raise ConfigError("traction value must have one component per axis")
    return EnergyProblem(grid, material, dirichlet, body_force=body_field,
                         traction=traction, epsilon=doc["epsilon"], cap=doc["X"])


# -- subcommands --------------------------------------------------------------


def cmd_bmo(args):
    grid = read_mask(args.mask) if args.mask else None
    field = read_field(args.field, grid=grid)
    family = _family_from_name(args.family)
    report = bmo_seminorm(field, family, q=args.q, threads=args.threads)
    header = ["value", "q", "family", "side", "anchor", "cubes"]
    anchor = ":".join(str(a) for a in report.argmax.anchor)
    row = [report.value, report.q, args.family, report.argmax.side, anchor,
           report.cubes]
    out_path = args.report or os.path.join(args.out, "bmo_report.csv")
    os.makedirs(os.path.dirname(out_path) or ".", exist_ok=True)
    _write_csv(out_path, header, [row])
    print(",".join(header))
    print(",".join(_fmt(v) if not isinstance(v, str) else v for v in row))
    return EXIT_OK


def cmd_korn(args):
    doc = load_config(args.config, KORN_SCHEMA)
    seed = args.seed if args.seed is not None else doc["seed"]
    budget = doc["budget"]
    modes = doc.get("modes", ["BMO", "LP"])
    p = doc.get("p", 2.0)
    family = _family_from_name(doc.get("family", "all"))
    rows = []
    for mode in modes:
        for dd in doc["domains"]:
            spec = DomainSpec(dd["kind"], dd["resolution"], dd.get("rooms", 2),
                              dd.get("passage_width", 0.25))
            grid = generate_domain(spec)
            best, _trace = korn_search(grid, mode, budget, seed, p=p,
                                       family=family, domain=spec.label())
            rows.append([best.mode, spec.label(), spec.resolution,
                         doc.get("family", "all"), best.ratio, seed, best.trial])
    os.makedirs(args.out, exist_ok=True)
    header = ["mode", "domain", "resolution", "family", "ratio", "seed", "trial"]
    _write_csv(os.path.join(args.out, "korn.csv"), header, rows)
    print(",".join(header))
    for row in rows:
        print(",".join(_fmt(v) if not isinstance(v, str) else v for v in row))
    return EXIT_OK


def cmd_material(args):
    doc = load_config(args.config, MATERIAL_SCHEMA)
    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    n = doc.get("dimension", 2)
    samples = doc.get("samples", 100)
    lo, hi = doc.get("eig_range", [0.5, 2.0])
    if not lo < hi:
        raise ConfigError("eig_range must be increasing")
    trials = doc.get("taylor_trials", 200)
    model = make_material({"model": doc["model"], "lambda": doc.get("lambda", 1.0),
                           "mu": doc.get("mu", 1.0)})

    checks = derivative_check(model, n=n, samples=samples, seed=seed,
                              eig_lo=lo, eig_hi=hi)
    identity_gap = spatial_identity_check(model, n=n, samples=samples, seed=seed)
    rng = np.random.default_rng(seed)
    sampler = SpdBoxSampler(n, lo, hi)
    strain_samples = [np.eye(n)] + [sampler.sample(rng) for _ in range(samples)]
    beta = positivity_margin(model, strain_samples)
    tc = taylor_constants(model, SpdBoxSampler(n, lo, hi), trials, seed=seed)

    report = {
        "model": model.name,
        "dimension": n,
        "lambda": doc.get("lambda", 1.0),
        "mu": doc.get("mu", 1.0),
        "seed": seed,
        "stress_vs_fd": checks["stress_vs_fd"],
        "stiffness_vs_fd": checks["stiffness_vs_fd"],
        "major_symmetry": checks["major_symmetry"],
        "split_identity_gap": identity_gap,
        "beta": beta,
        "taylor_c": tc.c,
        "taylor_c_hat": tc.c_hat,
        "taylor_rejected": tc.rejected,
        "derivative_checks_pass": bool(
            checks["stress_vs_fd"] < 1e-6
            and checks["stiffness_vs_fd"] < 1e-6
            and checks["major_symmetry"] < 1e-12
            and identity_gap < 1e-5
        ),
    }
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "material_report.json"), report)
    for key in sorted(report):
        print(f"{key}: {report[key]}")
    return EXIT_OK if report["derivative_checks_pass"] else EXIT_NUMERICAL


def cmd_uniqueness(args):
    doc = load_config(args.config, UNIQUENESS_SCHEMA)
    exp = doc["experiment"]
    seed = args.seed if args.seed is not None else exp["seed"]
    tol = exp.get("tol", 1e-8)
    problem = build_problem(doc["problem"])
    os.makedirs(args.out, exist_ok=True)

    dirichlet = problem.dirichlet_values
    init = problem.with_dirichlet(dirichlet)
    solve = solve_equilibrium(problem, init, tol=min(tol, 1e-10))
    write_field(os.path.join(args.out, "u_e.olf"), solve.u)

    generator = SinePerturbations(problem, kmax=exp.get("kmax", 3))
    result = uniqueness_experiment(problem, solve.u, solve.residual,
                                   exp["delta_grid"], exp["trials"], seed,
                                   generator=generator, equilibrium_tol=tol)
    gates = result.gates
    gate_doc = {
        "residual": gates.residual,
        "residual_ok": gates.residual_ok,
        "beta": gates.beta,
        "k": gates.k,
        "positivity_ok": gates.positivity_ok,
        "min_principal_stress": gates.min_principal_stress,
        "tension_ok": gates.tension_ok,
        "min_jacobian": gates.min_jacobian,
        "epsilon": gates.epsilon,
        "jacobian_ok": gates.jacobian_ok,
        "strain_sup": gates.strain_sup,
        "X": gates.cap,
        "cap_ok": gates.cap_ok,
        "bounds_ok": gates.bounds_ok,
        "all_ok": gates.all_ok,
        "failures": gates.failures(),
        "delta_star": result.delta_star,
        "seed": seed,
    }
    _write_json(os.path.join(args.out, "gates.json"), gate_doc)

    if not gates.all_ok:
        print("hypothesis gates failed:", ", ".join(gates.failures()))
        return EXIT_GATE

    summary_rows = []
    ledger_rows = []
    for rep in result.reports:
        summary_rows.append([rep.delta, rep.trials, rep.admissible, rep.held,
                             rep.rejected, rep.hold_rate])
        for rec in rep.records:
            ledger_rows.append([
                rec.delta, rec.trial, rec.distance, int(rec.admissible),
                rec.reason or "-", rec.energy_gap, rec.k_term, rec.stress_term,
                rec.slack, rec.tolerance, int(rec.hold), rec.v_residual,
                int(rec.near_equilibrium),
            ])
    _write_csv(os.path.join(args.out, "uniqueness_summary.csv"),
               ["delta", "trials", "admissible", "held", "rejected", "hold_rate"],
               summary_rows)
    _write_csv(os.path.join(args.out, "uniqueness_ledger.csv"),
               ["delta", "trial", "distance", "admissible", "reason",
                "energy_gap", "k_term", "stress_term", "slack", "tolerance",
                "hold", "v_residual", "near_equilibrium"],
               ledger_rows)
    if result.worst_competitor is not None:
        write_field(os.path.join(args.out, "worst_competitor.olf"),
                    result.worst_competitor)
    print("k:", _fmt(result.k), " delta*:",
          _fmt(result.delta_star) if result.delta_star is not None else "-")
    for rep in result.reports:
        print(f"delta {_fmt(rep.delta)}: admissible {rep.admissible} "
              f"held {rep.held} rejected {rep.rejected}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="oscilab",
        description="Mean-oscillation seminorm workbench and uniqueness lab",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads (0 = auto)")

    p = sub.add_parser("bmo", help="seminorm report for an OLF1 field file")
    p.add_argument("field", help="OLF1 field file")
    p.add_argument("--mask", default=None, help="OLM1 mask file")
    p.add_argument("--family", choices=_FAMILIES, default="all")
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--report", default=None, help="report output path")
    common(p)
    p.set_defaults(func=cmd_bmo)

    p = sub.add_parser("korn", help="Korn-quotient searches")
    p.add_argument("--config", required=True)
    common(p)
    p.set_defaults(func=cmd_korn)

    p = sub.add_parser("material", help="constitutive diagnostics")
    p.add_argument("--config", required=True)
    common(p)
    p.set_defaults(func=cmd_material)

    p = sub.add_parser("uniqueness", help="energy-gap uniqueness experiment")
    p.add_argument("--config", required=True)
    common(p)
    p.set_defaults(func=cmd_uniqueness)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileFormatError, FileNotFoundError, IsADirectoryError,
            InvalidCubeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InadmissibleError, BarrierStallError, FloatingPointError,
            np.linalg.LinAlgError, ValueError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
