"""Command-line interface for the data-driven ASSOSM toolkit."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import data as data_mod
from . import design as design_mod
from . import harness, plots
from .data import noise_bound_uniform
from .design import DesignProblem
from .errors import AssosmError
from .specfile import load_spec


def _cmd_collect(args) -> int:
    spec = load_spec(args.spec)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    model, dist = spec.resolve_plant()
    cfg = replace(spec.collect_config, seed=spec.seed)
    ds = data_mod.collect(model, dist, spec.collect_x0, cfg)
    data_mod.save_dataset(ds, args.out)
    rc = data_mod.rank_check(ds)
    print(f"collected T={ds.T} samples -> {args.out}")
    print(f"rank [O1;O2] = {rc['rank_state']} (need {rc['n']}): "
          f"{'ok' if rc['ours'] else 'FAIL'}")
    return 0


def _problem_from_dir(data_dir: str) -> tuple:
    ds = data_mod.load_dataset(data_dir)
    meta = ds.meta or {}
    hw = meta.get("noise_halfwidth")
    if hw in (None, "None"):
        raise AssosmError("dataset manifest lacks a declared noise halfwidth")
    bound = noise_bound_uniform(float(hw), ds.n - 1, ds.T)
    return ds, DesignProblem.from_dataset(ds, bound)


def _cmd_design(args) -> int:
    _, problem = _problem_from_dir(args.data)
    sol = design_mod.solve_design(problem)
    design_mod.save_solution(sol, args.out)
    sv = design_mod.sliding_variable(sol)
    print(f"design feasible: kappa1={sol.kappa1:.6g} kappa2={sol.kappa2:.6g}")
    print("sigma = x_n + [" + " ".join("%.6g" % c for c in sv.coeff_r) + "] . x_r")
    print(f"solution -> {args.out}")
    return 0


def _cmd_verify(args) -> int:
    ds, problem = _problem_from_dir(args.data)
    sol = design_mod.load_solution(args.solution)
    report = design_mod.verify_certificate(problem, sol, realized_noise=ds.Psi)
    for name, check in report["checks"].items():
        status = "pass" if check["ok"] else "FAIL"
        extra = f" (max eig {check['max_eig']:.3e})" if "max_eig" in check else ""
        print(f"{name}: {status}{extra}")
    return 0 if report["ok"] else 1


def _cmd_simulate(args) -> int:
    spec = load_spec(args.spec)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    result = harness.run_pipeline(spec)
    for key, val in result.metrics.items():
        print(f"{key} = {val}")
    if args.out:
        files = harness.write_run_csvs(result, args.out)
        files += plots.render_run(result, args.out)
        for f in files:
            print(f"wrote {f}")
    return 0


def _cmd_reproduce(args) -> int:
    result = harness.reproduce(args.benchmark, args.out, seed=args.seed or 1)
    for key, val in result.metrics.items():
        print(f"{key} = {val}")
    print(f"artifacts -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="assosm",
        description="Data-driven adaptive second-order sliding mode control",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="run the data-collection experiment")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=_cmd_collect)

    p = sub.add_parser("design", help="solve the design SDP from a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_design)

    p = sub.add_parser("verify", help="re-check a design certificate")
    p.add_argument("--data", required=True)
    p.add_argument("--solution", required=True)
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("simulate", help="run the full pipeline for a spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("reproduce", help="reproduce a published benchmark")
    p.add_argument("benchmark", choices=["b1", "b2", "b3"])
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=_cmd_reproduce)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except AssosmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.stage_code


if __name__ == "__main__":
    sys.exit(main())
