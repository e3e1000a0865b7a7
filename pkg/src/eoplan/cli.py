"""Command-line pipeline: gen, access, plan, validate, report.

Every stage writes the digests of its inputs next to its outputs and refuses
inputs whose recorded digests no longer match.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .access import ResourceGuardError, access_scan
from .cycles import CycleBundle, prepare_cycles
from .execution import Schedule, metrics, schedule_from_solution, validate
from .model import build_model, export_lp
from .scenario import GeneratorSpec, ScenarioError, generate_synthetic, load_scenario, serialize_scenario
from .solver import (
    INFEASIBLE,
    TIMEOUT_NO_INCUMBENT,
    LPError,
    Solution,
    SolverConfig,
    TooLargeError,
    plan_with_fallback,
    solve_bnb,
    solve_exhaustive,
    solve_greedy,
)
from .timeline import AccessTimeline

logger = logging.getLogger("eoplan")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_STALE = 4
EXIT_INFEASIBLE = 5
EXIT_INVALID = 6
EXIT_SOLVER = 7
EXIT_RESOURCE = 8

EXIT_CODES = f"""exit codes:
  {EXIT_OK}  success
  {EXIT_USAGE}  bad command-line usage
  {EXIT_INPUT}  missing input file or schema violation
  {EXIT_STALE}  input was produced from a different upstream file (digest mismatch)
  {EXIT_INFEASIBLE}  mandatory active targets cannot all be covered (and --fallback was not given)
  {EXIT_INVALID}  schedule failed second-level validation
  {EXIT_SOLVER}  solver failure (no incumbent before the limit, numerical error, instance too large)
  {EXIT_RESOURCE}  request exceeds a resource guard (for example the access-scan horizon cap)
"""


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def scenario_digest(scenario) -> str:
    return sha256_text(serialize_scenario(scenario))


def _read(path: str | Path) -> str:
    p = Path(path)
    if not p.is_file():
        raise CliError(EXIT_INPUT, f"input file not found: {p}")
    return p.read_text()


def _read_json(path) -> dict:
    try:
        return json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_INPUT, f"{path}: not valid JSON ({exc})") from None


def _load_scenario(path):
    try:
        return load_scenario(_read(path))
    except ScenarioError as exc:
        raise CliError(EXIT_INPUT, f"{path}: {exc}") from None


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    logger.info("wrote %s", path)


def _load_timeline(path, scenario) -> AccessTimeline:
    try:
        tl, meta = AccessTimeline.from_csv(_read(path))
    except (ValueError, KeyError) as exc:
        raise CliError(EXIT_INPUT, f"{path}: malformed timeline ({exc})") from None
    want = scenario_digest(scenario)
    if meta.get("scenario_sha256") != want:
        raise CliError(EXIT_STALE, f"{path} was computed for a different scenario "
                                   f"(recorded {meta.get('scenario_sha256')}, scenario is {want})")
    return tl


def _timeline_for(args, scenario) -> AccessTimeline:
    if getattr(args, "timeline", None):
        return _load_timeline(args.timeline, scenario)
    logger.info("no timeline given; scanning access")
    return access_scan(scenario, step=1)


# ---------------------------------------------------------------------------
# commands


def cmd_gen(args) -> int:
    kw = {}
    for f in dataclasses.fields(GeneratorSpec):
        v = getattr(args, f.name, None)
        if v is not None:
            kw[f.name] = tuple(v) if isinstance(v, list) else v
    try:
        spec = GeneratorSpec(**kw)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None
    scenario = generate_synthetic(spec, args.seed)
    _write(Path(args.output), serialize_scenario(scenario))
    return EXIT_OK


def cmd_access(args) -> int:
    scenario = _load_scenario(args.scenario)
    tl = access_scan(scenario, step=args.step)
    header = f"scenario_sha256={scenario_digest(scenario)}"
    _write(Path(args.output), tl.to_csv(header))
    return EXIT_OK


def _solve(model, args) -> Solution:
    cfg = SolverConfig(mip_gap=args.mip_gap, time_limit=args.timeout, node_limit=args.node_limit, seed=args.seed)
    if args.solver == "greedy":
        return solve_greedy(model)
    if args.solver == "exhaustive":
        try:
            return solve_exhaustive(model)
        except TooLargeError as exc:
            raise CliError(EXIT_SOLVER, str(exc)) from None
    if args.fallback:
        return plan_with_fallback(model, cfg)
    return solve_bnb(model, cfg)


def cmd_plan(args) -> int:
    scenario = _load_scenario(args.scenario)
    tl = _timeline_for(args, scenario)
    out = Path(args.out_dir)
    bundle = prepare_cycles(scenario, tl)
    sdig = scenario_digest(scenario)
    cyc_doc = bundle.to_dict()
    cyc_doc["inputs"] = {"scenario_sha256": sdig}
    _write(out / "cycles.json", json.dumps(cyc_doc, sort_keys=True) + "\n")
    mandatory = args.active_mandatory == "on"
    model = build_model(bundle, scenario.targets, scenario, mandatory)
    if args.export_lp:
        _write(out / "model.lp", export_lp(model))
    try:
        sol = _solve(model, args)
    except LPError as exc:
        raise CliError(EXIT_SOLVER, f"LP failure: {exc}") from None
    inputs = {"scenario_sha256": sdig, **model.metadata["digest"], "active_mandatory": mandatory,
              "solver": args.solver, "mip_gap": args.mip_gap}
    doc = sol.to_dict()
    doc["inputs"] = inputs
    _write(out / "solution.json", json.dumps(doc, indent=1, sort_keys=True) + "\n")
    _write(out / "progress.csv", sol.progress_csv())
    if sol.status == INFEASIBLE:
        raise CliError(EXIT_INFEASIBLE, f"infeasible: {sol.message}")
    if sol.status == TIMEOUT_NO_INCUMBENT or sol.values is None:
        raise CliError(EXIT_SOLVER, f"no plan: {sol.message or sol.status}")
    used = model.without_mandatory() if sol.fallback else model
    sched = schedule_from_solution(sol, used, bundle)
    _write(out / "schedule.json", sched.to_json())
    print(f"{sol.status}: objective {sol.objective:.6f}, bound {sol.best_bound:.6f}, gap {sol.gap:.3g}"
          + (" (fallback without mandatory targets)" if sol.fallback else ""))
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario = _load_scenario(args.scenario)
    doc = _read_json(args.schedule)
    try:
        sched = Schedule.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_INPUT, f"{args.schedule}: malformed schedule ({exc})") from None
    recorded = sched.digest.get("scenario_sha256")
    if recorded != scenario_digest(scenario):
        raise CliError(EXIT_STALE, f"{args.schedule} was planned for a different scenario")
    tl = _timeline_for(args, scenario)
    report = validate(sched, scenario, tl)
    text = report.to_json()
    if args.output:
        _write(Path(args.output), text)
    else:
        sys.stdout.write(text)
    for v in report.violations[:20]:
        logger.error("%s %s t=%d: %s", v.family, v.satellite_id, v.t, v.detail)
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_report(args) -> int:
    scenario = _load_scenario(args.scenario)
    doc = _read_json(args.solution)
    cyc = _read_json(args.cycles)
    inputs = doc.get("inputs", {})
    if inputs.get("scenario_sha256") != scenario_digest(scenario) or \
            cyc.get("inputs", {}).get("scenario_sha256") != scenario_digest(scenario):
        raise CliError(EXIT_STALE, "solution or cycles were produced for a different scenario")
    try:
        bundle = CycleBundle.from_dict(cyc)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_INPUT, f"{args.cycles}: malformed cycles ({exc})") from None
    model = build_model(bundle, scenario.targets, scenario, bool(inputs.get("active_mandatory", True)))
    if doc.get("fallback"):
        model = model.without_mandatory()
    if model.metadata["digest"]["cycles_sha256"] != inputs.get("cycles_sha256"):
        raise CliError(EXIT_STALE, f"{args.cycles} does not match the cycles recorded in {args.solution}")
    sol = Solution.from_dict(doc, model)
    sched = None
    if args.schedule:
        sched = Schedule.from_dict(_read_json(args.schedule))
    elif sol.values is not None:
        sched = schedule_from_solution(sol, model, bundle)
    rep = metrics(sol, model, sched)
    md = ["# Plan report", "",
          f"status: {sol.status}" + (" (fallback without mandatory targets)" if sol.fallback else ""),
          f"solver: {sol.solver}", "",
          rep.markdown(include_timing=args.timing)]
    if rep.max_latency is not None:
        md.append(f"max observation-to-downlink latency: {rep.max_latency} s")
    md.append(f"undelivered images: {rep.undelivered}")
    out = Path(args.output)
    _write(out, "\n".join(md) + "\n")
    mj = rep.to_dict()
    if not args.timing:
        mj.pop("solve_time")
    _write(out.with_suffix(".json"), json.dumps(mj, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_gen_flags(p: argparse.ArgumentParser):
    for f in dataclasses.fields(GeneratorSpec):
        flag = "--" + f.name.replace("_", "-")
        default = f.default
        if isinstance(default, tuple):
            p.add_argument(flag, type=float, nargs=len(default), default=None, metavar="X",
                           help=f"default {' '.join(str(v) for v in default)}")
        else:
            p.add_argument(flag, type=type(default), default=None, help=f"default {default}")


class _Formatter(argparse.RawDescriptionHelpFormatter, argparse.ArgumentDefaultsHelpFormatter):
    def _get_help_string(self, action):
        # None means "not given"; the real default is already in the help text when it matters
        if action.default is None:
            return action.help
        return super()._get_help_string(action)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eoplan", description=__doc__, epilog=EXIT_CODES,
                                     formatter_class=_Formatter)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic scenario", epilog=EXIT_CODES, formatter_class=_Formatter)
    _add_gen_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default="scenario.json")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("access", help="scan per-second access", epilog=EXIT_CODES, formatter_class=_Formatter)
    p.add_argument("scenario")
    p.add_argument("--step", type=int, default=1)
    p.add_argument("-o", "--output", default="timeline.csv")
    p.set_defaults(func=cmd_access)

    p = sub.add_parser("plan", help="build cycles and the model, then solve", epilog=EXIT_CODES,
                       formatter_class=_Formatter)
    p.add_argument("scenario")
    p.add_argument("--timeline", help="timeline.csv from 'eoplan access' (scanned on the fly if omitted)")
    p.add_argument("--mip-gap", type=float, default=1e-4)
    p.add_argument("--timeout", type=float, default=10800.0, help="seconds")
    p.add_argument("--node-limit", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--active-mandatory", choices=("on", "off"), default="on")
    p.add_argument("--fallback", action="store_true",
                   help="if mandatory coverage is infeasible, re-plan with it dropped")
    p.add_argument("--solver", choices=("bnb", "greedy", "exhaustive"), default="bnb")
    p.add_argument("--export-lp", action="store_true", help="also write model.lp")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("validate", help="replay a schedule second by second", epilog=EXIT_CODES,
                       formatter_class=_Formatter)
    p.add_argument("schedule")
    p.add_argument("scenario")
    p.add_argument("--timeline")
    p.add_argument("-o", "--output", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", help="Markdown and JSON metrics for a plan", epilog=EXIT_CODES,
                       formatter_class=_Formatter)
    p.add_argument("solution")
    p.add_argument("scenario")
    p.add_argument("cycles")
    p.add_argument("--schedule")
    p.add_argument("--timing", action="store_true",
                   help="include wall-clock solve time (makes the report run-dependent)")
    p.add_argument("-o", "--output", default="report.md")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"eoplan {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except ResourceGuardError as exc:
        print(f"eoplan {args.command}: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except ScenarioError as exc:
        print(f"eoplan {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
