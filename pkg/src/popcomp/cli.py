"""Command-line entry point.

Exit codes: 0 success, 1 verification failure (or an indeterminate check),
2 usage or input error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from . import convert, core, qfpa, sim, synth, verify

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InternalError(Exception):
    pass


# ------------------------------------------------------------ marshaling

def parse_assignment(text: str) -> dict[str, int]:
    """``x=1,y=2`` -> {"x": 1, "y": 2}."""
    out = {}
    if not text.strip():
        return out
    for part in text.split(","):
        if "=" not in part:
            raise UsageError(f"bad assignment {part!r}, expected var=count")
        k, v = part.split("=", 1)
        try:
            n = int(v)
        except ValueError:
            raise UsageError(f"bad count {v!r} for {k.strip()!r}") from None
        if n < 0:
            raise UsageError(f"negative count for {k.strip()!r}")
        out[k.strip()] = n
    return out


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated integer list, got {text!r}") from None


def load_computer(path: str) -> core.PopulationComputer:
    try:
        return core.from_file(path)
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}") from None
    except (ValueError, json.JSONDecodeError) as e:
        raise UsageError(f"{path}: {e}") from None


def emit(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(path, "w") as f:
            f.write(text if text.endswith("\n") else text + "\n")


def jdump(obj) -> str:
    def conv(o):
        if isinstance(o, Fraction):
            return str(o)
        if isinstance(o, (set, frozenset)):
            return sorted(o)
        raise TypeError(type(o).__name__)
    return json.dumps(obj, indent=1, default=conv)


def full_values(p: core.PopulationComputer, values: dict[str, int], variables=None) -> dict[str, int]:
    names = list(variables) if variables is not None else list(p.meta.get("variables", {}) or p.inputs)
    unknown = set(values) - set(names)
    if unknown:
        raise UsageError(f"unknown variables {sorted(unknown)}; expected {names}")
    return {v: values.get(v, 0) for v in names}


# ------------------------------------------------------------ subcommands

def cmd_eval(a) -> int:
    p = qfpa.parse(a.formula)
    given = parse_assignment(a.input)
    missing = [v for v in p.variables if v not in given]
    if a.strict and missing:
        raise UsageError(f"missing variables {missing}")
    x = {v: 0 for v in p.variables}
    x.update(given)
    print(int(qfpa.evaluate(p, x)))
    return EXIT_OK


def subcomputer(p: qfpa.Predicate, degrees: list[int] | None) -> core.PopulationComputer:
    atoms = p.atoms()
    if len(atoms) != 1 or p.root is not atoms[0]:
        raise UsageError("--subcomputer needs a single atom")
    atom = atoms[0]
    inputs = {v: a for v, a in zip(p.variables, atom.coeffs) if a}
    if isinstance(atom, qfpa.Remainder):
        return synth.remainder_sub(atom.theta, atom.c, inputs)
    d = degrees[0] if degrees else synth.default_threshold_degree(atom, 1)
    return synth.threshold_sub(atom.c, d, inputs)


def cmd_compile(a) -> int:
    p = qfpa.parse(a.formula)
    if a.double:
        p = qfpa.double(p)
    degrees = parse_int_list(a.threshold_degree) if a.threshold_degree else None
    try:
        comp = subcomputer(p, degrees) if a.subcomputer else synth.compile(p, degrees)
    except ValueError as e:
        raise UsageError(str(e)) from None
    problems = core.validate(comp)
    if problems:
        raise InternalError("; ".join(problems))
    emit(core.to_json(comp), a.output)
    return EXIT_OK


def cmd_convert(a) -> int:
    comp = load_computer(a.computer)
    try:
        proto, report, stages = convert.pipeline(comp, a.pipeline)
    except convert.ConversionError as e:
        raise UsageError(str(e)) from None
    if not report.ok():
        raise InternalError(jdump(report.to_dict()))
    if a.stages_dir:
        os.makedirs(a.stages_dir, exist_ok=True)
        for k, (name, (q, pi)) in enumerate(stages.items(), 1):
            core.to_file(q, os.path.join(a.stages_dir, f"{k}-{name}.json"))
            if pi is not None:
                emit(jdump(pi.to_dict()), os.path.join(a.stages_dir, f"{k}-{name}.refinement.json"))
    if a.report:
        emit(jdump(report.to_dict()), a.report)
    emit(core.to_json(proto), a.output)
    return EXIT_OK


def cmd_simulate(a) -> int:
    p = load_computer(a.protocol)
    values = full_values(p, parse_assignment(a.input))
    c0 = sim.configuration_of(p, values)
    if a.fair:
        results = [sim.run_computer_fair(p, c0, s, a.max_interactions)
                   for s in sim.trial_seeds(a.seed, a.trials)]
        stats = sim.RunStats.of(results)
    else:
        try:
            stats = sim.estimate(p, c0, a.trials, a.seed, a.max_interactions, jobs=a.jobs)
        except ValueError as e:
            raise UsageError(str(e)) from None
    if a.csv:
        emit(sim.trials_csv(stats.results), a.csv)
    summary = {"n": c0.n, "trials": stats.trials, "mean": stats.mean, "stddev": stats.stddev,
               "min": stats.min, "max": stats.max,
               "outputs": {str(k): v for k, v in sorted(stats.histogram.items(), key=str)}}
    print(jdump(summary))
    return EXIT_OK


def cmd_verify(a) -> int:
    p = load_computer(a.computer)
    pred = qfpa.parse(a.predicate)
    report = {"predicate": a.predicate, "inputs": [], "ok": True}
    if a.inputs:
        vectors = [full_values(p, parse_assignment(a.inputs), pred.variables)]
    else:
        vectors = list(verify.inputs_up_to(pred.variables, a.inputs_up_to))
    status = True
    for x in vectors:
        v = verify.check_correct(p, pred, x, a.helper_slack, a.max_configs)
        report["inputs"].append({"input": x, **v.to_dict()})
        if v.ok is not True:
            if v.ok is False:
                status = False
            elif status is True:
                status = None
            print(f"{'FAIL' if v.ok is False else 'INDETERMINATE'} {x}: {v.reason}", file=sys.stderr)
    report["ok"] = status
    if a.report:
        emit(jdump(report), a.report)
    print("pass" if status is True else ("fail" if status is False else "indeterminate"))
    return EXIT_OK if status is True else EXIT_FAIL


def cmd_potential(a) -> int:
    p = load_computer(a.computer)
    if a.synthesize:
        try:
            res = verify.synthesize_potential(p, a.max_transitions)
        except ValueError as e:
            raise UsageError(str(e)) from None
        if isinstance(res, verify.UnboundedWitness):
            if not res.check(p):
                raise InternalError("loop witness fails its own check")
            doc = {"kind": "witness",
                   "counts": [{"lhs": list(l), "rhs": list(r), "y": str(y)} for (l, r), y in res.counts.items()]}
            emit(jdump(doc), a.output)
            return EXIT_FAIL
        w = res
    else:
        try:
            w = synth.potential(p)
        except (ValueError, KeyError) as e:
            raise UsageError(f"no explicit potential for this computer ({e}); try --synthesize") from None
    bad = synth.check_potential(p, w)
    emit(jdump({"kind": "weights", "ok": bad is None, "weights": dict(sorted(w.items())),
                "violated": None if bad is None else str(bad)}), a.output)
    if bad is not None and a.synthesize:
        raise InternalError(f"synthesized weights violated by {bad}")
    return EXIT_OK if bad is None else EXIT_FAIL


def cmd_bench(a) -> int:
    if bool(a.formula) == bool(a.protocol):
        raise UsageError("give exactly one of FORMULA or --protocol")
    if a.protocol:
        p = load_computer(a.protocol)
        variables = list(p.meta.get("variables", {})) or list(p.inputs)
    else:
        pred = qfpa.parse(a.formula)
        p, report, _ = convert.build_protocol(pred, a.pipeline)
        variables = pred.variables
    sizes = parse_int_list(a.sizes)
    if not sizes or min(sizes) < 2:
        raise UsageError("sizes must be at least 2")
    rows, slope = sim.scaling_bench(p, sizes, a.trials, a.seed, sim.balanced_input(p, variables),
                                    a.max_interactions, jobs=a.jobs)
    emit(sim.bench_csv(rows), a.csv)
    print(f"log-log slope {slope:.4f}", file=sys.stderr)
    if any(r.capped for r in rows):
        print("warning: some trials hit the interaction cap", file=sys.stderr)
    if a.plot:
        from .plotting import plot_bench
        plot_bench(rows, slope, a.plot, a.formula or a.protocol)
    return EXIT_OK


def cmd_info(a) -> int:
    p = load_computer(a.computer)
    info = {
        "states": len(p.states),
        "transitions": p.n_transitions(),
        "helpers": p.helper_count(),
        "inputs": list(p.inputs),
        "binary": p.is_binary(),
        "output": type(p.output).__name__,
        "size": p.size(),
    }
    if isinstance(p.output, core.CircuitOutput):
        info["gates"] = p.output.circuit.size()
        info["size2"] = p.size2()
    if "stages" in p.meta:
        info["stages"] = p.meta["stages"]
    if "min_input" in p.meta:
        info["min_input"] = p.meta["min_input"]
    if isinstance(p.delta, dict):
        info["rapid_syntactic"] = verify.check_rapid_syntactic(p)
    print(jdump(info))
    return EXIT_OK


# ----------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="popcomp", description="Compile Presburger predicates into "
                                 "population computers and protocols; verify and simulate them.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("eval", help="evaluate a predicate on an input vector")
    s.add_argument("formula")
    s.add_argument("--input", default="", help="assignment such as x=1,y=2 (missing variables are 0)")
    s.add_argument("--strict", action="store_true", help="require every variable to be assigned")
    s.set_defaults(fn=cmd_eval)

    s = sub.add_parser("compile", help="compile a predicate into a bounded population computer")
    s.add_argument("formula")
    s.add_argument("--double", action="store_true", help="compile double(formula), the pipeline's input")
    s.add_argument("--subcomputer", action="store_true",
                   help="single atom only: the standalone atom computer with value-labelled states")
    s.add_argument("--threshold-degree", help="per-threshold-atom degree override, comma list in atom order")
    s.add_argument("-o", "--output", help="output JSON path (default stdout)")
    s.set_defaults(fn=cmd_compile)

    s = sub.add_parser("convert", help="convert a computer for double(phi) into a protocol for phi")
    s.add_argument("computer")
    s.add_argument("--pipeline", choices=["fast", "full"], default="fast")
    s.add_argument("-o", "--output", help="output protocol JSON path (default stdout)")
    s.add_argument("--report", help="write the stage report JSON here")
    s.add_argument("--stages-dir", help="write every stage and its refinement map here")
    s.set_defaults(fn=cmd_convert)

    s = sub.add_parser("simulate", help="simulate a protocol from an input vector")
    s.add_argument("protocol")
    s.add_argument("--input", required=True, help="assignment such as x=3,y=2")
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-interactions", type=int, default=10**9)
    s.add_argument("--csv", help="per-trial CSV path")
    s.add_argument("--fair", action="store_true",
                   help="random enabled transitions instead of random pairs (any computer)")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("verify", help="exhaustive correctness check on small inputs")
    s.add_argument("computer")
    s.add_argument("--predicate", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--inputs-up-to", type=int, help="all inputs of total size at most this")
    g.add_argument("--inputs", help="a single assignment such as x=1,y=2")
    s.add_argument("--helper-slack", type=int, default=0)
    s.add_argument("--max-configs", type=int, default=10**6)
    s.add_argument("--report", help="verdict JSON path")
    s.set_defaults(fn=cmd_verify)

    s = sub.add_parser("potential", help="potential weights certifying boundedness")
    s.add_argument("computer")
    s.add_argument("--synthesize", action="store_true", help="solve the exact LP instead of the explicit rule")
    s.add_argument("--max-transitions", type=int, default=400)
    s.add_argument("-o", "--output")
    s.set_defaults(fn=cmd_potential)

    s = sub.add_parser("bench", help="interactions-to-termination scaling")
    s.add_argument("formula", nargs="?")
    s.add_argument("--protocol", help="protocol JSON instead of a formula")
    s.add_argument("--pipeline", choices=["fast", "full"], default="fast")
    s.add_argument("--sizes", default="256,512,1024")
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-interactions", type=int, default=10**10)
    s.add_argument("--csv", help="bench CSV path (default stdout)")
    s.add_argument("--plot", help="also render a log-log PNG/PDF figure here")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(fn=cmd_bench)

    s = sub.add_parser("info", help="summarise a computer or protocol JSON")
    s.add_argument("computer")
    s.set_defaults(fn=cmd_info)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    try:
        return a.fn(a)
    except (UsageError, qfpa.ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InternalError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
