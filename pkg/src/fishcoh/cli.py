"""Command-line front end. Every invocation prints one JSON document.

Exit codes: 0 success, 1 validation failure or mismatch, 2 usage error.
"""

import argparse
import csv
import hashlib
import json
import os
import sys

from . import __version__
from .axioms import AxiomSuiteConfig, run_axiom_suite
from .errors import FishcohError, InvalidState
from .fisher import classical_fi, qfi_sld, state_derivative
from .iochannel import io_to_json, load_io, postselect_distribution, validate_io, witness_io
from .optimize import OptimizerBudget, maximize_coherence, qfi_of_best
from .qcore import load_state, state_to_json
from .repro import run_golden_suite


def _state_hash(rho):
    blob = json.dumps(state_to_json(rho), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _append_csv(path, command, state_hash, theta0, value, provenance):
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(["command", "state_hash", "theta0", "value", "provenance"])
        w.writerow([command, state_hash, theta0, repr(value), provenance])


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _budget(args):
    budget = OptimizerBudget.from_json(_load_json(args.config)) if args.config else OptimizerBudget()
    if args.restarts is not None:
        budget.restarts = args.restarts
    if args.groups is not None:
        budget.group_counts = tuple(int(g) for g in args.groups.split(","))
    if args.seed is not None:
        budget.seed = args.seed
    return budget


def cmd_coherence(args):
    rho = load_state(args.state)
    budget = _budget(args)
    rep = maximize_coherence(rho, args.theta0, budget)
    result = rep.to_json()
    result["qfi_of_best"] = qfi_of_best(rep, rho)
    inputs = {"state": args.state, "state_hash": _state_hash(rho), "theta0": args.theta0,
              "budget": budget.to_json()}
    prov = "exact-checkable (qubit)" if rho.dim == 2 else "certified lower bound"
    return inputs, result, [], 0, (_state_hash(rho), args.theta0, rep.lower_bound, prov)


def _state_io(args):
    rho = load_state(args.state)
    io = load_io(args.io)
    if args.theta0 is not None:
        io = type(io)(io.dim, io.kraus, args.theta0)
    return rho, io


def cmd_fi(args):
    rho, io = _state_io(args)
    fd = postselect_distribution(io, rho)
    val = classical_fi(fd)
    inputs = {"state": args.state, "io": args.io, "theta0": io.theta0}
    result = {"fi": val, "p": fd.p.tolist(), "dp": fd.d.tolist()}
    return inputs, result, [], 0, (_state_hash(rho), io.theta0, val, "post-selection FI")


def cmd_qfi(args):
    rho, io = _state_io(args)
    val = qfi_sld(state_derivative(io, rho))
    inputs = {"state": args.state, "io": args.io, "theta0": io.theta0}
    return inputs, {"qfi": val}, [], 0, (_state_hash(rho), io.theta0, val, "SLD QFI of output family")


def cmd_validate(args):
    io = load_io(args.io)
    rep = validate_io(io)
    return {"io": args.io}, rep.to_json(), [], 0, None


def cmd_witness(args):
    rho = load_state(args.state)
    io = witness_io(rho, args.theta0)
    val = classical_fi(postselect_distribution(io, rho))
    inputs = {"state": args.state, "theta0": args.theta0}
    return inputs, {"fi": val, "io": io_to_json(io)}, [], 0, (_state_hash(rho), args.theta0, val, "witness IO FI")


def cmd_axioms(args):
    cfg = AxiomSuiteConfig.from_json(_load_json(args.config)) if args.config else AxiomSuiteConfig()
    verdicts = run_axiom_suite(cfg)
    diags = [f"{v.axiom}(d={v.dim}): {len(v.failures)} failures" for v in verdicts if v.failures]
    diags += [f"{v.axiom}(d={v.dim}): skipped, {v.note}" for v in verdicts if v.skipped]
    code = 0 if all(v.passed for v in verdicts) else 1
    return {"config": args.config}, {"verdicts": [v.to_json() for v in verdicts]}, diags, code, None


def cmd_repro(args):
    rep = run_golden_suite(args.qubit_states)
    diags = [f"mismatch: {c['name']}" for c in rep["cases"] if not c["passed"]]
    return {"qubit_states": args.qubit_states}, rep, diags, 0 if rep["ok"] else 1, None


def build_parser():
    p = argparse.ArgumentParser(prog="fishcoh", description="Fisher-information coherence measure")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, state=False, io=False, theta=False, csv_sink=True):
        if state:
            sp.add_argument("--state", required=True)
        if io:
            sp.add_argument("--io", required=True)
        if theta:
            sp.add_argument("--theta0", type=float, default=0.0)
        if csv_sink:
            sp.add_argument("--csv", metavar="PATH")

    sp = sub.add_parser("coherence", help="lower bound (and qubit closed form) of the measure")
    common(sp, state=True, theta=True)
    sp.add_argument("--restarts", type=int)
    sp.add_argument("--groups", help="comma-separated group counts, e.g. 1,2,3")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--config", help="JSON optimizer budget")
    sp.set_defaults(func=cmd_coherence)

    for name, func, help_ in (("fi", cmd_fi, "post-selection Fisher information"),
                              ("qfi", cmd_qfi, "SLD quantum Fisher information")):
        sp = sub.add_parser(name, help=help_)
        common(sp, state=True, io=True)
        sp.add_argument("--theta0", type=float, default=None, help="override the IO file's theta0")
        sp.set_defaults(func=func)

    sp = sub.add_parser("validate", help="validity report for an IO file")
    common(sp, io=True, csv_sink=False)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("witness", help="positivity witness IO for a coherent state")
    common(sp, state=True, theta=True)
    sp.set_defaults(func=cmd_witness)

    sp = sub.add_parser("axioms", help="randomized axiom checks")
    sp.add_argument("--config", help="JSON suite config")
    sp.set_defaults(func=cmd_axioms)

    sp = sub.add_parser("repro", help="golden-value reproduction suite")
    sp.add_argument("--qubit-states", type=int, default=50)
    sp.set_defaults(func=cmd_repro)
    return p


def _emit(doc):
    sys.stdout.write(json.dumps(doc, sort_keys=True) + "\n")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        inputs, result, diags, code, row = args.func(args)
    except (FishcohError, OSError, json.JSONDecodeError) as err:
        diag = type(err).__name__
        if isinstance(err, InvalidState):
            diag = f"{diag}:{err.invariant}"
        report = getattr(err, "report", None)
        _emit({
            "command": args.command,
            "inputs": {k: v for k, v in vars(args).items() if k not in ("func", "command")},
            "result": None if report is None else report.to_json(),
            "diagnostics": [diag, str(err)],
        })
        return 1
    if row is not None and getattr(args, "csv", None):
        _append_csv(args.csv, args.command, *row)
    _emit({"command": args.command, "inputs": inputs, "result": result, "diagnostics": diags})
    return code


if __name__ == "__main__":
    sys.exit(main())
