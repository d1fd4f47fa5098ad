"""Command-line interface: ``relalg <command> <file> [options]``.

Exit codes: 0 on success, 2 when an obstruction to integrability was found
(the analysis itself succeeded), 1 on errors and comparison mismatches.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import algebroid as alg
from .expr import EvaluationError, ParseError, parse_expr
from .exterior import form_text, parse_form
from .jets import JetError, load_pde, pde_prolong_compare, pde_to_algebroid
from .prolong import ProlongError, prolongation_tower, solve_prolongation, torsion_system
from .tableau import (
    RANDOM_FLAGS,
    TableauError,
    cartan_search,
    cartan_test,
    spencer_cohomology_dim,
    tableau_map,
)

EXIT_OK, EXIT_ERROR, EXIT_OBSTRUCTION = 0, 1, 2

_PREFIX = re.compile(r"^#\s*var-prefix\s+([A-Za-z_][A-Za-z0-9_]*)\s*$", re.MULTILINE)


@dataclass
class Report:
    command: list[str]
    seed: int
    result: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    text: list[str] = field(default_factory=list)  # human-readable rendering
    exit_code: int = EXIT_OK

    def as_dict(self) -> dict:
        return {"command": self.command, "seed": self.seed, "warnings": self.warnings, "result": self.result}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2)


# ---------------------------------------------------------------------------
# helpers


def _read(path: str) -> str:
    return Path(path).read_text()


def _load(path: str) -> alg.RelativeAlgebroid:
    return alg.load_algebroid(_read(path))


def _prefix(args) -> str | None:
    if getattr(args, "var_prefix", None):
        return args.var_prefix
    m = _PREFIX.search(_read(args.file))
    return m.group(1) if m else None


def _point(text: str) -> dict[str, Fraction]:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise ValueError(f"point entry {part!r} must read name=value")
        name, value = (s.strip() for s in part.split("=", 1))
        out[name] = Fraction(value)
    return out


def _permutation(text: str) -> list[int]:
    return [int(p) for p in re.split(r"[,\s]+", text.strip()) if p]


def _emit(a: alg.RelativeAlgebroid, path: Path, prefix: str | None):
    text = alg.dump_algebroid(a)
    if prefix:
        text = f"# var-prefix {prefix}\n" + text
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# ---------------------------------------------------------------------------
# commands


def cmd_check(args, rep: Report):
    a = _load(args.file)
    standard = alg.is_standard(a, args.seed)
    systatic = alg.systatic_directions(a, args.seed)
    rep.result = {
        "frame": list(a.frame),
        "base": list(a.base),
        "fiber": list(a.fiber),
        "level": a.level,
        "standard": standard,
        "systatic_directions": [{k: round(v, 12) for k, v in d.items()} for d in systatic],
    }
    rep.text += [
        f"valid: rank {a.n}, {len(a.base)} base and {len(a.fiber)} fiber variables",
        f"standard: {standard}",
        f"systatic directions: {len(systatic)}",
    ]
    rep.text += ["  " + ", ".join(f"{k}: {v:g}" for k, v in d.items()) for d in systatic]


def cmd_derive(args, rep: Report):
    a = _load(args.file)
    form = parse_form(args.form, a.variables, a.frame)
    out = form_text(alg.derive(a, form), a.frame)
    rep.result = {"form": args.form, "derivative": out}
    rep.text.append(out)


def cmd_torsion(args, rep: Report):
    a = _load(args.file)
    system = torsion_system(a)
    eqs = [{"equation": eq.text(), "source": eq.source} for eq in system.equations]
    rep.result = {"unknowns": system.unknowns, "equations": eqs}
    rep.text.append("unknowns: " + (" ".join(system.unknowns) or "(none)"))
    rep.text += [f"{e['equation']}    [{e['source']}]" for e in eqs]


def cmd_prolong(args, rep: Report):
    a = _load(args.file)
    prefix = _prefix(args)
    steps = []
    for _ in range(args.steps):
        step = solve_prolongation(a, args.seed, prefix)
        level = a.level + 1
        entry = {"level": level, **step.as_dict()}
        steps.append(entry)
        rep.warnings += step.warnings
        rep.text.append(f"level {level}: new variables {' '.join(step.new_vars) or '(none)'}")
        rep.text += [f"  D {y} = {f}" for y, f in entry["lift"].items()]
        rep.text += [f"  {u} = {v}" for u, v in entry["constraints"].items()]
        if step.obstructed:
            rep.exit_code = EXIT_OBSTRUCTION
            rep.text.append(f"  obstruction at level {level}:")
            rep.text += [f"    D D {k} = {f}" for k, f in entry["obstruction_forms"].items()]
            rep.text += [f"    {o['equation']}    [{o['source']}]" for o in entry["obstructions"]]
            break
        if args.emit:
            stem = Path(args.file).stem.split(".level")[0]
            _emit(step.prolonged, Path(args.emit) / f"{stem}.level{level}.alg", prefix)
        a = step.prolonged
    rep.result = {"steps": steps, "obstructed": rep.exit_code == EXIT_OBSTRUCTION}


def cmd_tower(args, rep: Report):
    a = _load(args.file)
    report = prolongation_tower(a, args.max_depth, args.seed, _prefix(args))
    rep.result = report.as_dict()
    for lv in rep.result["levels"]:
        rep.warnings += lv["warnings"]
        rep.text.append(
            f"level {lv['level']}: new {' '.join(lv['new_vars']) or '(none)'}; "
            f"characters {tuple(lv['characters'])}; {', '.join(lv['certificates']) or 'no certificate'}"
        )
        rep.text += [f"  D {y} = {f}" for y, f in lv["lift"].items()]
        rep.text += [f"  obstruction D D {k} = {f}" for k, f in lv["obstruction_forms"].items()]
    rep.text += [f"certificate: {c}" for c in report.certificates]
    if report.obstructed_at is not None:
        rep.exit_code = EXIT_OBSTRUCTION
    if isinstance(args.json, str):
        Path(args.json).write_text(rep.to_json() + "\n")


def _character_lines(d: dict) -> list[str]:
    return [
        f"characters: {tuple(d['s'])}",
        f"Cartan bound: {d['bound']}",
        f"prolongation rank: {d['prolongation_rank']}",
        f"involutive: {d['involutive']}",
    ]


def cmd_characters(args, rep: Report):
    t = tableau_map(_load(args.file))
    if args.flag:
        d = cartan_test(t, _permutation(args.flag), args.seed).as_dict()
    else:
        d = cartan_search(t, args.seed, args.random_flags)
    rep.warnings += d.get("warnings", [])
    rep.result = d
    rep.text += _character_lines(d)


def cmd_cartan_test(args, rep: Report):
    t = tableau_map(_load(args.file))
    d = cartan_search(t, args.seed)
    rep.warnings += d["warnings"]
    rep.result = d
    rep.text += _character_lines(d)
    rep.text.append(f"flags passing: {d['flags_passed']} of {d['flags_tested']}")


def cmd_cohomology(args, rep: Report):
    t = tableau_map(_load(args.file))
    point = _point(args.point)
    dim = spencer_cohomology_dim(t, args.m, args.l, point)
    rep.result = {"m": args.m, "l": args.l, "point": {k: str(v) for k, v in point.items()}, "dim": dim}
    rep.text.append(f"dim H^({args.m},{args.l}) = {dim}")


def cmd_restrict(args, rep: Report):
    a = _load(args.file)
    eqs = []
    for text in args.eq:
        if "=" not in text:
            raise ValueError(f"--eq {text!r} must read var=expr")
        var, value = (s.strip() for s in text.split("=", 1))
        eqs.append((var, parse_expr(value, a.variables)))
    r = alg.restrict(a, eqs, args.seed)
    dump = alg.dump_algebroid(r)
    rep.result = {"algebroid": dump}
    if not r.fiber:
        square = alg.direct_square(r)
        rep.result["direct_square"] = {k: form_text(f, r.frame) for k, f in square.items()}
        rep.result["direct_square_zero"] = all(f.is_zero() for f in square.values())
    if args.emit:
        Path(args.emit).write_text(dump)
    rep.text.append(dump.rstrip())
    if "direct_square_zero" in rep.result:
        rep.text.append(f"D D = 0: {rep.result['direct_square_zero']}")


def cmd_from_pde(args, rep: Report):
    a = pde_to_algebroid(load_pde(_read(args.file)))
    dump = alg.dump_algebroid(a)
    if args.emit:
        Path(args.emit).write_text(dump)
    rep.result = {"algebroid": dump}
    rep.text.append(dump.rstrip())


def cmd_pde_compare(args, rep: Report):
    report = pde_prolong_compare(load_pde(_read(args.file)), args.depth, args.seed)
    rep.result = report.as_dict()
    for lv in report.levels:
        status = "match" if lv.match else "MISMATCH"
        rep.text.append(
            f"level {lv.level}: {status}; new variables {' '.join(lv.algebroid_new_vars) or '(none)'}; "
            f"constraints {', '.join(f'{k} = {v}' for k, v in lv.constraints.items()) or '(none)'}"
        )
        rep.text += [f"  {m}" for m in lv.mismatches]
    rep.text.append(f"parametric dependent coordinates per level: {report.parametric_dependent}")
    if not report.match:
        rep.exit_code = EXIT_ERROR


COMMANDS = {
    "check": (cmd_check, "validate an algebroid; standard-ness and systatic directions"),
    "derive": (cmd_derive, "apply the derivation to a form"),
    "torsion": (cmd_torsion, "torsion equations of a generic lift"),
    "prolong": (cmd_prolong, "prolong K times"),
    "tower": (cmd_tower, "prolongation tower with characters and certificates"),
    "characters": (cmd_characters, "Cartan characters of the tableau"),
    "cartan-test": (cmd_cartan_test, "Cartan's test over the identity and random flags"),
    "cohomology": (cmd_cohomology, "Spencer cohomology dimension at a point"),
    "restrict": (cmd_restrict, "restrict to an invariant locus"),
    "from-pde": (cmd_from_pde, "algebroid of a solved-form PDE"),
    "pde-compare": (cmd_pde_compare, "compare jet-side and algebroid prolongation"),
}


def _globals(parser: argparse.ArgumentParser, top: bool, json_flag: bool = True):
    default = (lambda v: v) if top else (lambda v: argparse.SUPPRESS)
    parser.add_argument("--seed", type=int, default=default(0), help="seed for generic-point probes (default 0)")
    if json_flag:
        parser.add_argument("--json", action="store_true", default=default(False), help="print the report as JSON")
    parser.add_argument("--quiet", action="store_true", default=default(False), help="suppress warnings")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relalg", description="Relative algebroids, prolongation and Cartan's test.")
    _globals(parser, top=True)
    sub = parser.add_subparsers(dest="command", required=True)
    ps = {}
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        _globals(p, top=False, json_flag=name != "tower")
        p.add_argument("file")
        ps[name] = p
    ps["derive"].add_argument("--form", required=True)
    ps["prolong"].add_argument("--steps", type=int, default=1)
    ps["prolong"].add_argument("--emit", metavar="DIR")
    ps["prolong"].add_argument("--var-prefix")
    ps["tower"].add_argument("--max-depth", type=int, required=True)
    ps["tower"].add_argument(
        "--json", nargs="?", const=True, default=argparse.SUPPRESS, metavar="OUT",
        help="print the report as JSON, or write it to OUT",
    )
    ps["tower"].add_argument("--var-prefix")
    ps["characters"].add_argument("--flag", help="permutation of 1..n, e.g. 2,1,3")
    ps["characters"].add_argument("--random-flags", type=int, default=RANDOM_FLAGS)
    ps["cohomology"].add_argument("--m", type=int, required=True)
    ps["cohomology"].add_argument("--l", type=int, required=True)
    ps["cohomology"].add_argument("--point", required=True, help='e.g. "K=1,phi=1/3"')
    ps["restrict"].add_argument("--eq", action="append", required=True, help="var=expr (repeatable)")
    ps["restrict"].add_argument("--emit", metavar="FILE")
    ps["from-pde"].add_argument("--emit", metavar="FILE")
    ps["pde-compare"].add_argument("--depth", type=int, default=1)
    return parser


ERRORS = (
    alg.AlgebroidError,
    ParseError,
    EvaluationError,
    ProlongError,
    TableauError,
    JetError,
    ValueError,
    OSError,
)


def run(argv: Sequence[str]) -> tuple[int, Report]:
    args = build_parser().parse_args(list(argv))
    rep = Report(command=list(argv), seed=args.seed)
    handler = COMMANDS[args.command][0]
    try:
        handler(args, rep)
    except ERRORS as exc:
        rep.exit_code = EXIT_ERROR
        rep.result = {"error": f"{type(exc).__name__}: {exc}"}
        rep.text = [f"error: {exc}"]
    return rep.exit_code, rep


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    code, rep = run(argv)
    if args.json is True:
        print(rep.to_json())
    else:
        stream = sys.stderr if code == EXIT_ERROR else sys.stdout
        for line in rep.text:
            print(line, file=stream)
        if not args.quiet:
            for w in dict.fromkeys(rep.warnings):
                print(f"warning: {w}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
