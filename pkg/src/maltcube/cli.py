"""Command line front end.

Thin adapters over the library: parse inputs, call one entry point,
print a plain-text report.  Any file argument accepts "-" for standard
input, and -o accepts "-" for standard output.  The --machine flag
switches reports to line-oriented key=value pairs.

Exit codes: 0 for success or a "yes" decision, 1 for a "no"-type
decision (inconsistent or cube-entailing condition, failed model check,
non-member target, no interpretation, violated certificate), 2 for
usage, parse, or I/O errors, 3 for an exhausted closure budget.
"""

from __future__ import annotations

import argparse
import sys
from random import Random

from .algebras import (
    BudgetExceededError,
    DEFAULT_BUDGET,
    AlgebraFormatError,
    FiniteAlgebra,
    parse_algebra,
    parse_instance,
    render_algebra,
    render_tree,
    satisfies,
    smp_decide,
    tree_size,
)
from .construction import ConstructionError, extend, reduce_and_certify
from .cube import check_condition
from .entailment import condition_index, render_classes
from .interp import find_interpretation
from .terms import (
    ConditionSyntaxError,
    cube_condition,
    hagemann_mitschke_condition,
    jonsson_condition,
    parse_condition,
    random_condition,
    render_condition,
    render_identity,
    union_conditions,
    variable_name,
)

_WITNESS_RENDER_CAP = 2000


def _read(path: str) -> tuple[str, str]:
    if path == "-":
        return sys.stdin.read(), "<stdin>"
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read(), path


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)


def _load_condition(path: str):
    text, source = _read(path)
    return parse_condition(text, source=source)


def _load_algebra(path: str) -> FiniteAlgebra:
    text, source = _read(path)
    return parse_algebra(text, source=source)


def _load_instance(path: str):
    text, source = _read(path)
    return parse_instance(text, source=source)


def _render_witness(tree) -> str:
    if tree_size(tree) > _WITNESS_RENDER_CAP:
        return f"(too large to render: {tree_size(tree)} nodes)"
    return render_tree(tree)


def _cmd_check(args) -> int:
    report = check_condition(_load_condition(args.condition))
    out = []
    cube_names = [s.name for s in report.cube_symbols]
    if args.machine:
        out.append(f"consistent={'yes' if report.consistent else 'no'}")
        if report.consistent:
            out.append(f"cube={','.join(cube_names) if cube_names else 'none'}")
            for sub in report.reports:
                if sub.entails_cube:
                    out.append(f"witness.{sub.symbol.name}={','.join(sub.witness)}")
        out.append(f"applicable={'yes' if report.applicable else 'no'}")
        if not report.applicable:
            reason = (
                "inconsistent"
                if not report.consistent
                else f"cube identities for {', '.join(cube_names)}"
            )
            out.append(f"reason={reason}")
    else:
        out.append(f"consistent: {'yes' if report.consistent else 'no'}")
        if report.consistent:
            out.append(f"cube: {', '.join(cube_names) if cube_names else 'none'}")
            for sub in report.reports:
                if sub.entails_cube:
                    out.append(f"witness {sub.symbol.name}: {' '.join(sub.witness)}")
        if report.applicable:
            out.append("applicable: yes")
        elif not report.consistent:
            out.append("applicable: no (inconsistent)")
        else:
            out.append(f"applicable: no (cube identities for {', '.join(cube_names)})")
    print("\n".join(out))
    return 0 if report.applicable else 1


def _cmd_closure(args) -> int:
    condition = _load_condition(args.condition)
    index = condition_index(condition, args.vars)
    lines = []
    classes = index.classes()
    if args.machine:
        lines.append(f"variables={index.nvars}")
        lines.append(f"inconsistent={'yes' if index.inconsistent else 'no'}")
        lines.append(f"classes={len(classes)}")
        from .terms import render_term

        for cls in classes:
            lines.append("class=" + ",".join(render_term(t) for t in cls))
    else:
        lines.append(f"variables: {index.nvars}")
        lines.append(f"inconsistent: {'yes' if index.inconsistent else 'no'}")
        lines.append(f"classes: {len(classes)}")
        lines.append(render_classes(index).rstrip("\n"))
    print("\n".join(lines))
    return 0


def _cmd_gen(args) -> int:
    if args.kind == "jonsson":
        condition = jonsson_condition(args.k)
    elif args.kind == "hm":
        condition = hagemann_mitschke_condition(args.k)
    elif args.kind == "cube":
        condition = cube_condition(args.columns)
    elif args.kind == "union":
        condition = union_conditions(_load_condition(p) for p in args.files)
    else:
        condition = random_condition(Random(args.seed))
    _write(args.output, render_condition(condition))
    return 0


def _cmd_extend(args) -> int:
    algebra = _load_algebra(args.algebra)
    condition = _load_condition(args.condition)
    ext = extend(algebra, condition)
    comments = [f"absorbing: {ext.absorbing}"]
    for symbol, table in ext.pattern_tables.items():
        rendered = " ".join(
            "("
            + ",".join(map(str, pattern))
            + ")->"
            + ("absorb" if position is None else str(position))
            for pattern, position in sorted(table.items())
        )
        comments.append(f"pattern {symbol.name}: {rendered}")
    _write(args.output, render_algebra(ext.extended, comments))
    return 0


def _cmd_model_check(args) -> int:
    algebra = _load_algebra(args.algebra)
    condition = _load_condition(args.condition)
    result = satisfies(algebra, condition)
    if args.machine:
        lines = [f"satisfies={'yes' if result.holds else 'no'}"]
        if not result.holds:
            lines.append(f"identity={render_identity(result.identity)}")
            lines.append(
                "assignment="
                + ",".join(
                    f"{variable_name(v)}={value}"
                    for v, value in sorted(result.assignment.items())
                )
            )
    else:
        lines = [f"satisfies: {'yes' if result.holds else 'no'}"]
        if not result.holds:
            lines.append(f"identity: {render_identity(result.identity)}")
            lines.append(
                "assignment: "
                + " ".join(
                    f"{variable_name(v)}={value}"
                    for v, value in sorted(result.assignment.items())
                )
            )
    print("\n".join(lines))
    return 0 if result.holds else 1


def _cmd_smp(args) -> int:
    algebra = _load_algebra(args.algebra)
    instance = _load_instance(args.instance)
    answer = smp_decide(
        algebra, instance, budget=args.budget, threads=args.threads
    )
    sep = "=" if args.machine else ": "
    lines = [
        f"members{sep}{answer.stats.members}",
        f"rounds{sep}{answer.stats.rounds}",
        f"answer{sep}{'yes' if answer.answer else 'no'}",
    ]
    if args.witness and answer.witness is not None:
        lines.append(f"witness{sep}{_render_witness(answer.witness)}")
    print("\n".join(lines))
    return 0 if answer.answer else 1


def _cmd_interpret(args) -> int:
    condition = _load_condition(args.condition)
    interpretation = find_interpretation(condition)
    if interpretation is None:
        report = check_condition(condition)
        reason = (
            "inconsistent"
            if not report.consistent
            else "cube identities for "
            + ", ".join(s.name for s in report.cube_symbols)
        )
        if args.machine:
            print(f"interpretation=none\nreason={reason}")
        else:
            print(f"interpretation: none ({reason})")
        return 1
    lines = ["interpretation=yes" if args.machine else "interpretation: yes"]
    for symbol in condition.signature:
        term = render_tree(interpretation.assignment[symbol].defining_term)
        if args.machine:
            lines.append(f"term.{symbol.name}={term}")
        else:
            lines.append(f"{symbol.name} = {term}")
    print("\n".join(lines))
    return 0


def _cmd_reduce(args) -> int:
    algebra = _load_algebra(args.algebra)
    condition = _load_condition(args.condition)
    instance = _load_instance(args.instance)
    certificate = reduce_and_certify(
        algebra, condition, instance, budget=args.budget, threads=args.threads
    )
    base = "yes" if certificate.answer_base else "no"
    extended = "yes" if certificate.answer_extended else "no"
    if args.machine:
        lines = [
            f"base={base}",
            f"extended={extended}",
            f"certificate={'ok' if certificate.ok else 'violated'}",
        ]
        if certificate.eliminated_witness is not None:
            lines.append(f"witness={_render_witness(certificate.eliminated_witness)}")
    else:
        status = "certificate OK" if certificate.ok else "certificate VIOLATED"
        lines = [f"base: {base}, extended: {extended}, {status}"]
        if certificate.eliminated_witness is not None:
            lines.append(f"witness: {_render_witness(certificate.eliminated_witness)}")
    print("\n".join(lines))
    return 0 if certificate.ok else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maltcube",
        description="Linear Maltsev conditions, absorbing extensions, and "
        "subpower membership.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> argparse.ArgumentParser:
        p.add_argument("--machine", action="store_true", help="key=value output")
        return p

    p = common(sub.add_parser("check", help="consistency, cube, applicability"))
    p.add_argument("condition")
    p.set_defaults(func=_cmd_check)

    p = common(sub.add_parser("closure", help="dump the identity closure classes"))
    p.add_argument("condition")
    p.add_argument("--vars", type=int, default=None, help="variable count override")
    p.set_defaults(func=_cmd_closure)

    p = sub.add_parser("gen", help="emit condition files")
    gen_sub = p.add_subparsers(dest="kind", required=True)
    for kind, configure in (
        ("jonsson", lambda q: q.add_argument("k", type=int)),
        ("hm", lambda q: q.add_argument("k", type=int)),
        ("cube", lambda q: q.add_argument("columns", nargs="+")),
        ("union", lambda q: q.add_argument("files", nargs="+")),
        ("random", lambda q: q.add_argument("--seed", type=int, default=0)),
    ):
        q = gen_sub.add_parser(kind)
        configure(q)
        q.add_argument("-o", "--output", default=None)
        q.set_defaults(func=_cmd_gen)

    p = common(sub.add_parser("extend", help="build the absorbing extension"))
    p.add_argument("algebra")
    p.add_argument("condition")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_extend)

    p = common(sub.add_parser("model-check", help="does the algebra satisfy it"))
    p.add_argument("algebra")
    p.add_argument("condition")
    p.set_defaults(func=_cmd_model_check)

    p = common(sub.add_parser("smp", help="subpower membership"))
    p.add_argument("algebra")
    p.add_argument("instance")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--witness", action="store_true", help="print a witness term")
    p.set_defaults(func=_cmd_smp)

    p = common(sub.add_parser("interpret", help="terms over the dual implication"))
    p.add_argument("condition")
    p.set_defaults(func=_cmd_interpret)

    p = common(sub.add_parser("reduce", help="certify the extension reduction"))
    p.add_argument("algebra")
    p.add_argument("condition")
    p.add_argument("instance")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_reduce)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConditionSyntaxError, AlgebraFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConstructionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
