"""``adx`` command line.

Exit codes: 0 success, 1 analysis error, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .errors import AnalysisError, ParseError, ValidationError
from .flaws import FlawKind, Thresholds
from .history import compare_snapshots
from .ingest import (
    DEFAULT_ISSUE_KEY_PATTERN,
    LinkRule,
    link_commits,
    parse_deps,
    parse_files,
    parse_gitlog,
    parse_issues,
    parse_releases,
)
from .model import Snapshot, build_snapshot, parse_timestamp
from .report import (
    Context,
    RenderOptions,
    analyze_doc,
    compare_doc,
    dl_doc,
    drh_doc,
    export_dsm,
    flaws_doc,
    metrics_doc,
    pc_doc,
    render_analyze_csv,
    render_analyze_text,
    render_compare_csv,
    render_compare_text,
    render_flaws_csv,
    render_flaws_text,
    render_json,
    roots_doc,
)

EXIT_OK, EXIT_ANALYSIS, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("adx")


class UsageError(Exception):
    pass


def _parse_file(parser, path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return parser(fh.read())
    except ParseError as exc:
        raise exc.with_source(path)
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None


def _thresholds(args) -> Thresholds:
    path = getattr(args, "thresholds", None) or os.environ.get("ADX_THRESHOLDS")
    if not path:
        return Thresholds()
    try:
        return Thresholds.from_file(path)
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _options(args) -> RenderOptions:
    return RenderOptions(format=args.format, precision=args.precision, color=args.color)


def _load(path: str) -> Snapshot:
    try:
        return Snapshot.load(path)
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None


def _window(text: str | None) -> tuple[int | None, int | None] | None:
    if not text:
        return None
    lo, sep, hi = text.partition("..")
    if not sep:
        raise UsageError("--window must look like FROM..TO")
    try:
        return (parse_timestamp(lo) if lo else None, parse_timestamp(hi) if hi else None)
    except ValueError as exc:
        raise UsageError(f"--window: {exc}") from None


def cmd_ingest(args) -> str:
    deps = _parse_file(parse_deps, args.deps)
    commits = _parse_file(parse_gitlog, args.history)
    issues = _parse_file(parse_issues, args.issues)
    releases = _parse_file(parse_releases, args.releases) if args.releases else []
    files = _parse_file(parse_files, args.files) if args.files else None
    try:
        rule = LinkRule(args.issue_key_pattern)
    except Exception as exc:
        raise UsageError(f"--issue-key-pattern: {exc}") from None
    linked, report = link_commits(commits, issues, rule)
    try:
        snapshot = build_snapshot(files, deps, linked, issues, releases, label=args.label or "")
    except ValidationError as exc:
        raise ParseError(str(exc)) from exc
    snapshot.save(args.out)
    for commit_hash, keys in sorted(report.unmatched.items()):
        log.info("commit %s references unknown issues %s", commit_hash, ", ".join(keys))
    return (
        f"files={snapshot.n} commits={len(snapshot.commits)} issues={len(snapshot.issues)} "
        f"linked={100 * report.link_rate:.0f}%\n"
    )


def _simple(doc: dict, opts: RenderOptions, text: str) -> str:
    if opts.format == "json":
        return render_json(doc)
    if opts.format == "csv":
        rows = ["metric,value"] + [f"{k},{v}" for k, v in doc.items() if not isinstance(v, (list, dict))]
        return "\n".join(rows) + "\n"
    return text


def cmd_pc(args) -> str:
    opts = _options(args)
    doc = pc_doc(Context(_load(args.snapshot)))
    return _simple(doc, opts, f"Propagation cost: {opts.pct(doc['pc'])} ({doc['nonempty']}/{doc['cells']} cells)\n")


def cmd_dl(args) -> str:
    opts = _options(args)
    doc = dl_doc(Context(_load(args.snapshot)))
    if opts.format == "csv":
        lines = ["module,size,dependents,contribution,members"]
        for i, m in enumerate(doc["modules"]):
            lines.append(f"{i},{m['size']},{m['dependents']},{m['contribution']!r},{';'.join(m['members'])}")
        return "\n".join(lines) + "\n"
    return _simple(doc, opts, f"Decoupling level: {opts.pct(doc['dl'])} ({len(doc['modules'])} modules)\n")


def cmd_drh(args) -> str:
    opts = _options(args)
    doc = drh_doc(Context(_load(args.snapshot)))
    if opts.format == "json":
        return render_json(doc)
    if opts.format == "csv":
        lines = ["layer,module,size,path"]
        for layer in doc["layers"]:
            for m in layer["modules"]:
                lines += [f"{layer['layer']},{m['id']},{m['size']},{p}" for p in m["members"]]
        return "\n".join(lines) + "\n"
    lines = []
    for layer in doc["layers"]:
        lines.append(f"Layer {layer['layer']}: {len(layer['modules'])} modules")
        for m in layer["modules"]:
            lines.append(f"  M{m['id']} (size {m['size']}): {', '.join(m['members'])}")
    return "\n".join(lines) + "\n"


def cmd_flaws(args) -> str:
    opts = _options(args)
    ctx = Context(_load(args.snapshot), _thresholds(args), transitive_mv=args.transitive)
    doc = flaws_doc(ctx)
    if opts.format == "json":
        return render_json(doc)
    if opts.format == "csv":
        return render_flaws_csv(doc)
    return render_flaws_text(doc)


def cmd_roots(args) -> str:
    opts = _options(args)
    ctx = Context(_load(args.snapshot))
    doc = roots_doc(ctx, args.target, args.direction, args.max_candidates)
    if opts.format == "json":
        return render_json(doc)
    if opts.format == "csv":
        lines = ["rank,leader,members,marginal,cumulative_coverage"]
        lines += [
            f"{i},{r['leader']},{r['members']},{r['marginal']},{r['cumulative_coverage']!r}"
            for i, r in enumerate(doc["roots"], start=1)
        ]
        return "\n".join(lines) + "\n"
    lines = [
        f"Roots covering {opts.pct(doc['coverage'])} of bug weight "
        f"(target {opts.pct(doc['target'])}{'' if doc['reached'] else ', NOT reached'})"
    ]
    for i, r in enumerate(doc["roots"], start=1):
        lines.append(
            f"  {i}. {r['leader']}  members={r['members']}  +{opts.pct(r['marginal_coverage'])}"
            f"  cumulative={opts.pct(r['cumulative_coverage'])}"
        )
    lines.append(f"  files in roots: {doc['root_files']} ({opts.pct(doc['root_file_fraction'])} of all files)")
    return "\n".join(lines) + "\n"


def cmd_metrics(args) -> str:
    opts = _options(args)
    doc = metrics_doc(Context(_load(args.snapshot)), _window(args.window))
    if opts.format == "json":
        return render_json(doc)
    rows = []

    def walk(prefix, node):
        if isinstance(node, dict):
            for k in sorted(node):
                walk(f"{prefix}.{k}" if prefix else k, node[k])
        else:
            rows.append((prefix, node))

    walk("", doc)
    if opts.format == "csv":
        return "metric,value\n" + "".join(
            f"{k},{json.dumps(v) if isinstance(v, list) else ('' if v is None else v)}\n" for k, v in rows
        )
    width = max(len(k) for k, _ in rows)
    return "".join(f"{k.ljust(width)}  {_fmt_value(k, v, opts)}\n" for k, v in rows)


def _fmt_value(key: str, value, opts: RenderOptions) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        if "fraction" in key or "concentration" in key or "mean_nonconsecutive" in key or key.endswith("mean_all"):
            return opts.pct(value)
        if key.endswith("days"):
            return opts.days(value)
        return f"{value:.1f}"
    return str(value)


def cmd_analyze(args) -> str:
    opts = _options(args)
    ctx = Context(_load(args.snapshot), _thresholds(args))
    doc = analyze_doc(ctx, args.target)
    if opts.format == "json":
        return render_json(doc)
    if opts.format == "csv":
        return render_analyze_csv(doc)
    return render_analyze_text(doc, opts, args.target)


def cmd_compare(args) -> str:
    opts = _options(args)
    report = compare_snapshots(_load(args.before), _load(args.after), _thresholds(args))
    if opts.format == "json":
        return render_json(compare_doc(report))
    if opts.format == "csv":
        return render_compare_csv(report)
    return render_compare_text(report, opts)


def cmd_dsm(args) -> str:
    snap = _load(args.snapshot)
    ctx = Context(snap, _thresholds(args))
    subset = None
    if args.files:
        subset = [snap.id_of(p.strip()) for p in args.files.split(",") if p.strip()]
    elif args.flaw:
        kind_text, _, index = args.flaw.partition(":")
        try:
            kind = FlawKind(kind_text)
            inst = ctx.flaws.instances[kind][int(index or 1) - 1]
        except (ValueError, IndexError):
            raise UsageError(f"--flaw {args.flaw}: no such flaw instance") from None
        subset = sorted(inst.scope)
    return export_dsm(snap, subset, ctx.cochange, ctx.drh).to_csv()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["text", "json", "csv"], default=argparse.SUPPRESS)
    common.add_argument("--thresholds", metavar="FILE", default=argparse.SUPPRESS,
                        help="key=value threshold file (fallback: $ADX_THRESHOLDS)")
    common.add_argument("--precision", type=int, default=argparse.SUPPRESS,
                        help="decimals for percentages (default 1)")
    common.add_argument("--color", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="adx", description="Architectural debt analysis.")
    parser.add_argument("--version", action="version", version=f"adx {__version__}")
    parser.add_argument("--format", choices=["text", "json", "csv"], default="text")
    parser.add_argument("--thresholds", metavar="FILE")
    parser.add_argument("--precision", type=int, default=1)
    parser.add_argument("--color", action="store_true", default=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("ingest", parents=[common], help="build a snapshot from input files")
    p.add_argument("--deps", required=True, metavar="FILE")
    p.add_argument("--history", required=True, metavar="FILE", help="git log --numstat output")
    p.add_argument("--issues", required=True, metavar="FILE")
    p.add_argument("--releases", metavar="FILE")
    p.add_argument("--files", metavar="FILE", help="optional path,package,creator list")
    p.add_argument("--label")
    p.add_argument("--out", required=True, metavar="FILE")
    p.add_argument("--issue-key-pattern", default=DEFAULT_ISSUE_KEY_PATTERN, metavar="REGEX")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("analyze", parents=[common], help="full report")
    p.add_argument("snapshot")
    p.add_argument("--target", type=float, default=0.8)
    p.set_defaults(func=cmd_analyze)

    for name, func, text in (
        ("pc", cmd_pc, "propagation cost"),
        ("dl", cmd_dl, "decoupling level"),
        ("drh", cmd_drh, "design rule hierarchy"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("snapshot")
        p.set_defaults(func=func)

    p = sub.add_parser("flaws", parents=[common], help="architecture flaws")
    p.add_argument("snapshot")
    p.add_argument("--transitive", action="store_true",
                   help="modularity violations ignore transitively linked pairs too")
    p.set_defaults(func=cmd_flaws)

    p = sub.add_parser("roots", parents=[common], help="architecture roots")
    p.add_argument("snapshot")
    p.add_argument("--target", type=float, default=0.8)
    p.add_argument("--max-candidates", type=int, default=100)
    p.add_argument("--direction", choices=["up", "down"], default="up")
    p.set_defaults(func=cmd_roots)

    p = sub.add_parser("metrics", parents=[common], help="history statistics")
    p.add_argument("snapshot")
    p.add_argument("--window", metavar="FROM..TO")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("compare", parents=[common], help="before/after comparison")
    p.add_argument("before")
    p.add_argument("after")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("dsm", parents=[common], help="export a DSM as CSV")
    p.add_argument("snapshot")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--files", metavar="P1,P2,...")
    group.add_argument("--flaw", metavar="KIND[:N]", help="scope of the N-th instance, e.g. Crossing:1")
    p.set_defaults(func=cmd_dsm)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        out = args.func(args)
    except (ParseError, UsageError) as exc:
        print(f"adx: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AnalysisError as exc:
        print(f"adx: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except ValueError as exc:
        print(f"adx: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    sys.stdout.write(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
