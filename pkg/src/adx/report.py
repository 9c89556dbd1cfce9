"""Analysis orchestration and text/JSON/CSV rendering."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Any, Callable

from .coupling import VisibilityMatrix, propagation_cost, transitive_closure
from .drh import DrhStructure, build_drh, decoupling_level
from .errors import AdxError, UnknownFile
from .flaws import FlawInstance, FlawKind, FlawReport, Thresholds, flaw_report
from .history import ComparisonReport, churn_stats, issue_stats, release_overlap
from .model import CoChangeMatrix, DepKind, IssueKind, Snapshot, cochange_matrix, format_timestamp
from .roots import RootSet, detect_roots

REPORT_VERSION = "1"

FLAW_LABELS = {
    FlawKind.CLIQUE: "cliques",
    FlawKind.PACKAGE_CYCLE: "package cycles",
    FlawKind.IMPROPER_INHERITANCE: "improper inheritance",
    FlawKind.MODULARITY_VIOLATION: "modularity violations",
    FlawKind.CROSSING: "crossings",
    FlawKind.UNSTABLE_INTERFACE: "unstable interfaces",
}

KIND_ABBREV = {
    DepKind.CALL: "Cl",
    DepKind.USE: "Us",
    DepKind.CREATE: "Cr",
    DepKind.CAST: "Ca",
    DepKind.THROW: "Th",
    DepKind.EXTEND: "Ex",
    DepKind.IMPLEMENT: "Im",
    DepKind.OTHER: "Ot",
}


@dataclass(frozen=True)
class RenderOptions:
    format: str = "text"
    precision: int = 1
    day_precision: int = 2
    color: bool = False

    def __post_init__(self):
        if self.format not in ("text", "json", "csv"):
            raise ValueError(f"unknown format {self.format!r}")
        if self.precision < 0 or self.day_precision < 0:
            raise ValueError("precision must be >= 0")

    def pct(self, ratio: float | None) -> str:
        return "n/a" if ratio is None else f"{100 * ratio:.{self.precision}f}%"

    def days(self, value: float | None) -> str:
        return "n/a" if value is None else f"{value:.{self.day_precision}f}"

    def heading(self, text: str) -> str:
        return f"\033[1m{text}\033[0m" if self.color else text


class Context:
    """Lazily computed, shared intermediate results for one snapshot."""

    def __init__(self, snapshot: Snapshot, thresholds: Thresholds | None = None, transitive_mv: bool = False):
        self.snapshot = snapshot
        self.thresholds = thresholds or Thresholds()
        self.transitive_mv = transitive_mv
        self._cache: dict[str, Any] = {}

    def _get(self, key: str, build: Callable[[], Any]) -> Any:
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def visibility(self) -> VisibilityMatrix:
        return self._get("vis", lambda: transitive_closure(self.snapshot.graph))

    @property
    def cochange(self) -> CoChangeMatrix:
        return self._get("cc", lambda: cochange_matrix(self.snapshot))

    @property
    def drh(self) -> DrhStructure:
        return self._get("drh", lambda: build_drh(self.snapshot.graph))

    @property
    def flaws(self) -> FlawReport:
        return self._get(
            "flaws",
            lambda: flaw_report(self.snapshot, self.thresholds, self.cochange, self.visibility, self.transitive_mv),
        )

    def roots(self, target: float = 0.8, direction: str = "up", max_candidates: int = 100) -> RootSet:
        return self._get(
            f"roots:{target}:{direction}:{max_candidates}",
            lambda: detect_roots(self.snapshot, target, max_candidates, direction, self.visibility),
        )


def _error(exc: Exception) -> dict[str, str]:
    return {"error": type(exc).__name__, "message": str(exc)}


def _section(build: Callable[[], dict]) -> dict:
    try:
        return build()
    except AdxError as exc:
        return _error(exc)


def pc_doc(ctx: Context) -> dict:
    rep = propagation_cost(ctx.snapshot.graph, ctx.visibility)
    return {"n": rep.n, "nonempty": rep.nonempty, "cells": rep.cells, "pc": rep.pc, "pc_exact": str(rep.pc_exact)}


def dl_doc(ctx: Context) -> dict:
    rep = decoupling_level(ctx.snapshot.graph, ctx.drh, ctx.visibility)
    paths = ctx.snapshot.files
    return {
        "n": rep.n,
        "dl": rep.dl,
        "dl_exact": str(rep.dl_exact),
        "modules": [
            {
                "members": [paths[f].path for f in m.members],
                "size": m.size,
                "dependents": m.dependents,
                "contribution": float(m.contribution),
            }
            for m in rep.modules
        ],
    }


def drh_doc(ctx: Context) -> dict:
    files = ctx.snapshot.files
    return {
        "layers": [
            {
                "layer": i,
                "modules": [
                    {"id": m.id, "size": m.size, "members": [files[f].path for f in m.members]} for m in layer
                ],
            }
            for i, layer in enumerate(ctx.drh.layers, start=1)
        ]
    }


_ID_KEYS = {"partners", "cochanging_dependents", "cochanging_dependees", "children", "parent", "child", "client"}


def instance_doc(inst: FlawInstance, snapshot: Snapshot) -> dict:
    def path(x):
        return snapshot.path(x) if isinstance(x, int) else x

    evidence = {}
    for key, value in sorted(inst.evidence.items()):
        if key in _ID_KEYS:
            value = [path(v) for v in value] if isinstance(value, list) else path(value)
        elif key == "edges":
            value = [[path(s), path(t)] for s, t in value]
        evidence[key] = value
    return {
        "kind": inst.kind.value,
        "anchors": [path(a) for a in inst.anchor],
        "scope": sorted(snapshot.path(f) for f in inst.scope),
        "evidence": evidence,
    }


def flaws_doc(ctx: Context) -> dict:
    rep = ctx.flaws
    return {
        "thresholds": vars(ctx.thresholds).copy(),
        "summary": {
            k.value: {"count": rep.count(k), "influenced": rep.influenced_count(k)} for k in FlawKind
        },
        "all_influenced": len(rep.all_influenced),
        "instances": [instance_doc(i, ctx.snapshot) for k in FlawKind for i in rep.instances[k]],
    }


def roots_doc(ctx: Context, target: float = 0.8, direction: str = "up", max_candidates: int = 100) -> dict:
    rs = ctx.roots(target, direction, max_candidates)
    return {
        "target": rs.target,
        "direction": direction,
        "reached": rs.reached,
        "coverage": rs.coverage,
        "covered_bug_weight": rs.covered,
        "total_bug_weight": rs.total,
        "root_count": len(rs.picks),
        "root_files": len(rs.files),
        "root_file_fraction": rs.file_fraction,
        "roots": [
            {
                "leader": ctx.snapshot.path(p.space.leader),
                "members": len(p.space.members),
                "marginal": p.marginal,
                "marginal_coverage": p.marginal / rs.total,
                "cumulative_coverage": p.cumulative / rs.total,
            }
            for p in rs.picks
        ],
    }


def metrics_doc(ctx: Context, window: tuple[int | None, int | None] | None = None) -> dict:
    snap = ctx.snapshot

    def churn():
        cs = churn_stats(snap)
        return {
            "commits": len(cs.per_commit_churn),
            "total_churn": sum(cs.per_commit_churn),
            "concentration_top10": cs.concentration(0.10),
            "concentration_top25": cs.concentration(0.25),
            "touched_fraction": cs.touched_fraction,
            "never_changed_fraction": cs.never_changed_fraction,
            "single_contributor_fraction": cs.single_contributor_fraction,
        }

    def overlap():
        om = release_overlap(snap)
        return {
            "windows": [list(w) for w in om.windows],
            "jaccard_mean_nonconsecutive": om.mean_nonconsecutive,
            "jaccard_mean_all": om.mean_all,
            "min_normalized_mean_nonconsecutive": om.min_mean_nonconsecutive,
            "min_normalized_mean_all": om.min_mean_all,
        }

    def issues():
        out = {}
        for name, kinds in (("all", None), ("bugs", [IssueKind.BUG])):
            st = issue_stats(snap, window, kinds)
            out[name] = {
                "opened": st.opened,
                "fixed": st.fixed,
                "changed_code": st.changed_code,
                "mean_churn": st.mean_churn,
                "mean_days": st.mean_duration,
            }
        return out

    doc = {"churn": _section(churn), "overlap": _section(overlap), "issues": _section(issues)}
    if window is not None:
        doc["window"] = [None if w is None else format_timestamp(w) for w in window]
    return doc


def analyze_doc(ctx: Context, target: float = 0.8) -> dict:
    snap = ctx.snapshot
    linked = sum(1 for c in snap.commits if c.linked_issues)
    return {
        "report_version": REPORT_VERSION,
        "label": snap.metadata.label,
        "general": {
            "files": snap.n,
            "commits": len(snap.commits),
            "issues": len(snap.issues),
            "linked_commits": linked,
        },
        "roots": _section(lambda: roots_doc(ctx, target)),
        "pc": _section(lambda: pc_doc(ctx)),
        "dl": _section(lambda: {k: v for k, v in dl_doc(ctx).items() if k != "modules"}),
        "drh": _section(
            lambda: {
                "layers": len(ctx.drh.layers),
                "modules": len(ctx.drh.modules),
                "largest_module": max((m.size for m in ctx.drh.modules), default=0),
            }
        ),
        "flaws": _section(lambda: {k: v for k, v in flaws_doc(ctx).items() if k != "instances"}),
        "history": metrics_doc(ctx),
    }


def render_json(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _csv(rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow(["" if v is None else v for v in row])
    return buf.getvalue()


def _table(rows: list[tuple[str, str]], indent: str = "  ") -> list[str]:
    width = max((len(label) for label, _ in rows), default=0)
    return [f"{indent}{label.ljust(width)}  {value}" for label, value in rows]


def _err_line(sec: dict) -> str | None:
    if "error" in sec:
        return f"  unavailable: {sec['error']}: {sec['message']}"
    return None


def render_analyze_text(doc: dict, opts: RenderOptions, target: float = 0.8) -> str:
    pct_target = f"{100 * target:g}%"
    lines = [opts.heading(f"Architectural analysis{': ' + doc['label'] if doc['label'] else ''}"), ""]
    g = doc["general"]
    lines.append(opts.heading("General information"))
    rows = [("# of files", str(g["files"])), ("# of commits", str(g["commits"])), ("# of issues", str(g["issues"]))]
    r = doc["roots"]
    if "error" in r:
        lines += _table(rows)
        lines.append(_err_line(r).replace("unavailable", "roots unavailable"))
    else:
        rows += [
            (f"# of roots covering {pct_target} of bugs", str(r["root_count"])),
            (f"# of files in roots covering {pct_target} of bugs", str(r["root_files"])),
            (f"# of files covering {pct_target} of bugs", opts.pct(r["root_file_fraction"])),
        ]
        lines += _table(rows)
        if not r["reached"]:
            lines.append(f"  target not reached: coverage {opts.pct(r['coverage'])}")

    lines.append(opts.heading("Architectural Metrics"))
    rows = []
    for key, label, field in (("dl", "Decoupling level", "dl"), ("pc", "Propagation cost", "pc")):
        sec = doc[key]
        rows.append((label, opts.pct(sec[field]) if "error" not in sec else f"n/a ({sec['error']})"))
    d = doc["drh"]
    if "error" not in d:
        rows.append(("DRH layers / modules", f"{d['layers']} / {d['modules']}"))
    lines += _table(rows)

    lines.append(opts.heading("Architectural flaws"))
    f = doc["flaws"]
    if "error" in f:
        lines.append(_err_line(f))
    else:
        rows = []
        for kind in FlawKind:
            label = FLAW_LABELS[kind]
            s = f["summary"][kind.value]
            rows.append((f"# of {label}", str(s["count"])))
            rows.append((f"# of files influenced by {label}", str(s["influenced"])))
        rows.append(("# of files influenced by any flaw", str(f["all_influenced"])))
        lines += _table(rows)

    lines.append(opts.heading("History"))
    h = doc["history"]
    rows = []
    c = h["churn"]
    if "error" in c:
        lines.append(_err_line(c))
    else:
        rows += [
            ("Files touched by top 10% commits by churn", opts.pct(c["concentration_top10"])),
            ("Files touched by top 25% commits by churn", opts.pct(c["concentration_top25"])),
            ("Files never changed after creation", opts.pct(c["never_changed_fraction"])),
            ("Files with a single contributor", opts.pct(c["single_contributor_fraction"])),
        ]
    o = h["overlap"]
    if "error" not in o:
        rows += [
            ("Release overlap, non-consecutive (Jaccard)", opts.pct(o["jaccard_mean_nonconsecutive"])),
            ("Release overlap, all pairs (Jaccard)", opts.pct(o["jaccard_mean_all"])),
            ("Release overlap, non-consecutive (min-normalized)", opts.pct(o["min_normalized_mean_nonconsecutive"])),
            ("Release overlap, all pairs (min-normalized)", opts.pct(o["min_normalized_mean_all"])),
        ]
    i = h["issues"]
    if "error" not in i:
        rows += [
            ("# of issues opened", str(i["all"]["opened"])),
            ("# of issues fixed", str(i["all"]["fixed"])),
            ("# of bugs opened", str(i["bugs"]["opened"])),
            ("# of bugs fixed", str(i["bugs"]["fixed"])),
            ("# of bugs that changed code", str(i["bugs"]["changed_code"])),
            ("Amount of churn per bug", _mean(i["bugs"]["mean_churn"])),
            ("Average bug fixing time (days)", opts.days(i["bugs"]["mean_days"])),
        ]
    lines += _table(rows)
    if "error" in o:
        lines.append(_err_line(o).replace("unavailable", "release overlap unavailable"))
    return "\n".join(lines) + "\n"


def _mean(v: float | None) -> str:
    return "n/a" if v is None else f"{v:.1f}"


def render_analyze_csv(doc: dict) -> str:
    rows: list[list[Any]] = [["section", "metric", "value"]]

    def walk(prefix: str, node: Any, section: str):
        if isinstance(node, dict):
            for k in sorted(node):
                walk(f"{prefix}.{k}" if prefix else k, node[k], section)
        elif isinstance(node, list):
            rows.append([section, prefix, json.dumps(node)])
        else:
            rows.append([section, prefix, node])

    for section in ("general", "roots", "pc", "dl", "drh", "flaws", "history"):
        walk("", doc[section], section)
    return _csv(rows)


METRIC_LABELS = {
    "files": "# of files",
    "issues_opened": "# of issues opened",
    "issues_fixed": "# of issues fixed",
    "bugs_opened": "# of bugs opened",
    "bugs_fixed": "# of bugs fixed",
    "bugs_changing_code": "# of bugs that changed code",
    "churn_per_bug": "Amount of churn per bug",
    "churn_per_issue": "Amount of churn per issue",
    "bug_fix_days": "Average bug fixing time",
    "issue_days": "Average issue resolution time",
    "pc": "Propagation cost",
    "dl": "Decoupling level",
    "roots": "# of roots covering 80% of bugs",
    "root_files": "# of files in roots covering 80% of bugs",
    "root_file_fraction": "# of files covering 80% of bugs",
}
for _kind, _label in FLAW_LABELS.items():
    METRIC_LABELS[f"{_kind.value}_count"] = f"# of {_label}"
    METRIC_LABELS[f"{_kind.value}_files"] = f"# of files influenced by {_label}"

_RATIO_METRICS = {"pc", "dl", "root_file_fraction"}
_DAY_METRICS = {"bug_fix_days", "issue_days"}
_MEAN_METRICS = {"churn_per_bug", "churn_per_issue"}


def _fmt_metric(metric: str, value: float | None, opts: RenderOptions) -> str:
    if value is None:
        return "n/a"
    if metric in _RATIO_METRICS:
        return opts.pct(value)
    if metric in _DAY_METRICS:
        return opts.days(value)
    if metric in _MEAN_METRICS:
        return f"{value:.1f}"
    return f"{value:g}"


def compare_doc(report: ComparisonReport) -> dict:
    return {
        "report_version": REPORT_VERSION,
        "metrics": [
            {
                "metric": r.metric,
                "before": r.before,
                "after": r.after,
                "delta": r.delta,
                "percent": r.percent,
                "p_value": r.test.p_value if r.test else None,
                "u": r.test.u if r.test else None,
                "method": r.test.method if r.test else None,
            }
            for r in report.rows
        ],
    }


def render_compare_text(report: ComparisonReport, opts: RenderOptions) -> str:
    rows = []
    for r in report.rows:
        change = "" if r.percent is None else f"{r.percent:+.{opts.precision}f}%"
        p = "" if r.test is None else f"p={r.test.p_value:.3g}"
        value = f"{_fmt_metric(r.metric, r.before, opts)} → {_fmt_metric(r.metric, r.after, opts)}"
        rows.append((METRIC_LABELS.get(r.metric, r.metric), value, change, p))
    w0 = max(len(r[0]) for r in rows)
    w1 = max(len(r[1]) for r in rows)
    w2 = max(len(r[2]) for r in rows)
    lines = [opts.heading("Maintainability measures, before → after")]
    for label, value, change, p in rows:
        lines.append(f"  {label.ljust(w0)}  {value.ljust(w1)}  {change.rjust(w2)}  {p}".rstrip())
    return "\n".join(lines) + "\n"


def render_compare_csv(report: ComparisonReport) -> str:
    rows: list[list[Any]] = [["metric", "before", "after", "delta", "percent", "p_value"]]
    for r in report.rows:
        rows.append([r.metric, r.before, r.after, r.delta, r.percent, r.test.p_value if r.test else None])
    return _csv(rows)


def render_flaws_text(doc: dict) -> str:
    lines = ["Architectural flaws"]
    rows = []
    for kind in FlawKind:
        label = FLAW_LABELS[kind]
        s = doc["summary"][kind.value]
        rows.append((f"# of {label}", str(s["count"])))
        rows.append((f"# of files influenced by {label}", str(s["influenced"])))
    rows.append(("# of files influenced by any flaw", str(doc["all_influenced"])))
    lines += _table(rows)
    counters: dict[str, int] = {}
    for inst in doc["instances"]:
        counters[inst["kind"]] = counters.get(inst["kind"], 0) + 1
        if counters[inst["kind"]] == 1:
            lines.append("")
            lines.append(inst["kind"])
        lines.append(f"  #{counters[inst['kind']]} {', '.join(inst['anchors'])} (scope {len(inst['scope'])} files)")
    return "\n".join(lines) + "\n"


def render_flaws_csv(doc: dict) -> str:
    rows: list[list[Any]] = [["kind", "index", "anchors", "scope_size", "scope", "evidence"]]
    counters: dict[str, int] = {}
    for inst in doc["instances"]:
        counters[inst["kind"]] = counters.get(inst["kind"], 0) + 1
        rows.append(
            [
                inst["kind"],
                counters[inst["kind"]],
                ";".join(inst["anchors"]),
                len(inst["scope"]),
                ";".join(inst["scope"]),
                json.dumps(inst["evidence"], sort_keys=True),
            ]
        )
    return _csv(rows)


@dataclass(frozen=True)
class DsmExport:
    paths: tuple[str, ...]
    cells: tuple[tuple[str, ...], ...]

    def to_csv(self) -> str:
        rows: list[list[Any]] = [[""] + [str(i + 1) for i in range(len(self.paths))]]
        for i, (path, row) in enumerate(zip(self.paths, self.cells)):
            rows.append([f"{i + 1} {path}", *row])
        return _csv(rows)


def export_dsm(
    snapshot: Snapshot,
    subset: list[int] | None = None,
    cochange: CoChangeMatrix | None = None,
    drh: DrhStructure | None = None,
) -> DsmExport:
    """Square matrix over ``subset`` in DRH order.

    Cell (r, c) lists the kinds of r's direct dependencies on c and the
    co-change count: ``<kinds>;<count>``, ``<kinds>`` or ``;<count>``.
    The diagonal reads ``(i)``.
    """
    if subset is not None and not subset:
        raise UnknownFile("DSM subset is empty")
    for f in subset or ():
        if not 0 <= f < snapshot.n:
            raise UnknownFile(f"unknown file id {f}")
    drh = drh or build_drh(snapshot.graph)
    cc = cochange if cochange is not None else cochange_matrix(snapshot)
    wanted = set(range(snapshot.n)) if subset is None else set(subset)
    order = [f for f in drh.order(key=snapshot.path) if f in wanted]
    g = snapshot.graph
    cells = []
    for i, r in enumerate(order):
        row = []
        for j, c in enumerate(order):
            if i == j:
                row.append(f"({i + 1})")
                continue
            kinds = "".join(KIND_ABBREV[k] for k in sorted(g.kinds(r, c), key=list(DepKind).index))
            count = cc.get(r, c)
            if kinds and count:
                row.append(f"{kinds};{count}")
            elif kinds:
                row.append(kinds)
            elif count:
                row.append(f";{count}")
            else:
                row.append("")
        cells.append(tuple(row))
    return DsmExport(tuple(snapshot.path(f) for f in order), tuple(cells))
