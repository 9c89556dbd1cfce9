"""Parsers for dependency lists, ``git log --numstat`` output and issue exports.

Every parser has a matching ``format_*`` serializer so inputs can be
round-tripped.
"""

from __future__ import annotations

import csv
import io
import json
import os
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Iterable

from .errors import DuplicateKey, MalformedHeader, MalformedNumstat, MalformedRow, UnknownFormat
from .model import FileSpec, Issue, IssueKind, IssueStatus, Release, format_timestamp, parse_timestamp

DEFAULT_ISSUE_KEY_PATTERN = r"\b[A-Z][A-Z0-9]*-\d+\b"


@dataclass(frozen=True)
class RawDependencyRecord:
    source: str
    target: str
    kind: str
    weight: int = 1


@dataclass(frozen=True)
class NumstatEntry:
    added: int
    deleted: int
    path: str
    old_path: str | None = None
    binary: bool = False


@dataclass(frozen=True)
class RawCommitRecord:
    hash: str
    author: str
    date: datetime
    message: str
    numstat: tuple[NumstatEntry, ...] = ()
    parents: tuple[str, ...] = ()
    linked_issues: frozenset[str] = frozenset()

    @property
    def timestamp(self) -> int:
        return int(self.date.timestamp())

    @property
    def churn(self) -> int:
        return sum(e.added + e.deleted for e in self.numstat)


@dataclass(frozen=True)
class LinkRule:
    pattern: str = DEFAULT_ISSUE_KEY_PATTERN

    def __post_init__(self):
        re.compile(self.pattern)

    def findall(self, message: str) -> list[str]:
        return [m.group(0) for m in re.finditer(self.pattern, message)]


@dataclass
class LinkReport:
    linked_commits: int = 0
    total_commits: int = 0
    unmatched: dict[str, tuple[str, ...]] = field(default_factory=dict)

    @property
    def link_rate(self) -> float:
        return self.linked_commits / self.total_commits if self.total_commits else 0.0


def _read(source: str | os.PathLike | io.TextIOBase) -> str:
    if hasattr(source, "read"):
        return source.read()
    if isinstance(source, os.PathLike) or (isinstance(source, str) and "\n" not in source and os.path.isfile(source)):
        with open(source, encoding="utf-8") as fh:
            return fh.read()
    return str(source)


def _sniff(text: str) -> str:
    head = text.lstrip()
    if head.startswith("["):
        return "json"
    if not head:
        return "empty"
    return "csv"


def _csv_rows(text: str, header: list[str], required: int, name: str) -> Iterable[tuple[int, list[str]]]:
    reader = csv.reader(io.StringIO(text))
    first = True
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if first:
            first = False
            if [c.strip() for c in row] == header[: len(row)] and len(row) >= required:
                continue
        if len(row) < required or len(row) > len(header):
            raise MalformedRow(f"{name} row has {len(row)} columns, expected {required}-{len(header)}", line)
        yield line, [c.strip() for c in row]


def _json_array(text: str) -> list[Any]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UnknownFormat(f"invalid JSON: {exc.msg}", exc.lineno) from exc
    if not isinstance(doc, list):
        raise UnknownFormat("expected a JSON array of objects")
    return doc


DEPS_HEADER = ["source", "target", "kind", "weight"]


def parse_deps(source) -> list[RawDependencyRecord]:
    """Parse a ``source,target,kind,weight`` CSV or the equivalent JSON array."""
    text = _read(source)
    fmt = _sniff(text)
    records = []
    if fmt == "empty":
        return records
    if fmt == "json":
        for i, obj in enumerate(_json_array(text)):
            if not isinstance(obj, dict):
                raise MalformedRow("dependency entry is not an object", i + 1)
            try:
                records.append(_dep_record(obj["source"], obj["target"], obj["kind"], obj.get("weight", 1), i + 1))
            except KeyError as exc:
                raise MalformedRow(f"dependency entry missing {exc}", i + 1) from None
        return records
    for line, row in _csv_rows(text, DEPS_HEADER, 3, "dependency"):
        records.append(_dep_record(row[0], row[1], row[2], row[3] if len(row) > 3 and row[3] else 1, line))
    return records


def _dep_record(src, dst, kind, weight, line: int) -> RawDependencyRecord:
    if not src or not dst:
        raise MalformedRow("empty dependency path", line)
    try:
        w = int(weight)
    except (TypeError, ValueError):
        raise MalformedRow(f"weight {weight!r} is not an integer", line) from None
    if w < 1:
        raise MalformedRow(f"weight {w} must be positive", line)
    return RawDependencyRecord(str(src), str(dst), str(kind), w)


def format_deps_csv(records: Iterable[RawDependencyRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(DEPS_HEADER)
    for r in records:
        writer.writerow([r.source, r.target, r.kind, r.weight])
    return buf.getvalue()


def format_deps_json(records: Iterable[RawDependencyRecord]) -> str:
    rows = [{"source": r.source, "target": r.target, "kind": r.kind, "weight": r.weight} for r in records]
    return json.dumps(rows, indent=2) + "\n"


ISSUES_HEADER = ["key", "kind", "opened_at", "closed_at", "status"]


def parse_issues(source) -> list[Issue]:
    """Parse a ``key,kind,opened_at,closed_at,status`` CSV or JSON array."""
    text = _read(source)
    fmt = _sniff(text)
    rows: list[tuple[int, list[Any]]] = []
    if fmt == "json":
        for i, obj in enumerate(_json_array(text)):
            if not isinstance(obj, dict) or "key" not in obj:
                raise MalformedRow("issue entry must be an object with a key", i + 1)
            rows.append((i + 1, [obj.get(k) for k in ISSUES_HEADER]))
    elif fmt == "csv":
        rows = list(_csv_rows(text, ISSUES_HEADER, 2, "issue"))
    issues, seen = [], set()
    for line, row in rows:
        row = list(row) + [None] * (len(ISSUES_HEADER) - len(row))
        key, kind, opened, closed, status = row
        if not key:
            raise MalformedRow("empty issue key", line)
        if key in seen:
            raise DuplicateKey(f"duplicate issue key {key}", line)
        seen.add(key)
        try:
            issues.append(
                Issue(
                    key=key,
                    kind=IssueKind.parse(kind or "Other"),
                    opened_at=parse_timestamp(opened) if opened else None,
                    closed_at=parse_timestamp(closed) if closed else None,
                    status=IssueStatus.parse(status) if status else (IssueStatus.FIXED if closed else IssueStatus.OPEN),
                )
            )
        except ValueError as exc:
            raise MalformedRow(str(exc), line) from None
    return issues


def _issue_row(i: Issue) -> list[Any]:
    return [
        i.key,
        i.kind.value,
        format_timestamp(i.opened_at) if i.opened_at is not None else None,
        format_timestamp(i.closed_at) if i.closed_at is not None else None,
        i.status.value,
    ]


def format_issues_csv(issues: Iterable[Issue]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ISSUES_HEADER)
    for i in issues:
        writer.writerow(["" if v is None else v for v in _issue_row(i)])
    return buf.getvalue()


def format_issues_json(issues: Iterable[Issue]) -> str:
    return json.dumps([dict(zip(ISSUES_HEADER, _issue_row(i))) for i in issues], indent=2) + "\n"


def parse_releases(source) -> list[Release]:
    """Parse a ``name,timestamp`` CSV or JSON array."""
    text = _read(source)
    fmt = _sniff(text)
    rows: list[tuple[int, list[Any]]] = []
    if fmt == "json":
        rows = [(i + 1, [o.get("name"), o.get("timestamp")]) for i, o in enumerate(_json_array(text))]
    elif fmt == "csv":
        rows = list(_csv_rows(text, ["name", "timestamp"], 2, "release"))
    out = []
    for line, (name, ts) in rows:
        if not name or not ts:
            raise MalformedRow("release needs a name and a timestamp", line)
        try:
            out.append(Release(name, parse_timestamp(ts)))
        except ValueError as exc:
            raise MalformedRow(str(exc), line) from None
    if len({r.name for r in out}) != len(out):
        raise DuplicateKey("duplicate release name")
    return out


def parse_files(source) -> list[FileSpec]:
    """Parse an optional ``path,package,creator`` file list."""
    text = _read(source)
    fmt = _sniff(text)
    if fmt == "json":
        return [FileSpec(o["path"], o.get("package") or None, o.get("creator") or None) for o in _json_array(text)]
    if fmt == "empty":
        return []
    return [
        FileSpec(row[0], (row[1] or None) if len(row) > 1 else None, (row[2] or None) if len(row) > 2 else None)
        for _, row in _csv_rows(text, ["path", "package", "creator"], 1, "file")
    ]


_NUMSTAT = re.compile(r"^(\d+|-)\t(\d+|-)\t(.+)$")
_BRACE_RENAME = re.compile(r"^(.*)\{(.*) => (.*)\}(.*)$")


def expand_rename(text: str) -> tuple[str | None, str]:
    """Split a numstat path into ``(old path or None, new path)``."""
    m = _BRACE_RENAME.match(text)
    if m:
        pre, old, new, post = m.groups()
        return _join(pre, old, post), _join(pre, new, post)
    if " => " in text:
        old, new = text.split(" => ", 1)
        return old, new
    return None, text


def _join(pre: str, mid: str, post: str) -> str:
    path = pre + mid + post
    return re.sub(r"/{2,}", "/", path)


def pprint_rename(old: str, new: str) -> str:
    """Render a rename the way ``git diff --numstat`` abbreviates it."""
    len_a, len_b = len(old), len(new)
    pfx = 0
    i = 0
    while i < len_a and i < len_b and old[i] == new[i]:
        if old[i] == "/":
            pfx = i + 1
        i += 1
    sfx = 0
    adjust = 1 if pfx else 0
    ia, ib = len_a - 1, len_b - 1
    # the suffix scan may step one char back into the prefix to reuse its slash
    while pfx - adjust <= ia and pfx - adjust <= ib and ia >= 0 and ib >= 0 and old[ia] == new[ib]:
        if old[ia] == "/":
            sfx = len_a - ia
        ia -= 1
        ib -= 1
    a_mid = max(len_a - pfx - sfx, 0)
    b_mid = max(len_b - pfx - sfx, 0)
    if pfx + sfx:
        return f"{old[:pfx]}{{{old[pfx:pfx + a_mid]} => {new[pfx:pfx + b_mid]}}}{old[len_a - sfx:]}"
    return f"{old} => {new}"


def _parse_date(text: str, line: int) -> datetime:
    text = text.strip()
    try:
        iso = text[:-1] + "+00:00" if text.endswith("Z") else text
        dt = datetime.fromisoformat(iso)
    except ValueError:
        try:
            dt = datetime.strptime(text, "%a %b %d %H:%M:%S %Y %z")
        except ValueError:
            raise MalformedHeader(f"unparseable date {text!r}", line) from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt


def parse_gitlog(source) -> list[RawCommitRecord]:
    """Parse ``git log --numstat`` text into commit records."""
    lines = _read(source).split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    commits: list[RawCommitRecord] = []
    i, total = 0, len(lines)
    while i < total:
        if not lines[i].strip():
            i += 1
            continue
        if not lines[i].startswith("commit "):
            raise MalformedHeader(f"expected 'commit <hash>', got {lines[i]!r}", i + 1)
        commit_hash = lines[i][7:].strip().split()[0] if lines[i][7:].strip() else ""
        if not commit_hash:
            raise MalformedHeader("commit line without hash", i + 1)
        i += 1
        headers: dict[str, tuple[str, int]] = {}
        while i < total and lines[i].strip():
            key, sep, value = lines[i].partition(":")
            if not sep or lines[i].startswith(" "):
                raise MalformedHeader(f"malformed header line {lines[i]!r}", i + 1)
            headers[key.strip()] = (value.strip(), i + 1)
            i += 1
        for required in ("Author", "Date"):
            if required not in headers:
                raise MalformedHeader(f"commit {commit_hash} lacks {required}", i)
        date = _parse_date(*headers["Date"])
        parents = tuple(headers["Merge"][0].split()) if "Merge" in headers else ()
        i += 1  # blank line after headers

        message_lines = []
        while i < total:
            line = lines[i]
            if line.startswith("    "):
                message_lines.append(line[4:])
                i += 1
            elif line == "" and i + 1 < total and lines[i + 1].startswith("    "):
                # unindented blank inside the message
                message_lines.append("")
                i += 1
            else:
                break

        entries = []
        while i < total and not lines[i].startswith("commit "):
            line = lines[i]
            if line.strip():
                m = _NUMSTAT.match(line)
                if not m:
                    raise MalformedNumstat(f"bad numstat line {line!r}", i + 1)
                added, deleted, path_text = m.groups()
                binary = added == "-" or deleted == "-"
                old, new = expand_rename(path_text)
                entries.append(
                    NumstatEntry(
                        added=0 if added == "-" else int(added),
                        deleted=0 if deleted == "-" else int(deleted),
                        path=new,
                        old_path=old,
                        binary=binary,
                    )
                )
            i += 1
        commits.append(
            RawCommitRecord(
                hash=commit_hash,
                author=headers["Author"][0],
                date=date,
                message="\n".join(message_lines),
                numstat=tuple(entries),
                parents=parents,
            )
        )
    return commits


def format_gitlog(commits: Iterable[RawCommitRecord]) -> str:
    """Serialize commit records in ``git log --numstat --date=iso-strict`` layout."""
    blocks = []
    for c in commits:
        lines = [f"commit {c.hash}"]
        if c.parents:
            lines.append("Merge: " + " ".join(c.parents))
        lines.append(f"Author: {c.author}")
        lines.append(f"Date:   {c.date.isoformat()}")
        lines.append("")
        lines.extend("    " + m for m in c.message.split("\n"))
        if c.numstat:
            lines.append("")
            for e in c.numstat:
                counts = "-\t-" if e.binary else f"{e.added}\t{e.deleted}"
                path = pprint_rename(e.old_path, e.path) if e.old_path is not None else e.path
                lines.append(f"{counts}\t{path}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def link_commits(
    commits: Iterable[RawCommitRecord],
    issues: Iterable[Issue],
    rule: LinkRule | None = None,
) -> tuple[list[RawCommitRecord], LinkReport]:
    """Attach the issue keys mentioned in each commit message.

    Keys that match the pattern but name no known issue are collected in the
    report's ``unmatched`` map instead.
    """
    rule = rule or LinkRule()
    known = {i.key for i in issues}
    report = LinkReport()
    out = []
    for c in commits:
        found = rule.findall(c.message)
        linked = frozenset(k for k in found if k in known)
        missing = tuple(sorted({k for k in found if k not in known}))
        if missing:
            report.unmatched[c.hash] = missing
        report.total_commits += 1
        report.linked_commits += bool(linked)
        out.append(replace(c, linked_issues=linked))
    return out, report
