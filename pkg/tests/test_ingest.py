import json
import random
import re
import shutil
import subprocess
from datetime import datetime, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from adx.errors import DuplicateKey, MalformedHeader, MalformedNumstat, MalformedRow, UnknownFormat
from adx.ingest import (
    LinkRule,
    NumstatEntry,
    RawCommitRecord,
    expand_rename,
    format_deps_csv,
    format_deps_json,
    format_gitlog,
    format_issues_csv,
    format_issues_json,
    link_commits,
    parse_deps,
    parse_gitlog,
    parse_issues,
    pprint_rename,
)
from adx.model import Issue, IssueKind, IssueStatus

GITLOG = """\
commit 3f2a9c1
Author: Ann Lee <ann@example.com>
Date:   2017-07-02T10:00:00+00:00

    SM-12 fix NPE in login
    
    Second paragraph.

5\t2\tsrc/A.java
-\t-\timg/logo.png
3\t1\tsrc/{old => new}/B.java
0\t0\tdocs/a.txt => notes/b.txt

commit 9b1e004
Merge: 1111111 2222222
Author: Bob <bob@example.com>
Date:   2017-07-01T08:30:00+02:00

    Merge branch 'feature'

commit 0c0ffee
Author: Ann Lee <ann@example.com>
Date:   2017-06-30T23:59:59+00:00

    cleanup

10\t0\tsrc/{ => util}/C.java
"""


def test_parse_deps_csv_row():
    recs = parse_deps("source,target,kind,weight\na.java,b.java,Call,3\n")
    assert [(r.source, r.target, r.kind, r.weight) for r in recs] == [("a.java", "b.java", "Call", 3)]


def test_parse_deps_headerless_and_default_weight():
    recs = parse_deps("a.java,b.java,Use\n")
    assert recs[0].weight == 1


def test_parse_deps_malformed_row_has_line_number():
    with pytest.raises(MalformedRow) as err:
        parse_deps("source,target,kind,weight\na.java,b.java,Call,1\na.java,b.java\n")
    assert err.value.line == 3


def test_parse_deps_rejects_non_array_json():
    with pytest.raises(UnknownFormat):
        parse_deps('[{"source": "a"')
    with pytest.raises(UnknownFormat):
        parse_deps_json_object()


def parse_deps_json_object():
    from adx.ingest import _json_array

    return _json_array('{"source": "a"}')


def test_parse_deps_json_matches_csv():
    csv_text = "source,target,kind,weight\na.java,b.java,Call,3\nb.java,c.java,Extend,1\n"
    js = json.dumps(
        [
            {"source": "a.java", "target": "b.java", "kind": "Call", "weight": 3},
            {"source": "b.java", "target": "c.java", "kind": "Extend"},
        ]
    )
    assert parse_deps(js) == parse_deps(csv_text)


def test_deps_round_trip_both_formats():
    csv_text = "source,target,kind,weight\na.java,b.java,Call,3\n\"dir,x/b.java\",c.java,Extend,1\n"
    recs = parse_deps(csv_text)
    assert format_deps_csv(recs) == csv_text
    js = format_deps_json(recs)
    assert format_deps_json(parse_deps(js)) == js
    assert parse_deps(js) == recs


def test_parse_gitlog_blocks():
    commits = parse_gitlog(GITLOG)
    assert [c.hash for c in commits] == ["3f2a9c1", "9b1e004", "0c0ffee"]
    first = commits[0]
    assert first.author == "Ann Lee <ann@example.com>"
    assert first.message == "SM-12 fix NPE in login\n\nSecond paragraph."
    assert first.churn == 7 + 4
    a, logo, b, doc = first.numstat
    assert (a.added, a.deleted, a.path, a.old_path, a.binary) == (5, 2, "src/A.java", None, False)
    assert (logo.added, logo.deleted, logo.binary) == (0, 0, True)
    assert (b.old_path, b.path) == ("src/old/B.java", "src/new/B.java")
    assert (doc.old_path, doc.path) == ("docs/a.txt", "notes/b.txt")
    assert commits[1].parents == ("1111111", "2222222")
    assert commits[1].numstat == ()
    assert commits[1].timestamp == int(datetime(2017, 7, 1, 6, 30, tzinfo=timezone.utc).timestamp())
    assert (commits[2].numstat[0].old_path, commits[2].numstat[0].path) == ("src/C.java", "src/util/C.java")


def test_single_numstat_line_churn():
    text = "commit abc\nAuthor: A <a@x>\nDate:   2017-01-01T00:00:00+00:00\n\n    msg\n\n5\t2\tsrc/A.java\n"
    (c,) = parse_gitlog(text)
    assert c.churn == 7


def test_gitlog_round_trip_is_byte_exact():
    assert format_gitlog(parse_gitlog(GITLOG)) == GITLOG


def test_gitlog_commit_count_matches_headers():
    assert len(parse_gitlog(GITLOG)) == len(re.findall(r"^commit ", GITLOG, re.M))


def test_gitlog_malformed_header():
    with pytest.raises(MalformedHeader) as err:
        parse_gitlog("commit abc\nDate:   2017-01-01T00:00:00Z\n\n    m\n")
    assert err.value.line is not None
    with pytest.raises(MalformedHeader) as err:
        parse_gitlog("garbage\n")
    assert err.value.line == 1


def test_gitlog_malformed_numstat():
    text = "commit abc\nAuthor: A\nDate:   2017-01-01T00:00:00Z\n\n    m\n\n5\tx\tsrc/A.java\n"
    with pytest.raises(MalformedNumstat) as err:
        parse_gitlog(text)
    assert err.value.line == 7


def test_gitlog_default_date_format():
    text = "commit abc\nAuthor: A\nDate:   Sat Jul 1 10:00:00 2017 +0200\n\n    m\n"
    assert parse_gitlog(text)[0].timestamp == int(datetime(2017, 7, 1, 8, tzinfo=timezone.utc).timestamp())


@pytest.mark.parametrize(
    "old,new,text",
    [
        ("src/old/A.java", "src/new/A.java", "src/{old => new}/A.java"),
        ("src/A.java", "src/util/A.java", "src/{ => util}/A.java"),
        ("src/util/A.java", "src/A.java", "src/{util => }/A.java"),
        ("a.txt", "b.txt", "a.txt => b.txt"),
        ("lib/a.txt", "lib/b.txt", "lib/{a.txt => b.txt}"),
        ("x/A.java", "y/A.java", "{x => y}/A.java"),
    ],
)
def test_rename_syntax(old, new, text):
    assert pprint_rename(old, new) == text
    assert expand_rename(text) == (old, new)


_segment = st.text(alphabet="abcd", min_size=1, max_size=3)
_path = st.lists(_segment, min_size=1, max_size=4).map("/".join)


@given(_path, _path)
def test_rename_pprint_expand_round_trip(old, new):
    if old == new:
        return
    assert expand_rename(pprint_rename(old, new)) == (old, new)


@pytest.mark.skipif(shutil.which("git") is None, reason="git not installed")
def test_rename_expansion_matches_git(tmp_path):
    def git(*args):
        return subprocess.run(["git", *args], cwd=tmp_path, check=True, capture_output=True, text=True).stdout

    git("init", "-q")
    git("config", "user.name", "T")
    git("config", "user.email", "t@x")
    moves = [
        ("src/old/A.java", "src/new/A.java"),
        ("src/B.java", "src/util/B.java"),
        ("lib/deep/C.java", "lib/C.java"),
        ("top.txt", "renamed.txt"),
    ]
    for old, _ in moves:
        (tmp_path / old).parent.mkdir(parents=True, exist_ok=True)
        (tmp_path / old).write_text("".join(f"line {i} of {old}\n" for i in range(30)))
    (tmp_path / "logo.png").write_bytes(b"\x00\x01\x02binary")
    git("add", ".")
    git("commit", "-qm", "SM-1 initial")
    for old, new in moves:
        (tmp_path / new).parent.mkdir(parents=True, exist_ok=True)
        git("mv", old, new)
    git("commit", "-qm", "SM-2 move")
    log = git("log", "--numstat", "--date=iso-strict", "-M")
    commits = parse_gitlog(log)
    assert len(commits) == 2
    renamed = {(e.old_path, e.path) for e in commits[0].numstat}
    assert renamed == set(moves)
    binary = [e for e in commits[1].numstat if e.path == "logo.png"]
    assert binary and binary[0].binary and binary[0].added == binary[0].deleted == 0
    assert format_gitlog(commits) == log


ISSUES_CSV = """\
key,kind,opened_at,closed_at,status
SM-12,Bug,2017-07-01T00:00:00Z,2017-07-11T00:00:00Z,Fixed
SM-13,Feature,2017-07-02T00:00:00Z,,Open
"""


def test_parse_issues_csv():
    bug, feat = parse_issues(ISSUES_CSV)
    assert bug.kind is IssueKind.BUG and bug.status is IssueStatus.FIXED
    assert bug.duration_days == 10
    assert feat.closed_at is None and feat.duration_days is None


def test_parse_issues_kind_mapping_is_case_insensitive():
    (i,) = parse_issues("SM-1,BUG,2017-07-01T00:00:00Z,,open\n")
    assert i.kind is IssueKind.BUG and i.status is IssueStatus.OPEN
    (i,) = parse_issues("SM-1,Epic,2017-07-01T00:00:00Z,,Open\n")
    assert i.kind is IssueKind.OTHER


def test_parse_issues_duplicate_key():
    with pytest.raises(DuplicateKey):
        parse_issues(ISSUES_CSV + "SM-12,Bug,2017-07-01T00:00:00Z,,Open\n")


def test_parse_issues_malformed_row():
    with pytest.raises(MalformedRow):
        parse_issues("SM-1,Bug,not-a-date,,Open\n")


def _random_issues(rng, count):
    out = []
    for i in range(count):
        opened = 1_500_000_000 + rng.randrange(10**7)
        closed = opened + rng.randrange(10**6) if rng.random() < 0.7 else None
        out.append(
            Issue(
                f"SM-{i}",
                rng.choice(list(IssueKind)),
                opened,
                closed,
                rng.choice([IssueStatus.FIXED, IssueStatus.CLOSED]) if closed else IssueStatus.OPEN,
            )
        )
    return out


def test_issues_json_matches_csv_on_50_issues():
    issues = _random_issues(random.Random(2), 50)
    csv_text = format_issues_csv(issues)
    json_text = format_issues_json(issues)
    assert parse_issues(csv_text) == parse_issues(json_text) == issues
    assert format_issues_csv(parse_issues(csv_text)) == csv_text
    assert format_issues_json(parse_issues(json_text)) == json_text


def _rc(h, message):
    return RawCommitRecord(h, "a", datetime(2017, 1, 1, tzinfo=timezone.utc), message, (NumstatEntry(1, 0, "A"),))


def test_link_commits_examples():
    issues = [Issue("SM-12", IssueKind.BUG)]
    commits = [_rc("1", "SM-12 fix NPE"), _rc("2", "cleanup"), _rc("3", "SM-12, SM-99")]
    linked, report = link_commits(commits, issues)
    assert [c.linked_issues for c in linked] == [{"SM-12"}, set(), {"SM-12"}]
    assert report.unmatched == {"3": ("SM-99",)}
    assert report.linked_commits == 2 and report.total_commits == 3


def test_link_rule_is_case_sensitive_and_configurable():
    issues = [Issue("SM-1"), Issue("sm-2")]
    commits = [_rc("1", "sm-2 and SM-1")]
    linked, _ = link_commits(commits, issues)
    assert linked[0].linked_issues == {"SM-1"}
    linked, _ = link_commits(commits, issues, LinkRule(r"\bsm-\d+"))
    assert linked[0].linked_issues == {"sm-2"}


def test_linking_oracle_idempotent_and_order_independent():
    rng = random.Random(9)
    issues = [Issue(f"AB{i % 3}-{i}") for i in range(40)]
    known = {i.key for i in issues}
    commits = []
    for h in range(60):
        keys = [f"AB{rng.randrange(4)}-{rng.randrange(60)}" for _ in range(rng.randrange(4))]
        commits.append(_rc(str(h), " ".join(keys) + " work"))
    linked, report = link_commits(commits, issues)
    for c in linked:
        tokens = {t for t in c.message.split() if "-" in t}
        assert c.linked_issues == tokens & known
        assert set(report.unmatched.get(c.hash, ())) == tokens - known
    again, _ = link_commits(linked, issues)
    assert again == linked
    shuffled = list(reversed(commits))
    rlinked, _ = link_commits(shuffled, list(reversed(issues)))
    assert {c.hash: c.linked_issues for c in rlinked} == {c.hash: c.linked_issues for c in linked}
