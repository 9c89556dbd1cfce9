import random
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adx.errors import DanglingEdgeEndpoint, DuplicatePath, SelfDependency
from adx.ingest import NumstatEntry, RawCommitRecord
from adx.model import DepKind, FileSpec, Snapshot, build_snapshot, cochange_matrix

from synth import EPOCH, commit, dep, snapshot_of


def test_minimal_snapshot():
    snap = snapshot_of(["A.java", "B.java"], [dep("A.java", "B.java")])
    assert snap.n == 2
    assert len(snap.graph.edges) == 1
    e = snap.graph.edges[0]
    assert (snap.path(e.source), snap.path(e.target), e.kind) == ("A.java", "B.java", DepKind.CALL)


def test_self_dependency_rejected():
    with pytest.raises(SelfDependency):
        snapshot_of(["A.java"], [dep("A.java", "A.java")])


def test_duplicate_path_rejected():
    with pytest.raises(DuplicatePath):
        snapshot_of(["A.java", "A.java"])


def test_dangling_edge_rejected():
    with pytest.raises(DanglingEdgeEndpoint):
        snapshot_of(["A.java"], [dep("A.java", "Missing.java")])


def test_history_only_paths_become_files():
    declared = ["a/A.java", "a/B.java", "b/C.java"]
    history = [
        commit("1", 10, "ann", ["a/A.java", "gone/Old.java"]),
        commit("2", 20, "bob", ["b/C.java", "gone/Old.java", "x/New.java"]),
    ]
    history_only = {p for c in history for p in (e.path for e in c.numstat)} - set(declared)
    snap = snapshot_of(declared, [], history)
    assert snap.n == len(declared) + len(history_only) == 5
    node = snap.files[snap.id_of("gone/Old.java")]
    assert node.package == "gone"
    assert node.creator == "ann"


def test_package_defaults_and_override():
    snap = build_snapshot([FileSpec("Top.java"), FileSpec("x/y/Z.java"), FileSpec("q/R.java", package="com.q")], [])
    assert [f.package for f in snap.files] == [".", "com.q", "x/y"]


def test_unknown_kind_maps_to_other(caplog):
    snap = snapshot_of(["A", "B"], [dep("A", "B", "Inherits")])
    assert snap.graph.edges[0].kind is DepKind.OTHER
    assert "unknown dependency kind" in caplog.text


def test_kind_strings_are_case_insensitive():
    snap = snapshot_of(["A", "B"], [dep("A", "B", "extend")])
    assert snap.graph.edges[0].kind is DepKind.EXTEND


def test_duplicate_edges_sum_weights():
    snap = snapshot_of(["A", "B"], [dep("A", "B", "Call", 2), dep("A", "B", "Call", 3), dep("A", "B", "Use")])
    assert [(e.kind, e.weight) for e in snap.graph.edges] == [(DepKind.CALL, 5), (DepKind.USE, 1)]


def test_ids_follow_sorted_paths_for_any_input_order():
    files = ["z/Z.java", "a/A.java", "m/M.java", "b/B.java"]
    deps = [dep("z/Z.java", "a/A.java"), dep("m/M.java", "b/B.java"), dep("a/A.java", "b/B.java", "Use")]
    commits = [commit("1", 5, "ann", ["a/A.java", "q/Q.java"]), commit("2", 9, "bob", ["m/M.java"])]
    ref = snapshot_of(files, deps, commits).dumps()
    rng = random.Random(3)
    for _ in range(10):
        rng.shuffle(files)
        rng.shuffle(deps)
        rng.shuffle(commits)
        assert snapshot_of(files, deps, commits).dumps() == ref


def rename_commit(h, when, old, new, added=1, deleted=0):
    return RawCommitRecord(h, "ann", EPOCH.replace(second=when), h, (NumstatEntry(added, deleted, new, old),))


def test_renames_unify_to_newest_path():
    history = [
        commit("1", 1, "ann", {"src/old/A.java": (10, 0)}),
        rename_commit("2", 2, "src/old/A.java", "src/mid/A.java", 2, 1),
        rename_commit("3", 3, "src/mid/A.java", "src/new/A.java", 1, 1),
        commit("4", 4, "bob", {"src/new/A.java": (3, 3), "B.java": (1, 0)}),
    ]
    snap = snapshot_of(["src/new/A.java", "B.java"], [dep("src/new/A.java", "B.java")], history)
    assert [f.path for f in snap.files] == ["B.java", "src/new/A.java"]
    a = snap.id_of("src/new/A.java")
    assert sum(ch.churn for c in snap.commits for ch in c.changes if ch.file == a) == 10 + 3 + 2 + 6
    assert snap.files[a].creator == "ann"


def test_total_churn_is_sum_over_commits():
    history = [commit("1", 1, "a", {"A": (5, 2), "B": (1, 1)}), commit("2", 2, "b", {"A": (0, 4)})]
    snap = snapshot_of(["A", "B"], [], history)
    assert snap.total_churn == 13 == sum(e.added + e.deleted for c in history for e in c.numstat)


def test_snapshot_json_round_trip():
    history = [commit("1", 1, "ann", {"A": (5, 2), "B": (1, 1)}, "SM-1 fix")]
    snap = snapshot_of(["A", "B"], [dep("A", "B", "Extend", 2)], history)
    again = Snapshot.loads(snap.dumps())
    assert again == snap
    assert again.dumps() == snap.dumps()
    doc = snap.to_dict()
    assert doc["schema_version"] == "1"
    assert doc["commits"][0]["timestamp"] == "2017-01-01T00:00:01Z"
    assert set(doc["files"][0]) == {"id", "path", "package", "creator"}


def test_cochange_counts():
    history = [
        commit("1", 1, "a", ["A", "B"]),
        commit("2", 2, "a", ["A", "B"]),
        commit("3", 3, "a", ["A", "C"]),
    ]
    snap = snapshot_of(["A", "B", "C"], [], history)
    cc = cochange_matrix(snap)
    A, B, C = (snap.id_of(p) for p in "ABC")
    assert cc.get(A, B) == cc.get(B, A) == 2
    assert cc.get(A, C) == 1
    assert cc.get(B, C) == 0


def test_cochange_empty_history():
    assert len(cochange_matrix(snapshot_of(["A"]))) == 0


def test_cochange_commit_size_cap():
    history = [commit("1", 1, "a", ["A", "B", "C"]), commit("2", 2, "a", ["A", "B"])]
    snap = snapshot_of(["A", "B", "C"], [], history)
    assert cochange_matrix(snap, max_commit_size=2).get(0, 1) == 1
    assert cochange_matrix(snap).get(0, 1) == 2
    with pytest.raises(ValueError):
        cochange_matrix(snap, max_commit_size=1)


def _pair_oracle(commit_paths):
    counts = {}
    for paths in commit_paths:
        uniq = sorted(set(paths))
        for i in range(len(uniq)):
            for j in range(len(uniq)):
                if i < j:
                    counts[(uniq[i], uniq[j])] = counts.get((uniq[i], uniq[j]), 0) + 1
    return counts


def test_cochange_matches_pair_oracle_on_500_commits():
    rng = random.Random(5)
    files = [f"F{i:02d}" for i in range(40)]
    commit_paths = [rng.sample(files, rng.randint(0, 7)) for _ in range(500)]
    history = [commit(f"h{i}", i, "a", p) for i, p in enumerate(commit_paths)]
    snap = snapshot_of(files, [], history)
    cc = cochange_matrix(snap)
    expected = _pair_oracle(commit_paths)
    got = {(snap.path(f), snap.path(g)): c for f, g, c in cc.pairs()}
    assert got == expected
    for f, g in combinations(range(snap.n), 2):
        assert cc.get(f, g) == cc.get(g, f)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.sampled_from("ABCDEF"), max_size=6), max_size=30))
def test_cochange_symmetric_without_diagonal(commit_paths):
    history = [commit(f"h{i}", i, "a", sorted(set(p))) for i, p in enumerate(commit_paths)]
    snap = snapshot_of(list("ABCDEF"), [], history)
    cc = cochange_matrix(snap)
    assert all(f < g and c >= 1 for f, g, c in cc.pairs())
    assert {(snap.path(f), snap.path(g)): c for f, g, c in cc.pairs()} == _pair_oracle(commit_paths)
