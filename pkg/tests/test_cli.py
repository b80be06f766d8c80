import json
import math
import random

import jsonschema
import pytest

from goffish import cli
from goffish.errors import GraphParseError

RUN_SCHEMA = json.loads(
    (__import__("pathlib").Path(__file__).parent.parent /
     "src/goffish/schemas/run_report.schema.json").read_text())


@pytest.fixture
def edge_file(tmp_path):
    path = tmp_path / "graph.txt"
    path.write_text(
        "# demo graph with a comment line\n"
        "0 1 2\n"
        "1 2 1\n"
        "2 3 4\n"
        "3 0 1\n"
        "4 5 1\n"
        "0 1 2\n"   # duplicate edge
        "\n")
    return path


def ingest(capsys, *argv):
    rc = cli.main(["ingest", *map(str, argv)])
    out = capsys.readouterr().out
    assert rc == 0, out
    return out


def run_json(capsys, *argv):
    rc = cli.main(["run", *map(str, argv)])
    out = capsys.readouterr().out
    assert rc == 0, out
    return json.loads(out)


def oracle_json(capsys, *argv):
    rc = cli.main(["oracle", *map(str, argv)])
    out = capsys.readouterr().out
    assert rc == 0, out
    return json.loads(out)


def test_ingest_reports_structure(capsys, edge_file, tmp_path):
    out = ingest(capsys, edge_file, "--out", tmp_path / "store", "-k", 2)
    assert "6 vertices, 5 edges" in out
    assert "1 duplicate edges collapsed" in out
    assert "partition 0" in out and "partition 1" in out
    assert (tmp_path / "store/partition-map.tsv").exists()
    assert (tmp_path / "store/idmap.tsv").exists()


def test_ingest_parse_error_line_number(capsys, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1\n0 1 2 3\n")
    rc = cli.main(["ingest", str(bad), "--out", str(tmp_path / "s")])
    assert rc == 1
    assert ":2:" in capsys.readouterr().err
    with pytest.raises(GraphParseError) as info:
        cli.parse_edge_list(bad)
    assert info.value.line_no == 2


def test_ingest_k1_single_subgraph_of_cycle(capsys, tmp_path):
    edge = tmp_path / "cycle.txt"
    edge.write_text("a b\nb c\nc d\nd a\n")
    out = ingest(capsys, edge, "--out", tmp_path / "s", "-k", 1)
    assert "1 sub-graphs" in out
    assert "4 vertices" in out


def test_ingest_imported_map_matches_file(capsys, tmp_path):
    edge = tmp_path / "g.txt"
    edge.write_text("0 1\n2 3\n")
    pmap = tmp_path / "map.tsv"
    pmap.write_text("0\t1\n1\t1\n2\t0\n3\t0\n")
    ingest(capsys, edge, "--out", tmp_path / "s", "-k", 2,
           "--strategy", "imported", "--map-file", pmap)
    saved = dict()
    for line in (tmp_path / "s/partition-map.tsv").read_text().splitlines():
        if not line.startswith("#"):
            v, p = line.split("\t")
            saved[int(v)] = int(p)
    assert saved == {0: 1, 1: 1, 2: 0, 3: 0}


def test_run_report_validates_against_schema(capsys, edge_file, tmp_path):
    ingest(capsys, edge_file, "--out", tmp_path / "store", "-k", 2)
    report = run_json(capsys, tmp_path / "store",
                      "--algorithm", "connected-components", "--repeat", 3)
    jsonschema.validate(report, RUN_SCHEMA)
    assert report["supersteps"] >= 1
    assert report["summary"]["components"] == 2
    assert report["repeat"]["runs"] == 3
    assert report["k"] == 2


def test_run_and_oracle_digests_match(capsys, edge_file, tmp_path):
    store = tmp_path / "store"
    ingest(capsys, edge_file, "--out", store, "-k", 2)
    pairs = [
        (["--algorithm", "connected-components"], ["--algorithm", "cc"]),
        (["--algorithm", "max-vertex"], ["--algorithm", "max"]),
        (["--algorithm", "sssp", "--source", 0, "--weighted"],
         ["--algorithm", "sssp", "--source", 0, "--weighted"]),
        (["--algorithm", "pagerank", "--iterations", 20],
         ["--algorithm", "pagerank", "--iterations", 20]),
    ]
    for run_args, oracle_args in pairs:
        report = run_json(capsys, store, *run_args)
        reference = oracle_json(capsys, store, *oracle_args)
        assert report["result_digest"] == reference["digest"], run_args


def test_values_out_files_diff_empty(capsys, edge_file, tmp_path):
    store = tmp_path / "store"
    ingest(capsys, edge_file, "--out", store, "-k", 2)
    run_out = tmp_path / "run_values.txt"
    oracle_out = tmp_path / "oracle_values.txt"
    run_json(capsys, store, "--algorithm", "sssp", "--source", 0,
             "--values-out", run_out)
    oracle_json(capsys, store, "--algorithm", "sssp", "--source", 0,
                "--values-out", oracle_out)
    assert run_out.read_text() == oracle_out.read_text()
    assert "inf" in run_out.read_text()  # vertices 4,5 unreachable from 0


def test_pagerank_mode_digests_agree_messages_differ(capsys, tmp_path):
    edge = tmp_path / "d.txt"
    rng = random.Random(8)
    lines = {(u, (u + 1) % 20) for u in range(20)}
    while len(lines) < 50:
        u, v = rng.randrange(20), rng.randrange(20)
        if u != v:
            lines.add((u, v))
    edge.write_text("\n".join(f"{u} {v}" for u, v in sorted(lines)))
    store = tmp_path / "store"
    ingest(capsys, edge, "--out", store, "-k", 2, "--directed")
    sub = run_json(capsys, store, "--algorithm", "pagerank",
                   "--iterations", 15)
    emu = run_json(capsys, store, "--algorithm", "pagerank",
                   "--iterations", 15, "--mode", "vertex-emulation")
    assert sub["result_digest"] == emu["result_digest"]
    assert sum(m["total"] for m in sub["messages"]) != \
        sum(m["total"] for m in emu["messages"])


def test_run_determinism_with_seed(capsys, edge_file, tmp_path):
    store = tmp_path / "store"
    ingest(capsys, edge_file, "--out", store, "-k", 2)
    reports = [run_json(capsys, store, "--algorithm", "sssp", "--source", 0,
                        "--seed", 7) for _ in range(2)]
    assert reports[0]["result_digest"] == reports[1]["result_digest"]
    assert reports[0]["supersteps"] == reports[1]["supersteps"]


def test_run_blockrank_summary(capsys, edge_file, tmp_path):
    store = tmp_path / "store"
    ingest(capsys, edge_file, "--out", store, "-k", 2)
    report = run_json(capsys, store, "--algorithm", "blockrank",
                      "--epsilon", "1e-8", "--iterations", 200)
    jsonschema.validate(report, RUN_SCHEMA)
    assert abs(report["summary"]["rank_sum"] - 1.0) < 1e-9


def test_inspect_lists_partitions(capsys, edge_file, tmp_path):
    store = tmp_path / "store"
    ingest(capsys, edge_file, "--out", store, "-k", 2)
    rc = cli.main(["inspect", str(store)])
    out = capsys.readouterr().out
    assert rc == 0
    entries = json.loads(out)
    assert [e["partition"] for e in entries] == [0, 1]
    assert all(e["graph"] == "graph" for e in entries)


def test_cli_errors_exit_nonzero(capsys, edge_file, tmp_path):
    store = tmp_path / "store"
    ingest(capsys, edge_file, "--out", store, "-k", 2)
    rc = cli.main(["run", str(store), "--algorithm", "sssp"])  # no --source
    assert rc == 1
    err = capsys.readouterr().err
    assert "error:" in err
    rc = cli.main(["run", str(tmp_path / "missing"), "--algorithm", "sssp",
                   "--source", "0"])
    assert rc == 1


def test_oracle_on_edge_list_input(capsys, edge_file):
    reference = oracle_json(capsys, edge_file, "--algorithm", "cc")
    assert reference["summary"]["components"] == 2


def test_sssp_distances_match_oracle_values(capsys, edge_file, tmp_path):
    store = tmp_path / "store"
    ingest(capsys, edge_file, "--out", store, "-k", 1)
    out = tmp_path / "v.txt"
    run_json(capsys, store, "--algorithm", "sssp", "--source", 0,
             "--weighted", "--values-out", out)
    got = {}
    for line in out.read_text().splitlines():
        vid, value = line.split("\t")
        got[int(vid)] = float(value)
    # weights: 0-1:2, 1-2:1, 2-3:4, 3-0:1 (undirected), 4-5:1
    assert got[0] == 0.0 and got[1] == 2.0 and got[3] == 1.0
    assert got[2] == 3.0  # via 0-1-2, cheaper than 0-3-2
    assert math.isinf(got[4]) and math.isinf(got[5])
