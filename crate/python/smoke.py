"""Smoke test for the coinet Python module.

Build and install first:

    pip install maturin
    maturin develop -m crates/python/Cargo.toml   # or: maturin build ... && pip install target/wheels/*.whl

then run `python python/smoke.py`.
"""

import json
import math
import pathlib
import sys

import coinet

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "crates" / "core" / "tests" / "fixtures"


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def main():
    # residuals on hand-checked counts
    e = coinet.pearson_residual(2, 2, 2, 4)
    assert close(e, 1.0), e
    assert close(coinet.haberman_residual(e, 2, 2, 4), 2.0)
    assert close(coinet.pearson_residual(1, 2, 2, 4), 0.0)
    assert close(coinet.pearson_residual(0, 2, 2, 4), -1.0)
    assert coinet.expected_count(2, 2, 4) == 1.0
    assert coinet.coincide_in_probability(2, 2, 2, 4)
    try:
        coinet.haberman_residual(0.0, 4, 1, 4)
    except ValueError:
        pass
    else:
        raise AssertionError("saturated event accepted")

    # parsing
    recs = coinet.parse_delimited(
        "id;subjects;year\nb1;Fiction|England;1965\nb2;Fiction|Fiction;1970\n",
        ["subjects"],
        ["year"],
    )
    assert [r.scenario_id for r in recs] == ["b1", "b2"]
    assert recs[0].events == ["England", "Fiction"]
    assert recs[1].events == ["Fiction"]
    assert recs[1].attributes == {"year": "1970"}

    triples = (FIXTURES / "books.nt").read_text()
    trecs = coinet.parse_ntriples(
        triples,
        {
            "http://purl.org/dc/terms/subject": "event",
            "http://purl.org/dc/terms/issued": "attr:year",
        },
        iri_suffix=True,
    )
    assert sorted(r.events for r in trecs) == [["England", "Fiction"], ["Fiction"]]

    # incidence, selection, analysis
    data = [
        ("a", ["A", "B"]),
        ("b", ["A", "B"]),
        ("c", ["C"]),
        ("d", ["C", "D"]),
        ("e", ["A"]),
        ("f", ["D"]),
    ]
    x = coinet.IncidenceMatrix.from_records([coinet.ScenarioRecord(i, ev) for i, ev in data])
    assert (x.n_scenarios, x.n_events, x.nnz) == (6, 4, 9)
    assert x.labels == ["A", "B", "C", "D"]
    assert x.frequencies == [3, 2, 2, 2]
    c = x.coincidence()
    assert c[0][1] == 2 and c[0][0] == 3
    edges = x.analyze()
    ab = next(s for s in edges if {x.labels[s.i], x.labels[s.j]} == {"A", "B"})
    n, cab, ca, cb = 6, 2, 3, 2
    expect = ca * cb / n
    e_ref = (cab - expect) / math.sqrt(expect)
    d_ref = e_ref / math.sqrt((1 - ca / n) * (1 - cb / n))
    assert close(ab.e, e_ref) and close(ab.d, d_ref) and ab.adjacent
    sample = x.analyze("sample", 0.5)
    assert [s.adjacent for s in sample] == [s.adjacent for s in edges]
    top = x.select(top_k=2)
    assert top.labels == ["A", "B"]

    # layouts
    pos = coinet.layout_positions(1, [], "fr")
    assert pos == [(0.5, 0.5)]
    a = coinet.layout_positions(5, [(0, 1, 1.0), (1, 2, 2.0), (3, 4, 1.0)], "fr", seed=7)
    b = coinet.layout_positions(5, [(0, 1, 1.0), (1, 2, 2.0), (3, 4, 1.0)], "fr", seed=7)
    assert a == b
    assert len(coinet.layout_positions(3, [(0, 1, 1.0), (1, 2, 1.0)], "kk")) == 3
    assert len(coinet.layout_positions(3, [(0, 1, 1.0), (1, 2, 1.0)], "mds")) == 3

    # graph export
    g = x.graph(layout="fr", seed=3)
    doc = json.loads(g.to_json())
    assert list(doc) == ["nodes", "edges", "meta"]
    assert coinet.CoincidenceGraph.from_json(g.to_json()).to_json() == g.to_json()
    assert 'edgedefault="undirected"' in g.to_graphml()
    assert 'id="coinet-graph"' in g.render_html()
    assert len(g) == 4

    # full pipeline from a config
    config = json.loads((FIXTURES / "decades.json").read_text())
    out = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "target" / "smoke"
    out.mkdir(parents=True, exist_ok=True)
    config["outputs"] = {"json": str(out / "decades.json")}
    config["deterministic"] = True
    report = coinet.run_pipeline(json.dumps(config), str(FIXTURES))
    assert "select" in report
    golden = (ROOT / "crates" / "core" / "tests" / "golden" / "decades.json").read_bytes()
    assert (out / "decades.json").read_bytes() == golden

    try:
        coinet.run_pipeline(json.dumps({"input": {"path": "x"}}))
    except ValueError as err:
        assert "outputs" in str(err)
    else:
        raise AssertionError("config without outputs accepted")

    print("coinet", coinet.__version__, "smoke test ok")


if __name__ == "__main__":
    main()
