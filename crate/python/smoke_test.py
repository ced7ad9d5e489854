"""Smoke test for the delineate_py extension module.

Build and install the module first, e.g. `maturin develop -m crates/py/Cargo.toml`,
then run `python python/smoke_test.py`.
"""

import json
import math
import pathlib

import delineate_py as d

ROOT = pathlib.Path(__file__).resolve().parent.parent
E2E = ROOT / "crates" / "core" / "fixtures" / "e2e"


def main():
    text = (E2E / "export_a.txt").read_text()
    records = d.parse_tagged(text)
    assert len(records) == 250, len(records)
    again = d.parse_tabular(d.write_tabular(records))
    assert [r.ut for r in again] == [r.ut for r in records]

    q = d.Query('TS=("neural network$" OR "deep learning")')
    r = d.Record("X1", title="Deep-learning models of rivers")
    assert q.matches(r)
    try:
        d.Query("TS=(a OR")
    except ValueError:
        pass
    else:
        raise AssertionError("unbalanced query accepted")

    names = d.bundled_strategy_names()
    assert "ai_lexical" in names, names
    hits = d.Strategy.bundled("ai_lexical").run(records, workers=2)
    assert hits == sorted(hits) and 0 < len(hits) < len(records)

    verdicts = {}
    for line in (E2E / "replay.csv").read_text().splitlines()[1:]:
        ut, label = line.split(",", 1)
        verdicts[ut] = label
    for r in records:
        verdicts.setdefault(r.ut, "other")
    tags, summary = d.run_pipeline(records, verdicts=verdicts, workers=2)
    admitted = summary["final_size"]
    assert admitted == sum(summary[s] for s in ("citation_topic", "core_lexical", "category", "classifier"))
    assert summary["initial_size"] == len(tags) == len(records)
    assert summary["initial_size"] == admitted + summary["rejected"]

    nb = d.NaiveBayes([("deep learning model", "ai"), ("soil model", "other")])
    label, p = nb.predict("deep model")
    assert label == "ai" and 0.5 < p < 1.0

    lines = d.format_training_jsonl([("a title", "ai"), ("b title", "other")])
    first = json.loads(lines.splitlines()[0])
    assert first == {"prompt": "a title" + d.PROMPT_SEPARATOR, "completion": " ai"}
    assert d.parse_training_jsonl(lines) == [("a title", "ai"), ("b title", "other")]

    gold = {f"G{i}": ("ai" if i < 450 else "other") for i in range(1000)}
    predicted = {f"G{i}" for i in range(423)} | {f"G{i}" for i in range(450, 497)}
    m = d.score(predicted, gold)
    assert math.isclose(m["f1"], 0.919565, abs_tol=5e-6), m

    lo, hi = d.wilson_interval(107, 110)
    assert lo < 107 / 110 < hi

    regions = d.venn([("a", {"1", "2"}), ("b", {"2", "3"})])
    assert regions == {"a": 1, "b": 1, "a&b": 1}, regions

    assert d.h_index([10, 8, 5, 4, 3]) == 4
    nodes, edges = d.cooccurrence({"1": ["A", "B"], "2": ["A", "B"], "3": ["A", "C"]})
    assert edges[("A", "B")] == 2 and edges[("A", "C")] == 1 and nodes["A"] == 3

    print(f"delineate_py {d.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
