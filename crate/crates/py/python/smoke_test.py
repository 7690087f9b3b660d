"""Smoke test for the leadopt_py extension module.

Build and install first:
    pip install maturin && cd crates/py && maturin develop --release
"""

import json
import os
import tempfile

import leadopt_py as lo


def main():
    assert lo.canonical_form("OCC") == lo.canonical_form("CCO")
    ok, violations = lo.validate("C(C)(C)(C)(C)C")
    assert not ok and violations
    assert lo.validate("c1ccccc1O") == (True, [])
    assert lo.tanimoto("c1ccccc1O", "Oc1ccccc1") == 1.0
    assert 0.0 < lo.evaluate("qed", "CC(=O)Nc1ccc(O)cc1") <= 1.0
    try:
        lo.canonical_form("C1CC")
    except ValueError:
        pass
    else:
        raise AssertionError("unclosed ring accepted")

    train, test = lo.lead_split(7, 12, 4)
    buf = lo.Buffer.build(train, "qed", seed=1)
    assert 0 < len(buf) <= len(train)
    hit = buf.top1_similar(test[0], "qed")
    assert hit is not None and 0.0 <= hit[1] <= 1.0 and len(hit[2]) == 3

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "buffer.jsonl")
        buf.save(path)
        assert len(lo.Buffer.load(path)) == len(buf)

    online = lo.Campaign("qed", mode="online", seed=3)
    first = online.run(test[0])
    assert first == online.run(test[0])
    record = json.loads(first)
    assert len(record["steps"]) == 3
    assert all(len(s["plan"]["tool_calls"]) == 1 for s in record["steps"])

    parallel = lo.Campaign("qed", mode="parallel", seed=3)
    records = parallel.run_many(test)
    assert all(len(s["plan"]["tool_calls"]) == 4 for r in records for s in json.loads(r)["steps"])

    retrieve = lo.Campaign("qed", mode="retrieve", seed=3, buffer=buf)
    print(lo.report(retrieve.run_many(test)))
    try:
        lo.Campaign("qed", mode="retrieve")
    except ValueError:
        pass
    else:
        raise AssertionError("retrieve without buffer accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
