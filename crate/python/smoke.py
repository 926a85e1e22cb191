"""Smoke test for the confein_py extension.

Build and install first:  pip install --no-build-isolation ./crates/python
"""

import json
import sys

import confein_py


def main() -> int:
    names = confein_py.catalog_names()
    assert "schwarzschild" in names, names

    text = confein_py.export("schwarzschild")
    code, report = confein_py.classify(text, points=3, seed=7)
    report = json.loads(report)
    assert code == 0 and report["verdict"] == "conformally-einstein", report["reason"]
    assert "tractor-rank" in report["cited"]

    code, report = confein_py.classify(confein_py.export("rt-quartic5"), points=3)
    assert code == 1 and json.loads(report)["residual_table"]["E"]["max_relative"] > 1e-3

    code, _ = confein_py.classify(confein_py.export("sphere4"), points=3)
    assert code == 2

    code, report = confein_py.tractor(text, sigma="1", points=3)
    assert code == 0 and json.loads(report)["einstein_scale"] is True

    code, report = confein_py.identities(confein_py.export("hyperkahler"), points=3)
    assert code == 0 and json.loads(report)["passes"]

    try:
        confein_py.classify("coords = a, b, c\ng[0][1] = a\ng[1][0] = b\n")
    except ValueError as e:
        assert "line 3" in str(e), e
    else:
        raise AssertionError("conflicting components accepted")

    print(f"confein_py {confein_py.__version__}: smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
