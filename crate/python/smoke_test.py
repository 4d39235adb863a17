"""Smoke test for the ovfqe extension module.

Build the module first:

    cargo build -p ovfqe-py --release
    mkdir -p build/py && cp target/release/libovfqe.so build/py/ovfqe.so

Run:  PYTHONPATH=build/py python3 python/smoke_test.py
"""

import json

import ovfqe


def main() -> None:
    # parse / print round trip
    f = ovfqe.Formula.parse("E x (x * x = c)")
    assert not f.is_field_quantifier_free()
    assert f.free_variables() == [("c", "field")]
    g = ovfqe.Formula.parse(str(f))
    assert str(g) == str(f)

    # field-quantifier elimination into Pas normal form
    result = ovfqe.eliminate(f, trace=True)
    assert result.n >= 1
    assert result.formula.is_field_quantifier_free()
    assert len(result.trace) > 0

    # evaluation over the Laurent-series model: t^2 is a square of t,
    # 2 t^2 is not a square in rational residue mode
    assert ovfqe.evaluate(
        result.formula, {"c": "{1*t^2}"}, residue_mode="rational"
    )
    assert not ovfqe.evaluate(
        result.formula, {"c": "{2*t^2}"}, residue_mode="rational"
    )

    # differential test of input vs eliminated output
    report = ovfqe.check(f, samples=100, seed=7)
    assert report["status"] in ("consistent", "weak-pass"), report
    assert report["samples"] > 0

    # one-sorted backends
    assert ovfqe.decide_residue(ovfqe.Formula.parse("E u:r (u * u = 2)"))
    assert not ovfqe.decide_residue(
        ovfqe.Formula.parse("E u:r (u * u = 2)"), residue_mode="rational"
    )
    assert ovfqe.decide_group(
        ovfqe.Formula.parse("A g:s (E h:s ((g = h + h) | (g = (h + h) + 1)))")
    )

    # stable embeddedness projections
    proj = ovfqe.project_residue(
        ovfqe.Formula.parse("E x ({3} < x & v(x) = 0 & res(x) = u)")
    )
    assert proj.free_variables() == [("u", "residue")]

    # orthogonality rectangles
    pairs = ovfqe.rectangles(ovfqe.Formula.parse("u > 0 & g > 0"))
    assert len(pairs) >= 1

    # Borel construction tree
    tree = json.loads(ovfqe.borel_tree(ovfqe.Formula.parse("0 < v(x)")))
    assert tree["node"] == "difference"
    assert tree["dim"] == 1
    assert tree["frontier"]["dim"] == 0

    print("smoke test passed")


if __name__ == "__main__":
    main()
