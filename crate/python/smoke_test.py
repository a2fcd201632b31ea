"""Smoke test for the Python bindings.

Build and install first:
    pip install --no-build-isolation ./crates/python
then run:
    python python/smoke_test.py
"""

import math

import compound_sums as cs


def main() -> None:
    mn = cs.Model("poisson:2", "mn:s=2,p=0.3,0.7")
    assert mn.dim == 2
    table = mn.pmf_table([6, 6])
    generic = mn.pmf_table([6, 6], engine="generic")
    assert max(abs(table[x] - generic[x]) for x in table) < 1e-12
    assert abs(table[(0, 0)] - math.exp(-2.0)) < 1e-15
    assert abs(mn.pmf([0, 0]) - mn.pgf([0.0, 0.0])) < 1e-15

    m = mn.moments()
    assert abs(m["mean"][0] - 1.2) < 1e-12
    assert abs(m["fisher_index"][0] - (1 + 0.3 * (2 * 1.0 - 1))) < 1e-12

    nmn = cs.Model("geometric:0.5", "nmn:s=1,p=0.2,0.3")
    law = nmn.conditional(0, 1, 2)
    assert abs(sum(law.values()) - 1.0) < 1e-10
    mean = sum(x * p for x, p in law.items())
    assert abs(mean - nmn.regression(0, 1, 2)) < 1e-8

    draws, counts = mn.sample(1000, seed=3)
    assert (draws, counts) == mn.sample(1000, seed=3)
    assert all(sum(x) == 2 * n for x, n in zip(draws, counts))
    emp = mn.sample_moments(200_000, seed=1)
    assert abs(emp["mean"][1] - m["mean"][1]) < 0.05

    try:
        cs.Model("poisson:-1", "mn:s=2,p=0.3,0.7")
    except ValueError:
        pass
    else:
        raise AssertionError("negative rate accepted")
    try:
        cs.Model("degenerate:1", "mn:s=1,p=0.5,0.5").regression(0, 1, 5)
    except ZeroDivisionError:
        pass
    else:
        raise AssertionError("impossible condition accepted")

    for name, passed, detail in cs.run_checks("quick"):
        print(("PASS" if passed else "FAIL"), name, detail)
        assert passed
    print("smoke test ok")


if __name__ == "__main__":
    main()
