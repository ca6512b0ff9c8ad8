"""Smoke test for the jacobi2 extension module."""

import json

import jacobi2


def main():
    eng = jacobi2.Engine(4)

    a2 = eng.series("theta_A2_deg1")
    assert [t[3] for t in a2.terms()] == ["1", "6", "6", "6"], a2.terms()

    delta = eng.series("delta")
    assert [t[3] for t in delta.terms()[:4]] == ["1", "-24", "252", "-1472"]

    chi10 = eng.series("level1.chi10")
    assert chi10.coeff("1", "1", "1") == "1"

    k6 = eng.series("K6", scope="level2")
    assert eng.witt("K6", scope="level2").is_zero()
    assert not k6.is_zero()

    chi5 = eng.series("chi5", scope="level1")
    assert chi5.coeff("1/2", "1/2", "1/2") == "-1"

    h20, h11, h02 = eng.sym2("(b3 a1 b3 e3)", scope="level3")
    assert not h11.is_zero()

    assert all(ok for _, ok in eng.witt_condition("gamma0_4psi", "II", "Phi11"))

    assert jacobi2.theta("1010", 4).is_zero()
    assert not jacobi2.theta("1111", 4).is_zero()
    assert jacobi2.hilbert("gamma0_2", "JI", 6) == [0, 0, 1, 0, 3, 0, 6]

    status, rows = jacobi2.dims("gamma00_2psi", "JI", 4)
    assert status == "pass", rows

    report = json.loads(jacobi2.verify(["level4.g04.table.*"]))
    assert report["schema"] == "jacobi2.report/1"
    assert report["summary"]["fail"] == 0, report["summary"]

    try:
        eng.series("no_such_form")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown name accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
