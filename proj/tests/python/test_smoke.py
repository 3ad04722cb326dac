import math
import os
from fractions import Fraction
from itertools import combinations
from pathlib import Path

import pytest

import qpa

PROGRAMS = Path(os.environ.get("QPA_PROGRAMS_DIR", Path(__file__).resolve().parents[2] / "programs"))


def load(name):
    return qpa.load(PROGRAMS / name)


def test_modexp2_supports_and_distribution():
    p = load("modexp2.qp")
    assert p.branch_count == 2 and p.input_bits == 2
    s = qpa.supports(p)
    assert [b["support"] for b in s["branches"]] == [["e[0]"], ["e[1]"]]
    assert [b["true_count"] for b in s["branches"]] == [1, 1]
    d = qpa.distribution(p)
    assert d.counts == {10: 1, 11: 2, 12: 1}
    assert d.stats["counter_calls"] == 2
    assert d == qpa.brute_force(p) == qpa.path_enumeration(p)


def test_modexp8_binomial_entropy_capacity():
    p = load("modexp8.qp")
    d = qpa.distribution(p)
    assert [d.counts[w] for w in d.weights()] == [math.comb(8, k) for k in range(9)]
    assert d.probability(d.weights()[4]) == Fraction(70, 256)
    assert abs(d.entropy() - 2.5442) < 1e-4
    assert len(qpa.values(p)) == 9
    assert abs(qpa.capacity(p) - math.log2(9)) < 1e-9
    assert qpa.capacity(p, size_only=True) == qpa.capacity(p)
    assert d.to_csv().splitlines()[5] == "48,70,35/2^7,0.2734375"


def test_failures_carry_witnesses():
    with pytest.raises(qpa.AnalysisFailure) as nested:
        qpa.distribution(load("nested.qp"))
    assert nested.value.reason == "nested" and nested.value.witness == [0, 1]
    with pytest.raises(qpa.AnalysisFailure) as merge:
        qpa.values(load("merge_dependent.qp"))
    assert merge.value.reason == "unsupported" and merge.value.variable == "r"
    with pytest.raises(qpa.AnalysisFailure) as dep:
        qpa.distribution(load("mt_step.qp"))
    assert dep.value.reason == "dependent"


def test_dependent_groups_match_brute_force():
    p = load("mt_step.qp")
    d = qpa.distribution(p, dependent_groups=True)
    assert d == qpa.brute_force(p)
    assert qpa.values(p, dependent_groups=True).values == d.weights()


def test_errors_map_to_python_exceptions():
    with pytest.raises(qpa.ParseError):
        qpa.compile("input x : 4;\nif (x == ) {}\n")
    with pytest.raises(ValueError):
        qpa.compile("input x : 4;\ny = 1;\n")
    with pytest.raises(qpa.BudgetError):
        qpa.distribution(load("modexp8.qp"), max_paths=10)
    with pytest.raises(qpa.BudgetError):
        qpa.brute_force(load("modexp16.qp"), max_input_bits=8)


def test_execute_matches_python_modexp():
    p = load("modexp8.qp")
    for e in (0, 1, 77, 255):
        t = qpa.execute(p, e)
        assert t["result"] == pow(3, e, 251)
        assert len(t["taken"]) == bin(e).count("1")


def test_submultiset_sums_against_itertools():
    d = [2, 3, 3, -1, 0]
    brute = sorted({sum(c) for r in range(len(d) + 1) for c in combinations(d, r)})
    assert qpa.submultiset_sums(d) == brute
    assert len(qpa.submultiset_sums(qpa.abs_transform(d))) == len(brute)
    assert qpa.sumset_size_bound([1, 2]) == 6
    with pytest.raises(qpa.BudgetError):
        qpa.submultiset_sums([1, 2, 4, 8], max_output=3)
