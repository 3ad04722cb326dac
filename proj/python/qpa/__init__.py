"""Exact path-weight distributions and value sets of loop-bounded programs.

    >>> import qpa
    >>> p = qpa.compile(open("programs/modexp8.qp").read())
    >>> d = qpa.distribution(p)
    >>> d.counts[48], d.probability(48)
    (70, Fraction(35, 128))
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import _core
from ._core import BudgetError, Error, ParseError, Program

__all__ = [
    "AnalysisFailure",
    "BudgetError",
    "Distribution",
    "Error",
    "ParseError",
    "Program",
    "ValueSet",
    "abs_transform",
    "brute_force",
    "capacity",
    "compile",
    "distribution",
    "execute",
    "load",
    "path_enumeration",
    "submultiset_sums",
    "sumset_size_bound",
    "supports",
    "values",
]


class AnalysisFailure(Exception):
    """The program is outside the accepted class (nested, unsupported, dependent)."""

    def __init__(self, message: str, reason: str, witness: list[int], variable: str = ""):
        super().__init__(f"FAILURE ({reason}): {message}")
        self.reason = reason
        self.witness = list(witness)
        self.variable = variable


_core._set_failure_type(AnalysisFailure)


@dataclass(frozen=True)
class Distribution:
    """Total weight -> number of inputs, over 2**input_bits uniform inputs."""

    counts: dict[int, int]
    input_bits: int
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def probability(self, weight: int) -> Fraction:
        return Fraction(self.counts.get(weight, 0), 2**self.input_bits)

    def weights(self) -> list[int]:
        return sorted(self.counts)

    def entropy(self) -> float:
        n = 2**self.input_bits
        return -sum(c / n * math.log2(c / n) for c in self.counts.values())

    def to_csv(self) -> str:
        rows = ["weight,count,probability,probability_decimal"]
        for w in self.weights():
            c = self.counts[w]
            k = self.input_bits
            while c % 2 == 0 and k > 0:
                c //= 2
                k -= 1
            rows.append(f"{w},{self.counts[w]},{c}/2^{k},{float(self.probability(w)):.12g}")
        return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class ValueSet:
    values: list[int]
    exact: bool = True
    stats: dict = field(default_factory=dict, compare=False)

    def capacity(self) -> float:
        return math.log2(len(self.values))

    def __len__(self) -> int:
        return len(self.values)


def compile(source: str, cost: str | None = None, max_statements: int = 2_000_000) -> Program:
    """Parse, unroll and build the weighted CFG. `cost` is a JSON cost table."""
    return Program.compile(source, cost or "", max_statements)


def load(path: str | Path, cost: str | Path | None = None) -> Program:
    cost_text = Path(cost).read_text() if cost is not None else None
    return compile(Path(path).read_text(), cost_text)


def supports(program: Program, seed: int = 0) -> dict:
    return _core.supports(program, seed)


def distribution(
    program: Program,
    dependent_groups: bool = False,
    max_paths: int = 1 << 24,
    max_dependent_group: int = 16,
    jobs: int = 1,
    seed: int = 0,
) -> Distribution:
    d, stats = _core.distribution(program, dependent_groups, max_paths, max_dependent_group, jobs, seed)
    return Distribution(d["counts"], d["input_bits"], stats)


def values(
    program: Program,
    dependent_groups: bool = False,
    max_paths: int = 1 << 24,
    max_dependent_group: int = 16,
    seed: int = 0,
) -> ValueSet:
    v, exact, stats = _core.values(program, dependent_groups, max_paths, max_dependent_group, seed)
    return ValueSet(v, exact, stats)


def capacity(program: Program, dependent_groups: bool = False, size_only: bool = False) -> float:
    """log2 of the number of possible total weights."""
    if size_only:
        return math.log2(_core.value_count(program, dependent_groups))
    return values(program, dependent_groups).capacity()


def brute_force(program: Program, max_input_bits: int = 20, jobs: int = 1, source_level: bool = False) -> Distribution:
    d, executions = _core.brute_force(program, max_input_bits, jobs, source_level)
    return Distribution(d["counts"], d["input_bits"], {"executions": executions})


def path_enumeration(program: Program, max_paths: int = 1 << 24) -> Distribution:
    d, calls = _core.path_enumeration(program, max_paths)
    return Distribution(d["counts"], d["input_bits"], {"counter_calls": calls})


def execute(program: Program, *inputs: int) -> dict:
    return _core.execute(program, list(inputs))


submultiset_sums = _core.submultiset_sums
abs_transform = _core.abs_transform
sumset_size_bound = _core.sumset_size_bound
