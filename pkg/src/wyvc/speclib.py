"""The fixed library of specification functions.

Each function has an executable reference definition (used by the
interpreter and the formula evaluator), an SMT-LIB recursive definition
over an index window ``[lo, hi)`` of an array, and a list of derived
lemmas. Recursion always walks the window from the front, so facts about
extending a prefix at its end need the lemmas below; the solver cannot
derive them by unfolding alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

from .syntax.ast import Type

A, I, B = Type.ARRAY, Type.INT, Type.BOOL


def _take(a, n):
    return tuple(a[: max(n, 0)])


def _sorted_up_to(a, n):
    b = _take(a, n)
    return all(b[k] <= b[k + 1] for k in range(len(b) - 1))


@dataclass(frozen=True)
class SpecFunction:
    name: str
    arg_types: tuple[Type, ...]
    ret_type: Type
    impl: Callable
    smt_name: str | None = None
    smt_definition: str | None = None
    doc: str = ""


# SMT definitions take (a lo hi ...) and describe the window a[lo..hi).
_SMT_DEFS = {
    "sumFrom": """(define-fun-rec sumFrom ((a (Array Int Int)) (lo Int) (hi Int)) Int
  (ite (>= lo hi) 0 (+ (select a lo) (sumFrom a (+ lo 1) hi))))""",
    "countLtFrom": """(define-fun-rec countLtFrom ((a (Array Int Int)) (lo Int) (hi Int) (t Int)) Int
  (ite (>= lo hi) 0 (+ (ite (< (select a lo) t) 1 0) (countLtFrom a (+ lo 1) hi t))))""",
    "occFrom": """(define-fun-rec occFrom ((a (Array Int Int)) (lo Int) (hi Int) (v Int)) Int
  (ite (>= lo hi) 0 (+ (ite (= (select a lo) v) 1 0) (occFrom a (+ lo 1) hi v))))""",
    "minFrom": """(define-fun-rec minFrom ((a (Array Int Int)) (lo Int) (hi Int)) Int
  (ite (>= lo hi) 0 (ite (>= (+ lo 1) hi) (select a lo)
    (ite (<= (select a lo) (minFrom a (+ lo 1) hi)) (select a lo) (minFrom a (+ lo 1) hi)))))""",
    "maxFrom": """(define-fun-rec maxFrom ((a (Array Int Int)) (lo Int) (hi Int)) Int
  (ite (>= lo hi) 0 (ite (>= (+ lo 1) hi) (select a lo)
    (ite (>= (select a lo) (maxFrom a (+ lo 1) hi)) (select a lo) (maxFrom a (+ lo 1) hi)))))""",
    "sortedFrom": """(define-fun-rec sortedFrom ((a (Array Int Int)) (lo Int) (hi Int)) Bool
  (ite (>= (+ lo 1) hi) true (and (<= (select a lo) (select a (+ lo 1))) (sortedFrom a (+ lo 1) hi))))""",
}

FUNCTIONS: dict[str, SpecFunction] = {
    f.name: f
    for f in [
        SpecFunction("sum", (A,), I, lambda a: sum(a), "sumFrom", _SMT_DEFS["sumFrom"],
                     "sum of all elements"),
        SpecFunction("take", (A, I), A, _take, None, None,
                     "prefix of length n, clamped to [0, size]"),
        SpecFunction("count", (A, I), I, lambda a, t: sum(1 for x in a if x < t),
                     "countLtFrom", _SMT_DEFS["countLtFrom"], "number of elements below t"),
        SpecFunction("occurrences", (A, I), I, lambda a, v: sum(1 for x in a if x == v),
                     "occFrom", _SMT_DEFS["occFrom"], "number of elements equal to v"),
        SpecFunction("min", (A,), I, lambda a: min(a) if a else 0, "minFrom", _SMT_DEFS["minFrom"],
                     "smallest element, 0 when empty"),
        SpecFunction("max", (A,), I, lambda a: max(a) if a else 0, "maxFrom", _SMT_DEFS["maxFrom"],
                     "largest element, 0 when empty"),
        SpecFunction("sortedUpTo", (A, I), B, _sorted_up_to, "sortedFrom", _SMT_DEFS["sortedFrom"],
                     "take(a, n) is nondecreasing"),
    ]
}


@dataclass(frozen=True)
class Lemma:
    name: str
    source: str

    @property
    def formula(self):
        return _parse_lemma(self.source)


@lru_cache(maxsize=None)
def _parse_lemma(source: str):
    from .syntax.parser import parse_formula

    return parse_formula(source)


_PREFIX = "forall xs: Array Int, forall i, 0 <= i && i < xs.size ==> "

LEMMAS: tuple[Lemma, ...] = (
    Lemma("sum_take_succ", _PREFIX + "sum(take(xs, i + 1)) = sum(take(xs, i)) + xs[i]"),
    Lemma("count_take_succ_lt", "forall t, " + _PREFIX
          + "xs[i] < t ==> count(take(xs, i + 1), t) = count(take(xs, i), t) + 1"),
    Lemma("count_take_succ_ge", "forall t, " + _PREFIX
          + "xs[i] >= t ==> count(take(xs, i + 1), t) = count(take(xs, i), t)"),
    Lemma("occ_take_succ_eq", "forall v, " + _PREFIX
          + "xs[i] = v ==> occurrences(take(xs, i + 1), v) = occurrences(take(xs, i), v) + 1"),
    Lemma("occ_take_succ_ne", "forall v, " + _PREFIX
          + "xs[i] != v ==> occurrences(take(xs, i + 1), v) = occurrences(take(xs, i), v)"),
    Lemma("max_take_one", "forall xs: Array Int, 0 < xs.size ==> max(take(xs, 1)) = xs[0]"),
    Lemma("max_take_succ_ge", _PREFIX
          + "0 < i && xs[i] >= max(take(xs, i)) ==> max(take(xs, i + 1)) = xs[i]"),
    Lemma("max_take_succ_lt", _PREFIX
          + "0 < i && xs[i] < max(take(xs, i)) ==> max(take(xs, i + 1)) = max(take(xs, i))"),
    Lemma("min_take_one", "forall xs: Array Int, 0 < xs.size ==> min(take(xs, 1)) = xs[0]"),
    Lemma("min_take_succ_le", _PREFIX
          + "0 < i && xs[i] <= min(take(xs, i)) ==> min(take(xs, i + 1)) = xs[i]"),
    Lemma("min_take_succ_gt", _PREFIX
          + "0 < i && xs[i] > min(take(xs, i)) ==> min(take(xs, i + 1)) = min(take(xs, i))"),
    Lemma("sorted_take_succ", _PREFIX
          + "0 < i ==> sortedUpTo(xs, i + 1) = (sortedUpTo(xs, i) && xs[i - 1] <= xs[i])"),
)


@dataclass(frozen=True)
class SpecLibraryConfig:
    """Which library lemmas are asserted as hypotheses in emitted scripts."""

    lemmas: tuple[Lemma, ...] = LEMMAS
    disabled: frozenset[str] = field(default_factory=frozenset)

    @property
    def enabled(self) -> tuple[Lemma, ...]:
        return tuple(lm for lm in self.lemmas if lm.name not in self.disabled)

    def without(self, *names: str) -> "SpecLibraryConfig":
        return SpecLibraryConfig(self.lemmas, self.disabled | frozenset(names))

    def fingerprint(self) -> list[str]:
        return [lm.name for lm in self.enabled]


DEFAULT_LIBRARY = SpecLibraryConfig()
EMPTY_LIBRARY = SpecLibraryConfig(lemmas=())
