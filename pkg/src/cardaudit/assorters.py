"""Assorter functions and their algebra, in exact rational arithmetic.

An assorter maps a vote to a nonnegative rational bounded by ``u``; the
reported outcome is correct when the relevant assorter means over the true
votes all exceed 1/2.  Three families live here:

* the plurality (winner vs. loser) assorter,
* the overstatement assorter built from an assorter and CVR reference
  values, whose mean exceeds 1/2 iff the underlying assorter mean does,
* the two-valued mismatch assorter, whose mean exceeds 1/2 iff the number
  of CVR/card mismatches is below the margin bound,

plus NEB/NEN assertion assorters for IRV contests.  Everything is a pure
function of immutable inputs; all arithmetic is Fraction-exact so that
boundary cases (mean exactly 1/2) are decided correctly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

from .electiondata import Contest, Vote


class AssorterError(ValueError):
    pass


@dataclass(frozen=True)
class Assorter:
    """A bounded nonnegative function on votes."""

    upper: Fraction
    value: Callable[[Vote], Fraction]
    label: str = ""

    def __call__(self, vote: Vote) -> Fraction:
        x = self.value(vote)
        if not (0 <= x <= self.upper):
            raise AssorterError(f"assorter {self.label!r} value {x} outside [0, {self.upper}]")
        return x


# comparison categories for {0, 1/2, 1}-valued assorters, keyed by the
# overstatement numerator u + A(b) - A(c)
_CATEGORIES = {
    Fraction(0): "2-over",
    Fraction(1, 2): "1-over",
    Fraction(1): "match",
    Fraction(3, 2): "1-under",
    Fraction(2): "2-under",
}


@dataclass(frozen=True)
class ComparisonScore:
    """An overstatement-assorter value with its discrepancy category."""

    value: Fraction
    category: str


def plurality_assorter(winner: str, loser: str) -> Assorter:
    """Winner-vs-loser assorter: 1 for the winner, 0 for the loser, 1/2 else."""
    if winner == loser:
        raise AssorterError("winner and loser must differ")

    def value(vote: Vote) -> Fraction:
        first = vote.candidate
        if first is None and vote.ranking:
            first = vote.ranking[0]
        if first == winner:
            return Fraction(1)
        if first == loser:
            return Fraction(0)
        return Fraction(1, 2)

    return Assorter(upper=Fraction(1), value=value, label=f"{winner} beats {loser}")


def assorter_margin(values: Sequence[Fraction]) -> Fraction:
    """Assorter margin: twice the excess of the mean over 1/2."""
    if not values:
        raise AssorterError("empty value list")
    mean = Fraction(sum(Fraction(x) for x in values), len(values))
    return 2 * mean - 1


def overstatement_value(
    b: Vote, c: Vote, assorter: Assorter, nu: Fraction
) -> ComparisonScore:
    """Overstatement-assorter value (u + A(b) - A(c)) / (2u - nu).

    Requires a reportedly-true assertion (nu > 0).  The category is derived
    from the numerator and is only meaningful for {0, 1/2, 1}-valued
    assorters.
    """
    nu = Fraction(nu)
    u = assorter.upper
    if not (0 < nu < 2 * u):
        raise AssorterError(f"assorter margin {nu} outside (0, {2 * u}): assertion not reportedly true")
    numerator = u + assorter(b) - assorter(c)
    value = numerator / (2 * u - nu)
    category = _CATEGORIES.get(numerator, "other") if u == 1 else "other"
    return ComparisonScore(value=value, category=category)


def overstatement_upper(assorter: Assorter, nu: Fraction) -> Fraction:
    """Upper bound 2u/(2u - nu) of the overstatement assorter."""
    u = assorter.upper
    return 2 * u / (2 * u - Fraction(nu))


def mismatch_value(b: Vote, c: Vote, v_prime: Fraction) -> Fraction:
    """Mismatch-assorter value: 1/(2 - 2v') on a match, 0 on any mismatch.

    Equality is strict structural equality of the interpreted votes; a null
    ballot matches a null CVR.  ``v_prime`` must be a margin proportion
    bound in [0, 1); it is the caller's responsibility that v' <= v.
    """
    v_prime = Fraction(v_prime)
    if not (0 <= v_prime < 1):
        raise AssorterError(f"v'={v_prime} outside [0, 1)")
    if b != c:
        return Fraction(0)
    return 1 / (2 - 2 * v_prime)


def mismatch_upper(v_prime: Fraction) -> Fraction:
    """Upper bound 1/(2 - 2v') of the mismatch assorter."""
    return 1 / (2 - 2 * Fraction(v_prime))


def mean_gt_half(values: Sequence[Fraction]) -> bool:
    """Exact test of mean > 1/2 over a complete population of values."""
    if not values:
        raise AssorterError("empty value list")
    total = sum(Fraction(x) for x in values)
    return total * 2 > len(values)


# ---------------------------------------------------------------------------
# IRV assertion assorters (NEB / NEN)


@dataclass(frozen=True)
class Assertion:
    """One IRV assertion with its {0, 1/2, 1}-valued assorter."""

    kind: str  # "NEB" | "NEN"
    winner: str
    loser: str
    continuing: Optional[frozenset[str]] = None  # NEN only
    assorter: Optional[Assorter] = None

    def describe(self) -> str:
        if self.kind == "NEB":
            return f"NEB({self.winner}, {self.loser})"
        return f"NEN({self.winner}, {self.loser} | continuing={sorted(self.continuing)})"


@dataclass(frozen=True)
class AssertionSet:
    """A collection of IRV assertions; all must hold for the outcome to be right."""

    assertions: tuple[Assertion, ...]

    def __iter__(self):
        return iter(self.assertions)

    def __len__(self):
        return len(self.assertions)


def _ranking_of(vote: Vote) -> tuple[str, ...]:
    if vote.candidate is not None:
        return (vote.candidate,)
    return vote.ranking or ()


def neb_assorter(winner: str, loser: str) -> Assorter:
    """Not-eliminated-before assorter.

    Scores 1 when the winner is the first preference (those votes always
    count for the winner), 0 when the loser is ranked and the winner does
    not appear earlier (those votes could count for the loser), 1/2
    otherwise.
    """

    def value(vote: Vote) -> Fraction:
        ranking = _ranking_of(vote)
        if ranking and ranking[0] == winner:
            return Fraction(1)
        for c in ranking:
            if c == winner:
                return Fraction(1, 2)
            if c == loser:
                return Fraction(0)
        return Fraction(1, 2)

    return Assorter(upper=Fraction(1), value=value, label=f"NEB({winner},{loser})")


def nen_assorter(winner: str, loser: str, continuing: frozenset[str]) -> Assorter:
    """Winner-beats-loser assorter in the elimination context ``continuing``.

    Scores 1 when the first continuing preference is the winner, 0 when it
    is the loser, 1/2 otherwise.
    """

    def value(vote: Vote) -> Fraction:
        for c in _ranking_of(vote):
            if c in continuing:
                if c == winner:
                    return Fraction(1)
                if c == loser:
                    return Fraction(0)
                return Fraction(1, 2)
        return Fraction(1, 2)

    return Assorter(upper=Fraction(1), value=value, label=f"NEN({winner},{loser})")


def irv_assertion_assorters(
    assertions: Union[str, Path, Sequence[dict]],
    contest: Contest,
    cvr_votes: Optional[Sequence[Vote]] = None,
) -> AssertionSet:
    """Build assertion assorters from an assertion description.

    ``assertions`` is a JSON file path or a list of objects
    ``{"type": "NEB"|"NEN", "winner", "loser", "continuing": [...]}``
    (``continuing`` for NEN only), mirroring the published RAIRE assertion
    format.  When CVR votes are supplied, every assertion must have a
    positive assorter margin on them; otherwise the set cannot certify.
    """
    if isinstance(assertions, (str, Path)):
        with open(assertions) as f:
            assertions = json.load(f)
    built = []
    for i, obj in enumerate(assertions):
        try:
            kind = obj["type"]
            winner, loser = obj["winner"], obj["loser"]
        except (KeyError, TypeError) as e:
            raise AssorterError(f"assertion {i}: missing field ({e})") from e
        if winner == loser or winner not in contest.candidates or loser not in contest.candidates:
            raise AssorterError(f"assertion {i}: bad winner/loser pair ({winner!r}, {loser!r})")
        if kind == "NEB":
            a = Assertion(kind="NEB", winner=winner, loser=loser, assorter=neb_assorter(winner, loser))
        elif kind == "NEN":
            if "continuing" not in obj:
                raise AssorterError(f"assertion {i}: NEN needs a 'continuing' list")
            continuing = frozenset(obj["continuing"])
            if winner not in continuing or loser not in continuing:
                raise AssorterError(f"assertion {i}: winner and loser must be continuing")
            a = Assertion(
                kind="NEN",
                winner=winner,
                loser=loser,
                continuing=continuing,
                assorter=nen_assorter(winner, loser, continuing),
            )
        else:
            raise AssorterError(f"assertion {i}: unknown type {kind!r}")
        if cvr_votes is not None:
            nu = assorter_margin([a.assorter(v) for v in cvr_votes])
            if nu <= 0:
                raise AssorterError(f"assertion {i} ({a.describe()}): margin {nu} <= 0 on the CVRs")
        built.append(a)
    return AssertionSet(assertions=tuple(built))
