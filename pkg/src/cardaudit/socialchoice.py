"""Tabulation for plurality and instant-runoff contests, and outcome equality.

All functions are pure and depend only on the multiset of votes, never on
their order.  Elimination ties in IRV are broken deterministically by the
contest's candidate-list order (earliest listed is eliminated first) and the
tie is flagged so a tie-dependent result is never silently treated as a
clean outcome.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .electiondata import Contest, Vote


class TabulationError(ValueError):
    pass


@dataclass(frozen=True)
class Outcome:
    """Winner set plus a tie flag.

    A flagged outcome is a distinct element of the outcome space: it never
    compares equal to any outcome, flagged or not (see :func:`outcome_equal`).
    """

    winners: frozenset[str]
    tie_flag: bool = False

    def __post_init__(self):
        object.__setattr__(self, "winners", frozenset(self.winners))


@dataclass(frozen=True)
class IrvRounds:
    """Round-by-round IRV tallies.

    ``tallies[r]`` maps each continuing candidate to its tally in round r;
    ``exhausted[r]`` is the cumulative number of exhausted cards at round r,
    so each round's tallies plus exhausted sum to N.
    """

    tallies: tuple[dict, ...]
    eliminated: tuple[str, ...]
    exhausted: tuple[int, ...]
    elimination_ties: tuple[str, ...] = ()
    short_circuited: bool = False

    @property
    def n_rounds(self) -> int:
        return len(self.tallies)

    def final_round(self) -> dict:
        return self.tallies[-1]


def _first_preference(vote: Vote, continuing: set[str]) -> Optional[str]:
    """Highest-ranked continuing candidate on a vote, or None if exhausted."""
    if vote.candidate is not None:
        return vote.candidate if vote.candidate in continuing else None
    if vote.ranking:
        for c in vote.ranking:
            if c in continuing:
                return c
    return None


def tabulate_plurality(votes: Sequence[Vote], contest: Contest) -> tuple[dict, Outcome]:
    """Count first choices; null votes are ignored.

    Returns the tally map (every contest candidate keyed, zero included) and
    the outcome.  Equal top tallies yield a flagged outcome containing all
    tied leaders.
    """
    if contest.kind != "plurality":
        raise TabulationError(f"contest {contest.id!r} is not a plurality contest")
    tallies = {c: 0 for c in contest.candidates}
    for v in votes:
        c = _first_preference(v, set(contest.candidates))
        if c is not None:
            tallies[c] += 1
    top = max(tallies.values(), default=0)
    leaders = [c for c in contest.candidates if tallies[c] == top]
    if len(leaders) > 1:
        return tallies, Outcome(winners=frozenset(leaders), tie_flag=True)
    return tallies, Outcome(winners=frozenset(leaders))


def tabulate_irv(votes: Sequence[Vote], contest: Contest) -> tuple[IrvRounds, Outcome]:
    """Instant-runoff tabulation.

    Repeatedly eliminates the unique lowest-tally continuing candidate,
    transferring each of its cards to the next continuing preference (else
    exhausted), until one candidate remains or some candidate holds a strict
    majority of continuing cards.  All rounds are recorded.
    """
    if contest.kind != "irv":
        raise TabulationError(f"contest {contest.id!r} is not an IRV contest")
    continuing = set(contest.candidates)
    order = {c: i for i, c in enumerate(contest.candidates)}
    round_tallies: list[dict] = []
    eliminated: list[str] = []
    exhausted: list[int] = []
    elimination_ties: list[str] = []
    short_circuited = False

    while True:
        tallies = {c: 0 for c in sorted(continuing, key=order.get)}
        n_exhausted = 0
        for v in votes:
            c = _first_preference(v, continuing)
            if c is None:
                n_exhausted += 1
            else:
                tallies[c] += 1
        round_tallies.append(tallies)
        exhausted.append(n_exhausted)

        n_continuing_cards = sum(tallies.values())
        top = max(tallies.values())
        leaders = [c for c in tallies if tallies[c] == top]
        if len(continuing) == 1 or 2 * top > n_continuing_cards:
            short_circuited = len(continuing) > 2
            tie = len(leaders) > 1 or bool(elimination_ties)
            winners = frozenset(leaders) if len(leaders) > 1 else frozenset([leaders[0]])
            rounds = IrvRounds(
                tallies=tuple(round_tallies),
                eliminated=tuple(eliminated),
                exhausted=tuple(exhausted),
                elimination_ties=tuple(elimination_ties),
                short_circuited=short_circuited,
            )
            return rounds, Outcome(winners=winners, tie_flag=tie)
        if len(continuing) == 2:
            # neither candidate holds a strict majority: tied last round
            rounds = IrvRounds(
                tallies=tuple(round_tallies),
                eliminated=tuple(eliminated),
                exhausted=tuple(exhausted),
                elimination_ties=tuple(elimination_ties),
            )
            return rounds, Outcome(winners=frozenset(leaders), tie_flag=True)

        low = min(tallies.values())
        losers = [c for c in tallies if tallies[c] == low]
        if len(losers) > 1:
            elimination_ties.extend(sorted(losers, key=order.get))
        loser = min(losers, key=order.get)
        eliminated.append(loser)
        continuing.remove(loser)


def tabulate(votes: Sequence[Vote], contest: Contest) -> Outcome:
    """Apply the contest's social choice function; plurality or IRV only."""
    if contest.kind == "plurality":
        return tabulate_plurality(votes, contest)[1]
    if contest.kind == "irv":
        return tabulate_irv(votes, contest)[1]
    raise TabulationError(f"no tabulation rule for contest kind {contest.kind!r}")


def outcome_equal(a: Outcome, b: Outcome) -> bool:
    """True iff the winner sets match and neither outcome is flagged as tied."""
    if a.tie_flag or b.tie_flag:
        return False
    return a.winners == b.winners
