"""CVR margins: exact computation where tractable, diagnostics, external bounds.

The CVR margin is the least number of CVRs that must be altered (each
replaced by some vote from a replacement vocabulary) for the reported
outcome to change.  A tie counts as an outcome change.  The brute-force
search enumerates modification multisets breadth-first in the radius, so
exact results come with a witness that is independently checkable by
re-tabulation.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence, Union

from .electiondata import Contest, CvrSet, Vote
from .socialchoice import IrvRounds, Outcome, outcome_equal, tabulate


class MarginError(ValueError):
    pass


class WorkBudgetExceeded(MarginError):
    pass


@dataclass(frozen=True)
class MarginReport:
    """A CVR margin V with its kind and, for exact results, a witness.

    kind is one of:

    * ``exact``: V is the true CVR margin; ``witness`` lists V
      (card index, replacement vote) pairs whose application changes the
      reported outcome.
    * ``lower_bound``: the true margin is at least V.
    * ``diagnostic_upper``: the true margin is at most V; must not be used
      as the margin bound of an audit.
    """

    V: int
    N: int
    kind: str
    witness: Optional[tuple[tuple[int, Vote], ...]] = None
    source: str = ""
    degenerate: bool = False

    def __post_init__(self):
        if not (0 <= self.V <= self.N + 1):
            raise MarginError(f"V={self.V} out of range for N={self.N}")
        if self.kind not in ("exact", "lower_bound", "diagnostic_upper"):
            raise MarginError(f"unknown margin kind {self.kind!r}")

    @property
    def v(self) -> Fraction:
        """Margin proportion V/N, exact."""
        return Fraction(self.V, self.N)


def plurality_cvr_margin(tallies: dict, contest: Contest, n_cards: Optional[int] = None) -> MarginReport:
    """CVR margin of a plurality contest from its tallies.

    Changing one CVR moves the vote margin by at most two, so
    V = ceil((winner - runner-up) / 2); a tie (V = 0) means the reported
    outcome is already not unique.  Flipping V winner-CVRs into votes for
    the runner-up realizes the change, but this operation only sees
    tallies, so no card-level witness is attached; use
    :func:`hamming_margin_bruteforce` when a checkable witness is needed.
    """
    if contest.kind != "plurality":
        raise MarginError("plurality margin requires a plurality contest")
    n = n_cards if n_cards is not None else sum(tallies.values())
    ordered = sorted(contest.candidates, key=lambda c: (-tallies.get(c, 0), contest.candidates.index(c)))
    winner, runner_up = ordered[0], ordered[1]
    diff = tallies.get(winner, 0) - tallies.get(runner_up, 0)
    V = math.ceil(diff / 2)
    return MarginReport(V=V, N=n, kind="exact", source="plurality tally formula")


def irv_vote_vocabulary(contest: Contest, max_len: Optional[int] = None) -> list[Vote]:
    """All rankings of up to ``max_len`` candidates (default: all), plus null.

    Size grows as sum of falling factorials; for more than 6 candidates the
    caller should restrict the length or supply an external margin instead.
    """
    if max_len is None:
        max_len = len(contest.candidates)
    votes = [Vote.null()]
    for k in range(1, max_len + 1):
        for perm in itertools.permutations(contest.candidates, k):
            votes.append(Vote.of_ranking(perm))
    return votes


def _class_groups(cvrs: CvrSet) -> list[tuple[Vote, list[int]]]:
    """Group card indices by identical CVR vote; tabulation only sees multisets."""
    groups: dict[Vote, list[int]] = {}
    for i, (_, vote) in enumerate(cvrs):
        groups.setdefault(vote, []).append(i)
    return list(groups.items())


def hamming_margin_bruteforce(
    cvrs: CvrSet,
    contest: Contest,
    max_radius: int,
    vocabulary: Optional[Sequence[Vote]] = None,
    work_budget: int = 10**8,
) -> MarginReport:
    """Exact CVR margin by breadth-first search over modification radii.

    For each radius n = 1..max_radius, enumerates multisets of
    (CVR equivalence class, replacement vote) changes of total size n and
    re-tabulates.  Returns the smallest n that changes the outcome (ties
    included), with a concrete witness; if none is found within
    ``max_radius``, returns a lower bound of max_radius + 1.

    Deterministic: the enumeration order is fixed, so the returned witness
    does not depend on parallelism or platform.
    """
    n_cards = cvrs.n
    if n_cards == 0:
        raise MarginError("empty CVR set")
    if vocabulary is None:
        if contest.kind == "plurality":
            vocabulary = [Vote.null()] + [Vote.plurality(c) for c in contest.candidates]
        elif contest.kind == "irv":
            vocabulary = irv_vote_vocabulary(contest)
        else:
            raise MarginError(f"no default replacement vocabulary for {contest.kind!r} contests")

    base_votes = cvrs.votes()
    reported = tabulate(base_votes, contest)
    if reported.tie_flag:
        return MarginReport(V=0, N=n_cards, kind="exact", witness=(), source="reported outcome already tied")

    groups = _class_groups(cvrs)
    # alphabet of single-card changes: (group index, replacement vote), skipping no-ops
    moves = [
        (gi, rv)
        for gi, (gv, _) in enumerate(groups)
        for rv in vocabulary
        if rv != gv
    ]

    tabulations = 0
    for radius in range(1, max_radius + 1):
        for combo in itertools.combinations_with_replacement(range(len(moves)), radius):
            # count changes per group; skip infeasible (more changes than cards
            # in the group) and redundant (same card changed twice) selections
            per_group: dict[int, int] = {}
            ok = True
            for mi in combo:
                gi = moves[mi][0]
                per_group[gi] = per_group.get(gi, 0) + 1
                if per_group[gi] > len(groups[gi][1]):
                    ok = False
                    break
            if not ok:
                continue
            tabulations += 1
            if tabulations > work_budget:
                raise WorkBudgetExceeded(
                    f"exceeded work budget of {work_budget} tabulations at radius {radius}"
                )
            modified = list(base_votes)
            taken: dict[int, int] = {}
            witness = []
            for mi in combo:
                gi, rv = moves[mi]
                slot = taken.get(gi, 0)
                taken[gi] = slot + 1
                idx = groups[gi][1][slot]
                modified[idx] = rv
                witness.append((idx, rv))
            if not outcome_equal(reported, tabulate(modified, contest)):
                return MarginReport(
                    V=radius,
                    N=n_cards,
                    kind="exact",
                    witness=tuple(sorted(witness)),
                    source=f"brute force ({tabulations} tabulations)",
                )
    return MarginReport(
        V=max_radius + 1,
        N=n_cards,
        kind="lower_bound",
        source=f"brute force exhausted radius {max_radius} ({tabulations} tabulations)",
    )


def irv_last_round_margin(rounds: IrvRounds) -> MarginReport:
    """Last-round diagnostic margin of an IRV count.

    Requires the tabulation to have run down to a final two-candidate
    round.  The result is an upper bound on the true CVR margin and must
    never be used as the margin bound of an audit.
    """
    if rounds.short_circuited:
        raise MarginError(
            "tabulation stopped on a majority before two candidates remained; "
            "re-run without the short-circuit to get a final two-candidate round"
        )
    final = rounds.final_round()
    if len(final) != 2:
        raise MarginError(f"final round has {len(final)} candidates, need exactly 2")
    a, b = sorted(final.values(), reverse=True)
    n = sum(rounds.tallies[0].values()) + rounds.exhausted[0]
    return MarginReport(V=math.ceil((a - b) / 2), N=n, kind="diagnostic_upper", source="IRV last round")


def load_external_margin(path: Union[str, Path], n_cards: int) -> MarginReport:
    """Ingest an externally computed margin lower bound.

    File schema: JSON ``{"V_minus": int, "source": str}``.  V_minus = 0 is
    accepted but flagged degenerate: a mismatch audit can never certify
    with a zero bound.
    """
    with open(path) as f:
        obj = json.load(f)
    v_minus = int(obj["V_minus"])
    if not (0 <= v_minus <= n_cards):
        raise MarginError(f"V_minus={v_minus} outside [0, {n_cards}]")
    return MarginReport(
        V=v_minus,
        N=n_cards,
        kind="lower_bound",
        source=str(obj.get("source", "external")),
        degenerate=(v_minus == 0),
    )
