"""Construct (ballots, CVRs) pairs with a target margin proportion and
mismatch rate under each supported error model.

Plurality models (two-candidate):

* ``two_under``: every error turns a loser-CVR's card into a winner vote.
* ``two_over``: every error turns a winner-CVR's card into a loser vote.
* ``random_100_0``: the card's vote is drawn uniformly among votes other
  than the CVR (null included); every CVR holds a valid vote.
* ``random_20_80``: same, but 80% of the CVRs hold null votes.

IRV models (``under`` / ``over`` / ``truncate`` / ``random``) perturb ballots
relative to a base CVR set, targeting the minimum-margin assertion for the
understatement/overstatement models.  The STV generator produces an opaque
population consumed only by the mismatch audit.

Generation is deterministic per seed; the reported margin always comes from
the CVRs, so random models may flip the true outcome - that is recorded in
the scenario metadata, not prevented.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .assorters import AssertionSet, assorter_margin
from .electiondata import Contest, CvrSet, LinkedInstance, Vote, VoteRecords, link
from .margins import MarginReport
from .socialchoice import outcome_equal, tabulate

PLURALITY_MODELS = ("two_under", "two_over", "random_100_0", "random_20_80")
IRV_MODELS = ("under", "over", "truncate", "random")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    """One grid point: contest kind, population size, margin, mismatch rate, model."""

    kind: str  # "plurality" | "irv" | "stv"
    N: int
    v_target: float
    m_target: float
    model: str
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.m_target < 1):
            raise ScenarioError(f"m_target={self.m_target} outside [0, 1)")
        if not (0 < self.v_target < 1):
            raise ScenarioError(f"v_target={self.v_target} outside (0, 1)")

    @property
    def V(self) -> int:
        return _round_half_even(self.v_target * self.N)

    @property
    def M(self) -> int:
        return _round_half_even(self.m_target * self.N)

    def point_id(self) -> str:
        return f"{self.kind}-N{self.N}-v{self.v_target}-m{self.m_target}-{self.model}"


def _round_half_even(x: float) -> int:
    # the paper's grid makes these integral; rounding only matters for
    # user-supplied grids
    return int(round(x))


@dataclass(frozen=True)
class GeneratedScenario:
    spec: ScenarioSpec
    instance: LinkedInstance
    margin: MarginReport
    true_outcome_differs: Optional[bool] = None


WINNER, LOSER = "Amy", "Ben"


def _plurality_contest() -> Contest:
    return Contest(id="synthetic-plurality", kind="plurality", candidates=(WINNER, LOSER))


def gen_plurality(spec: ScenarioSpec) -> GeneratedScenario:
    """Two-candidate plurality instance hitting V and M exactly.

    The CVR composition is minimal-null (nulls only to fix parity) except
    for ``random_20_80``, where 80% of CVRs are null; ballots start as
    copies of the CVRs and exactly M of them are altered per the model.
    """
    if spec.kind != "plurality":
        raise ScenarioError("gen_plurality needs a plurality scenario")
    if spec.model not in PLURALITY_MODELS:
        raise ScenarioError(f"unknown plurality error model {spec.model!r}")
    contest = _plurality_contest()
    N, V, M = spec.N, spec.V, spec.M
    if V < 1:
        raise ScenarioError("target margin rounds to zero cards")

    if spec.model == "random_20_80":
        n_null = _round_half_even(0.8 * N)
        voting = N - n_null
        w = voting // 2 + V
        l = voting - w
    else:
        rem = N - 2 * V
        extra_null = rem % 2
        n_null = extra_null
        w = (N - n_null) // 2 + V
        l = N - n_null - w
    if l < 0:
        raise ScenarioError(f"margin infeasible: loser count {l} < 0 (binding constraint: v too large)")
    assert w - l == 2 * V and w + l + n_null == N

    cvr_votes = (
        [Vote.plurality(WINNER)] * w + [Vote.plurality(LOSER)] * l + [Vote.null()] * n_null
    )
    rng = np.random.default_rng(spec.seed)
    ballots = list(cvr_votes)

    if spec.model == "two_under":
        if M > l:
            raise ScenarioError(f"two_under needs M={M} <= loser-CVR count {l}")
        for i in rng.choice(np.arange(w, w + l), size=M, replace=False):
            ballots[i] = Vote.plurality(WINNER)
    elif spec.model == "two_over":
        if M > w:
            raise ScenarioError(f"two_over needs M={M} <= winner-CVR count {w}")
        for i in rng.choice(w, size=M, replace=False):
            ballots[i] = Vote.plurality(LOSER)
    else:
        alternatives = {
            Vote.plurality(WINNER): [Vote.plurality(LOSER), Vote.null()],
            Vote.plurality(LOSER): [Vote.plurality(WINNER), Vote.null()],
            Vote.null(): [Vote.plurality(WINNER), Vote.plurality(LOSER)],
        }
        for i in rng.choice(N, size=M, replace=False):
            alts = alternatives[cvr_votes[i]]
            ballots[i] = alts[rng.integers(len(alts))]

    cvrs = VoteRecords(tuple((f"c{i}", v) for i, v in enumerate(cvr_votes)))
    ballot_set = VoteRecords(tuple((f"c{i}", v) for i, v in enumerate(ballots)))
    instance = link(cvrs, ballot_set, contest)
    assert instance.mismatch_count() == M
    margin = MarginReport(V=V, N=N, kind="exact", source=f"constructed ({spec.model})")
    reported = tabulate(cvr_votes, contest)
    true = tabulate(ballots, contest)
    return GeneratedScenario(
        spec=spec,
        instance=instance,
        margin=margin,
        true_outcome_differs=not outcome_equal(reported, true),
    )


def _vote_with_assorter_value(assertion, target: Fraction, contest: Contest) -> Optional[Vote]:
    """A short ranking attaining a target assorter value, or None."""
    candidates = [Vote.of_ranking([assertion.loser]), Vote.of_ranking([assertion.winner]), Vote.null()]
    for c in contest.candidates:
        candidates.append(Vote.of_ranking([c]))
        for c2 in contest.candidates:
            if c2 != c:
                candidates.append(Vote.of_ranking([c, c2]))
    for vote in candidates:
        if assertion.assorter(vote) == target:
            return vote
    return None


def gen_irv(
    base_cvrs: CvrSet,
    contest: Contest,
    assertions: AssertionSet,
    m_target: float,
    model: str,
    seed: int,
) -> LinkedInstance:
    """Perturb ballots of an IRV instance with exactly round(m*N) mismatches.

    ``under``/``over`` move the minimum-margin assertion's assorter value by
    a full unit where a card allows it (2-vote), else by a half unit
    (1-vote), scanning cards in canonical order and consuming the 2-vote
    eligible ones first.  ``truncate`` cuts each chosen ranking at a random
    position (a non-vote gets one random candidate ranked first).
    ``random`` redraws the ballot uniformly by length, content and order,
    ensuring it differs from the CVR.
    """
    if model not in IRV_MODELS:
        raise ScenarioError(f"unknown IRV error model {model!r}")
    n = base_cvrs.n
    M = _round_half_even(m_target * n)
    rng = np.random.default_rng(seed)
    cvr_votes = base_cvrs.votes()
    ballots = list(cvr_votes)

    if model in ("under", "over"):
        margins = [
            (assorter_margin([a.assorter(v) for v in cvr_votes]), i) for i, a in enumerate(assertions.assertions)
        ]
        _, target_i = min(margins)
        assertion = assertions.assertions[target_i]
        a = assertion.assorter
        # "over" lowers the assorter value on the card, "under" raises it
        want_from, two_vote_to = (
            (Fraction(1), Fraction(0)) if model == "over" else (Fraction(0), Fraction(1))
        )
        replacement_2 = _vote_with_assorter_value(assertion, two_vote_to, contest)
        if replacement_2 is None:
            raise ScenarioError(f"no vote attains assorter value {two_vote_to} for {assertion.describe()}")
        two_eligible = [i for i, v in enumerate(cvr_votes) if a(v) == want_from]
        one_eligible = [
            i for i, v in enumerate(cvr_votes) if a(v) == Fraction(1, 2)
        ]
        chosen = two_eligible[:M]
        for i in chosen:
            ballots[i] = replacement_2
        remaining = M - len(chosen)
        if remaining > 0:
            fallback = [i for i in one_eligible if i not in set(chosen)][:remaining]
            if len(fallback) < remaining:
                raise ScenarioError(
                    f"only {len(chosen) + len(fallback)} cards eligible for {model} errors, need {M}"
                )
            to = Fraction(0) if model == "over" else Fraction(1)
            repl = _vote_with_assorter_value(assertion, to, contest)
            for i in fallback:
                ballots[i] = repl
    elif model == "truncate":
        for i in rng.choice(n, size=M, replace=False):
            v = cvr_votes[i]
            ranking = (v.candidate,) if v.candidate else (v.ranking or ())
            if not ranking:
                ballots[i] = Vote.of_ranking([contest.candidates[rng.integers(len(contest.candidates))]])
            else:
                cut = int(rng.integers(0, len(ranking)))
                ballots[i] = Vote.of_ranking(ranking[:cut])
    else:  # random
        lengths = [len(v.ranking or ((v.candidate,) if v.candidate else ())) for v in cvr_votes]
        for i in rng.choice(n, size=M, replace=False):
            while True:
                k = lengths[int(rng.integers(n))]
                k = max(k, 1)
                picks = rng.choice(len(contest.candidates), size=k, replace=False)
                vote = Vote.of_ranking([contest.candidates[int(p)] for p in picks])
                if vote != cvr_votes[i]:
                    ballots[i] = vote
                    break

    cvrs = VoteRecords(tuple((f"c{i}", v) for i, v in enumerate(cvr_votes)))
    ballot_set = VoteRecords(tuple((f"c{i}", v) for i, v in enumerate(ballots)))
    instance = link(cvrs, ballot_set, contest)
    if instance.mismatch_count() != M:
        raise ScenarioError(
            f"{model} model produced {instance.mismatch_count()} mismatches, wanted {M}"
        )
    return instance


def gen_stv(N: int, v_minus: float, m_target: float, seed: int = 0) -> GeneratedScenario:
    """Synthetic STV population for a mismatch audit with external bound v-.

    Vote content is opaque (distinct rankings on matched vs. mismatched
    cards); only the mismatch count and the supplied lower bound matter.
    """
    contest = Contest(id="synthetic-stv", kind="stv", candidates=("P", "Q", "R"), seats=2)
    M = _round_half_even(m_target * N)
    V = _round_half_even(v_minus * N)
    rng = np.random.default_rng(seed)
    cvr_votes = [Vote.of_ranking(("P", "Q")) for _ in range(N)]
    ballots = list(cvr_votes)
    for i in rng.choice(N, size=M, replace=False):
        ballots[i] = Vote.of_ranking(("Q", "P"))
    cvrs = VoteRecords(tuple((f"c{i}", v) for i, v in enumerate(cvr_votes)))
    ballot_set = VoteRecords(tuple((f"c{i}", v) for i, v in enumerate(ballots)))
    instance = link(cvrs, ballot_set, contest)
    spec = ScenarioSpec(kind="stv", N=N, v_target=v_minus, m_target=m_target, model="flip", seed=seed)
    margin = MarginReport(V=V, N=N, kind="lower_bound", source="external (synthetic)", degenerate=(V == 0))
    return GeneratedScenario(spec=spec, instance=instance, margin=margin)


def generate(spec: ScenarioSpec) -> GeneratedScenario:
    """Dispatch a scenario spec to its generator."""
    if spec.kind == "plurality":
        return gen_plurality(spec)
    if spec.kind == "stv":
        return gen_stv(spec.N, spec.v_target, spec.m_target, spec.seed)
    raise ScenarioError(f"use gen_irv directly for IRV scenarios (needs base CVRs and assertions)")
