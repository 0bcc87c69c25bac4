import pytest

from cardaudit.electiondata import Contest, Vote
from cardaudit.socialchoice import (
    Outcome,
    TabulationError,
    outcome_equal,
    tabulate,
    tabulate_irv,
    tabulate_plurality,
)


class TestPlurality:
    def test_simple_count_ignores_nulls(self, plurality_contest):
        votes = [Vote.plurality("Amy")] * 3 + [Vote.plurality("Ben")] * 2 + [Vote.null()] * 4
        tallies, outcome = tabulate_plurality(votes, plurality_contest)
        assert tallies == {"Amy": 3, "Ben": 2}
        assert outcome == Outcome(winners=frozenset({"Amy"}))

    def test_tie_is_flagged(self, plurality_contest):
        votes = [Vote.plurality("Amy"), Vote.plurality("Ben")]
        _, outcome = tabulate_plurality(votes, plurality_contest)
        assert outcome.tie_flag
        assert outcome.winners == {"Amy", "Ben"}

    def test_zero_votes_ties_everyone(self, plurality_contest):
        _, outcome = tabulate_plurality([Vote.null()], plurality_contest)
        assert outcome.tie_flag

    def test_wrong_kind_rejected(self, irv_contest):
        with pytest.raises(TabulationError):
            tabulate_plurality([], irv_contest)


class TestIrv:
    def test_four_candidate_run(self, irv_votes, irv_contest):
        rounds, outcome = tabulate_irv(irv_votes, irv_contest)
        assert rounds.tallies[0] == {"Ali": 26, "Bob": 10, "Cal": 9, "Dee": 15}
        assert rounds.tallies[1] == {"Ali": 26, "Bob": 10, "Dee": 24}
        assert rounds.tallies[2] == {"Ali": 26, "Dee": 30}
        assert rounds.eliminated == ("Cal", "Bob")
        assert rounds.exhausted == (0, 0, 4)
        assert outcome == Outcome(winners=frozenset({"Dee"}))

    def test_majority_short_circuit(self, irv_contest):
        votes = [Vote.of_ranking(("Ali",))] * 7 + [Vote.of_ranking(("Bob",))] * 2 + [
            Vote.of_ranking(("Cal",))
        ]
        rounds, outcome = tabulate_irv(votes, irv_contest)
        assert rounds.n_rounds == 1
        assert rounds.short_circuited
        assert outcome.winners == {"Ali"}

    def test_exhausted_cards_leave_the_count(self, irv_contest):
        votes = [Vote.of_ranking(("Cal",))] * 2 + [Vote.of_ranking(("Ali",))] * 3 + [
            Vote.of_ranking(("Bob",))
        ] * 3
        rounds, _ = tabulate_irv(votes, irv_contest)
        # Cal's cards list nobody else, so they exhaust after the elimination
        assert rounds.exhausted[-1] == 2

    def test_elimination_tie_flags_outcome(self, irv_contest):
        votes = (
            [Vote.of_ranking(("Ali",))] * 3
            + [Vote.of_ranking(("Bob", "Ali"))] * 2
            + [Vote.of_ranking(("Cal", "Dee"))] * 2
            + [Vote.of_ranking(("Dee",))] * 3
        )
        rounds, outcome = tabulate_irv(votes, irv_contest)
        assert "Bob" in rounds.elimination_ties and "Cal" in rounds.elimination_ties
        assert rounds.eliminated[0] == "Bob"  # candidate-list order breaks the tie
        assert outcome.tie_flag

    def test_last_two_without_majority_is_a_tie(self):
        contest = Contest(id="x", kind="irv", candidates=("A", "B"))
        votes = [Vote.of_ranking(("A",))] * 2 + [Vote.of_ranking(("B",))] * 2
        _, outcome = tabulate_irv(votes, contest)
        assert outcome.tie_flag

    def test_order_invariance(self, irv_votes, irv_contest):
        _, fwd = tabulate_irv(irv_votes, irv_contest)
        _, rev = tabulate_irv(list(reversed(irv_votes)), irv_contest)
        assert fwd == rev


class TestOutcomeEqual:
    def test_equal_winner_sets(self):
        assert outcome_equal(Outcome(frozenset({"A"})), Outcome(frozenset({"A"})))
        assert not outcome_equal(Outcome(frozenset({"A"})), Outcome(frozenset({"B"})))

    def test_flagged_outcomes_never_equal(self):
        tied = Outcome(frozenset({"A"}), tie_flag=True)
        assert not outcome_equal(tied, tied)
        assert not outcome_equal(tied, Outcome(frozenset({"A"})))

    def test_dispatch(self, irv_votes, irv_contest, plurality_contest):
        assert tabulate(irv_votes, irv_contest).winners == {"Dee"}
        assert tabulate([Vote.plurality("Amy")], plurality_contest).winners == {"Amy"}
        stv = Contest(id="s", kind="stv", candidates=("A", "B", "C"), seats=2)
        with pytest.raises(TabulationError):
            tabulate([], stv)
