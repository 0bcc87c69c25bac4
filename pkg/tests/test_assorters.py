from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cardaudit.assorters import (
    Assorter,
    AssorterError,
    assorter_margin,
    irv_assertion_assorters,
    mean_gt_half,
    mismatch_upper,
    mismatch_value,
    neb_assorter,
    nen_assorter,
    overstatement_upper,
    overstatement_value,
    plurality_assorter,
)
from cardaudit.electiondata import Vote

AMY, BEN, NULL = Vote.plurality("Amy"), Vote.plurality("Ben"), Vote.null()


class TestPluralityAssorter:
    def test_values(self):
        a = plurality_assorter("Amy", "Ben")
        assert a(AMY) == 1
        assert a(BEN) == 0
        assert a(NULL) == Fraction(1, 2)
        assert a(Vote.plurality("Cleo")) == Fraction(1, 2)

    def test_winner_loser_must_differ(self):
        with pytest.raises(AssorterError):
            plurality_assorter("Amy", "Amy")

    def test_range_check(self):
        bad = Assorter(upper=Fraction(1), value=lambda v: Fraction(3))
        with pytest.raises(AssorterError, match="outside"):
            bad(NULL)


class TestOverstatement:
    """The seven (b, c) cases of the two-candidate overstatement numerator."""

    CASES = [
        (BEN, AMY, Fraction(0), "2-over"),
        (BEN, NULL, Fraction(1, 2), "1-over"),
        (NULL, AMY, Fraction(1, 2), "1-over"),
        (AMY, AMY, Fraction(1), "match"),
        (NULL, BEN, Fraction(3, 2), "1-under"),
        (AMY, NULL, Fraction(3, 2), "1-under"),
        (AMY, BEN, Fraction(2), "2-under"),
    ]

    @pytest.mark.parametrize("b,c,numerator,category", CASES)
    def test_numerator_cases(self, b, c, numerator, category):
        a = plurality_assorter("Amy", "Ben")
        nu = Fraction(1, 10)
        score = overstatement_value(b, c, a, nu)
        assert score.value == numerator / (2 - nu)
        assert score.category == category

    def test_upper_bound(self):
        a = plurality_assorter("Amy", "Ben")
        assert overstatement_upper(a, Fraction(1, 10)) == Fraction(2, 1) / (2 - Fraction(1, 10))

    def test_requires_reportedly_true_assertion(self):
        a = plurality_assorter("Amy", "Ben")
        with pytest.raises(AssorterError, match="not reportedly true"):
            overstatement_value(AMY, AMY, a, Fraction(0))
        with pytest.raises(AssorterError):
            overstatement_value(AMY, AMY, a, Fraction(-1, 2))

    @given(
        counts=st.lists(
            st.sampled_from([(AMY, AMY), (BEN, BEN), (NULL, NULL), (BEN, AMY),
                             (AMY, BEN), (NULL, AMY), (AMY, NULL), (BEN, NULL), (NULL, BEN)]),
            min_size=2,
            max_size=40,
        )
    )
    @settings(max_examples=200, deadline=None)
    def test_mean_equivalence(self, counts):
        """Overstatement-assorter mean > 1/2 iff the plain assorter mean
        over the true votes does, whenever the CVRs report the assertion true."""
        a = plurality_assorter("Amy", "Ben")
        nu = assorter_margin([a(c) for _, c in counts])
        if nu <= 0:
            return  # assertion not reportedly true: overstatement undefined
        b_values = [a(b) for b, _ in counts]
        o_values = [overstatement_value(b, c, a, nu).value for b, c in counts]
        assert mean_gt_half(o_values) == mean_gt_half(b_values)


class TestMismatch:
    def test_two_valued(self):
        v = Fraction(1, 20)
        assert mismatch_value(AMY, AMY, v) == mismatch_upper(v) == Fraction(10, 19)
        assert mismatch_value(AMY, BEN, v) == 0
        assert mismatch_value(NULL, NULL, v) == mismatch_upper(v)

    def test_structural_equality_is_strict(self):
        v = Fraction(1, 20)
        assert mismatch_value(Vote.of_ranking(()), NULL, v) == 0

    def test_v_prime_range(self):
        with pytest.raises(AssorterError):
            mismatch_value(AMY, AMY, Fraction(1))

    @given(
        n=st.integers(min_value=2, max_value=60),
        mismatches=st.integers(min_value=0, max_value=60),
        v_num=st.integers(min_value=1, max_value=59),
    )
    @settings(max_examples=200, deadline=None)
    def test_mean_equivalence(self, n, mismatches, v_num):
        """Mismatch-assorter mean > 1/2 iff M < V', including M = V' exactly."""
        m = min(mismatches, n)
        v_prime = Fraction(min(v_num, n - 1), n)
        values = [mismatch_value(AMY, BEN, v_prime)] * m + [
            mismatch_value(AMY, AMY, v_prime)
        ] * (n - m)
        assert mean_gt_half(values) == (m < v_prime * n)

    def test_boundary_mean_is_exactly_half(self):
        # M = V': the mean is exactly 1/2, not greater
        n, V = 40, 4
        v = Fraction(V, n)
        values = [Fraction(0)] * V + [mismatch_upper(v)] * (n - V)
        assert sum(values) * 2 == n
        assert not mean_gt_half(values)


class TestIrvAssertionAssorters:
    def test_neb_scoring(self):
        a = neb_assorter("Ali", "Cal")
        assert a(Vote.of_ranking(("Ali", "Bob"))) == 1
        assert a(Vote.of_ranking(("Dee", "Cal", "Ali"))) == 0
        assert a(Vote.of_ranking(("Dee", "Ali", "Cal"))) == Fraction(1, 2)
        assert a(Vote.null()) == Fraction(1, 2)

    def test_nen_scoring(self):
        a = nen_assorter("Dee", "Ali", frozenset({"Ali", "Dee"}))
        # Bob and Cal eliminated: first continuing preference decides
        assert a(Vote.of_ranking(("Bob", "Cal", "Dee"))) == 1
        assert a(Vote.of_ranking(("Bob", "Ali"))) == 0
        assert a(Vote.of_ranking(("Bob", "Cal"))) == Fraction(1, 2)

    def test_build_from_dicts(self, irv_contest, irv_votes):
        aset = irv_assertion_assorters(
            [
                {"type": "NEB", "winner": "Dee", "loser": "Bob"},
                {"type": "NEN", "winner": "Dee", "loser": "Ali", "continuing": ["Ali", "Dee"]},
            ],
            irv_contest,
        )
        assert len(aset) == 2
        assert aset.assertions[0].describe() == "NEB(Dee, Bob)"

    def test_build_from_file(self, tmp_path, irv_contest):
        p = tmp_path / "assertions.json"
        p.write_text('[{"type": "NEB", "winner": "Dee", "loser": "Bob"}]')
        assert len(irv_assertion_assorters(p, irv_contest)) == 1

    def test_margin_validated_against_cvrs(self, irv_contest, irv_votes):
        # Ali-beats-Dee is false on the example CVRs in the last round
        with pytest.raises(AssorterError, match="margin"):
            irv_assertion_assorters(
                [{"type": "NEN", "winner": "Ali", "loser": "Dee", "continuing": ["Ali", "Dee"]}],
                irv_contest,
                irv_votes,
            )

    def test_bad_assertions_rejected(self, irv_contest):
        with pytest.raises(AssorterError, match="winner/loser"):
            irv_assertion_assorters([{"type": "NEB", "winner": "Ali", "loser": "Ali"}], irv_contest)
        with pytest.raises(AssorterError, match="continuing"):
            irv_assertion_assorters([{"type": "NEN", "winner": "Ali", "loser": "Bob"}], irv_contest)
        with pytest.raises(AssorterError, match="unknown type"):
            irv_assertion_assorters([{"type": "WO", "winner": "Ali", "loser": "Bob"}], irv_contest)


class TestMeanHelpers:
    def test_assorter_margin(self):
        assert assorter_margin([Fraction(1), Fraction(0)]) == 0
        assert assorter_margin([Fraction(1)] * 3 + [Fraction(0)]) == Fraction(1, 2)

    def test_empty_rejected(self):
        with pytest.raises(AssorterError):
            mean_gt_half([])
        with pytest.raises(AssorterError):
            assorter_margin([])
