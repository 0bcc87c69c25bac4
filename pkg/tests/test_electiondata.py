import io

import pytest

from cardaudit.electiondata import (
    Contest,
    ElectionDataError,
    Vote,
    VoteRecords,
    link,
    parse_cvrs_csv,
    parse_vote_records,
    serialize_vote_records,
)


class TestContest:
    def test_rejects_duplicate_candidates(self):
        with pytest.raises(ElectionDataError, match="unique"):
            Contest(id="x", kind="plurality", candidates=("A", "A"))

    def test_rejects_unknown_kind(self):
        with pytest.raises(ElectionDataError, match="kind"):
            Contest(id="x", kind="borda", candidates=("A", "B"))

    def test_rejects_multiseat_irv(self):
        with pytest.raises(ElectionDataError):
            Contest(id="x", kind="irv", candidates=("A", "B", "C"), seats=2)

    def test_stv_allows_multiple_seats(self):
        c = Contest(id="x", kind="stv", candidates=("A", "B", "C"), seats=2)
        assert c.seats == 2

    def test_seats_bounded_by_candidates(self):
        with pytest.raises(ElectionDataError, match="seats"):
            Contest(id="x", kind="stv", candidates=("A", "B"), seats=2)

    def test_json_round_trip(self, irv_contest):
        assert Contest.from_json(irv_contest.to_json()) == irv_contest


class TestVote:
    def test_null_is_null(self):
        assert Vote.null().is_null
        assert not Vote.plurality("A").is_null

    def test_not_both_representations(self):
        with pytest.raises(ElectionDataError):
            Vote(candidate="A", ranking=("B",))

    def test_empty_ranking_is_distinct_from_null(self):
        assert Vote.of_ranking(()) != Vote.null()
        assert not Vote.of_ranking(()).is_null

    def test_validate_rejects_unknown_candidate(self, irv_contest):
        with pytest.raises(ElectionDataError, match="Zed"):
            Vote.of_ranking(("Zed",)).validate(irv_contest)

    def test_validate_rejects_repeats(self, irv_contest):
        with pytest.raises(ElectionDataError, match="repeats"):
            Vote.of_ranking(("Ali", "Ali")).validate(irv_contest)

    @pytest.mark.parametrize(
        "vote",
        [Vote.null(), Vote.plurality("A"), Vote.of_ranking(("B", "A")), Vote.of_ranking(())],
    )
    def test_json_round_trip(self, vote):
        assert Vote.from_json(vote.to_json()) == vote

    def test_from_json_rejects_garbage(self):
        with pytest.raises(ElectionDataError):
            Vote.from_json(42)
        with pytest.raises(ElectionDataError):
            Vote.from_json({"approval": ["A"]})


class TestVoteRecords:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(ElectionDataError, match="duplicate"):
            VoteRecords((("c1", Vote.null()), ("c1", Vote.null())))

    def test_order_is_canonical(self):
        recs = VoteRecords((("b", Vote.plurality("A")), ("a", Vote.null())))
        assert recs.card_ids() == ["b", "a"]
        assert recs.vote("b") == Vote.plurality("A")

    def test_ndjson_round_trip(self, irv_cvrs, irv_contest):
        text = serialize_vote_records(irv_cvrs)
        parsed = parse_vote_records(io.StringIO(text), irv_contest)
        assert parsed == irv_cvrs

    def test_parse_reports_line_numbers(self, irv_contest):
        lines = ['{"id": "c1", "vote": null}', "not json"]
        with pytest.raises(ElectionDataError, match="line 2"):
            parse_vote_records(lines, irv_contest)

    def test_parse_rejects_missing_fields(self, irv_contest):
        with pytest.raises(ElectionDataError, match="line 1"):
            parse_vote_records(['{"vote": null}'], irv_contest)

    def test_csv_adapter(self, tmp_path, plurality_contest):
        p = tmp_path / "cvrs.csv"
        p.write_text("id,choice\nc1,Amy\nc2,\nc3,Ben\n")
        recs = parse_cvrs_csv(p, plurality_contest)
        assert recs.votes() == [Vote.plurality("Amy"), Vote.null(), Vote.plurality("Ben")]

    def test_csv_requires_plurality(self, tmp_path, irv_contest):
        p = tmp_path / "cvrs.csv"
        p.write_text("id,choice\nc1,Ali\n")
        with pytest.raises(ElectionDataError):
            parse_cvrs_csv(p, irv_contest)


class TestLink:
    def test_pairs_follow_cvr_order(self, plurality_contest):
        cvrs = VoteRecords((("a", Vote.plurality("Amy")), ("b", Vote.plurality("Ben"))))
        ballots = VoteRecords((("b", Vote.plurality("Amy")), ("a", Vote.plurality("Amy"))))
        inst = link(cvrs, ballots, plurality_contest)
        assert [cid for cid, _, _ in inst.pairs] == ["a", "b"]
        assert inst.mismatch_count() == 1

    def test_missing_ballot_named_in_error(self):
        cvrs = VoteRecords((("a", Vote.null()), ("b", Vote.null())))
        ballots = VoteRecords((("a", Vote.null()),))
        with pytest.raises(ElectionDataError, match="'b'"):
            link(cvrs, ballots)

    def test_extra_ballot_rejected(self):
        cvrs = VoteRecords((("a", Vote.null()),))
        ballots = VoteRecords((("a", Vote.null()), ("zz", Vote.null())))
        with pytest.raises(ElectionDataError, match="zz"):
            link(cvrs, ballots)
