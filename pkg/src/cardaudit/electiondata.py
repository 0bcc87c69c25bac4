"""Domain types for contests, votes, CVRs and ballot cards, plus file ingestion.

Votes are immutable after construction; every container here is safe to share
across concurrent readers.  File formats:

* contest definition: a JSON object ``{"id", "kind", "candidates", "seats"}``
* vote records: newline-delimited JSON, one record per line,
  ``{"id": str, "vote": null | {"plurality": str} | {"ranking": [str, ...]}}``
* a CSV adapter (``id,choice`` with an empty choice meaning a null vote) is
  provided for plurality-only contests.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union


class ElectionDataError(ValueError):
    """Raised for malformed or inconsistent election data files."""


CONTEST_KINDS = ("plurality", "irv", "stv")


@dataclass(frozen=True)
class Contest:
    """A single contest: candidates, social choice rule, number of seats."""

    id: str
    kind: str
    candidates: tuple[str, ...]
    seats: int = 1

    def __post_init__(self):
        if self.kind not in CONTEST_KINDS:
            raise ElectionDataError(f"unknown contest kind {self.kind!r}")
        if len(set(self.candidates)) != len(self.candidates):
            raise ElectionDataError("candidate ids must be unique")
        if not (0 < self.seats < len(self.candidates)):
            raise ElectionDataError("seats must be positive and < number of candidates")
        if self.kind in ("plurality", "irv") and self.seats != 1:
            raise ElectionDataError(f"{self.kind} contests elect exactly one seat")
        object.__setattr__(self, "candidates", tuple(self.candidates))

    @classmethod
    def from_json(cls, obj: dict) -> "Contest":
        return cls(
            id=obj["id"],
            kind=obj["kind"],
            candidates=tuple(obj["candidates"]),
            seats=int(obj.get("seats", 1)),
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Contest":
        with open(path) as f:
            return cls.from_json(json.load(f))

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "candidates": list(self.candidates),
            "seats": self.seats,
        }


@dataclass(frozen=True)
class Vote:
    """One interpreted mark: a null vote, a plurality choice, or a ranking.

    Exactly one representation is active: ``candidate`` for plurality votes,
    ``ranking`` for (possibly empty) preference lists, neither for null votes.
    Equality is structural; an empty ranking is treated like a null vote by
    tabulation but is a distinct value.
    """

    candidate: Optional[str] = None
    ranking: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.candidate is not None and self.ranking is not None:
            raise ElectionDataError("a vote is either a plurality choice or a ranking, not both")
        if self.ranking is not None:
            object.__setattr__(self, "ranking", tuple(self.ranking))

    @classmethod
    def null(cls) -> "Vote":
        return cls()

    @classmethod
    def plurality(cls, candidate: str) -> "Vote":
        return cls(candidate=candidate)

    @classmethod
    def of_ranking(cls, ranking: Sequence[str]) -> "Vote":
        return cls(ranking=tuple(ranking))

    @property
    def is_null(self) -> bool:
        return self.candidate is None and self.ranking is None

    def validate(self, contest: Contest) -> "Vote":
        """Check candidates and ranking shape against a contest; returns self."""
        if self.candidate is not None:
            if self.candidate not in contest.candidates:
                raise ElectionDataError(f"candidate {self.candidate!r} not in contest {contest.id!r}")
        if self.ranking is not None:
            if len(set(self.ranking)) != len(self.ranking):
                raise ElectionDataError(f"ranking repeats a candidate: {self.ranking}")
            if len(self.ranking) > len(contest.candidates):
                raise ElectionDataError("ranking longer than the candidate list")
            for c in self.ranking:
                if c not in contest.candidates:
                    raise ElectionDataError(f"candidate {c!r} not in contest {contest.id!r}")
        return self

    def to_json(self) -> Optional[dict]:
        if self.is_null:
            return None
        if self.candidate is not None:
            return {"plurality": self.candidate}
        return {"ranking": list(self.ranking)}

    @classmethod
    def from_json(cls, obj) -> "Vote":
        if obj is None:
            return cls.null()
        if not isinstance(obj, dict):
            raise ElectionDataError(f"vote must be null or an object, got {obj!r}")
        if "plurality" in obj:
            return cls.plurality(obj["plurality"])
        if "ranking" in obj:
            return cls.of_ranking(obj["ranking"])
        raise ElectionDataError(f"vote object needs a 'plurality' or 'ranking' key: {obj!r}")


@dataclass(frozen=True)
class VoteRecords:
    """An ordered list of (card_id, vote) with unique card ids.

    The record order defines the canonical card index.  Used for both CVR
    sets and ballot (true-vote) sets; the two sides of an audit are paired
    with :func:`link`.
    """

    records: tuple[tuple[str, Vote], ...]
    _by_id: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        by_id = {}
        for card_id, vote in self.records:
            if card_id in by_id:
                raise ElectionDataError(f"duplicate card id {card_id!r}")
            by_id[card_id] = vote
        object.__setattr__(self, "_by_id", by_id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def n(self) -> int:
        return len(self.records)

    def vote(self, card_id: str) -> Vote:
        return self._by_id[card_id]

    def votes(self) -> list[Vote]:
        return [v for _, v in self.records]

    def card_ids(self) -> list[str]:
        return [cid for cid, _ in self.records]


CvrSet = VoteRecords
BallotSet = VoteRecords


@dataclass(frozen=True)
class LinkedInstance:
    """CVRs paired to ballot cards by card id, in CVR order."""

    contest: Optional[Contest]
    pairs: tuple[tuple[str, Vote, Vote], ...]  # (card_id, ballot vote, cvr vote)

    @property
    def n(self) -> int:
        return len(self.pairs)

    def mismatch_count(self) -> int:
        return sum(1 for _, b, c in self.pairs if b != c)

    def cvr_votes(self) -> list[Vote]:
        return [c for _, _, c in self.pairs]

    def ballot_votes(self) -> list[Vote]:
        return [b for _, b, _ in self.pairs]

    def cvrs(self) -> VoteRecords:
        return VoteRecords(tuple((cid, c) for cid, _, c in self.pairs))

    def ballots(self) -> VoteRecords:
        return VoteRecords(tuple((cid, b) for cid, b, _ in self.pairs))


def parse_vote_records(lines: Iterable[str], contest: Contest) -> VoteRecords:
    """Parse newline-delimited JSON vote records, validating against a contest."""
    records = []
    seen = set()
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ElectionDataError(f"line {lineno}: malformed JSON ({e})") from e
        if not isinstance(obj, dict) or "id" not in obj or "vote" not in obj:
            raise ElectionDataError(f"line {lineno}: record needs 'id' and 'vote' fields")
        card_id = obj["id"]
        if not isinstance(card_id, str):
            raise ElectionDataError(f"line {lineno}: card id must be a string")
        if card_id in seen:
            raise ElectionDataError(f"line {lineno}: duplicate card id {card_id!r}")
        seen.add(card_id)
        try:
            vote = Vote.from_json(obj["vote"]).validate(contest)
        except ElectionDataError as e:
            raise ElectionDataError(f"line {lineno}: {e}") from e
        records.append((card_id, vote))
    return VoteRecords(tuple(records))


def parse_cvrs(path: Union[str, Path], contest: Contest) -> CvrSet:
    """Read a CVR file (NDJSON, one record per line) into a CvrSet."""
    with open(path) as f:
        return parse_vote_records(f, contest)


parse_ballots = parse_cvrs


def serialize_vote_records(records: VoteRecords) -> str:
    """NDJSON serialization; round-trips with :func:`parse_vote_records`."""
    out = io.StringIO()
    for card_id, vote in records:
        out.write(json.dumps({"id": card_id, "vote": vote.to_json()}) + "\n")
    return out.getvalue()


def write_vote_records(records: VoteRecords, path: Union[str, Path]) -> None:
    Path(path).write_text(serialize_vote_records(records))


def parse_cvrs_csv(path: Union[str, Path], contest: Contest) -> CvrSet:
    """CSV adapter for plurality contests: columns ``id,choice``, blank = null."""
    if contest.kind != "plurality":
        raise ElectionDataError("CSV vote records are only supported for plurality contests")
    records = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or "id" not in reader.fieldnames or "choice" not in reader.fieldnames:
            raise ElectionDataError("CSV needs 'id' and 'choice' columns")
        for row in reader:
            choice = (row["choice"] or "").strip()
            vote = Vote.null() if not choice else Vote.plurality(choice).validate(contest)
            records.append((row["id"], vote))
    return VoteRecords(tuple(records))


def link(cvrs: CvrSet, ballots: BallotSet, contest: Optional[Contest] = None) -> LinkedInstance:
    """Pair each CVR with its ballot card by card id, preserving CVR order.

    The pairing is invariant to the ballot file's ordering; any card id
    present on one side but not the other is an error.
    """
    ballot_ids = set(ballots.card_ids())
    cvr_ids = set(cvrs.card_ids())
    missing = cvr_ids - ballot_ids
    extra = ballot_ids - cvr_ids
    if missing:
        raise ElectionDataError(f"ballot missing for card id(s): {sorted(missing)[:5]}")
    if extra:
        raise ElectionDataError(f"no CVR for ballot card id(s): {sorted(extra)[:5]}")
    pairs = tuple((cid, ballots.vote(cid), c) for cid, c in cvrs)
    return LinkedInstance(contest=contest, pairs=pairs)
