"""HTTP JSON service for conducting a live audit.

An audit board creates a session from CVRs plus a margin bound (or
assertion set), then repeatedly asks for the next card ids to pull,
submits manual vote records (MVRs), and watches the risk status until the
session certifies or a full count is required.

Sessions are file-backed: one directory per session holding
``config.json`` (including the sampling permutation) and ``trail.ndjson``.
Every MVR is appended to the trail before the in-memory state mutates, so
a restarted service resumes sessions exactly, and the trail alone suffices
for third-party replay: re-running the risk engine over the recorded draws
reproduces the final T and decision bit for bit.

MVR entry is strictly in permutation order; a batch of k cards may be
retrieved ahead and entered in any order within the batch, but updates are
applied to the test in permutation order, and gaps are rejected.
"""

from __future__ import annotations

import json
import math
import os
import threading
import uuid
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from . import riskengine
from .assorters import (
    assorter_margin,
    irv_assertion_assorters,
    mismatch_upper,
    overstatement_upper,
    overstatement_value,
    plurality_assorter,
)
from .electiondata import Contest, ElectionDataError, Vote, VoteRecords
from .errormodels import ScenarioSpec, gen_plurality
from .riskengine import AuditSetupError, Cobra, FixedEta, ShrinkTrunc, alpha_trajectory, sample_plan
from .socialchoice import tabulate_plurality


# ---------------------------------------------------------------------------
# Request / response models


class ContestIn(BaseModel):
    id: str
    kind: str
    candidates: list[str]
    seats: int = 1


class CvrIn(BaseModel):
    id: str
    vote: Optional[dict] = None


class EstimatorIn(BaseModel):
    kind: str = "shrink_trunc"
    eta0: Optional[float] = None
    d: float = 100.0
    c: Optional[float] = None
    mirror_guardrail: bool = True
    eta: Optional[float] = None
    p2: float = 1e-5
    p1: float = 0.0
    adapt: bool = True


class CreateAuditIn(BaseModel):
    contest: ContestIn
    cvrs: list[CvrIn]
    method: str = "mismatch"  # "mismatch" | "comparison"
    margin: Optional[dict] = None  # {"V_minus": int} for mismatch audits
    assertions: Optional[list[dict]] = None  # RAIRE-style, for IRV comparison audits
    estimator: Optional[EstimatorIn] = None
    alpha: float = 0.05
    seed: int = 0


class MvrIn(BaseModel):
    card_id: str
    vote: Optional[dict] = None


# ---------------------------------------------------------------------------
# Session


@dataclass
class SessionAssertion:
    label: str
    u: float
    nu: float
    x: list[float] = field(default_factory=list)  # observed values in applied order

    def trajectory(self, n_cards: int, estimator) -> Optional[riskengine.Trajectory]:
        if not self.x:
            return None
        return alpha_trajectory(np.array(self.x), n_cards, self.u, estimator, nu=self.nu)


@dataclass
class Session:
    id: str
    contest: Contest
    cvrs: VoteRecords
    method: str
    alpha: float
    seed: int
    permutation: list[int]
    estimator_cfg: object
    assertions: list[SessionAssertion]
    # assertion evaluators: (vote b, vote c) -> x, one per assertion
    evaluators: list = field(default_factory=list)
    applied: int = 0  # draws applied, in permutation order
    pending: dict = field(default_factory=dict)  # card_id -> Vote, in-batch early entries
    submitted: dict = field(default_factory=dict)  # card_id -> Vote (applied)
    batch_k: int = 1
    status: str = "open"  # open | certified | full_count_required | closed
    mismatches: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def n_cards(self) -> int:
        return self.cvrs.n

    def card_at(self, idx: int) -> str:
        return self.cvrs.records[self.permutation[idx]][0]

    def next_cards(self, k: int) -> list[str]:
        undrawn = [
            self.card_at(i)
            for i in range(self.applied, min(self.applied + k, self.n_cards))
        ]
        return [c for c in undrawn if c not in self.pending]

    def per_assertion_status(self) -> list[dict]:
        out = []
        for sa in self.assertions:
            traj = sa.trajectory(self.n_cards, self.estimator_cfg)
            if traj is None:
                out.append({"label": sa.label, "p_value": 1.0, "p_current": 1.0, "log_t": 0.0})
            else:
                p_run = float(traj.p_running()[-1])
                log_t = float(traj.log_t[-1])
                p_cur = 1.0 if log_t == -math.inf else min(1.0, math.exp(-log_t))
                out.append({
                    "label": sa.label,
                    "p_value": p_run,
                    "p_current": p_cur,
                    # +/-inf (null impossible / certification impossible) is
                    # not valid JSON; the p fields still carry the decision
                    "log_t": log_t if math.isfinite(log_t) else None,
                })
        return out

    def p_values(self) -> tuple[float, float]:
        """(running-min p, instantaneous p), max over assertions."""
        per = self.per_assertion_status()
        return max(a["p_value"] for a in per), max(a["p_current"] for a in per)


def _estimator_from_config(obj: dict):
    kind = obj.get("kind", "shrink_trunc")
    if kind == "shrink_trunc":
        return ShrinkTrunc(
            eta0=obj["eta0"], d=obj.get("d", 100.0), c=obj.get("c"),
            mirror_guardrail=obj.get("mirror_guardrail", True),
        )
    if kind == "fixed":
        return FixedEta(eta=obj["eta"])
    if kind == "cobra":
        return Cobra(p2=obj.get("p2", 1e-5), p1=obj.get("p1", 0.0),
                     adapt=obj.get("adapt", True), d=obj.get("d", 100.0))
    raise AuditSetupError(f"unknown estimator kind {kind!r}")


def _estimator_to_config(est) -> dict:
    if isinstance(est, ShrinkTrunc):
        return {"kind": "shrink_trunc", "eta0": est.eta0, "d": est.d, "c": est.c,
                "mirror_guardrail": est.mirror_guardrail}
    if isinstance(est, FixedEta):
        return {"kind": "fixed", "eta": est.eta}
    if isinstance(est, Cobra):
        return {"kind": "cobra", "p2": est.p2, "p1": est.p1, "adapt": est.adapt, "d": est.d}
    raise AuditSetupError(f"unknown estimator {est!r}")


class SessionStore:
    """Directory-per-session persistence with write-ahead trail."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def _dir(self, session_id: str) -> Path:
        return self.root / session_id

    def create(self, req: CreateAuditIn) -> Session:
        contest = Contest.from_json(req.contest.model_dump())
        records = []
        for c in req.cvrs:
            records.append((c.id, Vote.from_json(c.vote).validate(contest)))
        cvrs = VoteRecords(tuple(records))
        if cvrs.n == 0:
            raise AuditSetupError("empty CVR set")
        if not (0 < req.alpha < 1):
            raise AuditSetupError(f"alpha={req.alpha} outside (0, 1)")
        if req.method not in ("mismatch", "comparison"):
            raise AuditSetupError(f"unknown method {req.method!r}")

        session_id = uuid.uuid4().hex[:12]
        perm = [int(i) for i in sample_plan(req.seed, cvrs.n)]
        est_obj = req.estimator.model_dump() if req.estimator else None
        assertions, evaluators, estimator = _build_assertions(req, contest, cvrs, est_obj)

        config = {
            "id": session_id,
            "contest": contest.to_json(),
            "cvrs": [{"id": cid, "vote": v.to_json()} for cid, v in cvrs],
            "method": req.method,
            "margin": req.margin,
            "assertions": req.assertions,
            "estimator": _estimator_to_config(estimator),
            "alpha": req.alpha,
            "seed": req.seed,
            "permutation": perm,
        }
        d = self._dir(session_id)
        d.mkdir(parents=True)
        (d / "config.json").write_text(json.dumps(config))
        (d / "trail.ndjson").touch()

        session = Session(
            id=session_id, contest=contest, cvrs=cvrs, method=req.method,
            alpha=req.alpha, seed=req.seed, permutation=perm,
            estimator_cfg=estimator, assertions=assertions, evaluators=evaluators,
        )
        with self._lock:
            self._sessions[session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            if session_id in self._sessions:
                return self._sessions[session_id]
        session = self._load(session_id)
        with self._lock:
            self._sessions.setdefault(session_id, session)
            return self._sessions[session_id]

    def list_ids(self) -> list[str]:
        on_disk = {p.name for p in self.root.iterdir() if (p / "config.json").exists()}
        return sorted(on_disk)

    def _load(self, session_id: str) -> Session:
        d = self._dir(session_id)
        if not (d / "config.json").exists():
            raise KeyError(session_id)
        config = json.loads((d / "config.json").read_text())
        contest = Contest.from_json(config["contest"])
        cvrs = VoteRecords(tuple(
            (c["id"], Vote.from_json(c["vote"])) for c in config["cvrs"]
        ))
        req = CreateAuditIn(
            contest=ContestIn(**config["contest"]),
            cvrs=[CvrIn(**c) for c in config["cvrs"]],
            method=config["method"],
            margin=config.get("margin"),
            assertions=config.get("assertions"),
            alpha=config["alpha"],
            seed=config["seed"],
        )
        assertions, evaluators, estimator = _build_assertions(
            req, contest, cvrs, config.get("estimator")
        )
        session = Session(
            id=session_id, contest=contest, cvrs=cvrs, method=config["method"],
            alpha=config["alpha"], seed=config["seed"], permutation=config["permutation"],
            estimator_cfg=estimator, assertions=assertions, evaluators=evaluators,
        )
        # replay the trail: apply recorded MVRs in the order they were accepted
        for line in (d / "trail.ndjson").read_text().splitlines():
            entry = json.loads(line)
            if entry["type"] != "mvr":
                continue
            vote = Vote.from_json(entry["vote"])
            _accept(session, entry["card_id"], vote, persist=None)
        return session

    def append_trail(self, session_id: str, entry: dict) -> None:
        with open(self._dir(session_id) / "trail.ndjson", "a") as f:
            f.write(json.dumps(entry) + "\n")
            f.flush()
            os.fsync(f.fileno())


def _build_assertions(req: CreateAuditIn, contest: Contest, cvrs: VoteRecords, est_obj):
    """Construct assertion bookkeeping and per-card evaluators for a session."""
    n = cvrs.n
    if req.method == "mismatch":
        if not req.margin or "V_minus" not in req.margin:
            raise AuditSetupError("mismatch method needs margin {V_minus: ...}")
        v_minus = int(req.margin["V_minus"])
        if v_minus < 1:
            raise AuditSetupError("V- = 0: mismatch audit cannot certify")
        if v_minus > n:
            raise AuditSetupError(f"V-={v_minus} exceeds N={n}")
        u_c = float(mismatch_upper(Fraction(v_minus, n)))
        sa = SessionAssertion(label=f"mismatch rate < {v_minus}/{n}", u=u_c, nu=2 * u_c - 1)
        evaluator = lambda b, c: (u_c if b == c else 0.0)
        estimator = (
            _estimator_from_config(est_obj)
            if est_obj
            else riskengine.default_mismatch_estimator(v_minus / n)
        )
        return [sa], [evaluator], estimator

    estimator = _estimator_from_config(est_obj) if est_obj else Cobra(adapt=True)
    cvr_votes = cvrs.votes()
    assertions, evaluators = [], []
    if contest.kind == "plurality":
        tallies, outcome = tabulate_plurality(cvr_votes, contest)
        if outcome.tie_flag:
            raise AuditSetupError("reported outcome is a tie; comparison audit cannot certify")
        winner = next(iter(outcome.winners))
        pairs = [plurality_assorter(winner, l) for l in contest.candidates if l != winner]
    elif contest.kind == "irv":
        if not req.assertions:
            raise AuditSetupError("IRV comparison audits need an assertion set")
        aset = irv_assertion_assorters(req.assertions, contest, cvr_votes)
        pairs = [a.assorter for a in aset]
    else:
        raise AuditSetupError(f"comparison audits are not defined for {contest.kind!r} contests")
    for a in pairs:
        nu = assorter_margin([a(c) for c in cvr_votes])
        if nu <= 0:
            raise AuditSetupError(f"assertion {a.label!r} has margin {float(nu):.4f} <= 0 on the CVRs")
        u_b = float(overstatement_upper(a, nu))
        assertions.append(SessionAssertion(label=a.label, u=u_b, nu=float(nu)))

        def evaluator(b, c, a=a, nu=nu):
            return float(overstatement_value(b, c, a, nu).value)

        evaluators.append(evaluator)
    return assertions, evaluators, estimator


def _accept(session: Session, card_id: str, vote: Vote, persist) -> list[dict]:
    """Accept one MVR; apply it (and any unblocked pending MVRs) in order.

    ``persist`` is a callable(entry) for write-ahead trail appends, or None
    during replay.  Returns draw records for the applied updates.
    """
    if session.status not in ("open",):
        raise AuditSetupError(f"session is {session.status}")
    if card_id in session.submitted or card_id in session.pending:
        raise DuplicateCard(card_id)
    window = [session.card_at(i) for i in range(session.applied, min(session.applied + session.batch_k, session.n_cards))]
    if card_id not in window:
        raise OutOfOrderCard(card_id, window)
    if persist is not None:
        persist({"type": "mvr", "card_id": card_id, "vote": vote.to_json()})
    session.pending[card_id] = vote

    applied_records = []
    while session.applied < session.n_cards:
        next_card = session.card_at(session.applied)
        if next_card not in session.pending:
            break
        b = session.pending.pop(next_card)
        c = session.cvrs.vote(next_card)
        session.submitted[next_card] = b
        if b != c:
            session.mismatches += 1
        record = {"type": "draw", "j": session.applied + 1, "card_id": next_card,
                  "vote": b.to_json(), "assertions": []}
        for sa, ev in zip(session.assertions, session.evaluators):
            sa.x.append(ev(b, c))
        session.applied += 1
        for status in session.per_assertion_status():
            record["assertions"].append(status)
        if persist is not None:
            persist(record)
        applied_records.append(record)

    p_run, _ = session.p_values()
    if p_run <= session.alpha:
        session.status = "certified"
    elif session.applied >= session.n_cards:
        session.status = "full_count_required"
    return applied_records


class DuplicateCard(Exception):
    pass


class OutOfOrderCard(Exception):
    def __init__(self, card_id, window):
        self.card_id, self.window = card_id, window
        super().__init__(f"card {card_id!r} is not in the current batch {window}")


# ---------------------------------------------------------------------------
# FastAPI app


def create_app(data_dir: Optional[str] = None, demo: bool = False) -> FastAPI:
    root = Path(data_dir or os.environ.get("CARDAUDIT_DATA", "./cardaudit-sessions"))
    store = SessionStore(root)
    app = FastAPI(title="cardaudit live audit service", version="0.1.0")
    app.state.store = store
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )

    def get_session(audit_id: str) -> Session:
        try:
            return store.get(audit_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown audit {audit_id!r}")

    @app.post("/audits", status_code=201)
    def create_audit(req: CreateAuditIn):
        try:
            session = store.create(req)
        except (AuditSetupError, ElectionDataError, ValueError) as e:
            raise HTTPException(status_code=422, detail=str(e))
        return {"id": session.id, "n_cards": session.n_cards, "status": session.status}

    @app.get("/audits")
    def list_audits():
        return {"audits": store.list_ids()}

    @app.get("/audits/{audit_id}/next")
    def next_cards(audit_id: str, k: int = 1):
        session = get_session(audit_id)
        if session.status != "open":
            raise HTTPException(status_code=409, detail=f"session is {session.status}")
        with session.lock:
            session.batch_k = max(1, k)
            remaining = session.n_cards - session.applied - len(session.pending)
            cards = session.next_cards(session.batch_k)
        return {"card_ids": cards, "truncated": k > remaining}

    @app.post("/audits/{audit_id}/mvr")
    def submit_mvr(audit_id: str, mvr: MvrIn):
        session = get_session(audit_id)
        try:
            vote = Vote.from_json(mvr.vote).validate(session.contest)
        except ElectionDataError as e:
            raise HTTPException(status_code=422, detail=str(e))
        with session.lock:
            if session.status != "open":
                raise HTTPException(status_code=409, detail=f"session is {session.status}")
            try:
                applied = _accept(
                    session, mvr.card_id, vote,
                    persist=lambda entry: store.append_trail(session.id, entry),
                )
            except (DuplicateCard, OutOfOrderCard) as e:
                raise HTTPException(status_code=409, detail=str(e))
            cvr_vote = session.cvrs.vote(mvr.card_id)
            return {
                "card_id": mvr.card_id,
                "cvr_vote": cvr_vote.to_json(),
                "match": vote == cvr_vote,
                "applied": [r["j"] for r in applied],
                "status": _status_body(session),
            }

    @app.get("/audits/{audit_id}/status")
    def status(audit_id: str):
        session = get_session(audit_id)
        with session.lock:
            return _status_body(session)

    @app.post("/audits/{audit_id}/close")
    def close(audit_id: str):
        session = get_session(audit_id)
        with session.lock:
            if session.status == "open":
                raise HTTPException(status_code=409, detail="audit still open; certify or full-count first")
            session.status = "closed"
            return _status_body(session)

    @app.get("/spec")
    def openapi_spec():
        return app.openapi()

    if demo:
        session = store.create(demo_request())
        app.state.demo_session_id = session.id

    return app


def _status_body(session: Session) -> dict:
    p_run, p_cur = session.p_values()
    return {
        "id": session.id,
        "status": session.status,
        "decision": {
            "open": None, "certified": "certified",
            "full_count_required": "full_count", "closed": None,
        }[session.status],
        "draws": session.applied,
        "n_cards": session.n_cards,
        "alpha": session.alpha,
        "p_value": p_run,
        "p_current": p_cur,
        "mismatches": session.mismatches,
        "method": session.method,
        "contest": session.contest.to_json(),
        "assertions": session.per_assertion_status(),
    }


def demo_request(n_cards: int = 1000, v: float = 0.06, seed: int = 12) -> CreateAuditIn:
    """A mismatch-audit session over a synthetic plurality contest (v- = 6%)."""
    scenario = gen_plurality(
        ScenarioSpec(kind="plurality", N=n_cards, v_target=v, m_target=0.0,
                     model="random_100_0", seed=seed)
    )
    cvrs = [
        CvrIn(id=cid, vote=vote.to_json())
        for cid, vote in scenario.instance.cvrs()
    ]
    return CreateAuditIn(
        contest=ContestIn(**scenario.instance.contest.to_json()),
        cvrs=cvrs,
        method="mismatch",
        margin={"V_minus": scenario.margin.V},
        alpha=0.05,
        seed=seed,
    )
