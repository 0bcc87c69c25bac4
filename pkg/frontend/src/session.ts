// Session view-model: a pure reducer over API responses, so the render
// layer only maps state to DOM. The UI does no risk math of its own —
// every number shown comes from the latest /status response.

import type { MvrResponse, SessionStatus, VoteJson } from "./types.js";
import { describeVote } from "./votes.js";

export interface TrailEntry {
  cardId: string;
  entered: string; // description of the MVR
  cvr: string; // description of the CVR, revealed after submission
  match: boolean;
}

export interface SessionView {
  auditId: string;
  status: SessionStatus | null;
  nextCards: string[];
  trail: TrailEntry[]; // most recent first
  banner: Banner;
  entryEnabled: boolean;
  error: string | null; // network / conflict message, cleared on success
}

export type Banner =
  | { kind: "continue"; text: string }
  | { kind: "stop"; text: string }
  | { kind: "full-count"; text: string }
  | { kind: "idle"; text: string };

export function initialView(auditId: string): SessionView {
  return {
    auditId,
    status: null,
    nextCards: [],
    trail: [],
    banner: { kind: "idle", text: "Connecting…" },
    entryEnabled: false,
    error: null,
  };
}

function bannerFor(status: SessionStatus): Banner {
  switch (status.status) {
    case "certified":
    case "closed":
      return { kind: "stop", text: "Risk limit met — audit may stop" };
    case "full_count_required":
      return { kind: "full-count", text: "Sample exhausted — full manual count required" };
    default:
      return {
        kind: "continue",
        text: `Keep auditing — ${status.draws} of ${status.n_cards} cards entered`,
      };
  }
}

export function onStatus(view: SessionView, status: SessionStatus): SessionView {
  return {
    ...view,
    status,
    banner: bannerFor(status),
    entryEnabled: status.status === "open",
    error: null,
  };
}

export function onNextCards(view: SessionView, cardIds: string[]): SessionView {
  return { ...view, nextCards: cardIds };
}

export function onMvrSubmitted(view: SessionView, entered: VoteJson, res: MvrResponse): SessionView {
  const entry: TrailEntry = {
    cardId: res.card_id,
    entered: describeVote(entered),
    cvr: describeVote(res.cvr_vote),
    match: res.match,
  };
  const next = view.nextCards.filter((c) => c !== res.card_id);
  return onStatus({ ...view, trail: [entry, ...view.trail].slice(0, 20), nextCards: next }, res.status);
}

/** A 409 means our picture of the draw order is stale: surface and re-sync. */
export function onConflict(view: SessionView, detail: string): SessionView {
  return { ...view, nextCards: [], error: `Entry conflict: ${detail}` };
}

export function onNetworkError(view: SessionView, message: string): SessionView {
  return { ...view, error: `Network problem — nothing was lost. Retry. (${message})` };
}

/** Risk-meter fill as a fraction: how close the displayed p is to the limit. */
export function riskFraction(status: SessionStatus): number {
  if (status.p_current <= status.alpha) return 1;
  // log-scale between p = 1 and p = alpha so early progress is visible
  const span = Math.log(1 / status.alpha);
  return Math.min(1, Math.max(0, Math.log(1 / status.p_current) / span));
}
