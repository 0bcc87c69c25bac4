// Wire types for the audit service JSON API.

export interface Contest {
  id: string;
  kind: "plurality" | "irv" | "stv";
  candidates: string[];
  seats: number;
}

/** A vote is null, a plurality choice, or a ranking — same shape the server uses. */
export type VoteJson = null | { plurality: string } | { ranking: string[] };

export interface AssertionStatus {
  label: string;
  p_value: number;
  p_current: number;
  log_t: number | null;
}

export interface SessionStatus {
  id: string;
  status: "open" | "certified" | "full_count_required" | "closed";
  decision: "certified" | "full_count" | null;
  draws: number;
  n_cards: number;
  alpha: number;
  p_value: number;
  p_current: number;
  mismatches: number;
  method: string;
  contest: Contest;
  assertions: AssertionStatus[];
}

export interface MvrResponse {
  card_id: string;
  cvr_vote: VoteJson;
  match: boolean;
  applied: number[];
  status: SessionStatus;
}

export interface NextResponse {
  card_ids: string[];
  truncated: boolean;
}
