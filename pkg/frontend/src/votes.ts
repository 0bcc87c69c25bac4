// Vote construction and validation, mirroring the server's rules so the
// form can never produce a vote the service would reject.

import type { Contest, VoteJson } from "./types.js";

export function nullVote(): VoteJson {
  return null;
}

export function pluralityVote(candidate: string): VoteJson {
  return { plurality: candidate };
}

export function rankingVote(ranking: string[]): VoteJson {
  return { ranking: [...ranking] };
}

/** Returns a list of problems; empty means the vote is valid for the contest. */
export function validateVote(vote: VoteJson, contest: Contest): string[] {
  if (vote === null) return [];
  const problems: string[] = [];
  if ("plurality" in vote) {
    if (contest.kind !== "plurality") {
      problems.push(`a single-choice vote is not valid in a ${contest.kind} contest`);
    }
    if (!contest.candidates.includes(vote.plurality)) {
      problems.push(`unknown candidate "${vote.plurality}"`);
    }
    return problems;
  }
  const seen = new Set<string>();
  for (const c of vote.ranking) {
    if (!contest.candidates.includes(c)) problems.push(`unknown candidate "${c}"`);
    if (seen.has(c)) problems.push(`candidate "${c}" ranked twice`);
    seen.add(c);
  }
  if (vote.ranking.length > contest.candidates.length) {
    problems.push("ranking longer than the candidate list");
  }
  return problems;
}

export function votesEqual(a: VoteJson, b: VoteJson): boolean {
  return JSON.stringify(a) === JSON.stringify(b);
}

/** Human-readable form for trail entries and the post-submission reveal. */
export function describeVote(vote: VoteJson): string {
  if (vote === null) return "null vote";
  if ("plurality" in vote) return vote.plurality;
  if (vote.ranking.length === 0) return "empty ranking";
  return vote.ranking.join(" > ");
}
