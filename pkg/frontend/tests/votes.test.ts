import { describe, expect, it } from "vitest";

import type { Contest } from "../src/types.js";
import {
  describeVote,
  nullVote,
  pluralityVote,
  rankingVote,
  validateVote,
  votesEqual,
} from "../src/votes.js";

const plurality: Contest = { id: "mayor", kind: "plurality", candidates: ["Amy", "Ben"], seats: 1 };
const irv: Contest = { id: "ward", kind: "irv", candidates: ["Ali", "Bob", "Cal"], seats: 1 };

describe("validateVote", () => {
  it("accepts a null vote in any contest", () => {
    expect(validateVote(nullVote(), plurality)).toEqual([]);
    expect(validateVote(nullVote(), irv)).toEqual([]);
  });

  it("accepts a known plurality choice", () => {
    expect(validateVote(pluralityVote("Amy"), plurality)).toEqual([]);
  });

  it("rejects an unknown candidate", () => {
    expect(validateVote(pluralityVote("Zed"), plurality)).toHaveLength(1);
  });

  it("rejects a plurality vote in a ranked contest", () => {
    const problems = validateVote(pluralityVote("Ali"), irv);
    expect(problems.join(" ")).toContain("not valid");
  });

  it("accepts a partial ranking", () => {
    expect(validateVote(rankingVote(["Cal", "Ali"]), irv)).toEqual([]);
  });

  it("rejects duplicate ranks", () => {
    const problems = validateVote(rankingVote(["Ali", "Ali"]), irv);
    expect(problems.join(" ")).toContain("ranked twice");
  });

  it("rejects a ranking longer than the candidate list", () => {
    const problems = validateVote({ ranking: ["Ali", "Bob", "Cal", "Dee"] }, irv);
    expect(problems.length).toBeGreaterThan(0);
  });
});

describe("votesEqual", () => {
  it("compares by value", () => {
    expect(votesEqual(pluralityVote("Amy"), pluralityVote("Amy"))).toBe(true);
    expect(votesEqual(rankingVote(["Ali", "Bob"]), rankingVote(["Ali", "Bob"]))).toBe(true);
    expect(votesEqual(rankingVote(["Ali", "Bob"]), rankingVote(["Bob", "Ali"]))).toBe(false);
    expect(votesEqual(nullVote(), pluralityVote("Amy"))).toBe(false);
  });
});

describe("describeVote", () => {
  it("renders each vote shape", () => {
    expect(describeVote(nullVote())).toBe("null vote");
    expect(describeVote(pluralityVote("Amy"))).toBe("Amy");
    expect(describeVote(rankingVote(["Ali", "Bob"]))).toBe("Ali > Bob");
    expect(describeVote(rankingVote([]))).toBe("empty ranking");
  });
});
