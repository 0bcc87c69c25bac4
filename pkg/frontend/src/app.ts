// DOM wiring: maps the SessionView to the page and user actions to API
// calls. All audit math stays on the server; this file only renders.

import { ApiError, AuditApi } from "./api.js";
import {
  SessionView,
  initialView,
  onConflict,
  onMvrSubmitted,
  onNetworkError,
  onNextCards,
  onStatus,
  riskFraction,
} from "./session.js";
import type { Contest, VoteJson } from "./types.js";
import { nullVote, pluralityVote, rankingVote, validateVote } from "./votes.js";

const POLL_MS = 3000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

let api: AuditApi;
let view: SessionView;
let ranking: string[] = []; // rank-builder state for IRV entry
let pollTimer: number | undefined;

function render() {
  const status = view.status;
  el("banner").textContent = view.banner.text;
  el("banner").className = `banner ${view.banner.kind}`;
  el("error").textContent = view.error ?? "";
  el("error").hidden = !view.error;

  if (status) {
    el("draws").textContent = `${status.draws} / ${status.n_cards}`;
    el("mismatches").textContent = String(status.mismatches);
    el("p-current").textContent = status.p_current.toFixed(4);
    el("p-value").textContent = status.p_value.toFixed(4);
    el("alpha").textContent = status.alpha.toFixed(3);
    el<HTMLElement>("risk-fill").style.width = `${(riskFraction(status) * 100).toFixed(1)}%`;
  }

  el("next-card").textContent = view.nextCards[0] ?? "—";
  const form = el<HTMLFieldSetElement>("entry-fields");
  form.disabled = !view.entryEnabled || view.nextCards.length === 0;

  const trail = el("trail");
  trail.innerHTML = "";
  for (const entry of view.trail) {
    const li = document.createElement("li");
    li.className = entry.match ? "match" : "mismatch";
    li.textContent = `${entry.cardId}: entered "${entry.entered}" — CVR "${entry.cvr}" (${
      entry.match ? "match" : "MISMATCH"
    })`;
    trail.appendChild(li);
  }
}

function renderVoteForm(contest: Contest) {
  const holder = el("vote-form");
  holder.innerHTML = "";
  if (contest.kind === "plurality") {
    for (const c of [...contest.candidates, null]) {
      const label = document.createElement("label");
      const input = document.createElement("input");
      input.type = "radio";
      input.name = "choice";
      input.value = c ?? "";
      label.appendChild(input);
      label.append(c ?? "No valid vote");
      holder.appendChild(label);
    }
  } else {
    // rank builder: click candidates in preference order
    const ranked = document.createElement("ol");
    ranked.id = "ranked";
    holder.appendChild(ranked);
    const pool = document.createElement("div");
    pool.id = "pool";
    for (const c of contest.candidates) {
      const btn = document.createElement("button");
      btn.type = "button";
      btn.textContent = c;
      btn.onclick = () => {
        if (!ranking.includes(c)) {
          ranking.push(c);
          renderRanking(contest);
        }
      };
      pool.appendChild(btn);
    }
    holder.appendChild(pool);
    const clear = document.createElement("button");
    clear.type = "button";
    clear.textContent = "Clear ranking";
    clear.onclick = () => {
      ranking = [];
      renderRanking(contest);
    };
    holder.appendChild(clear);
  }
}

function renderRanking(contest: Contest) {
  const ranked = el("ranked");
  ranked.innerHTML = "";
  for (const c of ranking) {
    const li = document.createElement("li");
    li.textContent = c;
    ranked.appendChild(li);
  }
  for (const btn of el("pool").querySelectorAll("button")) {
    (btn as HTMLButtonElement).disabled = ranking.includes(btn.textContent ?? "");
  }
}

function currentVote(contest: Contest): VoteJson {
  if (contest.kind === "plurality") {
    const chosen = document.querySelector<HTMLInputElement>('input[name="choice"]:checked');
    return chosen && chosen.value ? pluralityVote(chosen.value) : nullVote();
  }
  return ranking.length > 0 ? rankingVote(ranking) : nullVote();
}

async function refresh() {
  try {
    const status = await api.status(view.auditId);
    view = onStatus(view, status);
    if (status.status === "open") {
      const next = await api.nextCards(view.auditId, 3);
      view = onNextCards(view, next.card_ids);
    }
    if (!el("vote-form").hasChildNodes()) renderVoteForm(status.contest);
  } catch (e) {
    view = onNetworkError(view, e instanceof Error ? e.message : String(e));
  }
  render();
}

async function submit() {
  const status = view.status;
  const cardId = view.nextCards[0];
  if (!status || !cardId) return;
  const vote = currentVote(status.contest);
  const problems = validateVote(vote, status.contest);
  if (problems.length > 0) {
    view = { ...view, error: problems.join("; ") };
    render();
    return;
  }
  try {
    const res = await api.submitMvr(view.auditId, cardId, vote);
    view = onMvrSubmitted(view, vote, res);
    ranking = [];
    const chosen = document.querySelector<HTMLInputElement>('input[name="choice"]:checked');
    if (chosen) chosen.checked = false;
    if (res.status.status === "open") {
      const next = await api.nextCards(view.auditId, 3);
      view = onNextCards(view, next.card_ids);
    }
  } catch (e) {
    if (e instanceof ApiError && e.isConflict) {
      view = onConflict(view, e.detail);
      await refresh();
    } else {
      view = onNetworkError(view, e instanceof Error ? e.message : String(e));
    }
  }
  render();
}

async function connect() {
  const baseUrl = el<HTMLInputElement>("base-url").value;
  api = new AuditApi(baseUrl);
  const requested = el<HTMLInputElement>("audit-id").value.trim();
  try {
    const auditId = requested || (await api.listAudits())[0];
    if (!auditId) throw new Error("no sessions on the server");
    view = initialView(auditId);
    el("vote-form").innerHTML = "";
    await refresh();
    if (pollTimer !== undefined) clearInterval(pollTimer);
    pollTimer = setInterval(refresh, POLL_MS) as unknown as number;
  } catch (e) {
    view = onNetworkError(initialView(requested), e instanceof Error ? e.message : String(e));
    render();
  }
}

export function main() {
  view = initialView("");
  el("connect").onclick = connect;
  el("submit-mvr").onclick = submit;
  render();
}

if (typeof document !== "undefined" && document.getElementById("banner")) {
  main();
}
