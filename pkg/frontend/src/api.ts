// Thin typed client for the audit service. The base URL is the single
// piece of configuration.

import type { MvrResponse, NextResponse, SessionStatus, VoteJson } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }

  get isConflict(): boolean {
    return this.status === 409;
  }
}

async function parseError(res: Response): Promise<never> {
  let detail = res.statusText;
  try {
    const body = await res.json();
    if (typeof body.detail === "string") detail = body.detail;
    else if (body.detail) detail = JSON.stringify(body.detail);
  } catch {
    // non-JSON error body: keep the status text
  }
  throw new ApiError(res.status, detail);
}

export class AuditApi {
  constructor(
    private baseUrl: string,
    private fetchFn: typeof fetch = fetch,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async get<T>(path: string): Promise<T> {
    const res = await this.fetchFn(`${this.baseUrl}${path}`);
    if (!res.ok) await parseError(res);
    return (await res.json()) as T;
  }

  async listAudits(): Promise<string[]> {
    const body = await this.get<{ audits: string[] }>("/audits");
    return body.audits;
  }

  status(auditId: string): Promise<SessionStatus> {
    return this.get<SessionStatus>(`/audits/${auditId}/status`);
  }

  nextCards(auditId: string, k = 1): Promise<NextResponse> {
    return this.get<NextResponse>(`/audits/${auditId}/next?k=${k}`);
  }

  async submitMvr(auditId: string, cardId: string, vote: VoteJson): Promise<MvrResponse> {
    const res = await this.fetchFn(`${this.baseUrl}/audits/${auditId}/mvr`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ card_id: cardId, vote }),
    });
    if (!res.ok) await parseError(res);
    return (await res.json()) as MvrResponse;
  }
}
