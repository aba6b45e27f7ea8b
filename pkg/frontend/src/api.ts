// Typed client for the study service HTTP+JSON API.

export interface StimulusRef {
  id: string;
  media_url: string;
}

export interface PendingPair {
  token: number;
  a: StimulusRef;
  b: StimulusRef;
}

export interface Progress {
  min_remaining: number;
  max_remaining: number;
}

export interface SessionState {
  session_id: string;
  status: "active" | "complete" | "abandoned";
  completed_choices: number;
  pair: PendingPair | null;
  reference?: { media_url: string };
  progress?: Progress;
  ranking?: string[] | null;
}

export interface SessionSummary {
  session_id: string;
  study_id: string;
  status: string;
  completed_choices: number;
  transcript: { pair: string[]; winner: string }[];
  ranking: string[] | null;
}

/** Error carrying the HTTP status so callers can branch on conflicts. */
export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(`${status}: ${detail}`);
  }
}

export class StudyApi {
  constructor(readonly baseUrl: string, private fetchFn: typeof fetch = fetch) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const parsed = (await response.json()) as { detail?: string };
        if (parsed.detail) detail = parsed.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  createSession(studyId: string, subject = "", rendering?: string): Promise<SessionState> {
    return this.request("POST", `/studies/${studyId}/sessions`, { subject, rendering });
  }

  pendingPair(sessionId: string): Promise<SessionState> {
    return this.request("GET", `/sessions/${sessionId}/pair`);
  }

  submitChoice(sessionId: string, token: number, winner: string): Promise<SessionState> {
    return this.request("POST", `/sessions/${sessionId}/choice`, { token, winner });
  }

  sessionSummary(sessionId: string): Promise<SessionSummary> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  replay(sessionId: string, winners: string[]): Promise<{ ranking: string[] }> {
    return this.request("POST", `/sessions/${sessionId}/replay`, { winners });
  }

  mediaUrl(path: string): string {
    return `${this.baseUrl}${path}`;
  }
}
