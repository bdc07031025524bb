// Typed client for the session service. All trial state lives on the
// service; the console only ever asks "what's next" and posts one grade.

export type Grade = "lower" | "same" | "higher";

export type JudgmentLabels = [string, string, string];

export interface SessionInfo {
  session_id: string;
  design_id: string;
  participant_id: string;
  seed: number;
  n_trials: number;
  judgment_labels: JudgmentLabels;
  gap_ms: number;
  iti_ms: number;
}

export interface NextTrial {
  done: boolean;
  answered: number;
  n_trials: number;
  trial_index?: number;
  pair_id?: string;
  repetition?: number;
  order?: string[];
  gap_ms?: number;
  judgment_labels?: JudgmentLabels;
  reference_url?: string;
  test_url?: string;
}

export interface SubmitAck {
  ok: boolean;
  answered: number;
  n_trials: number;
  done: boolean;
}

export interface DesignSummary {
  id: string;
  n_test_pairs: number;
  repetitions: number;
  n_trials: number;
  judgment_labels: JudgmentLabels;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { error?: string };
      if (body.error) detail = body.error;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class ConsoleApi {
  constructor(private readonly baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  async listDesigns(): Promise<DesignSummary[]> {
    return asJson(await fetch(`${this.baseUrl}/designs`));
  }

  async createSession(
    designId: string,
    participantId: string,
    seed: number,
  ): Promise<SessionInfo> {
    const response = await fetch(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        design_id: designId,
        participant_id: participantId,
        seed,
      }),
    });
    return asJson(response);
  }

  async nextTrial(sessionId: string): Promise<NextTrial> {
    return asJson(await fetch(`${this.baseUrl}/sessions/${sessionId}/next`));
  }

  async submitResponse(
    sessionId: string,
    trialIndex: number,
    grade: Grade,
    latencyMs: number | null,
  ): Promise<SubmitAck> {
    const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/responses`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        trial_index: trialIndex,
        grade,
        latency_ms: latencyMs,
      }),
    });
    return asJson(response);
  }

  async fetchStimulus(path: string): Promise<ArrayBuffer> {
    const response = await fetch(this.resolve(path));
    if (!response.ok) {
      throw new ApiError(response.status, `cannot fetch stimulus ${path}`);
    }
    return response.arrayBuffer();
  }

  logUrl(sessionId: string): string {
    return `${this.baseUrl}/sessions/${sessionId}/log`;
  }

  reportUrl(sessionId: string): string {
    return `${this.baseUrl}/sessions/${sessionId}/report`;
  }

  resolve(path: string): string {
    return path.startsWith("http") ? path : `${this.baseUrl}${path}`;
  }
}
