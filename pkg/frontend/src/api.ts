// Typed client for the evaluation service. The UI talks to these four
// endpoints and nothing else.

export interface EvalTask {
  post_id: string;
  post_text: string;
  predicted_mode: string;
  predicted_sentiment: string;
  rationale: string;
  remaining: number;
}

export interface ScoreSubmission {
  post_id: string;
  evaluator_id: string;
  mode_score: number;
  sentiment_score: number;
}

export interface ScoreAck {
  status: string;
  superseded: boolean;
}

export interface SummaryRow {
  group_key: string;
  source: string;
  avg_mode_score: number;
  avg_sentiment_score: number;
  n_items: number;
}

export interface Progress {
  total: number;
  pending: number;
  reasoned: number;
  verified: number;
  failed: number;
  human_scores: number;
  evaluators: number;
}

export class ApiError extends Error {
  constructor(message: string, public status: number) {
    super(message);
  }
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private url(path: string): string {
    return this.baseUrl + path;
  }

  /** Next unscored task for this evaluator, or null when the queue is done. */
  async nextTask(evaluatorId: string): Promise<EvalTask | null> {
    const resp = await fetch(
      this.url(`/api/tasks/next?evaluator=${encodeURIComponent(evaluatorId)}`),
    );
    if (resp.status === 204) return null;
    if (!resp.ok) throw new ApiError(`task fetch failed (${resp.status})`, resp.status);
    return (await resp.json()) as EvalTask;
  }

  async submitScore(submission: ScoreSubmission): Promise<ScoreAck> {
    const resp = await fetch(this.url("/api/scores"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(submission),
    });
    if (!resp.ok) {
      let detail = `score rejected (${resp.status})`;
      try {
        const body = await resp.json();
        if (body && body.detail) detail = JSON.stringify(body.detail);
      } catch {
        // keep the generic message
      }
      throw new ApiError(detail, resp.status);
    }
    return (await resp.json()) as ScoreAck;
  }

  async summary(): Promise<SummaryRow[]> {
    const resp = await fetch(this.url("/api/summary"));
    if (!resp.ok) throw new ApiError(`summary failed (${resp.status})`, resp.status);
    return (await resp.json()) as SummaryRow[];
  }

  async progress(): Promise<Progress> {
    const resp = await fetch(this.url("/api/progress"));
    if (!resp.ok) throw new ApiError(`progress failed (${resp.status})`, resp.status);
    return (await resp.json()) as Progress;
  }
}
