/** Typed client for the converter service; the UI's only backend. */

export interface Candidate {
  text: string;
  score: number;
}

export interface ConvertResponse {
  turn_id: number;
  candidates: Candidate[];
  page_size: number;
}

export interface SelectResponse {
  added_words: string[];
  vocab_size: number;
  flush_performed: boolean;
}

export interface StatsResponse {
  vocab_size: number;
  turns: number;
  last_flush_turn: number;
  model_config: Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly errorCode: string,
    message: string,
    readonly offset?: number,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(private readonly base: string = "") {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await fetch(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return this.unwrap<T>(resp);
  }

  private async unwrap<T>(resp: Response): Promise<T> {
    const data = await resp.json();
    if (!resp.ok) {
      throw new ApiError(
        resp.status,
        data.error_code ?? "unknown",
        data.message ?? `HTTP ${resp.status}`,
        data.offset,
      );
    }
    return data as T;
  }

  async createSession(): Promise<string> {
    const data = await this.post<{ session_id: string }>("/api/session", {});
    return data.session_id;
  }

  convert(sessionId: string, pinyin: string): Promise<ConvertResponse> {
    return this.post<ConvertResponse>("/api/convert", {
      session_id: sessionId,
      pinyin,
    });
  }

  select(
    sessionId: string,
    turnId: number,
    chosenText: string,
  ): Promise<SelectResponse> {
    return this.post<SelectResponse>("/api/select", {
      session_id: sessionId,
      turn_id: turnId,
      chosen_text: chosenText,
    });
  }

  async stats(): Promise<StatsResponse> {
    return this.unwrap<StatsResponse>(await fetch(this.base + "/api/stats"));
  }
}
