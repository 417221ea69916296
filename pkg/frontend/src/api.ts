import type {
  AiReplay,
  Cell,
  CommitResult,
  GameView,
  NewGameOptions,
  PreviewResult,
  Suggestion,
} from "./types";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

/** Thin fetch wrapper over the game service. One instance per base URL. */
export class DuelApi {
  constructor(readonly baseUrl: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(`${this.baseUrl}/v1${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        if (typeof body.detail === "string") detail = body.detail;
        else if (body.detail) detail = JSON.stringify(body.detail);
      } catch {
        // keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  health(): Promise<{ status: string; engine: string }> {
    return this.request("/health");
  }

  createGame(options: NewGameOptions): Promise<GameView> {
    const body: Record<string, unknown> = {};
    if (options.seed !== undefined) body.seed = options.seed;
    if (options.datasetIndex !== undefined) body.dataset_index = options.datasetIndex;
    if (options.swapLw !== undefined) body.swap_lw = options.swapLw;
    return this.request("/games", { method: "POST", body: JSON.stringify(body) });
  }

  getGame(gameId: string): Promise<GameView> {
    return this.request(`/games/${gameId}`);
  }

  preview(gameId: string, cell: Cell): Promise<PreviewResult> {
    return this.request(`/games/${gameId}/preview`, {
      method: "POST",
      body: JSON.stringify(cell),
    });
  }

  commit(gameId: string, cell: Cell): Promise<CommitResult> {
    return this.request(`/games/${gameId}/commit`, {
      method: "POST",
      body: JSON.stringify(cell),
    });
  }

  suggestion(gameId: string): Promise<Suggestion> {
    return this.request(`/games/${gameId}/suggestion`);
  }

  aiReplay(gameId: string): Promise<AiReplay> {
    return this.request(`/games/${gameId}/ai`);
  }

  reset(gameId: string): Promise<GameView> {
    return this.request(`/games/${gameId}/reset`, { method: "POST" });
  }
}
