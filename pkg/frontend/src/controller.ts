import { ApiError, DuelApi } from "./api";
import { isCircle, suggestionCircles } from "./circles";
import type {
  Cell,
  CommitResult,
  GameView,
  NewGameOptions,
  PreviewResult,
} from "./types";

export interface DuelEvents {
  onView?: (view: GameView) => void;
  onError?: (message: string) => void;
}

/** Client-side game driver: owns the current view, forwards every decision to
 *  the service, and resynchronises from the server whenever a move is
 *  rejected.  It never computes placeability locally. */
export class DuelController {
  private current: GameView | null = null;

  constructor(
    private readonly api: DuelApi,
    private readonly events: DuelEvents = {},
  ) {}

  get view(): GameView {
    if (!this.current) throw new Error("no game in progress");
    return this.current;
  }

  get active(): boolean {
    return this.current !== null;
  }

  circles(): Cell[] {
    return this.current ? suggestionCircles(this.current) : [];
  }

  placeable(cell: Cell): boolean {
    return this.current !== null && isCircle(this.current, cell);
  }

  async start(options: NewGameOptions = {}): Promise<GameView> {
    this.current = await this.api.createGame(options);
    this.events.onView?.(this.current);
    return this.current;
  }

  async load(gameId: string): Promise<GameView> {
    this.current = await this.api.getGame(gameId);
    this.events.onView?.(this.current);
    return this.current;
  }

  /** Ask the server where the item would come to rest; read-only, so errors
   *  surface without touching the current view. */
  async preview(cell: Cell): Promise<PreviewResult | null> {
    try {
      return await this.api.preview(this.view.game_id, cell);
    } catch (error) {
      this.fail(error);
      return null;
    }
  }

  async commit(cell: Cell): Promise<CommitResult | null> {
    const gameId = this.view.game_id;
    try {
      const result = await this.api.commit(gameId, cell);
      this.current = result.view;
      this.events.onView?.(this.current);
      return result;
    } catch (error) {
      this.fail(error);
      if (error instanceof ApiError) {
        // A rejected move may mean our view is stale; trust the server copy.
        this.current = await this.api.getGame(gameId);
        this.events.onView?.(this.current);
      }
      return null;
    }
  }

  async reset(): Promise<GameView> {
    this.current = await this.api.reset(this.view.game_id);
    this.events.onView?.(this.current);
    return this.current;
  }

  async hint(): Promise<Cell | null> {
    try {
      const suggestion = await this.api.suggestion(this.view.game_id);
      return suggestion.action;
    } catch (error) {
      this.fail(error);
      return null;
    }
  }

  private fail(error: unknown): void {
    const message =
      error instanceof ApiError
        ? error.detail
        : error instanceof Error
          ? error.message
          : String(error);
    this.events.onError?.(message);
  }
}
