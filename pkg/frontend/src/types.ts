/** Wire types for the /v1/ game service. The client never computes any of
 *  these itself — every field is produced server-side. */

export interface SideScore {
  items: number;
  utilization: number;
  /** Exact rational utilization as "p/q" (or an integer string). */
  utilization_exact: string;
}

export interface PackedBox {
  /** Effective dims after the committed orientation was applied. */
  l: number;
  w: number;
  h: number;
  x: number;
  y: number;
  z: number;
  orientation: number;
}

export interface GameView {
  game_id: string;
  bin: [number, number, number];
  origin: string;
  seed: number;
  swap_lw: boolean;
  sequence_length: number;
  /** L*W heights, row-major (index = x * W + y). */
  height_map: number[];
  packed: PackedBox[];
  current_item: [number, number, number] | null;
  /** One row-major 0/1 grid per enabled orientation; null when done. */
  mask: number[][] | null;
  done: boolean;
  human: SideScore;
  ai: SideScore;
}

export interface Cell {
  x: number;
  y: number;
  orientation: number;
}

export interface PreviewResult {
  height_map: number[];
  /** Resting height of the item bottom at the previewed cell. */
  z: number;
  item: [number, number, number];
}

export interface CommitResult {
  reward: number;
  reward_exact: string;
  done: boolean;
  view: GameView;
}

export interface Suggestion {
  action: Cell | null;
  done: boolean;
}

export interface AiReplay {
  items: number;
  utilization: number;
  utilization_exact: string;
  sequence_length: number;
}

export interface NewGameOptions {
  seed?: number;
  datasetIndex?: number;
  swapLw?: boolean;
}
