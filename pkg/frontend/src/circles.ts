import type { Cell, GameView } from "./types";

/** The suggestion circles are exactly the mask-true cells the service sent —
 *  this module only changes representation (grids to a cell list), it never
 *  decides placeability itself. */
export function suggestionCircles(view: GameView): Cell[] {
  if (!view.mask) return [];
  const [L, W] = view.bin;
  const circles: Cell[] = [];
  view.mask.forEach((grid, orientation) => {
    for (let x = 0; x < L; x++) {
      for (let y = 0; y < W; y++) {
        if (grid[x * W + y]) circles.push({ x, y, orientation });
      }
    }
  });
  return circles;
}

export function isCircle(view: GameView, cell: Cell): boolean {
  if (!view.mask || cell.orientation >= view.mask.length) return false;
  const [L, W] = view.bin;
  if (cell.x < 0 || cell.x >= L || cell.y < 0 || cell.y >= W) return false;
  return view.mask[cell.orientation][cell.x * W + cell.y] !== 0;
}

export function heightAt(view: GameView, x: number, y: number): number {
  const [, W] = view.bin;
  return view.height_map[x * W + y];
}

/** Footprint of the current item under an orientation, for the ghost and the
 *  board overlay (pure presentation of server-sent dims). */
export function footprint(
  item: [number, number, number],
  orientation: number,
): [number, number] {
  return orientation === 1 ? [item[1], item[0]] : [item[0], item[1]];
}
