import * as THREE from "three";
import { describe, expect, it } from "vitest";

import {
  binWireframe,
  boxColor,
  boxMesh,
  buildScene,
  ghostMesh,
  pendingItemMesh,
  setGhost,
  syncScene,
} from "../src/scene";
import type { GameView, PackedBox } from "../src/types";
import { api } from "./helpers";

function params(mesh: THREE.Mesh): { width: number; height: number; depth: number } {
  const { width, height, depth } = (mesh.geometry as THREE.BoxGeometry).parameters;
  return { width, height, depth };
}

const baseView: GameView = {
  game_id: "g",
  bin: [10, 10, 10],
  origin: "CUT2",
  seed: 0,
  swap_lw: false,
  sequence_length: 5,
  height_map: new Array(100).fill(0),
  packed: [],
  current_item: [2, 3, 4],
  mask: [new Array(100).fill(1)],
  done: false,
  human: { items: 0, utilization: 0, utilization_exact: "0" },
  ai: { items: 5, utilization: 0.5, utilization_exact: "1/2" },
};

describe("scene geometry", () => {
  it("spans the wireframe over the whole bin, floor at zero", () => {
    const lines = binWireframe([10, 8, 6]);
    lines.geometry.computeBoundingBox();
    const box = lines.geometry.boundingBox!;
    expect([box.min.x, box.min.y, box.min.z]).toEqual([0, 0, 0]);
    // Engine (x, y, z-up) maps to scene (x, z, y): height is the scene y axis.
    expect([box.max.x, box.max.y, box.max.z]).toEqual([10, 6, 8]);
  });

  it("centres a packed box over its anchor with height up", () => {
    const packed: PackedBox = { l: 3, w: 2, h: 4, x: 1, y: 5, z: 6, orientation: 0 };
    const mesh = boxMesh(packed, 0);
    expect(mesh.position.toArray()).toEqual([1 + 1.5, 6 + 2, 5 + 1]);
    expect(params(mesh)).toEqual({ width: 3, height: 4, depth: 2 });
  });

  it("swaps the ghost footprint with the orientation", () => {
    const plain = ghostMesh([3, 2, 4], 1, 5, 0, 0);
    expect(plain.position.toArray()).toEqual([1 + 1.5, 2, 5 + 1]);
    expect(params(plain)).toEqual({ width: 3, height: 4, depth: 2 });

    const rotated = ghostMesh([3, 2, 4], 1, 5, 0, 1);
    expect(rotated.position.toArray()).toEqual([1 + 1, 2, 5 + 1.5]);
    expect(params(rotated)).toEqual({ width: 2, height: 4, depth: 3 });
  });

  it("floats the pending item outside the bin", () => {
    const pending = pendingItemMesh([2, 3, 4], [10, 10, 10]);
    expect(pending.position.x).toBeGreaterThan(10);
    expect(pending.position.y).toBe(2);
  });

  it("cycles colours instead of running out", () => {
    expect(boxColor(10)).toBe(boxColor(0));
    expect(boxColor(3)).not.toBe(boxColor(4));
  });

  it("rebuilds boxes and the pending item from a view", () => {
    const state = buildScene([10, 10, 10]);
    const view: GameView = {
      ...baseView,
      packed: [
        { l: 2, w: 2, h: 2, x: 0, y: 0, z: 0, orientation: 0 },
        { l: 3, w: 3, h: 3, x: 2, y: 0, z: 0, orientation: 0 },
      ],
    };
    syncScene(state, view);
    expect(state.boxes.children).toHaveLength(2);
    expect(state.scene.getObjectByName("pending")).toBeDefined();

    syncScene(state, { ...view, current_item: null, done: true });
    expect(state.boxes.children).toHaveLength(2);
    expect(state.scene.getObjectByName("pending")).toBeUndefined();

    setGhost(state, ghostMesh([2, 2, 2], 0, 0, 0, 0));
    expect(state.overlay.children).toHaveLength(1);
    setGhost(state, null);
    expect(state.overlay.children).toHaveLength(0);
  });

  it("previews exactly the geometry a commit produces", async () => {
    const client = api();
    // Hunt for a rotation-enabled state whose rotated grid has a circle.
    for (let seed = 900; ; seed++) {
      const view = await client.createGame({ seed, swapLw: true });
      if (!view.mask || view.mask.length < 2) continue;
      const [l, w] = view.current_item!;
      if (l === w) continue;
      const [, W] = view.bin;
      const index = view.mask[1].findIndex((bit) => bit === 1);
      if (index < 0) continue;

      const cell = { x: Math.floor(index / W), y: index % W, orientation: 1 };
      const preview = await client.preview(view.game_id, cell);
      const ghost = ghostMesh(preview.item, cell.x, cell.y, preview.z, 1);

      const committed = await client.commit(view.game_id, cell);
      const placed = committed.view.packed.at(-1)!;
      const solid = boxMesh(placed, 0);

      expect(placed.orientation).toBe(1);
      expect(ghost.position.toArray()).toEqual(solid.position.toArray());
      expect(params(ghost)).toEqual(params(solid));
      break;
    }
  });
});
