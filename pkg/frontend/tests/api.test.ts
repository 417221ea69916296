import { describe, expect, it } from "vitest";

import { ApiError } from "../src/api";
import { api } from "./helpers";

describe("service client", () => {
  it("reports a healthy engine", async () => {
    const health = await api().health();
    expect(health.status).toBe("ok");
    expect(health.engine).toBeTruthy();
  });

  it("creates a fresh seeded game with consistent view fields", async () => {
    const view = await api().createGame({ seed: 123 });
    expect(view.game_id).toBeTruthy();
    expect(view.bin).toEqual([10, 10, 10]);
    expect(view.seed).toBe(123);
    expect(view.swap_lw).toBe(false);
    expect(view.done).toBe(false);
    expect(view.packed).toEqual([]);
    expect(view.height_map).toHaveLength(100);
    expect(view.height_map.every((h) => h === 0)).toBe(true);
    expect(view.current_item).toHaveLength(3);
    expect(view.mask).not.toBeNull();
    expect(view.mask!).toHaveLength(1);
    expect(view.mask![0]).toHaveLength(100);
    expect(view.human).toEqual({
      items: 0,
      utilization: 0,
      utilization_exact: "0",
    });
    expect(view.ai.items).toBeGreaterThan(0);
  });

  it("rejects a request with both seed and dataset index", async () => {
    await expect(
      api().createGame({ seed: 1, datasetIndex: 0 }),
    ).rejects.toMatchObject({ status: 422 });
  });

  it("rejects a request with neither seed nor dataset index", async () => {
    await expect(api().createGame({})).rejects.toMatchObject({ status: 422 });
  });

  it("rejects an out-of-range dataset index", async () => {
    await expect(
      api().createGame({ datasetIndex: 9999 }),
    ).rejects.toMatchObject({ status: 404 });
  });

  it("404s on an unknown game id", async () => {
    const error = await api()
      .getGame("no-such-game")
      .then(() => null, (e: unknown) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect((error as ApiError).status).toBe(404);
  });

  it("plays a full game by following suggestions", async () => {
    const client = api();
    let view = await client.createGame({ seed: 77 });
    let guard = view.sequence_length + 1;
    while (!view.done && guard-- > 0) {
      const suggestion = await client.suggestion(view.game_id);
      if (suggestion.action === null) break;
      const result = await client.commit(view.game_id, suggestion.action);
      expect(result.reward).toBeGreaterThan(0);
      view = result.view;
    }
    expect(view.done).toBe(true);
    expect(view.human.items).toBeGreaterThan(0);
    // Suggestions come from the same solver that plays the machine side, so
    // following all of them reproduces its line exactly.
    expect(view.human.items).toBe(view.ai.items);
    expect(view.human.utilization_exact).toBe(view.ai.utilization_exact);
    // Finished games refuse further commits.
    await expect(
      client.commit(view.game_id, { x: 0, y: 0, orientation: 0 }),
    ).rejects.toMatchObject({ status: 409 });
  });
});
