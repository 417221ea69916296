import { readFileSync } from "node:fs";

import { DuelApi } from "../src/api";
import { SERVICE_INFO } from "./global-setup";

export interface ServiceInfo {
  baseUrl: string;
  datasetPath: string;
  reportPath: string;
}

export function serviceInfo(): ServiceInfo {
  return JSON.parse(readFileSync(SERVICE_INFO, "utf-8")) as ServiceInfo;
}

export function api(): DuelApi {
  return new DuelApi(serviceInfo().baseUrl);
}

export interface GroundTruthItem {
  l: number;
  w: number;
  h: number;
  x: number;
  y: number;
  z: number;
}

export interface DatasetSequence {
  bin: [number, number, number];
  origin: string;
  seed: number;
  items: GroundTruthItem[];
}

/** Parse the plain-text dataset format: a `bin L W H | ORIGIN | seed` header
 *  per sequence, then one `l w h x y z` line per item. */
export function parseDataset(path: string): DatasetSequence[] {
  const sequences: DatasetSequence[] = [];
  for (const raw of readFileSync(path, "utf-8").split("\n")) {
    const line = raw.trim();
    if (!line) continue;
    if (line.startsWith("bin ")) {
      const [binPart, origin, seed] = line.split("|").map((p) => p.trim());
      const dims = binPart.split(/\s+/).slice(1).map(Number);
      sequences.push({
        bin: [dims[0], dims[1], dims[2]],
        origin,
        seed: Number(seed),
        items: [],
      });
      continue;
    }
    const fields = line.split(/\s+/).map(Number);
    const [l, w, h, x, y, z] = fields;
    sequences.at(-1)!.items.push({ l, w, h, x, y, z });
  }
  return sequences;
}

export interface ReportEpisode {
  index: number;
  seed: number;
  items: number;
  utilization: string;
}

/** Parse `episode I seed S items N utilization P/Q` report lines. */
export function parseReport(path: string): ReportEpisode[] {
  const episodes: ReportEpisode[] = [];
  for (const line of readFileSync(path, "utf-8").split("\n")) {
    const match = line.match(
      /^episode (\d+) seed (\d+) items (\d+) utilization (\S+)$/,
    );
    if (match) {
      episodes.push({
        index: Number(match[1]),
        seed: Number(match[2]),
        items: Number(match[3]),
        utilization: match[4],
      });
    }
  }
  return episodes;
}
