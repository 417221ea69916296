#!/usr/bin/env python3
"""Bridge child re-implementing the deep-bottom-left rule from the wire data.

Picks the feasible anchor with the lowest resulting rest height, ties
broken by smaller y, then x, then identity before the swapped
orientation — without importing the packing library.
"""

import json
import sys


def decide(req):
    L, W, _ = req["bin"]
    heights = req["height_map"]  # row-major: heights[x * W + y]
    l, w, h = req["items"][0]
    best = None
    best_key = None
    for o, grid in enumerate(req["mask"]):
        le, we = (l, w) if o == 0 else (w, l)
        for y in range(W):
            for x in range(L):
                if not grid[x * W + y]:
                    continue
                z = max(
                    heights[i * W + j]
                    for i in range(x, x + le)
                    for j in range(y, y + we)
                )
                key = (z, y, x, o)
                if best_key is None or key < best_key:
                    best_key = key
                    best = o * L * W + x + L * y
    if best is None:
        raise SystemExit("request offered no feasible action")
    return best


def main():
    for line in sys.stdin:
        req = json.loads(line)
        if req["v"] != 1:
            raise SystemExit(f"unsupported request version {req['v']}")
        print(json.dumps({"v": 1, "action": decide(req)}), flush=True)


if __name__ == "__main__":
    main()
