"""Compiled inner loops for placement scoring and search rollouts.

Pure integer arithmetic throughout: scores are accumulated as exact
int64 "units" (see `boundary_score_kernel`) and compared by
cross-multiplication, so the compiled code and the plain-Python
reference implementations agree bit for bit.  The Python fallbacks live
in `binpack3d.policies`; nothing here changes semantics, only speed.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _feasible_at(grid, H, le, we, h, x, y):
    """Mirror of `core.is_feasible` on a raw height grid."""
    L, W = grid.shape
    if x < 0 or y < 0 or x + le > L or y + we > W:
        return False
    top = np.int64(0)
    for i in range(x, x + le):
        for j in range(y, y + we):
            if grid[i, j] > top:
                top = grid[i, j]
    if top + h > H:
        return False
    cells = 0
    for i in range(x, x + le):
        for j in range(y, y + we):
            if grid[i, j] == top:
                cells += 1
    corners = 0
    if grid[x, y] == top:
        corners += 1
    if grid[x + le - 1, y] == top:
        corners += 1
    if grid[x, y + we - 1] == top:
        corners += 1
    if grid[x + le - 1, y + we - 1] == top:
        corners += 1
    area = le * we
    if 5 * cells >= 3 * area and corners == 4:
        return True
    if 5 * cells >= 4 * area and corners >= 3:
        return True
    return 20 * cells >= 19 * area


@njit(cache=True, nogil=True)
def feasibility_mask_kernel(grid, H, l, w, h, n_orient):
    """Boolean anchor grid per orientation (0 = as-is, 1 = swapped)."""
    L, W = grid.shape
    out = np.zeros((n_orient, L, W), np.bool_)
    for oi in range(n_orient):
        le = l if oi == 0 else w
        we = w if oi == 0 else l
        if le > L or we > W:
            continue
        for x in range(L - le + 1):
            for y in range(W - we + 1):
                out[oi, x, y] = _feasible_at(grid, H, le, we, h, x, y)
    return out


@njit(cache=True, nogil=True)
def _score_free_boxes(work, H, fit_table, n_types, scale_num, scale_den):
    """Integer score units summed over every maximal free box, plus the count.

    One box contributes ``fit * binvol * scale_den + scale_num * volume``
    units, plus ``10 * binvol * scale_den`` when all item types fit;
    dividing a unit total by ``binvol * scale_den`` recovers the exact
    rational score with the volume term weighted by
    ``scale_num / scale_den``.  Boxes are enumerated per distinct surface
    height t: maximal all-(<= t) rectangles that are blocked below and
    contain a column of height exactly t, which pins each box bottom
    uniquely and avoids duplicates.
    """
    L, W = work.shape
    base = np.int64(L) * np.int64(W) * np.int64(H) * scale_den
    total = np.int64(0)
    count = np.int64(0)
    present = np.zeros(H + 1, np.uint8)
    for i in range(L):
        for j in range(W):
            present[work[i, j]] = 1
    up = np.empty(W, np.int64)
    stack_y = np.empty(W + 1, np.int64)
    stack_h = np.empty(W + 1, np.int64)
    eqpre = np.empty((L + 1, W + 1), np.int64)
    npre = np.empty(W + 1, np.int64)

    for t in range(H):
        if present[t] == 0:
            continue
        for j in range(W + 1):
            eqpre[0, j] = 0
        for j in range(W):
            up[j] = 0
        npre[0] = 0
        for i in range(L):
            row_acc = np.int64(0)
            eqpre[i + 1, 0] = 0
            for j in range(W):
                if work[i, j] == t:
                    row_acc += 1
                eqpre[i + 1, j + 1] = eqpre[i, j + 1] + row_acc
                up[j] = up[j] + 1 if work[i, j] <= t else 0
                below_free = i + 1 < L and work[i + 1, j] <= t
                npre[j + 1] = npre[j] + (1 if below_free else 0)
            sp = 0
            for j in range(W + 1):
                hcur = up[j] if j < W else np.int64(0)
                start = j
                while sp > 0 and stack_h[sp - 1] > hcur:
                    sp -= 1
                    hs = stack_h[sp]
                    ys = stack_y[sp]
                    # rows [i-hs+1 .. i] x cols [ys .. j-1]: maximal left/right/up;
                    # keep it only when it cannot grow downwards either
                    if i == L - 1 or (npre[j] - npre[ys]) < (j - ys):
                        x0 = i - hs + 1
                        eq_cells = (
                            eqpre[i + 1, j]
                            - eqpre[x0, j]
                            - eqpre[i + 1, ys]
                            + eqpre[x0, ys]
                        )
                        if eq_cells > 0:
                            dx = hs
                            dy = np.int64(j - ys)
                            dz = np.int64(H - t)
                            fit = fit_table[dx, dy, dz]
                            unit = fit * base + scale_num * (dx * dy * dz)
                            if fit == n_types:
                                unit += 10 * base
                            total += unit
                            count += 1
                    start = ys
                if hcur > 0 and (sp == 0 or stack_h[sp - 1] < hcur):
                    stack_y[sp] = start
                    stack_h[sp] = hcur
                    sp += 1
    return total, count


@njit(cache=True, nogil=True)
def boundary_score_kernel(
    grid, H, item_h, dims, masks, fit_table, n_types, scale_num, scale_den
):
    """Spare-box score units for every feasible anchor of one item.

    ``dims[oi]`` is the (le, we) footprint per orientation and ``masks``
    the matching feasibility grids.  Returns ``(sums, counts, rests)``
    int64 arrays; ``counts == -1`` marks anchors that were not evaluated
    (mask False).  Units are ``binvol * scale_den`` per score point (see
    `_score_free_boxes`).
    """
    n = dims.shape[0]
    L, W = grid.shape
    sums = np.zeros((n, L, W), np.int64)
    counts = np.full((n, L, W), -1, np.int64)
    rests = np.zeros((n, L, W), np.int64)
    work = grid.copy()
    for oi in range(n):
        le = dims[oi, 0]
        we = dims[oi, 1]
        for y in range(W):
            for x in range(L):
                if not masks[oi, x, y]:
                    continue
                top = np.int64(0)
                for i in range(x, x + le):
                    for j in range(y, y + we):
                        if work[i, j] > top:
                            top = work[i, j]
                new_top = top + item_h
                for i in range(x, x + le):
                    for j in range(y, y + we):
                        work[i, j] = new_top
                s, c = _score_free_boxes(work, H, fit_table, n_types, scale_num, scale_den)
                for i in range(x, x + le):
                    for j in range(y, y + we):
                        work[i, j] = grid[i, j]
                sums[oi, x, y] = s
                counts[oi, x, y] = c
                rests[oi, x, y] = top
    return sums, counts, rests


@njit(cache=True, nogil=True)
def boundary_rollout_kernel(
    grid,
    H,
    item_dims,
    item_indices,
    blocks,
    n_orient,
    fit_table,
    n_types,
    aggregate_mean,
    scale_num,
    scale_den,
):
    """Play items through the boundary rule under arrival-order blocking.

    ``item_dims`` (r, 3) and ``item_indices`` (r,) list the items to play
    in arrival order; ``blocks`` (m, 5) holds ``(index, x, y, le, we)``
    footprints of items a search already committed deeper in the arrival
    order — they wall off anchors for any item arriving before them.
    Play stops at the first item with no feasible anchor.

    Returns ``(placed, volume, free_cells, first, final_grid)`` where
    ``first`` is ``(orientation, x, y, z)`` of the first placement (or
    -1s); with a single item this doubles as a one-step policy call.
    """
    L, W = grid.shape
    unit_den = np.int64(L) * np.int64(W) * np.int64(H) * scale_den
    work = grid.copy()
    blocked = np.empty((L, W), np.int64)
    save = np.empty(L * W, np.int64)
    first = np.full(4, -1, np.int64)
    placed = 0
    volume = np.int64(0)
    r = item_dims.shape[0]
    for s in range(r):
        idx = item_indices[s]
        l = item_dims[s, 0]
        w = item_dims[s, 1]
        h = item_dims[s, 2]
        for i in range(L):
            for j in range(W):
                blocked[i, j] = work[i, j]
        for b in range(blocks.shape[0]):
            if blocks[b, 0] > idx:
                for i in range(blocks[b, 1], blocks[b, 1] + blocks[b, 3]):
                    for j in range(blocks[b, 2], blocks[b, 2] + blocks[b, 4]):
                        blocked[i, j] = H
        found = False
        best_num = np.int64(0)
        best_den = np.int64(1)
        best_o = -1
        best_x = -1
        best_y = -1
        best_z = np.int64(-1)
        for oi in range(n_orient):
            le = l if oi == 0 else w
            we = w if oi == 0 else l
            if le > L or we > W:
                continue
            for y in range(W - we + 1):
                for x in range(L - le + 1):
                    if not _feasible_at(blocked, H, le, we, h, x, y):
                        continue
                    # rest height in the real geometry; identical on the
                    # blocked view because feasible anchors never touch a
                    # blocked column
                    top = np.int64(0)
                    for i in range(x, x + le):
                        for j in range(y, y + we):
                            if work[i, j] > top:
                                top = work[i, j]
                    new_top = top + h
                    kk = 0
                    for i in range(x, x + le):
                        for j in range(y, y + we):
                            save[kk] = work[i, j]
                            work[i, j] = new_top
                            kk += 1
                    snum, cnt = _score_free_boxes(
                        work, H, fit_table, n_types, scale_num, scale_den
                    )
                    kk = 0
                    for i in range(x, x + le):
                        for j in range(y, y + we):
                            work[i, j] = save[kk]
                            kk += 1
                    if aggregate_mean:
                        if cnt > 0:
                            num, den = snum, cnt * unit_den
                        else:
                            num, den = np.int64(0), np.int64(1)
                    else:
                        num, den = snum, unit_den
                    if not found:
                        better = True
                    else:
                        lhs = num * best_den
                        rhs = best_num * den
                        if lhs != rhs:
                            better = lhs > rhs
                        elif top != best_z:
                            better = top < best_z
                        elif y != best_y:
                            better = y < best_y
                        elif x != best_x:
                            better = x < best_x
                        else:
                            better = oi < best_o
                    if better:
                        found = True
                        best_num, best_den = num, den
                        best_o, best_x, best_y, best_z = oi, x, y, top
        if not found:
            return placed, volume, np.int64(0), first, work
        le = l if best_o == 0 else w
        we = w if best_o == 0 else l
        new_top = best_z + h
        for i in range(best_x, best_x + le):
            for j in range(best_y, best_y + we):
                work[i, j] = new_top
        placed += 1
        volume += l * w * h
        if s == 0:
            first[0] = best_o
            first[1] = best_x
            first[2] = best_y
            first[3] = best_z
    free = np.int64(0)
    for i in range(L):
        for j in range(W):
            free += H - work[i, j]
    return placed, volume, free, first, work
