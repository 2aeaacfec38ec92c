# Jitted rules kernels over a padded, flattened board.
#
# A size-N board is stored as an int8 vector of length (N+2)**2; the outer
# ring holds BORDER so neighbour lookups never need bounds checks.  Point
# (r, c) lives at index (r+1)*(N+2) + (c+1).
import numpy as np
from numba import njit, uint64

from .rng import below

EMPTY = 0
BLACK = 1
WHITE = 2
BORDER = 3

MAX_SIZE = 19
_MAX_W = MAX_SIZE + 2

# Per-(padded point, colour) keys.  Fixed seed: hashes are reproducible
# across processes, which the weight-free search relies on for replay tests.
ZOBRIST = np.random.default_rng(0x5EED_C0DE).integers(
    0, np.iinfo(np.uint64).max, size=(_MAX_W * _MAX_W, 3), dtype=np.uint64, endpoint=True
)
ZOBRIST[:, EMPTY] = 0
SIDE_KEY = int(np.random.default_rng(0x51DE).integers(1, 2**63))


@njit(cache=True)
def empty_board(n):
    w = n + 2
    b = np.full(w * w, BORDER, dtype=np.int8)
    for r in range(n):
        for c in range(n):
            b[(r + 1) * w + c + 1] = EMPTY
    return b


@njit(cache=True)
def unpad(board, n):
    w = n + 2
    g = np.empty((n, n), dtype=np.int8)
    for r in range(n):
        for c in range(n):
            g[r, c] = board[(r + 1) * w + c + 1]
    return g


@njit(cache=True)
def pad(grid):
    n = grid.shape[0]
    w = n + 2
    b = empty_board(n)
    for r in range(n):
        for c in range(n):
            b[(r + 1) * w + c + 1] = grid[r, c]
    return b


@njit(cache=True)
def stone_hash(board, zob):
    h = uint64(0)
    for i in range(board.shape[0]):
        v = board[i]
        if v == BLACK or v == WHITE:
            h ^= zob[i, v]
    return h


@njit(cache=True)
def label_chains(board, n):
    """Label every chain.

    Returns (chain_id per padded point, -1 where no stone), and per chain:
    liberty count, stone count, XOR of its stones' hash keys.
    """
    w = n + 2
    size = board.shape[0]
    cid = np.full(size, -1, dtype=np.int32)
    libs = np.zeros(size, dtype=np.int32)
    stones = np.zeros(size, dtype=np.int32)
    hashes = np.zeros(size, dtype=np.uint64)
    libmark = np.full(size, -1, dtype=np.int32)
    stack = np.empty(size, dtype=np.int32)
    nchains = 0
    for start in range(size):
        color = board[start]
        if (color != BLACK and color != WHITE) or cid[start] >= 0:
            continue
        k = nchains
        nchains += 1
        cid[start] = k
        top = 0
        stack[top] = start
        top += 1
        nl = 0
        ns = 0
        h = uint64(0)
        while top > 0:
            top -= 1
            p = stack[top]
            ns += 1
            h ^= ZOBRIST[p, color]
            for d in (-1, 1, -w, w):
                q = p + d
                v = board[q]
                if v == color:
                    if cid[q] < 0:
                        cid[q] = k
                        stack[top] = q
                        top += 1
                elif v == EMPTY and libmark[q] != k:
                    libmark[q] = k
                    nl += 1
        libs[k] = nl
        stones[k] = ns
        hashes[k] = h
    return cid, libs[:nchains], stones[:nchains], hashes[:nchains]


@njit(cache=True)
def liberty_map(board, n):
    """Per-point liberty count of the chain occupying it (0 on empty)."""
    cid, libs, _, _ = label_chains(board, n)
    w = n + 2
    out = np.zeros((n, n), dtype=np.int32)
    for r in range(n):
        for c in range(n):
            k = cid[(r + 1) * w + c + 1]
            if k >= 0:
                out[r, c] = libs[k]
    return out


@njit(cache=True)
def legal_plays(board, n, color, ko, base_hash):
    """Legal plays (simple ko, no suicide) and the stone hash after each.

    Superko is left to the caller, which owns the history set.
    Returns (flat indices r*n+c, resulting stone hashes).
    """
    w = n + 2
    opp = 3 - color
    cid, libs, _, chash = label_chains(board, n)
    pts = np.empty(n * n, dtype=np.int64)
    hs = np.empty(n * n, dtype=np.uint64)
    m = 0
    seen = np.full(4, -1, dtype=np.int32)
    for r in range(n):
        for c in range(n):
            p = (r + 1) * w + c + 1
            if board[p] != EMPTY or p == ko:
                continue
            ok = False
            h = base_hash ^ ZOBRIST[p, color]
            ns = 0
            for d in (-1, 1, -w, w):
                q = p + d
                v = board[q]
                if v == EMPTY:
                    ok = True
                elif v == color:
                    if libs[cid[q]] >= 2:
                        ok = True
                elif v == opp:
                    k = cid[q]
                    if libs[k] == 1:
                        ok = True
                        dup = False
                        for t in range(ns):
                            if seen[t] == k:
                                dup = True
                        if not dup:
                            seen[ns] = k
                            ns += 1
                            h ^= chash[k]
            if ok:
                pts[m] = r * n + c
                hs[m] = h
                m += 1
    return pts[:m], hs[:m]


@njit(cache=True)
def _count_libs(board, w, start, limit, mark, stamp, libmark, stack):
    # Liberties of the chain at ``start``, stopping early once ``limit`` is hit.
    color = board[start]
    mark[start] = stamp
    top = 1
    stack[0] = start
    nl = 0
    while top > 0:
        top -= 1
        p = stack[top]
        for d in (-1, 1, -w, w):
            q = p + d
            v = board[q]
            if v == EMPTY:
                if libmark[q] != stamp:
                    libmark[q] = stamp
                    nl += 1
                    if nl >= limit:
                        return nl
            elif v == color and mark[q] != stamp:
                mark[q] = stamp
                stack[top] = q
                top += 1
    return nl


@njit(cache=True)
def _remove_chain(board, w, start, zob):
    color = board[start]
    stack = np.empty(board.shape[0], dtype=np.int32)
    board[start] = EMPTY
    stack[0] = start
    top = 1
    count = 0
    h = uint64(0)
    while top > 0:
        top -= 1
        p = stack[top]
        count += 1
        h ^= zob[p, color]
        for d in (-1, 1, -w, w):
            q = p + d
            if board[q] == color:
                board[q] = EMPTY
                stack[top] = q
                top += 1
    return count, h


@njit(cache=True)
def check_play(board, n, p, color, ko):
    """0 legal, 1 occupied, 2 suicide, 3 ko (ignores superko)."""
    if board[p] != EMPTY:
        return 1
    if p == ko:
        return 3
    w = n + 2
    size = board.shape[0]
    mark = np.zeros(size, dtype=np.int32)
    libmark = np.zeros(size, dtype=np.int32)
    stack = np.empty(size, dtype=np.int32)
    stamp = 0
    for d in (-1, 1, -w, w):
        q = p + d
        v = board[q]
        if v == EMPTY:
            return 0
        if v == BORDER:
            continue
        stamp += 1
        nl = _count_libs(board, w, q, 2, mark, stamp, libmark, stack)
        if v == color and nl >= 2:
            return 0
        if v != color and nl == 1:
            return 0
    return 2


@njit(cache=True)
def play_inplace(board, n, p, color, zob):
    """Place a (pre-validated) stone and resolve captures.

    Returns (stones captured, new simple-ko point or -1, stone-hash delta).
    """
    w = n + 2
    opp = 3 - color
    size = board.shape[0]
    board[p] = color
    delta = zob[p, color]
    mark = np.zeros(size, dtype=np.int32)
    libmark = np.zeros(size, dtype=np.int32)
    stack = np.empty(size, dtype=np.int32)
    stamp = 0
    captured = 0
    last_captured = -1
    for d in (-1, 1, -w, w):
        q = p + d
        if board[q] == opp:
            stamp += 1
            if _count_libs(board, w, q, 1, mark, stamp, libmark, stack) == 0:
                c, h = _remove_chain(board, w, q, zob)
                captured += c
                delta ^= h
                last_captured = q
    ko = -1
    if captured == 1:
        lone = True
        for d in (-1, 1, -w, w):
            if board[p + d] == color:
                lone = False
        if lone:
            stamp += 1
            if _count_libs(board, w, p, 2, mark, stamp, libmark, stack) == 1:
                ko = last_captured
    return captured, ko, delta


@njit(cache=True)
def area_score(board, n):
    """(black area, white area) under Tromp-Taylor rules."""
    w = n + 2
    size = board.shape[0]
    seen = np.zeros(size, dtype=np.bool_)
    stack = np.empty(size, dtype=np.int32)
    region = np.empty(size, dtype=np.int32)
    black = 0
    white = 0
    for p in range(size):
        v = board[p]
        if v == BLACK:
            black += 1
        elif v == WHITE:
            white += 1
        elif v == EMPTY and not seen[p]:
            seen[p] = True
            stack[0] = p
            top = 1
            nreg = 0
            touches_b = False
            touches_w = False
            while top > 0:
                top -= 1
                q = stack[top]
                region[nreg] = q
                nreg += 1
                for d in (-1, 1, -w, w):
                    x = q + d
                    u = board[x]
                    if u == EMPTY:
                        if not seen[x]:
                            seen[x] = True
                            stack[top] = x
                            top += 1
                    elif u == BLACK:
                        touches_b = True
                    elif u == WHITE:
                        touches_w = True
            if touches_b and not touches_w:
                black += nreg
            elif touches_w and not touches_b:
                white += nreg
    return black, white


@njit(cache=True)
def is_eye(board, w, p, color):
    """Single-point true eye of ``color`` at empty point ``p``."""
    for d in (-1, 1, -w, w):
        v = board[p + d]
        if v != color and v != BORDER:
            return False
    opp = 3 - color
    bad = 0
    edge = False
    for d in (-w - 1, -w + 1, w - 1, w + 1):
        v = board[p + d]
        if v == BORDER:
            edge = True
        elif v == opp:
            bad += 1
    if edge:
        bad += 1
    return bad < 2


@njit(cache=True)
def rollout_mask(board, n, color, ko):
    """Flat mask of legal plays that do not fill one of ``color``'s own eyes."""
    w = n + 2
    pts, _ = legal_plays(board, n, color, ko, uint64(0))
    mask = np.zeros(n * n, dtype=np.bool_)
    for i in range(pts.shape[0]):
        f = pts[i]
        p = (f // n + 1) * w + f % n + 1
        if not is_eye(board, w, p, color):
            mask[f] = True
    return mask


@njit(cache=True)
def playout(boards, colors, kos, passes, moves, n, cap, rng):
    """Run every lane to a terminal state with the uniform rollout policy.

    Each ply draws candidate points uniformly without replacement until one
    is a legal non-eye play, which is exactly a uniform draw from that set;
    if none exists the lane passes.  Terminal: two passes or ``cap`` plies.
    """
    w = n + 2
    size = boards.shape[1]
    mark = np.zeros(size, dtype=np.int32)
    libmark = np.zeros(size, dtype=np.int32)
    stack = np.empty(size, dtype=np.int32)
    cand = np.empty(n * n, dtype=np.int32)
    zob = ZOBRIST
    stamp = 0
    for b in range(boards.shape[0]):
        board = boards[b]
        while passes[b] < 2 and moves[b] < cap:
            color = colors[b]
            ko = kos[b]
            m = 0
            for p in range(size):
                if board[p] == EMPTY:
                    cand[m] = p
                    m += 1
            chosen = -1
            while m > 0:
                k = below(rng, m)
                p = cand[k]
                m -= 1
                cand[k] = cand[m]
                if p == ko or is_eye(board, w, p, color):
                    continue
                ok = False
                for d in (-1, 1, -w, w):
                    q = p + d
                    v = board[q]
                    if v == EMPTY:
                        ok = True
                        break
                    if v == BORDER:
                        continue
                    stamp += 1
                    nl = _count_libs(board, w, q, 2, mark, stamp, libmark, stack)
                    if (v == color and nl >= 2) or (v != color and nl == 1):
                        ok = True
                        break
                if ok:
                    chosen = p
                    break
            if chosen < 0:
                passes[b] += 1
                kos[b] = -1
            else:
                _, ko2, _ = play_inplace(board, n, chosen, color, zob)
                kos[b] = ko2
                passes[b] = 0
            colors[b] = 3 - color
            moves[b] += 1
