"""Hot simulation kernels.

Two interchangeable backends compute exactly the same integers:

* ``numba`` - ``@njit``-compiled tick loops (default when numba imports).
* ``numpy`` - vectorized per-tick operations, no compilation.

Selection: environment variable ``GRIDROUTER_BACKEND`` set to ``numba``,
``numpy`` or ``auto`` (default).  ``benchmarks/bench_backends.py`` compares
the two on identical workloads.

Grid encoding shared by both backends:

* ``arrow_color[m, n]``: int8, -1 for none, else Color value.
* ``arrow_dir[m, n]``:   int8, direction value (N=0 E=1 S=2 W=3).
* ``sink[m, n]``:        int8, -1 for none, else sink color.

Packets travel one cell per tick; a packet entering a cell with a
same-color arrow adopts the arrow's direction; entering any sink resolves
it (+1 correct, -1 wrong); leaving the grid resolves -1.  Emitted packets
appear in their entry cell on the emission tick and do not move until the
next tick.
"""

from __future__ import annotations

import os

import numpy as np

_DR = np.array([-1, 0, 1, 0], dtype=np.int64)
_DC = np.array([0, 1, 0, -1], dtype=np.int64)

# splitmix64 constants for the commutative per-tick packet-multiset hash
_H1 = np.uint64(0x9E3779B97F4A7C15)
_H2 = np.uint64(0xBF58476D1CE4E5B9)
_H3 = np.uint64(0x94D049BB133111EB)


def _requested_backend() -> str:
    return os.environ.get("GRIDROUTER_BACKEND", "auto").strip().lower()


_HAVE_NUMBA = False
if _requested_backend() in ("auto", "numba"):
    try:
        from numba import njit

        _HAVE_NUMBA = True
    except ImportError:
        if _requested_backend() == "numba":
            raise
        _HAVE_NUMBA = False

if _requested_backend() == "numba" and not _HAVE_NUMBA:
    raise RuntimeError("GRIDROUTER_BACKEND=numba but numba is not importable")

BACKEND = "numba" if (_HAVE_NUMBA and _requested_backend() != "numpy") else "numpy"


def _mix64(x):
    """splitmix64 finalizer; works on uint64 scalars and arrays."""
    x = (x + _H1) & np.uint64(0xFFFFFFFFFFFFFFFF)
    x ^= x >> np.uint64(30)
    x = (x * _H2) & np.uint64(0xFFFFFFFFFFFFFFFF)
    x ^= x >> np.uint64(27)
    x = (x * _H3) & np.uint64(0xFFFFFFFFFFFFFFFF)
    x ^= x >> np.uint64(31)
    return x


def packet_key(r, c, color, heading):
    """64-bit key of one packet; the multiset hash is the wrapping sum."""
    v = np.uint64(r) << np.uint64(24)
    v |= np.uint64(c) << np.uint64(8)
    v |= np.uint64(color) << np.uint64(4)
    v |= np.uint64(heading)
    return _mix64(v)


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------

def _span_numpy(
    arrow_color,
    arrow_dir,
    sink,
    pr,
    pc,
    pcol,
    phd,
    emit_tick,
    emit_r,
    emit_c,
    emit_col,
    emit_hd,
    t0,
    t1,
    bar0,
    want_hash,
):
    m, n = sink.shape
    nticks = t1 - t0
    bars = np.empty(nticks, dtype=np.int64)
    hashes = np.zeros(nticks, dtype=np.uint64) if want_hash else None

    ei = 0
    ne = len(emit_tick)
    bar = bar0
    for j in range(nticks):
        t = t0 + 1 + j
        delta = 0
        if len(pr):
            nr = pr + _DR[phd]
            nc = pc + _DC[phd]
            inside = (nr >= 0) & (nr < m) & (nc >= 0) & (nc < n)
            delta -= int(np.count_nonzero(~inside))
            nr, nc, col, hd = nr[inside], nc[inside], pcol[inside], phd[inside]
            s = sink[nr, nc]
            absorbed = s >= 0
            if absorbed.any():
                delta += int(np.count_nonzero(s == col)) - int(
                    np.count_nonzero(absorbed & (s != col))
                )
                keep = ~absorbed
                nr, nc, col, hd = nr[keep], nc[keep], col[keep], hd[keep]
            ac = arrow_color[nr, nc]
            turn = ac == col
            hd = np.where(turn, arrow_dir[nr, nc], hd)
            pr, pc, pcol, phd = nr, nc, col, hd
        while ei < ne and emit_tick[ei] == t:
            r, c = int(emit_r[ei]), int(emit_c[ei])
            color = int(emit_col[ei])
            hd = int(emit_hd[ei])
            s = int(sink[r, c])
            if s >= 0:
                delta += 1 if s == color else -1
            else:
                if arrow_color[r, c] == color:
                    hd = int(arrow_dir[r, c])
                pr = np.append(pr, r)
                pc = np.append(pc, c)
                pcol = np.append(pcol, color)
                phd = np.append(phd, hd)
            ei += 1
        bar += delta
        bars[j] = bar
        if want_hash:
            if len(pr):
                v = (
                    pr.astype(np.uint64) << np.uint64(24)
                    | pc.astype(np.uint64) << np.uint64(8)
                    | pcol.astype(np.uint64) << np.uint64(4)
                    | phd.astype(np.uint64)
                )
                hashes[j] = np.sum(_mix64(v), dtype=np.uint64)
            else:
                hashes[j] = np.uint64(0)
    return bars, hashes, pr, pc, pcol, phd


def _scan_numpy(
    bar0,
    t0,
    t1,
    lo,
    hi,
    shot_tick,
    shot_delta,
    prog_first,
    prog_period,
    prog_delta,
):
    """First tick in (t0, t1] where the bar leaves [lo, hi); -1 if none.

    Deltas: one-shot (tick, delta) pairs plus arithmetic progressions
    first + k*period, each contributing prog_delta.  Returns
    (kind, tick, bar_at_t1) with kind -1 none / 0 low / 1 high.
    """
    bar = bar0
    chunk = 1 << 16
    t = t0 + 1
    si = 0
    ns = len(shot_tick)
    while t <= t1:
        end = min(t1, t + chunk - 1)
        width = end - t + 1
        deltas = np.zeros(width, dtype=np.int64)
        while si < ns and shot_tick[si] <= end:
            deltas[shot_tick[si] - t] += shot_delta[si]
            si += 1
        for f, p, d in zip(prog_first, prog_period, prog_delta):
            first = f if f >= t else f + ((t - f + p - 1) // p) * p
            if first <= end:
                deltas[first - t :: p] += d
        run = bar + np.cumsum(deltas)
        low = run < lo
        high = run >= hi
        bad = low | high
        if bad.any():
            j = int(np.argmax(bad))
            return (0 if low[j] else 1), t + j, int(run[j])
        bar = int(run[-1])
        t = end + 1
    return -1, -1, bar


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

if BACKEND == "numba":

    @njit(cache=True)
    def _span_numba(
        arrow_color,
        arrow_dir,
        sink,
        pr,
        pc,
        pcol,
        phd,
        emit_tick,
        emit_r,
        emit_c,
        emit_col,
        emit_hd,
        t0,
        t1,
        bar0,
        want_hash,
        cap,
    ):
        m, n = sink.shape
        nticks = t1 - t0
        bars = np.empty(nticks, dtype=np.int64)
        hashes = np.zeros(nticks, dtype=np.uint64)

        r = np.empty(cap, dtype=np.int64)
        c = np.empty(cap, dtype=np.int64)
        col = np.empty(cap, dtype=np.int64)
        hd = np.empty(cap, dtype=np.int64)
        cnt = len(pr)
        for i in range(cnt):
            r[i] = pr[i]
            c[i] = pc[i]
            col[i] = pcol[i]
            hd[i] = phd[i]

        dr = (-1, 0, 1, 0)
        dc = (0, 1, 0, -1)
        ei = 0
        ne = len(emit_tick)
        bar = bar0
        hcur = np.uint64(0)
        if want_hash:
            for i in range(cnt):
                hcur += _key_numba(r[i], c[i], col[i], hd[i])

        for j in range(nticks):
            t = t0 + 1 + j
            delta = 0
            w = 0
            for i in range(cnt):
                nr = r[i] + dr[hd[i]]
                nc = c[i] + dc[hd[i]]
                if nr < 0 or nr >= m or nc < 0 or nc >= n:
                    delta -= 1
                    if want_hash:
                        hcur -= _key_numba(r[i], c[i], col[i], hd[i])
                    continue
                s = sink[nr, nc]
                if s >= 0:
                    delta += 1 if s == col[i] else -1
                    if want_hash:
                        hcur -= _key_numba(r[i], c[i], col[i], hd[i])
                    continue
                nh = hd[i]
                if arrow_color[nr, nc] == col[i]:
                    nh = arrow_dir[nr, nc]
                if want_hash:
                    hcur -= _key_numba(r[i], c[i], col[i], hd[i])
                    hcur += _key_numba(nr, nc, col[i], nh)
                r[w] = nr
                c[w] = nc
                col[w] = col[i]
                hd[w] = nh
                w += 1
            cnt = w
            while ei < ne and emit_tick[ei] == t:
                er = emit_r[ei]
                ec = emit_c[ei]
                ecol = emit_col[ei]
                ehd = emit_hd[ei]
                s = sink[er, ec]
                if s >= 0:
                    delta += 1 if s == ecol else -1
                else:
                    if arrow_color[er, ec] == ecol:
                        ehd = arrow_dir[er, ec]
                    r[cnt] = er
                    c[cnt] = ec
                    col[cnt] = ecol
                    hd[cnt] = ehd
                    if want_hash:
                        hcur += _key_numba(er, ec, ecol, ehd)
                    cnt += 1
                ei += 1
            bar += delta
            bars[j] = bar
            if want_hash:
                hashes[j] = hcur
        return bars, hashes, r[:cnt].copy(), c[:cnt].copy(), col[:cnt].copy(), hd[:cnt].copy()

    @njit(cache=True, inline="always")
    def _key_numba(r, c, color, heading):
        x = np.uint64((r << 24) | (c << 8) | (color << 4) | heading)
        x = x + np.uint64(0x9E3779B97F4A7C15)
        x ^= x >> np.uint64(30)
        x = x * np.uint64(0xBF58476D1CE4E5B9)
        x ^= x >> np.uint64(27)
        x = x * np.uint64(0x94D049BB133111EB)
        x ^= x >> np.uint64(31)
        return x

    @njit(cache=True)
    def _scan_numba(
        bar0,
        t0,
        t1,
        lo,
        hi,
        shot_tick,
        shot_delta,
        prog_first,
        prog_period,
        prog_delta,
    ):
        bar = bar0
        si = 0
        ns = len(shot_tick)
        np_ = len(prog_first)
        for t in range(t0 + 1, t1 + 1):
            d = 0
            while si < ns and shot_tick[si] == t:
                d += shot_delta[si]
                si += 1
            for i in range(np_):
                off = t - prog_first[i]
                if off >= 0 and off % prog_period[i] == 0:
                    d += prog_delta[i]
            bar += d
            if bar < lo:
                return 0, t, bar
            if bar >= hi:
                return 1, t, bar
        return -1, -1, bar


# ---------------------------------------------------------------------------
# public dispatch
# ---------------------------------------------------------------------------

def simulate_span(
    grids,
    packets,
    emissions,
    t0,
    t1,
    bar0,
    want_hash=False,
):
    """Advance a packet multiset from tick t0 to t1 under a constant field.

    ``grids``: (arrow_color, arrow_dir, sink) int8 arrays.
    ``packets``: (r, c, color, heading) int64 arrays, the multiset at t0.
    ``emissions``: (tick, r, c, color, heading) int64 arrays sorted by tick,
    all ticks in (t0, t1].

    Returns (bars, hashes, packets') where ``bars[j]`` is the bar after all
    deltas of tick t0+1+j and ``hashes[j]`` the commutative multiset hash.
    """
    arrow_color, arrow_dir, sink = grids
    pr, pc, pcol, phd = packets
    emit_tick, emit_r, emit_c, emit_col, emit_hd = emissions
    if BACKEND == "numba":
        cap = len(pr) + len(emit_tick) + 1
        bars, hashes, r, c, col, hd = _span_numba(
            arrow_color,
            arrow_dir,
            sink,
            pr,
            pc,
            pcol,
            phd,
            emit_tick,
            emit_r,
            emit_c,
            emit_col,
            emit_hd,
            t0,
            t1,
            bar0,
            want_hash,
            cap,
        )
    else:
        bars, hashes, r, c, col, hd = _span_numpy(
            arrow_color,
            arrow_dir,
            sink,
            pr.copy(),
            pc.copy(),
            pcol.copy(),
            phd.copy(),
            emit_tick,
            emit_r,
            emit_c,
            emit_col,
            emit_hd,
            t0,
            t1,
            bar0,
            want_hash,
        )
        if hashes is None:
            hashes = np.zeros(t1 - t0, dtype=np.uint64)
    return bars, hashes, (r, c, col, hd)


def scan_crossings(bar0, t0, t1, lo, hi, one_shots, progressions):
    """First bar crossing out of [lo, hi) in ticks (t0, t1].

    ``one_shots``: (ticks, deltas) sorted int64 arrays.
    ``progressions``: (first, period, delta) int64 arrays.
    Returns (kind, tick, bar_at_end): kind -1 none, 0 below lo, 1 at/above hi.
    """
    shot_tick, shot_delta = one_shots
    prog_first, prog_period, prog_delta = progressions
    if BACKEND == "numba":
        return _scan_numba(
            bar0, t0, t1, lo, hi, shot_tick, shot_delta, prog_first, prog_period, prog_delta
        )
    return _scan_numpy(
        bar0, t0, t1, lo, hi, shot_tick, shot_delta, prog_first, prog_period, prog_delta
    )
