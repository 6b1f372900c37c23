"""Perfect-layout theory for three-sink boards.

A *perfect layout* routes every packet entering from any boundary edge to
the sink of its color.  The pipeline implemented here:

* classify the sink pattern (C, I, J, L, Y, /) by compressing to occupied
  rows/columns and canonicalizing under rotation/reflection/recoloring;
* check the three perfectibility conditions (sink clearance, forbidden
  local sink configurations, per-type size bounds);
* search for a coloring of the cells whose per-color visibility graphs
  are all connected (backtracking with connectivity pruning, run on a
  shrunken minimal board and lifted back);
* orient arrows along the visibility structure and verify the result by
  exhaustively tracing every (boundary edge x color) stream.

Naming of the sink classes is frozen here and in the docs: within the
two (2,3) classes, C has the lone sink's column strictly between the
paired sinks' columns and J outside; within the two (3,3) classes, / is
the monotone diagonal and Y the bent one.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .engine import OutcomeKind, boundary_edges, trace_path
from .model import Arrow, Board, Cell, Color, COLORS, Direction


class SinkType(Enum):
    C = "C"
    I = "I"
    J = "J"
    L = "L"
    Y = "Y"
    SLASH = "/"


# Minimal "size at least" bounds per type; (a, b) admits any board with
# (m >= a and n >= b) or (m >= b and n >= a).
MIN_SIZES = {
    SinkType.I: ((7, 7), (6, 9), (5, 11)),
    SinkType.L: ((7, 7), (6, 9)),
    SinkType.C: ((7, 8), (6, 9)),
    SinkType.J: ((7, 8), (6, 9)),
    SinkType.Y: ((7, 8),),
    SinkType.SLASH: ((7, 8),),
}


def occupied_counts(board: Board) -> tuple[int, int]:
    """(p, q): number of rows / columns containing at least one sink."""
    rows = {cell[0] for cell in board.sinks.values()}
    cols = {cell[1] for cell in board.sinks.values()}
    return len(rows), len(cols)


def classify_sinks(board: Board) -> SinkType:
    """Sink-pattern class, invariant under rotation, reflection,
    recoloring and empty row/column insertion."""
    cells = list(board.sinks.values())
    p, q = occupied_counts(board)
    if {p, q} == {1, 3}:
        return SinkType.I
    if (p, q) == (2, 2):
        return SinkType.L
    if {p, q} == {2, 3}:
        if q == 2:  # orient so the sink pair shares a row
            cells = [(c, r) for r, c in cells]
        rows: dict[int, list[int]] = {}
        for r, c in cells:
            rows.setdefault(r, []).append(c)
        pair_cols = next(cs for cs in rows.values() if len(cs) == 2)
        lone_col = next(cs for cs in rows.values() if len(cs) == 1)[0]
        between = min(pair_cols) < lone_col < max(pair_cols)
        return SinkType.C if between else SinkType.J
    # p == q == 3: rank-compress to a 3x3 permutation
    row_rank = {r: i for i, r in enumerate(sorted({r for r, _ in cells}))}
    col_rank = {c: i for i, c in enumerate(sorted({c for _, c in cells}))}
    perm = [0, 0, 0]
    for r, c in cells:
        perm[row_rank[r]] = col_rank[c]
    if perm in ([0, 1, 2], [2, 1, 0]):
        return SinkType.SLASH
    return SinkType.Y


def size_inequality(c: int, m: int, n: int, p: int, q: int) -> bool:
    """Area constraint c(m+n) + (c-2)(p+q) <= mn - c."""
    return c * (m + n) + (c - 2) * (p + q) <= m * n - c


@dataclass(frozen=True)
class Violation:
    kind: str  # "sink_distance" | "impossible_config" | "size_bound"
    detail: str
    cells: tuple[Cell, ...] = ()


def _gaps(board: Board, cell: Cell) -> dict[Direction, int]:
    r, c = cell
    return {
        Direction.N: r,
        Direction.S: board.rows - 1 - r,
        Direction.W: c,
        Direction.E: board.cols - 1 - c,
    }


def _blank_gap_counts(board: Board, cell: Cell) -> dict[Direction, int]:
    """Blank cells between the sink and each boundary along its row/col."""
    r, c = cell
    sinks = board.sink_cells
    out = {}
    out[Direction.N] = sum(1 for i in range(r) if (i, c) not in sinks)
    out[Direction.S] = sum(1 for i in range(r + 1, board.rows) if (i, c) not in sinks)
    out[Direction.W] = sum(1 for j in range(c) if (r, j) not in sinks)
    out[Direction.E] = sum(1 for j in range(c + 1, board.cols) if (r, j) not in sinks)
    return out


def _impossible_config(board: Board) -> Optional[Violation]:
    """The four local sink configurations with no perfect layout.

    Implemented as direction-symmetric predicates (equivalent to matching
    the four patterns over all rotations/reflections/recolorings):

    a) a sink exactly two cells from three boundaries, adjacent to a sink;
    b) a sink exactly two cells from two incident boundaries, with sinks
       adjacent on both remaining sides;
    c) a sink exactly two cells from two opposite boundaries, with sinks
       adjacent on both sides of the other axis;
    d) a sink exactly two cells from three boundaries, then one blank cell
       and a pair of adjacent sinks along the fourth direction.
    """
    sinks = board.sink_cells

    def sink_at(r, c):
        return (r, c) in sinks and board.in_bounds((r, c))

    for cell in sinks:
        r, c = cell
        gaps = _gaps(board, cell)
        tight = [d for d in Direction if gaps[d] == 2]
        neighbors = [
            d for d in Direction if sink_at(r + d.delta[0], c + d.delta[1])
        ]
        if len(tight) >= 3 and neighbors:
            return Violation(
                "impossible_config", "a: boxed-in sink with an adjacent sink", (cell,)
            )
        if len(neighbors) >= 2:
            for d1, d2 in itertools.combinations(Direction, 2):
                if d1.opposite == d2:
                    continue
                if gaps[d1] == 2 and gaps[d2] == 2:
                    rest = [d for d in Direction if d not in (d1, d2)]
                    if all(d in neighbors for d in rest):
                        return Violation(
                            "impossible_config",
                            "b: corner-tight sink between two adjacent sinks",
                            (cell,),
                        )
            for d1 in (Direction.N, Direction.W):
                d2 = d1.opposite
                if gaps[d1] == 2 and gaps[d2] == 2:
                    rest = [d for d in Direction if d not in (d1, d2)]
                    if all(d in neighbors for d in rest):
                        return Violation(
                            "impossible_config",
                            "c: corridor sink between two adjacent sinks",
                            (cell,),
                        )
        if len(tight) >= 3:
            for d in Direction:
                dr, dc = d.delta
                one = (r + dr, c + dc)
                two = (r + 2 * dr, c + 2 * dc)
                three = (r + 3 * dr, c + 3 * dc)
                if (
                    board.in_bounds(one)
                    and one not in sinks
                    and two in sinks
                    and three in sinks
                ):
                    return Violation(
                        "impossible_config",
                        "d: boxed-in sink one blank from an adjacent sink pair",
                        (cell, two, three),
                    )
    return None


def check_perfectibility(board: Board) -> Optional[Violation]:
    """None when the board admits a perfect layout, else the first
    violated condition (clearance, forbidden configuration, size)."""
    for color in COLORS:
        cell = board.sinks[color]
        blanks = _blank_gap_counts(board, cell)
        for d, count in blanks.items():
            if count < 2:
                return Violation(
                    "sink_distance",
                    f"{color.name} sink has {count} blank cell(s) toward {d.name}",
                    (cell,),
                )
    bad = _impossible_config(board)
    if bad is not None:
        return bad
    stype = classify_sinks(board)
    m, n = board.rows, board.cols
    for a, b in MIN_SIZES[stype]:
        if (m >= a and n >= b) or (m >= b and n >= a):
            return None
    return Violation(
        "size_bound",
        f"type {stype.value} board is {m}x{n}, below its minimal sizes",
        tuple(board.sinks.values()),
    )


# ---------------------------------------------------------------------------
# Colorings and visibility graphs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Coloring:
    """Total cell coloring; sinks keep their own color."""

    rows: int
    cols: int
    grid: tuple[tuple[Color, ...], ...]

    def color_at(self, cell: Cell) -> Color:
        return self.grid[cell[0]][cell[1]]

    @staticmethod
    def from_lists(rows: int, cols: int, grid) -> "Coloring":
        return Coloring(rows, cols, tuple(tuple(Color(v) for v in row) for row in grid))


def _row_segments(board: Board, color: Color):
    """Per row, the maximal column ranges not blocked by other-color
    sinks; yields (row, lo, hi) with columns lo..hi inclusive."""
    blockers = {
        cell for col, cell in board.sinks.items() if col != color
    }
    for r in range(board.rows):
        lo = 0
        for c in range(board.cols + 1):
            if c == board.cols or (r, c) in blockers:
                if c > lo:
                    yield r, lo, c - 1
                lo = c + 1


def _col_segments(board: Board, color: Color):
    blockers = {
        cell for col, cell in board.sinks.items() if col != color
    }
    for c in range(board.cols):
        lo = 0
        for r in range(board.rows + 1):
            if r == board.rows or (r, c) in blockers:
                if r > lo:
                    yield c, lo, r - 1
                lo = r + 1


class _DSU:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


def visibility_components(coloring: Coloring, board: Board) -> tuple[int, int, int]:
    """Number of connected components of each color's visibility graph
    (cells of that color, the 2(m+n) boundary edges, same-row/column
    visibility not crossing other-color sinks).  1 means connected."""
    m, n = board.rows, board.cols
    counts = []
    for color in COLORS:
        cells = [
            (r, c)
            for r in range(m)
            for c in range(n)
            if coloring.color_at((r, c)) == color and board.sink_at((r, c)) in (None, color)
        ]
        index = {cell: i for i, cell in enumerate(cells)}
        n_edges = 2 * (m + n)
        dsu = _DSU(len(cells) + n_edges)

        def edge_id(side: Direction, i: int) -> int:
            base = len(cells)
            if side == Direction.W:
                return base + i
            if side == Direction.E:
                return base + m + i
            if side == Direction.N:
                return base + 2 * m + i
            return base + 2 * m + n + i

        for r, lo, hi in _row_segments(board, color):
            members = [index[(r, c)] for c in range(lo, hi + 1) if (r, c) in index]
            for a, b in zip(members, members[1:]):
                dsu.union(a, b)
            if members:
                if lo == 0:
                    dsu.union(edge_id(Direction.W, r), members[0])
                if hi == n - 1:
                    dsu.union(edge_id(Direction.E, r), members[0])
        for c, lo, hi in _col_segments(board, color):
            members = [index[(r, c)] for r in range(lo, hi + 1) if (r, c) in index]
            for a, b in zip(members, members[1:]):
                dsu.union(a, b)
            if members:
                if lo == 0:
                    dsu.union(edge_id(Direction.N, c), members[0])
                if hi == m - 1:
                    dsu.union(edge_id(Direction.S, c), members[0])
        roots = {dsu.find(i) for i in range(len(cells) + n_edges)}
        counts.append(len(roots))
    return tuple(counts)


class Disconnected(Exception):
    def __init__(self, color: Color):
        super().__init__(f"visibility graph of {color.name} is not connected")
        self.color = color


def orient_arrows(coloring: Coloring, board: Board) -> list[Arrow]:
    """Turn a connected coloring into a verified-perfect arrow layout.

    Cells settle outward from each sink: a cell is oriented toward the
    first same-color cell (or the sink) along some axis direction whose
    route to the sink is already settled and not blocked by another
    sink.  Packets then strictly follow settle order, so every stream
    terminates at the correct sink.
    """
    m, n = board.rows, board.cols
    sinks = board.sinks
    arrows: list[Arrow] = []
    for color in COLORS:
        mine = [
            (r, c)
            for r in range(m)
            for c in range(n)
            if coloring.color_at((r, c)) == color and board.sink_at((r, c)) is None
        ]
        blockers = {cell for col, cell in sinks.items() if col != color}
        own_sink = sinks[color]
        settled = {own_sink}
        pending = list(mine)
        chosen: dict[Cell, Direction] = {}
        progress = True
        while pending and progress:
            progress = False
            still = []
            for cell in pending:
                direction = _settled_ray(
                    cell, color, coloring, blockers, own_sink, settled, m, n
                )
                if direction is None:
                    still.append(cell)
                else:
                    chosen[cell] = direction
                    settled.add(cell)
                    progress = True
            pending = still
        if pending:
            raise Disconnected(color)
        # every boundary edge must see a cell of this color
        for side, i in boundary_edges(board):
            if not _edge_sees(board, coloring, color, side, i):
                raise Disconnected(color)
        arrows.extend((cell, color, d) for cell, d in chosen.items())
    return sorted(arrows)


def _settled_ray(cell, color, coloring, blockers, own_sink, settled, m, n):
    r, c = cell
    for d in Direction:
        dr, dc = d.delta
        rr, cc = r + dr, c + dc
        while 0 <= rr < m and 0 <= cc < n:
            if (rr, cc) in blockers:
                break
            if (rr, cc) == own_sink:
                return d
            if coloring.color_at((rr, cc)) == color:
                if (rr, cc) in settled:
                    return d
                break
            rr += dr
            cc += dc
    return None


def _edge_sees(board: Board, coloring: Coloring, color: Color, side: Direction, i: int) -> bool:
    m, n = board.rows, board.cols
    if side in (Direction.W, Direction.E):
        cols = range(n) if side == Direction.W else range(n - 1, -1, -1)
        for c in cols:
            cell = (i, c)
            sink = board.sink_at(cell)
            if sink is not None and sink != color:
                return False
            if coloring.color_at(cell) == color:
                return True
        return False
    rows = range(m) if side == Direction.N else range(m - 1, -1, -1)
    for r in rows:
        cell = (r, i)
        sink = board.sink_at(cell)
        if sink is not None and sink != color:
            return False
        if coloring.color_at(cell) == color:
            return True
    return False


@dataclass
class LayoutReport:
    perfect: bool
    failures: list[tuple[Direction, int, Color, OutcomeKind]] = field(default_factory=list)


def verify_perfect_layout(board: Board, layout: Iterable[Arrow]) -> LayoutReport:
    """Trace all 2(m+n) x 3 streams; perfect iff every one reaches its
    own sink."""
    loaded = board.with_arrows(layout)
    failures = []
    for side, i in boundary_edges(board):
        for color in COLORS:
            out = trace_path(loaded, side, i, color)
            if out.kind is not OutcomeKind.CORRECT_SINK:
                failures.append((side, i, color, out.kind))
    return LayoutReport(perfect=not failures, failures=failures)


# ---------------------------------------------------------------------------
# Board transforms (dihedral group + recoloring)
# ---------------------------------------------------------------------------

TRANSFORMS = tuple((flip, rot) for flip in (0, 1) for rot in range(4))


def _map_cell(cell: Cell, m: int, n: int, flip: int, rot: int) -> tuple[Cell, int, int]:
    """Apply flip (horizontal mirror) then rot x 90deg cw; returns the new
    cell and the transformed grid dimensions."""
    r, c = cell
    if flip:
        c = n - 1 - c
    for _ in range(rot):
        r, c = c, m - 1 - r
        m, n = n, m
    return (r, c), m, n


def transform_dims(m: int, n: int, flip: int, rot: int) -> tuple[int, int]:
    return (n, m) if rot % 2 else (m, n)


def transform_board(board: Board, flip: int, rot: int, recolor=None) -> Board:
    recolor = recolor or {c: c for c in COLORS}
    m, n = board.rows, board.cols
    sinks = {}
    for color, cell in board.sinks.items():
        new_cell, nm, nn = _map_cell(cell, m, n, flip, rot)
        sinks[recolor[color]] = new_cell
    nm, nn = transform_dims(m, n, flip, rot)
    return Board(nm, nn, sinks)


def transform_coloring(coloring: Coloring, m: int, n: int, flip: int, rot: int, recolor=None) -> Coloring:
    recolor = recolor or {c: c for c in COLORS}
    nm, nn = transform_dims(m, n, flip, rot)
    grid = [[Color.RED] * nn for _ in range(nm)]
    for r in range(m):
        for c in range(n):
            (nr, nc), _, _ = _map_cell((r, c), m, n, flip, rot)
            grid[nr][nc] = recolor[coloring.color_at((r, c))]
    return Coloring.from_lists(nm, nn, grid)


# ---------------------------------------------------------------------------
# Minimal-board coloring search
# ---------------------------------------------------------------------------

class SearchBudgetExceeded(Exception):
    pass


class _ColoringSearch:
    """Backtracking over free cells in column-major order, colors in
    RED<GREEN<BLUE order.

    Prunes:

    * boundary-edge coverage pigeonhole per visible segment (every edge
      must end up seeing every color);
    * optimistic reachability: for each color, union row- and column-
      segments linked by any cell that is that color or still unassigned;
      any segment holding that color (or owing an edge requirement) that
      cannot even optimistically reach the sink kills the branch.
    """

    def __init__(self, board: Board, node_budget: int = 30_000_000):
        self.board = board
        self.m, self.n = board.rows, board.cols
        self.node_budget = node_budget
        self.nodes = 0
        m, n = self.m, self.n
        self.idx = {(r, c): r * n + c for r in range(m) for c in range(n)}
        self.color = [-1] * (m * n)
        self.sink_idx = {}
        for color, cell in board.sinks.items():
            self.color[self.idx[cell]] = color.value
            self.sink_idx[color.value] = self.idx[cell]
        free_set = {
            self.idx[(r, c)]
            for r in range(m)
            for c in range(n)
            if board.sink_at((r, c)) is None
        }
        self.free = [
            self.idx[(r, c)]
            for c in range(n)
            for r in range(m)
            if self.idx[(r, c)] in free_set
        ]

        # Segment structure per color: ids over row segments then column
        # segments; every non-blocker cell links one of each.
        self.nsegs = [0, 0, 0]
        self.cell_pair: list[dict[int, tuple[int, int]]] = [dict() for _ in range(3)]
        self.seg_colored: list[list[int]] = [[] for _ in range(3)]
        self.seg_unassigned: list[list[int]] = [[] for _ in range(3)]
        seg_members: list[list[list[int]]] = [[] for _ in range(3)]
        for ci, color in enumerate(COLORS):
            row_of_cell: dict[int, int] = {}
            segs: list[list[int]] = []
            for r, lo, hi in _row_segments(board, color):
                sid = len(segs)
                members = [self.idx[(r, c)] for c in range(lo, hi + 1)]
                segs.append(members)
                for z in members:
                    row_of_cell[z] = sid
            nrow = len(segs)
            for c, lo, hi in _col_segments(board, color):
                sid = len(segs)
                members = [self.idx[(r, c)] for r in range(lo, hi + 1)]
                segs.append(members)
                for z in members:
                    self.cell_pair[ci][z] = (row_of_cell[z], sid)
            self.nsegs[ci] = len(segs)
            seg_members[ci] = segs
            self.seg_colored[ci] = [0] * len(segs)
            self.seg_unassigned[ci] = [
                sum(1 for z in ms if z in free_set) for ms in segs
            ]
            s = self.sink_idx[ci]
            rs, cs = self.cell_pair[ci][s]
            self.seg_colored[ci][rs] += 1
            self.seg_colored[ci][cs] += 1

        # Cells taking part in each color's potential-connectivity check:
        # free cells plus the color's own sink.
        self.link_cells: list[list[tuple[int, int, int]]] = [[], [], []]
        for ci in range(3):
            for z, (rs, cs) in sorted(self.cell_pair[ci].items()):
                if z in free_set or z == self.sink_idx[ci]:
                    self.link_cells[ci].append((z, rs, cs))

        # Edge-coverage requirement buckets, grouped by member set.
        self.impossible = False
        raw: dict[tuple[int, ...], set[int]] = {}
        self.req_segs: list[list[int]] = [[], [], []]  # unsat edge segment ids
        for side, i in boundary_edges(board):
            for ci, color in enumerate(COLORS):
                members = self._edge_members(side, i, color)
                if members is None:
                    continue
                if not members:
                    self.impossible = True
                    continue
                raw.setdefault(tuple(members), set()).add(ci)
                any_cell = members[0]
                sid = (
                    self.cell_pair[ci][any_cell][0]
                    if side in (Direction.W, Direction.E)
                    else self.cell_pair[ci][any_cell][1]
                )
                if sid not in self.req_segs[ci]:
                    self.req_segs[ci].append(sid)
        self.buckets = []
        self.cell_buckets: dict[int, list[int]] = {z: [] for z in self.free}
        for cells, needed in sorted(raw.items()):
            bid = len(self.buckets)
            self.buckets.append(
                {"cells": cells, "n_unassigned": len(cells), "needed": set(needed)}
            )
            for z in cells:
                self.cell_buckets[z].append(bid)
        self.sink_seg = [self.cell_pair[ci][self.sink_idx[ci]][0] for ci in range(3)]
        self.trail: list = []

    def _edge_members(self, side: Direction, i: int, color: Color):
        """Free cells visible from the edge for this color, or None when
        the color's own sink is visible (requirement pre-satisfied)."""
        board = self.board
        m, n = self.m, self.n
        if side in (Direction.W, Direction.E):
            cols = range(n) if side == Direction.W else range(n - 1, -1, -1)
            scan = [(i, c) for c in cols]
        else:
            rows = range(m) if side == Direction.N else range(m - 1, -1, -1)
            scan = [(r, i) for r in rows]
        cells = []
        for cell in scan:
            sink = board.sink_at(cell)
            if sink is not None:
                if sink == color:
                    return None
                break
            cells.append(self.idx[cell])
        return sorted(cells)

    def _undo_to(self, mark: int):
        while len(self.trail) > mark:
            tag, a, b = self.trail.pop()
            if tag == 0:  # color
                self.color[a] = -1
            elif tag == 1:  # seg_unassigned
                self.seg_unassigned[a][b] += 1
            elif tag == 2:  # seg_colored
                self.seg_colored[a][b] -= 1
            elif tag == 3:  # bucket n_unassigned
                self.buckets[a]["n_unassigned"] += 1
            else:  # bucket needed
                self.buckets[a]["needed"].add(b)

    def _assign(self, z: int, ci: int, forced: list) -> bool:
        if self.color[z] != -1:
            return self.color[z] == ci
        self.color[z] = ci
        self.trail.append((0, z, 0))
        for bid in self.cell_buckets[z]:
            b = self.buckets[bid]
            b["n_unassigned"] -= 1
            self.trail.append((3, bid, 0))
            if ci in b["needed"]:
                b["needed"].discard(ci)
                self.trail.append((4, bid, ci))
            need = len(b["needed"])
            if need > b["n_unassigned"]:
                return False
            if need == b["n_unassigned"] == 1:
                rest = next(w for w in b["cells"] if self.color[w] == -1)
                forced.append((rest, next(iter(b["needed"]))))
        for cj in range(3):
            pair = self.cell_pair[cj].get(z)
            if pair is None:
                continue
            rs, cs = pair
            self.seg_unassigned[cj][rs] -= 1
            self.trail.append((1, cj, rs))
            self.seg_unassigned[cj][cs] -= 1
            self.trail.append((1, cj, cs))
        rs, cs = self.cell_pair[ci][z]
        self.seg_colored[ci][rs] += 1
        self.trail.append((2, ci, rs))
        self.seg_colored[ci][cs] += 1
        self.trail.append((2, ci, cs))
        return True

    def _reachable(self) -> bool:
        """Optimistic-connectivity prune over all three colors."""
        color = self.color
        for ci in range(3):
            parent = list(range(self.nsegs[ci]))

            def find(x):
                while parent[x] != x:
                    parent[x] = parent[parent[x]]
                    x = parent[x]
                return x

            for z, rs, cs in self.link_cells[ci]:
                cz = color[z]
                if cz == -1 or cz == ci:
                    ra, rb = find(rs), find(cs)
                    if ra != rb:
                        parent[ra] = rb
            root = find(self.sink_seg[ci])
            colored = self.seg_colored[ci]
            for sid in range(self.nsegs[ci]):
                if colored[sid] and find(sid) != root:
                    return False
            for sid in self.req_segs[ci]:
                if find(sid) != root:
                    return False
        return True

    def solve(self) -> Optional[Coloring]:
        if self.impossible:
            return None
        for b in self.buckets:
            if len(b["needed"]) > b["n_unassigned"]:
                return None
        if not self._reachable():
            return None
        if self._dfs(0):
            m, n = self.m, self.n
            grid = [[Color(self.color[r * n + c]) for c in range(n)] for r in range(m)]
            return Coloring.from_lists(m, n, grid)
        return None

    def _dfs(self, ptr: int) -> bool:
        self.nodes += 1
        if self.nodes > self.node_budget:
            raise SearchBudgetExceeded(f"more than {self.node_budget} nodes")
        while ptr < len(self.free) and self.color[self.free[ptr]] != -1:
            ptr += 1
        if ptr == len(self.free):
            return self._final_check()
        z = self.free[ptr]
        for ci in range(3):
            mark = len(self.trail)
            forced = [(z, ci)]
            ok = True
            qi = 0
            while ok and qi < len(forced):
                cell, cc = forced[qi]
                qi += 1
                ok = self._assign(cell, cc, forced)
            if ok and self._reachable() and self._dfs(ptr + 1):
                return True
            self._undo_to(mark)
        return False

    def _final_check(self) -> bool:
        for b in self.buckets:
            if b["needed"]:
                return False
        # at a full assignment optimistic reachability is exact
        return self._reachable()


class _MinConflicts:
    """Seeded local repair search for connected colorings.

    Cost of a total coloring = per color, (number of connected components
    of the visibility graph over that color's cells) - 1, plus the number
    of boundary edges with no visible cell of the color.  Zero cost is
    exactly the connectivity condition.  Moves recolor one cell to the
    best of its alternatives (min-conflicts with plateau acceptance and a
    small random-walk rate).  Deterministic for a fixed seed.
    """

    def __init__(self, board: Board):
        self.board = board
        m, n = board.rows, board.cols
        self.m, self.n = m, n
        self.idx = {(r, c): r * n + c for r in range(m) for c in range(n)}
        self.sink_cell_idx = [self.idx[board.sinks[c]] for c in COLORS]
        self.free = [
            self.idx[(r, c)]
            for r in range(m)
            for c in range(n)
            if board.sink_at((r, c)) is None
        ]
        self.segs: list[list[list[int]]] = []
        self.edge_vis: list[list[list[int]]] = []
        for color in COLORS:
            segs = [
                [self.idx[(r, c)] for c in range(lo, hi + 1)]
                for r, lo, hi in _row_segments(board, color)
            ]
            segs += [
                [self.idx[(r, c)] for r in range(lo, hi + 1)]
                for c, lo, hi in _col_segments(board, color)
            ]
            self.segs.append(segs)
            vis = []
            for side, i in boundary_edges(board):
                cells, sees_sink = self._edge_scan(side, i, color)
                if not sees_sink:
                    vis.append(cells)
            self.edge_vis.append(vis)

    def _edge_scan(self, side: Direction, i: int, color: Color):
        board, m, n = self.board, self.m, self.n
        if side in (Direction.W, Direction.E):
            cols = range(n) if side == Direction.W else range(n - 1, -1, -1)
            scan = [(i, c) for c in cols]
        else:
            rows = range(m) if side == Direction.N else range(m - 1, -1, -1)
            scan = [(r, i) for r in rows]
        cells = []
        for cell in scan:
            sink = board.sink_at(cell)
            if sink is not None:
                return cells, sink == color
            cells.append(self.idx[cell])
        return cells, False

    def _cost(self, colors: list[int], ci: int) -> int:
        parent: dict[int, int] = {}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for members in self.segs[ci]:
            prev = None
            for z in members:
                if colors[z] == ci:
                    if z not in parent:
                        parent[z] = z
                    if prev is not None:
                        ra, rb = find(prev), find(z)
                        if ra != rb:
                            parent[ra] = rb
                    prev = z
        ncomp = len({find(x) for x in parent})
        unattached = 0
        for vis in self.edge_vis[ci]:
            if not any(colors[z] == ci for z in vis):
                unattached += 1
        return (ncomp - 1) + unattached

    def solve(self, seed: int, max_iters: int, restarts: int) -> Optional[list[int]]:
        import random as _random

        rng = _random.Random(seed)
        size = self.m * self.n
        for _restart in range(restarts):
            colors = [-1] * size
            for ci in range(3):
                colors[self.sink_cell_idx[ci]] = ci
            for z in self.free:
                colors[z] = rng.randrange(3)
            costs = [self._cost(colors, ci) for ci in range(3)]
            cost = sum(costs)
            it = 0
            while cost > 0 and it < max_iters:
                it += 1
                z = self.free[rng.randrange(len(self.free))]
                cur = colors[z]
                best_d, best_alt, best_costs = None, None, None
                for alt in range(3):
                    if alt == cur:
                        continue
                    colors[z] = alt
                    new_cur = self._cost(colors, cur)
                    new_alt = self._cost(colors, alt)
                    d = (new_cur + new_alt) - (costs[cur] + costs[alt])
                    if best_d is None or d < best_d or (d == best_d and rng.random() < 0.5):
                        best_d, best_alt, best_costs = d, alt, (new_cur, new_alt)
                    colors[z] = cur
                if best_d <= 0 or rng.random() < 0.15:
                    colors[z] = best_alt
                    costs[cur], costs[best_alt] = best_costs
                    cost = sum(costs)
            if cost == 0:
                return colors
        return None


_minimal_cache: dict = {}


def _canonical_variants(board: Board):
    for flip, rot in TRANSFORMS:
        for perm in itertools.permutations(COLORS):
            recolor = dict(zip(COLORS, perm))
            yield flip, rot, recolor


def solve_minimal_board(board: Board, node_budget: int = 3_000_000) -> Optional[Coloring]:
    """Connected-coloring search with symmetry canonicalization and
    memoization.

    Seeded min-conflicts repair does the finding (it solves every minimal
    class in well under a second); the complete column-major backtracking
    search is the fallback that certifies None on small boards.
    """
    best_key = None
    best = None
    for flip, rot, recolor in _canonical_variants(board):
        tb = transform_board(board, flip, rot, recolor)
        key = (tb.rows, tb.cols, tuple(sorted((c.value, tb.sinks[c]) for c in COLORS)))
        if best_key is None or key < best_key:
            best_key = key
            best = (flip, rot, recolor, tb)
    flip, rot, recolor, canon = best
    if best_key in _minimal_cache:
        canon_coloring = _minimal_cache[best_key]
    else:
        canon_coloring = _solve_any(canon, node_budget)
        _minimal_cache[best_key] = canon_coloring
    if canon_coloring is None:
        return None
    # map the canonical solution back: invert recolor, then the transform
    inv_recolor = {v: k for k, v in recolor.items()}
    m, n = board.rows, board.cols
    grid = [[Color.RED] * n for _ in range(m)]
    for r in range(m):
        for c in range(n):
            (tr, tc), _, _ = _map_cell((r, c), m, n, flip, rot)
            grid[r][c] = inv_recolor[canon_coloring.color_at((tr, tc))]
    return Coloring.from_lists(m, n, grid)


def _solve_any(board: Board, node_budget: int) -> Optional[Coloring]:
    solver = _MinConflicts(board)
    colors = solver.solve(seed=0x5EED, max_iters=60_000, restarts=10)
    if colors is not None:
        m, n = board.rows, board.cols
        grid = [[Color(colors[r * n + c]) for c in range(n)] for r in range(m)]
        return Coloring.from_lists(m, n, grid)
    return _ColoringSearch(board, node_budget).solve()


# ---------------------------------------------------------------------------
# Shrinking and lifting
# ---------------------------------------------------------------------------

class AlreadyMinimal(Exception):
    pass


@dataclass(frozen=True)
class DeletionRecord:
    axis: str  # "row" | "col"
    index: int
    rows: int  # dimensions after the deletion
    cols: int


def _delete_line(board: Board, axis: str, index: int) -> Board:
    def shift(cell: Cell) -> Cell:
        r, c = cell
        if axis == "row":
            return (r - 1, c) if r > index else (r, c)
        return (r, c - 1) if c > index else (r, c)

    sinks = {color: shift(cell) for color, cell in board.sinks.items()}
    rows = board.rows - (axis == "row")
    cols = board.cols - (axis == "col")
    return Board(rows, cols, sinks)


def is_minimal_size(board: Board) -> bool:
    stype = classify_sinks(board)
    m, n = board.rows, board.cols
    return (m, n) in MIN_SIZES[stype] or (n, m) in MIN_SIZES[stype]


def shrink_board(board: Board) -> tuple[Board, DeletionRecord]:
    """Remove one sink-free row or column (not among the first or last
    two of its axis) so that all three perfectibility conditions still
    hold.  Raises AlreadyMinimal when no such deletion exists.

    When the straightforward deletion would create a forbidden sink
    configuration, trying the remaining candidates in order finds the
    alternative deletion that repairs it.
    """
    if check_perfectibility(board) is not None:
        raise ValueError("shrink_board requires a board satisfying all conditions")
    sink_rows = {cell[0] for cell in board.sinks.values()}
    sink_cols = {cell[1] for cell in board.sinks.values()}
    for axis, size, occupied in (
        ("row", board.rows, sink_rows),
        ("col", board.cols, sink_cols),
    ):
        for index in range(2, size - 2):
            if index in occupied:
                continue
            smaller = _delete_line(board, axis, index)
            if check_perfectibility(smaller) is None:
                rec = DeletionRecord(axis, index, smaller.rows, smaller.cols)
                return smaller, rec
    if not is_minimal_size(board):
        raise AssertionError(
            "non-minimal board satisfying all conditions admits no valid deletion"
        )
    raise AlreadyMinimal(f"{board.rows}x{board.cols} {classify_sinks(board).value}")


def lift_coloring(coloring: Coloring, record: DeletionRecord) -> Coloring:
    """Insert the deleted row/column back, duplicating the colors of the
    adjacent line; visibility connectivity is preserved."""
    if (coloring.rows, coloring.cols) != (record.rows, record.cols):
        raise ValueError(
            f"coloring is {coloring.rows}x{coloring.cols}, record expects "
            f"{record.rows}x{record.cols}"
        )
    grid = [list(row) for row in coloring.grid]
    k = record.index
    if record.axis == "row":
        grid.insert(k, list(grid[k - 1]))
        return Coloring.from_lists(coloring.rows + 1, coloring.cols, grid)
    for row in grid:
        row.insert(k, row[k - 1])
    return Coloring.from_lists(coloring.rows, coloring.cols + 1, grid)


def find_perfect_coloring(board: Board, node_budget: int = 30_000_000) -> Optional[Coloring]:
    """Full pipeline: conditions gate, shrink to a minimal board, solve it
    by backtracking, lift the solution back up.

    Returns None exactly when the perfectibility conditions fail (the
    minimal-board search succeeding whenever they hold is asserted)."""
    if check_perfectibility(board) is not None:
        return None
    records: list[DeletionRecord] = []
    b = board
    while True:
        try:
            b, rec = shrink_board(b)
        except AlreadyMinimal:
            break
        records.append(rec)
    coloring = solve_minimal_board(b, node_budget)
    assert coloring is not None, (
        "board satisfies all perfectibility conditions but the minimal-board "
        "search found no coloring"
    )
    for rec in reversed(records):
        coloring = lift_coloring(coloring, rec)
    assert visibility_components(coloring, board) == (1, 1, 1)
    return coloring


# ---------------------------------------------------------------------------
# Exhaustive arrow-placement search (independent impossibility oracle)
# ---------------------------------------------------------------------------

def exhaustive_perfect_search(
    board: Board, node_budget: int = 5_000_000
) -> Optional[dict[Cell, Optional[tuple[Color, Direction]]]]:
    """Search every arrow assignment of the board's free cells (empty or
    one of 12 arrows each) for a perfect layout; None when none exists.

    Branches only on cells some stream actually reaches, pruning any
    branch in which a stream already fails through decided cells only,
    which keeps full 13^k coverage sound without enumerating it.
    """
    m, n = board.rows, board.cols
    free = [
        (r, c) for r in range(m) for c in range(n) if board.sink_at((r, c)) is None
    ]
    UNDECIDED = "?"
    state: dict[Cell, object] = {cell: UNDECIDED for cell in free}
    for cell, (color, d) in board.arrows.items():
        state[cell] = (color, d)
    streams = [(side, i, color) for side, i in boundary_edges(board) for color in COLORS]
    nodes = 0

    def trace(side: Direction, i: int, color: Color):
        """('ok'|'fail'|'unknown', witness_cell)"""
        src_entry = {
            Direction.N: ((0, i), Direction.S),
            Direction.S: ((m - 1, i), Direction.N),
            Direction.W: ((i, 0), Direction.E),
            Direction.E: ((i, n - 1), Direction.W),
        }[side]
        cell, hd = src_entry
        sink = board.sink_at(cell)
        if sink is not None:
            return ("ok" if sink == color else "fail", None)
        seen = set()
        while True:
            tile = state.get(cell, UNDECIDED)
            if tile is UNDECIDED:
                return ("unknown", cell)
            if isinstance(tile, tuple) and tile[0] == color:
                hd = tile[1]
            if (cell, hd) in seen:
                return ("fail", None)  # fully decided cycle
            seen.add((cell, hd))
            dr, dc = hd.delta
            cell = (cell[0] + dr, cell[1] + dc)
            if not (0 <= cell[0] < m and 0 <= cell[1] < n):
                return ("fail", None)
            sink = board.sink_at(cell)
            if sink is not None:
                return ("ok" if sink == color else "fail", None)

    options: list[Optional[tuple[Color, Direction]]] = [None]
    options += [(color, d) for color in COLORS for d in Direction]

    def dfs() -> bool:
        nonlocal nodes
        nodes += 1
        if nodes > node_budget:
            raise SearchBudgetExceeded(f"more than {node_budget} nodes")
        branch_cell = None
        for side, i, color in streams:
            verdict, witness = trace(side, i, color)
            if verdict == "fail":
                return False
            if verdict == "unknown" and branch_cell is None:
                branch_cell = witness
        if branch_cell is None:
            return True  # every stream decided and correct
        for opt in options:
            state[branch_cell] = opt if opt is not None else "empty"
            if dfs():
                return True
        state[branch_cell] = UNDECIDED
        return False

    if dfs():
        out: dict[Cell, Optional[tuple[Color, Direction]]] = {}
        for cell in free:
            tile = state[cell]
            if isinstance(tile, tuple):
                out[cell] = tile
            else:
                out[cell] = None
        return out
    return None
