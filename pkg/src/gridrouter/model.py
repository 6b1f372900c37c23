"""Core domain types: boards, sources, game instances and snapshots.

Everything here is a plain value type.  Construction validates structural
well-formedness; serialization is canonical (equal objects produce
byte-equal JSON).

Conventions, fixed once for the whole package:

* Coordinates are ``(row, col)`` with row 0 at the top and col 0 at the
  left.  Direction N decreases the row index.
* Time is measured in abstract integer ticks.  Packets travel one cell
  per tick.
* A source sits on a boundary edge (``side`` + ``index``) and emits
  packets into the adjacent cell, heading inward.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Optional

SCHEMA_VERSION = 1

# Unary-encoding caps: periods and warmup schedules stay desk-scale while
# absolute timestamps may be full 62-bit integers.
MAX_PERIOD = 10_000
MAX_WARMUP_EMISSIONS = 100_000
MAX_TIMESTAMP = 2**62


class Color(IntEnum):
    """The three packet/sink colors, ordered for deterministic iteration."""

    RED = 0
    GREEN = 1
    BLUE = 2

    @property
    def letter(self) -> str:
        return "RGB"[self.value]


COLORS = (Color.RED, Color.GREEN, Color.BLUE)
NUM_COLORS = 3

_COLOR_NAMES = {"red": Color.RED, "green": Color.GREEN, "blue": Color.BLUE}


class Direction(IntEnum):
    N = 0
    E = 1
    S = 2
    W = 3

    @property
    def delta(self) -> tuple[int, int]:
        return _DELTAS[self.value]

    @property
    def opposite(self) -> "Direction":
        return Direction((self.value + 2) % 4)


_DELTAS = ((-1, 0), (0, 1), (1, 0), (0, -1))
DIRECTIONS = (Direction.N, Direction.E, Direction.S, Direction.W)
_DIR_NAMES = {"N": Direction.N, "E": Direction.E, "S": Direction.S, "W": Direction.W}


class ModelError(ValueError):
    """Base class for structural validation failures."""


class MissingSink(ModelError):
    pass


class DuplicateSink(ModelError):
    pass


class DuplicateCell(ModelError):
    pass


class OutOfBounds(ModelError):
    pass


class ParseError(ModelError):
    pass


Cell = tuple[int, int]
Arrow = tuple[Cell, Color, Direction]


@dataclass(frozen=True)
class Board:
    """Static arena: grid dimensions, one sink per color, preplaced arrows.

    ``arrows`` maps cell -> (color, direction).  A cell holds at most one
    object (sink or arrow).
    """

    rows: int
    cols: int
    sinks: dict[Color, Cell]
    arrows: dict[Cell, tuple[Color, Direction]] = field(default_factory=dict)

    def __post_init__(self):
        validate_board(self)

    def in_bounds(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.rows and 0 <= c < self.cols

    def sink_at(self, cell: Cell) -> Optional[Color]:
        for color, pos in self.sinks.items():
            if pos == cell:
                return color
        return None

    @property
    def sink_cells(self) -> set[Cell]:
        return set(self.sinks.values())

    def is_occupied(self, cell: Cell) -> bool:
        return cell in self.arrows or cell in self.sink_cells

    def with_arrows(self, extra: Iterable[Arrow]) -> "Board":
        arrows = dict(self.arrows)
        for cell, color, direction in extra:
            if cell in arrows or cell in self.sink_cells:
                raise DuplicateCell(f"cell {cell} already occupied")
            arrows[cell] = (color, direction)
        return Board(self.rows, self.cols, dict(self.sinks), arrows)

    def __eq__(self, other):
        if not isinstance(other, Board):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and self.sinks == other.sinks
            and self.arrows == other.arrows
        )

    def __hash__(self):
        return hash(
            (
                self.rows,
                self.cols,
                tuple(sorted((c.value, pos) for c, pos in self.sinks.items())),
                tuple(sorted((pos, cd[0].value, cd[1].value) for pos, cd in self.arrows.items())),
            )
        )


def validate_board(board: Board) -> Board:
    if board.rows <= 0 or board.cols <= 0:
        raise OutOfBounds(f"grid must be positive, got {board.rows}x{board.cols}")
    seen: dict[Cell, str] = {}
    for color in COLORS:
        if color not in board.sinks:
            raise MissingSink(f"missing sink for {color.name}")
    for color, cell in board.sinks.items():
        if not board.in_bounds(cell):
            raise OutOfBounds(f"{color.name} sink at {cell} is outside {board.rows}x{board.cols}")
        if cell in seen:
            raise DuplicateSink(f"sinks {seen[cell]} and {color.name} share cell {cell}")
        seen[cell] = color.name
    for cell, (color, _direction) in board.arrows.items():
        if not board.in_bounds(cell):
            raise OutOfBounds(f"arrow at {cell} is outside {board.rows}x{board.cols}")
        if cell in seen:
            raise DuplicateCell(f"arrow at {cell} collides with {seen[cell]}")
        seen[cell] = f"{color.name} arrow"
    return board


@dataclass(frozen=True)
class Source:
    """Boundary emitter: optional warmup emissions, then a fixed period.

    Emission ticks are ``warmup_emissions`` plus ``period_start + k*period``
    for every k >= 0.  Warmup ticks must be strictly increasing and all
    precede ``period_start``.  Negative ticks are permitted: they describe
    packets already in flight when the simulation starts at tick 0.
    """

    color: Color
    side: Direction
    index: int
    period: int
    period_start: int = 0
    warmup_emissions: tuple[int, ...] = ()

    def __post_init__(self):
        if self.period <= 0 or self.period > MAX_PERIOD:
            raise ModelError(f"period {self.period} outside (0, {MAX_PERIOD}]")
        if len(self.warmup_emissions) > MAX_WARMUP_EMISSIONS:
            raise ModelError("too many warmup emissions")
        if abs(self.period_start) >= MAX_TIMESTAMP:
            raise ModelError("period_start outside 62-bit range")
        prev = None
        for t in self.warmup_emissions:
            if prev is not None and t <= prev:
                raise ModelError("warmup emissions must be strictly increasing")
            if t >= self.period_start:
                raise ModelError("warmup emissions must precede period_start")
            prev = t

    def entry(self, board: Board) -> tuple[Cell, Direction]:
        """Entry cell and inward heading on the given board."""
        m, n = board.rows, board.cols
        side, i = self.side, self.index
        if side == Direction.N:
            if not 0 <= i < n:
                raise OutOfBounds(f"N-side source index {i} outside 0..{n-1}")
            return (0, i), Direction.S
        if side == Direction.S:
            if not 0 <= i < n:
                raise OutOfBounds(f"S-side source index {i} outside 0..{n-1}")
            return (m - 1, i), Direction.N
        if side == Direction.W:
            if not 0 <= i < m:
                raise OutOfBounds(f"W-side source index {i} outside 0..{m-1}")
            return (i, 0), Direction.E
        if not 0 <= i < m:
            raise OutOfBounds(f"E-side source index {i} outside 0..{m-1}")
        return (i, n - 1), Direction.W

    def emissions_in(self, t0: int, t1: int) -> list[int]:
        """All emission ticks t with t0 <= t < t1."""
        out = [t for t in self.warmup_emissions if t0 <= t < t1]
        if t1 > self.period_start:
            k0 = max(0, -(-(t0 - self.period_start) // self.period))  # ceil div
            t = self.period_start + k0 * self.period
            while t < t1:
                if t >= t0:
                    out.append(t)
                t += self.period
        return sorted(out)


PlayerEvent = tuple[int, Cell, Color, Direction]


@dataclass(frozen=True)
class GameInstance:
    """A complete simulation problem: board, sources, bar bounds, script."""

    board: Board
    sources: tuple[Source, ...]
    k0: int
    kstar: int
    player_events: tuple[PlayerEvent, ...] = ()

    def __post_init__(self):
        if self.k0 < 0:
            raise ModelError(f"k0 must be >= 0, got {self.k0}")
        if self.kstar <= self.k0:
            raise ModelError(f"kstar must exceed k0 ({self.kstar} <= {self.k0})")
        edges = set()
        for s in self.sources:
            s.entry(self.board)  # bounds check
            key = (s.side, s.index, s.color)
            if key in edges:
                raise ModelError(
                    f"two {s.color.name} sources share edge {s.side.name}{s.index}"
                )
            edges.add(key)
        prev = None
        for ev in self.player_events:
            tick, cell, _color, _d = ev
            if prev is not None and tick <= prev:
                raise ModelError("player events must be strictly time-sorted")
            if not self.board.in_bounds(cell):
                raise OutOfBounds(f"player event targets {cell} outside the grid")
            prev = tick


Packet = tuple[Cell, Color, Direction]


@dataclass
class GameState:
    """Snapshot of the dynamics: bar value, elapsed time, field, packets.

    ``arrows`` holds both preplaced and player-placed arrows.  ``packets``
    is a multiset; ordering carries no meaning.
    """

    time: int
    bar: int
    arrows: dict[Cell, tuple[Color, Direction]]
    packets: list[Packet]

    def canonical_packets(self) -> list[Packet]:
        return sorted(self.packets)

    def copy(self) -> "GameState":
        return GameState(self.time, self.bar, dict(self.arrows), list(self.packets))

    def same_as(self, other: "GameState") -> bool:
        return (
            self.time == other.time
            and self.bar == other.bar
            and self.arrows == other.arrows
            and self.canonical_packets() == other.canonical_packets()
        )


# ---------------------------------------------------------------------------
# Canonical JSON serialization
# ---------------------------------------------------------------------------

def _sorted_arrow_list(arrows: dict[Cell, tuple[Color, Direction]]) -> list:
    return [
        {"cell": [r, c], "color": color.name.lower(), "dir": d.name}
        for (r, c), (color, d) in sorted(
            arrows.items(), key=lambda kv: (kv[0], kv[1][0].value, kv[1][1].value)
        )
    ]


def board_to_dict(board: Board) -> dict:
    return {
        "v": SCHEMA_VERSION,
        "rows": board.rows,
        "cols": board.cols,
        "sinks": {c.name.lower(): list(board.sinks[c]) for c in COLORS},
        "arrows": _sorted_arrow_list(board.arrows),
    }


def _source_sort_key(s: Source):
    return (s.side.value, s.index, s.color.value, s.period, s.period_start, s.warmup_emissions)


def instance_to_dict(inst: GameInstance) -> dict:
    return {
        "v": SCHEMA_VERSION,
        "board": board_to_dict(inst.board),
        "sources": [
            {
                "color": s.color.name.lower(),
                "side": s.side.name,
                "index": s.index,
                "period": s.period,
                "period_start": s.period_start,
                "warmup_emissions": list(s.warmup_emissions),
            }
            for s in sorted(inst.sources, key=_source_sort_key)
        ],
        "k0": inst.k0,
        "kstar": inst.kstar,
        "player_events": [
            {"tick": t, "cell": [r, c], "color": color.name.lower(), "dir": d.name}
            for t, (r, c), color, d in inst.player_events
        ],
    }


def state_to_dict(state: GameState) -> dict:
    return {
        "v": SCHEMA_VERSION,
        "time": state.time,
        "bar": state.bar,
        "arrows": _sorted_arrow_list(state.arrows),
        "packets": [
            {"cell": [r, c], "color": color.name.lower(), "heading": d.name}
            for (r, c), color, d in state.canonical_packets()
        ],
    }


def to_canonical_json(obj) -> str:
    """Byte-stable encoding: sorted keys, no whitespace variance."""
    if isinstance(obj, Board):
        payload = board_to_dict(obj)
    elif isinstance(obj, GameInstance):
        payload = instance_to_dict(obj)
    elif isinstance(obj, GameState):
        payload = state_to_dict(obj)
    else:
        payload = obj
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


def _req(d: dict, key: str, where: str):
    if key not in d:
        raise ParseError(f"{where}: missing field '{key}'")
    return d[key]


def _parse_color(raw, where: str) -> Color:
    if isinstance(raw, str) and raw.lower() in _COLOR_NAMES:
        return _COLOR_NAMES[raw.lower()]
    raise ParseError(f"{where}: bad color {raw!r}")


def _parse_dir(raw, where: str) -> Direction:
    if isinstance(raw, str) and raw.upper() in _DIR_NAMES:
        return _DIR_NAMES[raw.upper()]
    raise ParseError(f"{where}: bad direction {raw!r}")


def _parse_cell(raw, where: str) -> Cell:
    if not (isinstance(raw, (list, tuple)) and len(raw) == 2):
        raise ParseError(f"{where}: bad cell {raw!r}")
    return (int(raw[0]), int(raw[1]))


def board_from_dict(d: dict) -> Board:
    sinks = {}
    raw_sinks = _req(d, "sinks", "board")
    for name, color in _COLOR_NAMES.items():
        if name not in raw_sinks:
            raise ParseError(f"board: missing sink '{name}'")
        sinks[color] = _parse_cell(raw_sinks[name], f"sink {name}")
    arrows = {}
    for i, a in enumerate(d.get("arrows", [])):
        cell = _parse_cell(_req(a, "cell", f"arrow {i}"), f"arrow {i}")
        arrows[cell] = (
            _parse_color(_req(a, "color", f"arrow {i}"), f"arrow {i}"),
            _parse_dir(_req(a, "dir", f"arrow {i}"), f"arrow {i}"),
        )
    try:
        return Board(int(_req(d, "rows", "board")), int(_req(d, "cols", "board")), sinks, arrows)
    except ModelError:
        raise
    except (TypeError, ValueError) as exc:
        raise ParseError(f"board: {exc}") from exc


def instance_from_dict(d: dict) -> GameInstance:
    board = board_from_dict(_req(d, "board", "instance"))
    sources = []
    for i, s in enumerate(d.get("sources", [])):
        where = f"source {i}"
        sources.append(
            Source(
                color=_parse_color(_req(s, "color", where), where),
                side=_parse_dir(_req(s, "side", where), where),
                index=int(_req(s, "index", where)),
                period=int(_req(s, "period", where)),
                period_start=int(s.get("period_start", 0)),
                warmup_emissions=tuple(int(t) for t in s.get("warmup_emissions", [])),
            )
        )
    events = []
    for i, e in enumerate(d.get("player_events", [])):
        where = f"player_event {i}"
        events.append(
            (
                int(_req(e, "tick", where)),
                _parse_cell(_req(e, "cell", where), where),
                _parse_color(_req(e, "color", where), where),
                _parse_dir(_req(e, "dir", where), where),
            )
        )
    return GameInstance(
        board=board,
        sources=tuple(sources),
        k0=int(_req(d, "k0", "instance")),
        kstar=int(_req(d, "kstar", "instance")),
        player_events=tuple(events),
    )


def board_from_json(text: str) -> Board:
    return board_from_dict(_loads(text))


def instance_from_json(text: str) -> GameInstance:
    return instance_from_dict(_loads(text))


def _loads(text: str) -> dict:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(d, dict):
        raise ParseError("top-level JSON value must be an object")
    return d


# ---------------------------------------------------------------------------
# Source preset matching the original game's emitter
# ---------------------------------------------------------------------------

def real_game_source(color: Color, side: Direction, index: int) -> Source:
    """The implemented game's emitter, scaled to milliseconds-as-ticks.

    5 s initial silence, then emission gaps shrinking from 2.000 s by 1 ms
    per packet down to 0.501 s (1500 warmup packets), then a steady 0.5 s
    period.
    """
    emissions = []
    t = 5000
    gap = 2000
    for _ in range(1500):
        t += gap
        gap -= 1
        emissions.append(t)
    return Source(
        color=color,
        side=side,
        index=index,
        period=500,
        period_start=1_881_250,
        warmup_emissions=tuple(emissions),
    )
