"""Deterministic game dynamics.

Semantics of one tick ``t`` (fixed here, relied on everywhere):

1. every packet that existed at ``t-1`` advances one cell, using the arrow
   field as of ``t-1``'s end; entering a sink or leaving the grid resolves
   it into a bar delta; entering a cell with a same-color arrow adopts the
   arrow's direction;
2. sources scheduled at ``t`` emit: the packet appears in the entry cell
   (turning on entry, resolving immediately if the entry cell is a sink);
3. player events at ``t`` place their arrows (so a placement at ``t``
   affects packets entering that cell from ``t+1`` on);
4. all deltas of the tick are summed and applied at once.

Wins and losses are *views* on the trajectory (first tick at/above
``kstar``, first below zero); the dynamics themselves never stop, which
keeps ``state_at`` equal to iterated ``step`` even past a crossing.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from . import kernels
from .model import (
    Board,
    Cell,
    Color,
    Direction,
    GameInstance,
    GameState,
    Packet,
    Source,
)


class EngineError(Exception):
    pass


class PlacementOnOccupiedCell(EngineError):
    pass


class PhaseViolation(EngineError):
    pass


class UnequalPeriods(EngineError):
    pass


class PrehistoryError(EngineError):
    """A pre-tick-0 emission would have resolved before the clock starts."""


class OutcomeKind(Enum):
    CORRECT_SINK = "correct_sink"
    WRONG_SINK = "wrong_sink"
    EXIT = "exit"
    CYCLE = "cycle"

    @property
    def bar_delta(self) -> int:
        if self is OutcomeKind.CORRECT_SINK:
            return 1
        if self is OutcomeKind.CYCLE:
            return 0
        return -1


@dataclass(frozen=True)
class PathOutcome:
    """Fate of one packet against a static arrow field.

    ``path[j]`` is the (cell, heading) occupied j ticks after emission.
    For sink/exit outcomes the packet occupies ``path[0..delay-1]`` and
    resolves at offset ``delay``; for cycles, offsets ``>= delay`` repeat
    with period ``cycle_length`` (``delay`` is the cycle entry offset).
    """

    kind: OutcomeKind
    delay: int
    cycle_length: Optional[int] = None
    path: tuple[tuple[Cell, Direction], ...] = ()

    def position_at(self, offset: int) -> Optional[tuple[Cell, Direction]]:
        """Occupied (cell, heading) at the given offset, None if resolved."""
        if self.kind is OutcomeKind.CYCLE:
            if offset < self.delay:
                return self.path[offset]
            return self.path[self.delay + (offset - self.delay) % self.cycle_length]
        if offset >= self.delay:
            return None
        return self.path[offset]


ArrowField = dict[Cell, tuple[Color, Direction]]


def _walk(
    board: Board,
    arrows: ArrowField,
    color: Color,
    cell: Cell,
    heading: Direction,
) -> PathOutcome:
    """Trace from an occupied in-grid state until resolution or a cycle."""
    seen: dict[tuple[Cell, Direction], int] = {}
    path: list[tuple[Cell, Direction]] = []
    state = (cell, heading)
    while True:
        if state in seen:
            entry = seen[state]
            return PathOutcome(
                OutcomeKind.CYCLE, entry, len(path) - entry, tuple(path)
            )
        seen[state] = len(path)
        path.append(state)
        (r, c), hd = state
        dr, dc = hd.delta
        nxt = (r + dr, c + dc)
        if not board.in_bounds(nxt):
            return PathOutcome(OutcomeKind.EXIT, len(path), None, tuple(path))
        sink = board.sink_at(nxt)
        if sink is not None:
            kind = OutcomeKind.CORRECT_SINK if sink == color else OutcomeKind.WRONG_SINK
            return PathOutcome(kind, len(path), None, tuple(path))
        arrow = arrows.get(nxt)
        nh = arrow[1] if arrow is not None and arrow[0] == color else hd
        state = (nxt, nh)


def trace_path(
    board: Board,
    side: Direction,
    index: int,
    color: Color,
    arrows: Optional[ArrowField] = None,
) -> PathOutcome:
    """Fate of one packet emitted through a boundary edge.

    Total function: every packet is absorbed, exits, or cycles within
    4*m*n steps (the (cell, heading) state space).
    """
    src = Source(color=color, side=side, index=index, period=1, period_start=0)
    entry, heading = src.entry(board)
    field = board.arrows if arrows is None else arrows
    sink = board.sink_at(entry)
    if sink is not None:
        kind = OutcomeKind.CORRECT_SINK if sink == color else OutcomeKind.WRONG_SINK
        return PathOutcome(kind, 0, None, ())
    arrow = field.get(entry)
    if arrow is not None and arrow[0] == color:
        heading = arrow[1]
    return _walk(board, field, color, entry, heading)


def boundary_edges(board: Board) -> list[tuple[Direction, int]]:
    """All 2(m+n) boundary edges in deterministic order."""
    edges = []
    for i in range(board.rows):
        edges.append((Direction.W, i))
    for i in range(board.rows):
        edges.append((Direction.E, i))
    for j in range(board.cols):
        edges.append((Direction.N, j))
    for j in range(board.cols):
        edges.append((Direction.S, j))
    return edges


class _TraceCache:
    """Memoized walks for one constant arrow field."""

    def __init__(self, board: Board, arrows: ArrowField):
        self.board = board
        self.arrows = arrows
        self._mid: dict[tuple[Color, Cell, Direction], PathOutcome] = {}
        self._entry: dict[tuple[Direction, int, Color], PathOutcome] = {}

    def from_state(self, color: Color, cell: Cell, heading: Direction) -> PathOutcome:
        key = (color, cell, heading)
        out = self._mid.get(key)
        if out is None:
            out = _walk(self.board, self.arrows, color, cell, heading)
            self._mid[key] = out
        return out

    def from_edge(self, side: Direction, index: int, color: Color) -> PathOutcome:
        key = (side, index, color)
        out = self._entry.get(key)
        if out is None:
            out = trace_path(self.board, side, index, color, self.arrows)
            self._entry[key] = out
        return out


# ---------------------------------------------------------------------------
# Reference stepper
# ---------------------------------------------------------------------------

def step(state: GameState, instance: GameInstance) -> GameState:
    """One tick, straight from the rules.  The semantic anchor for the
    vectorized kernels and for ``state_at``."""
    board = instance.board
    t = state.time + 1
    arrows = state.arrows
    delta = 0
    packets: list[Packet] = []
    for (r, c), color, hd in state.packets:
        dr, dc = hd.delta
        nxt = (r + dr, c + dc)
        if not board.in_bounds(nxt):
            delta -= 1
            continue
        sink = board.sink_at(nxt)
        if sink is not None:
            delta += 1 if sink == color else -1
            continue
        arrow = arrows.get(nxt)
        nh = arrow[1] if arrow is not None and arrow[0] == color else hd
        packets.append((nxt, color, nh))
    for src in instance.sources:
        for _e in src.emissions_in(t, t + 1):
            entry, hd = src.entry(board)
            sink = board.sink_at(entry)
            if sink is not None:
                delta += 1 if sink == src.color else -1
                continue
            arrow = arrows.get(entry)
            nh = arrow[1] if arrow is not None and arrow[0] == src.color else hd
            packets.append((entry, src.color, nh))
    new_arrows = arrows
    for tick, cell, color, d in instance.player_events:
        if tick == t:
            if new_arrows is arrows:
                new_arrows = dict(arrows)
            _place(board, new_arrows, cell, color, d)
    return GameState(t, state.bar + delta, new_arrows, packets)


def _place(board: Board, arrows: ArrowField, cell: Cell, color: Color, d: Direction):
    if cell in arrows or board.sink_at(cell) is not None:
        raise PlacementOnOccupiedCell(f"cell {cell} is occupied")
    if not board.in_bounds(cell):
        raise PlacementOnOccupiedCell(f"cell {cell} outside the grid")
    arrows[cell] = (color, d)


def make_initial_state(instance: GameInstance) -> GameState:
    """State at tick 0: pre-history emissions materialized in flight.

    Sources may have emission ticks < 0 (packets already traveling when
    the clock starts).  Any such packet must still be unresolved at tick
    0; otherwise the instance is rejected.
    """
    board = instance.board
    cache = _TraceCache(board, dict(board.arrows))
    packets: list[Packet] = []
    bar = instance.k0
    for src in instance.sources:
        emissions = [t for t in src.warmup_emissions if t <= 0]
        if src.period_start <= 0:
            k_max = (0 - src.period_start) // src.period
            emissions.extend(src.period_start + k * src.period for k in range(k_max + 1))
        if not emissions:
            continue
        out = cache.from_edge(src.side, src.index, src.color)
        for e in sorted(emissions):
            offset = -e
            pos = out.position_at(offset)
            if pos is None:
                if e + out.delay < 0:
                    raise PrehistoryError(
                        f"emission at {e} resolves at {e + out.delay}, before tick 0"
                    )
                bar += out.kind.bar_delta
            else:
                cell, hd = pos
                packets.append((cell, src.color, hd))
    arrows = dict(board.arrows)
    for tick, cell, color, d in instance.player_events:
        if tick < 0:
            raise EngineError("player events before tick 0 are not supported")
        if tick == 0:
            _place(board, arrows, cell, color, d)
    return GameState(0, bar, arrows, packets)


# ---------------------------------------------------------------------------
# Fast-forward
# ---------------------------------------------------------------------------

@dataclass
class SourceSummary:
    emitted: int = 0
    arrived_correct: int = 0
    arrived_wrong: int = 0
    exited: int = 0
    in_flight: int = 0
    in_cycle: int = 0


@dataclass
class StateSummary:
    """Bar-trajectory summary attached to a fast-forwarded state."""

    bar: int
    per_source: list[SourceSummary] = field(default_factory=list)

    @property
    def total_delta(self) -> int:
        return sum(
            s.arrived_correct - s.arrived_wrong - s.exited for s in self.per_source
        )


def _count_periodic_upto(start: int, period: int, t: int) -> int:
    """|{ start + k*period <= t : k >= 0 }|"""
    if t < start:
        return 0
    return (t - start) // period + 1


def state_at(
    instance: GameInstance,
    t: int,
    from_state: Optional[GameState] = None,
) -> tuple[GameState, StateSummary]:
    """State at tick ``t`` computed by counting, not by iterating ticks.

    The arrow field must be constant strictly inside the span: a player
    event or a source's warmup/period-start boundary in the open interval
    (from_state.time, t) raises PhaseViolation.  Boundaries exactly at
    ``t`` are fine (events at ``t`` are applied to the result).
    Agrees exactly with iterated ``step``.
    """
    board = instance.board
    if from_state is None:
        from_state = make_initial_state(instance)
    t0 = from_state.time
    if t < t0:
        raise EngineError(f"cannot rewind from {t0} to {t}")
    for tick, _cell, _color, _d in instance.player_events:
        if t0 < tick < t:
            raise PhaseViolation(f"player event at {tick} inside ({t0}, {t})")
    for src in instance.sources:
        for w in src.warmup_emissions:
            if t0 < w < t:
                raise PhaseViolation(f"warmup emission at {w} inside ({t0}, {t})")
        if t0 < src.period_start < t:
            raise PhaseViolation(f"period start at {src.period_start} inside ({t0}, {t})")

    cache = _TraceCache(board, from_state.arrows)
    bar = from_state.bar
    packets: list[Packet] = []
    span = t - t0

    carry = SourceSummary()
    for (cell, color, hd) in from_state.packets:
        out = cache.from_state(color, cell, hd)
        pos = out.position_at(span)
        if pos is None:
            bar += out.kind.bar_delta
            _tally(carry, out.kind)
        else:
            packets.append((pos[0], color, pos[1]))
            if out.kind is OutcomeKind.CYCLE and span >= out.delay:
                carry.in_cycle += 1
            else:
                carry.in_flight += 1

    summaries = [carry]
    for src in instance.sources:
        s = SourceSummary()
        summaries.append(s)
        out = cache.from_edge(src.side, src.index, src.color)
        warm = [w for w in src.warmup_emissions if t0 < w <= t]
        emitted_periodic = max(
            0,
            _count_periodic_upto(src.period_start, src.period, t)
            - _count_periodic_upto(src.period_start, src.period, t0),
        )
        s.emitted = len(warm) + emitted_periodic
        if out.kind is OutcomeKind.CYCLE:
            for e in warm:
                _position_packet(packets, src, out, t - e, s)
            first = _first_periodic_after(src, t0)
            e = first
            while e <= t:
                _position_packet(packets, src, out, t - e, s)
                e += src.period
        else:
            horizon = t - out.delay
            resolved_warm = sum(1 for w in warm if w <= horizon)
            resolved_periodic = max(
                0,
                _count_periodic_upto(src.period_start, src.period, min(horizon, t))
                - _count_periodic_upto(src.period_start, src.period, t0),
            )
            n_resolved = resolved_warm + resolved_periodic
            bar += n_resolved * out.kind.bar_delta
            _tally(s, out.kind, n_resolved)
            for e in warm:
                if e > horizon:
                    _position_packet(packets, src, out, t - e, s)
            first = _first_periodic_after(src, max(t0, horizon))
            e = first
            while e <= t:
                if e > horizon:
                    _position_packet(packets, src, out, t - e, s)
                e += src.period

    arrows = from_state.arrows
    for tick, cell, color, d in instance.player_events:
        if tick == t and tick != t0:
            if arrows is from_state.arrows:
                arrows = dict(from_state.arrows)
            _place(board, arrows, cell, color, d)
    state = GameState(t, bar, arrows if arrows is not from_state.arrows else dict(arrows), packets)
    return state, StateSummary(bar=bar, per_source=summaries)


def _tally(s: SourceSummary, kind: OutcomeKind, n: int = 1):
    if kind is OutcomeKind.CORRECT_SINK:
        s.arrived_correct += n
    elif kind is OutcomeKind.WRONG_SINK:
        s.arrived_wrong += n
    elif kind is OutcomeKind.EXIT:
        s.exited += n


def _position_packet(packets, src: Source, out: PathOutcome, offset: int, s: SourceSummary):
    pos = out.position_at(offset)
    if pos is None:
        return
    packets.append((pos[0], src.color, pos[1]))
    if out.kind is OutcomeKind.CYCLE and offset >= out.delay:
        s.in_cycle += 1
    else:
        s.in_flight += 1


def _first_periodic_after(src: Source, t0: int) -> int:
    """Smallest periodic emission tick strictly greater than t0."""
    if src.period_start > t0:
        return src.period_start
    k = (t0 - src.period_start) // src.period + 1
    return src.period_start + k * src.period


def event_timeline(instance: GameInstance) -> list[int]:
    """Phase boundaries at/after tick 0: player events, period starts,
    warmup emissions; deduplicated ascending."""
    ticks = set()
    for tick, _cell, _color, _d in instance.player_events:
        ticks.add(tick)
    for src in instance.sources:
        if src.period_start >= 0:
            ticks.add(src.period_start)
        for w in src.warmup_emissions:
            if w >= 0:
                ticks.add(w)
    return sorted(ticks)


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------

class VerdictKind(Enum):
    WIN = "win"
    LOSS = "loss"
    FOREVER = "forever"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    tick: Optional[int] = None

    @staticmethod
    def win(t: int) -> "Verdict":
        return Verdict(VerdictKind.WIN, t)

    @staticmethod
    def loss(t: int) -> "Verdict":
        return Verdict(VerdictKind.LOSS, t)

    @staticmethod
    def forever() -> "Verdict":
        return Verdict(VerdictKind.FOREVER)

    @staticmethod
    def undecided(t_max: int) -> "Verdict":
        return Verdict(VerdictKind.UNDECIDED, t_max)


def _phase_deltas(
    instance: GameInstance,
    state: GameState,
    cache: _TraceCache,
    t_end: int,
):
    """One-shot and periodic bar deltas for ticks in (state.time, t_end].

    One-shots: resolutions of packets in flight at state.time and of
    warmup emissions inside the window.  Progressions: periodic emissions
    strictly after state.time (first arrival, period, +-1 each).
    """
    t0 = state.time
    shots: list[tuple[int, int]] = []
    for (cell, color, hd) in state.packets:
        out = cache.from_state(color, cell, hd)
        if out.kind is not OutcomeKind.CYCLE and t0 + out.delay <= t_end:
            shots.append((t0 + out.delay, out.kind.bar_delta))
    progs: list[tuple[int, int, int]] = []
    for src in instance.sources:
        out = cache.from_edge(src.side, src.index, src.color)
        if out.kind is OutcomeKind.CYCLE:
            continue
        d = out.kind.bar_delta
        for w in src.warmup_emissions:
            if t0 < w and w + out.delay <= t_end:
                shots.append((w + out.delay, d))
        first_e = _first_periodic_after(src, t0)
        if first_e + out.delay <= t_end:
            progs.append((first_e + out.delay, src.period, d))
    shots.sort()
    shot_tick = np.array([s[0] for s in shots], dtype=np.int64)
    shot_delta = np.array([s[1] for s in shots], dtype=np.int64)
    prog_first = np.array([p[0] for p in progs], dtype=np.int64)
    prog_period = np.array([p[1] for p in progs], dtype=np.int64)
    prog_delta = np.array([p[2] for p in progs], dtype=np.int64)
    return (shot_tick, shot_delta), (prog_first, prog_period, prog_delta)


def run_until_outcome(instance: GameInstance, t_max: int) -> Verdict:
    """Earliest Win/Loss at or before t_max, else Undecided(t_max).

    Exact: every tick's bar value is accounted for, phase by phase; no
    intermediate crossing can be skipped.
    """
    state = make_initial_state(instance)
    if state.bar < 0:
        return Verdict.loss(0)
    if state.bar >= instance.kstar:
        return Verdict.win(0)
    boundaries = [b for b in event_timeline(instance) if b > 0]
    stops = [b for b in boundaries if b <= t_max] + [t_max]
    for stop in stops:
        if stop <= state.time:
            continue
        cache = _TraceCache(instance.board, state.arrows)
        shots, progs = _phase_deltas(instance, state, cache, stop)
        kind, tick, _bar = kernels.scan_crossings(
            state.bar, state.time, stop, 0, instance.kstar, shots, progs
        )
        if kind == 0:
            return Verdict.loss(tick)
        if kind == 1:
            return Verdict.win(tick)
        state, _summary = state_at(instance, stop, state)
        # state_at applies player events scheduled at `stop`
        if state.bar < 0:
            return Verdict.loss(stop)
        if state.bar >= instance.kstar:
            return Verdict.win(stop)
    return Verdict.undecided(t_max)


def decide_equal_period(instance: GameInstance) -> Verdict:
    """Win/Loss/Forever decision when all sources share one period.

    Scans each phase exactly; after the last event, simulates until the
    per-tick bar delta is period-periodic, then closes the trajectory in
    arithmetic: positive net per period means an eventual win, negative an
    eventual loss, zero means the game runs forever.
    """
    periods = {src.period for src in instance.sources}
    if len(periods) > 1:
        raise UnequalPeriods(f"source periods differ: {sorted(periods)}")
    state = make_initial_state(instance)
    if state.bar < 0:
        return Verdict.loss(0)
    if state.bar >= instance.kstar:
        return Verdict.win(0)
    if not instance.sources:
        return Verdict.forever()
    p = periods.pop()

    boundaries = [b for b in event_timeline(instance) if b > 0]
    for stop in boundaries:
        if stop <= state.time:
            continue
        cache = _TraceCache(instance.board, state.arrows)
        shots, progs = _phase_deltas(instance, state, cache, stop)
        kind, tick, _bar = kernels.scan_crossings(
            state.bar, state.time, stop, 0, instance.kstar, shots, progs
        )
        if kind == 0:
            return Verdict.loss(tick)
        if kind == 1:
            return Verdict.win(tick)
        state, _summary = state_at(instance, stop, state)
        if state.bar < 0:
            return Verdict.loss(stop)
        if state.bar >= instance.kstar:
            return Verdict.win(stop)

    # Tail phase: field constant forever.  Find where deltas turn periodic.
    cache = _TraceCache(instance.board, state.arrows)
    t0 = state.time
    settle = t0
    for (cell, color, hd) in state.packets:
        out = cache.from_state(color, cell, hd)
        if out.kind is not OutcomeKind.CYCLE:
            settle = max(settle, t0 + out.delay)
    net = 0
    for src in instance.sources:
        out = cache.from_edge(src.side, src.index, src.color)
        if out.kind is OutcomeKind.CYCLE:
            continue
        net += out.kind.bar_delta
        for w in src.warmup_emissions:
            if w > t0:
                settle = max(settle, w + out.delay)
        settle = max(settle, _first_periodic_after(src, t0) + out.delay)

    scan_end = settle + p
    shots, progs = _phase_deltas(instance, state, cache, scan_end)
    kind, tick, bar_end = kernels.scan_crossings(
        state.bar, t0, scan_end, 0, instance.kstar, shots, progs
    )
    if kind == 0:
        return Verdict.loss(tick)
    if kind == 1:
        return Verdict.win(tick)

    if net == 0:
        return Verdict.forever()

    # Profile of the settled period [settle+1, settle+p]; bar_end is the
    # value at scan_end = settle + p.
    window_state, _ = state_at(instance, settle, state)
    prof_shots, prof_progs = _phase_deltas(instance, window_state, cache, scan_end)
    bar_t = window_state.bar
    profile = []
    st, sd = prof_shots
    pf, pp, pd = prof_progs
    for t in range(settle + 1, scan_end + 1):
        d = 0
        i = bisect.bisect_left(st, t)
        while i < len(st) and st[i] == t:
            d += int(sd[i])
            i += 1
        for f, per, dd in zip(pf, pp, pd):
            if t >= f and (t - f) % per == 0:
                d += int(dd)
        bar_t += d
        profile.append(bar_t)

    best: Optional[int] = None
    for j, bar_j in enumerate(profile):
        # bar at tick settle+1+j+q*p equals bar_j + q*net for q >= 0
        if net > 0:
            need = instance.kstar - bar_j
            q = max(0, -(-need // net))
        else:
            need = bar_j + 1  # reach bar < 0, i.e. bar_j + q*net <= -1
            q = max(0, -(-need // (-net)))
        tick_q = settle + 1 + j + q * p
        if best is None or tick_q < best:
            best = tick_q
    assert best is not None
    return Verdict.win(best) if net > 0 else Verdict.loss(best)


# ---------------------------------------------------------------------------
# Bulk simulation helpers (kernel-backed)
# ---------------------------------------------------------------------------

def _grids(board: Board, arrows: ArrowField):
    m, n = board.rows, board.cols
    arrow_color = np.full((m, n), -1, dtype=np.int8)
    arrow_dir = np.zeros((m, n), dtype=np.int8)
    sink = np.full((m, n), -1, dtype=np.int8)
    for (r, c), (color, d) in arrows.items():
        arrow_color[r, c] = color.value
        arrow_dir[r, c] = d.value
    for color, (r, c) in board.sinks.items():
        sink[r, c] = color.value
    return arrow_color, arrow_dir, sink


def _packet_arrays(packets: Iterable[Packet]):
    packets = list(packets)
    r = np.array([p[0][0] for p in packets], dtype=np.int64)
    c = np.array([p[0][1] for p in packets], dtype=np.int64)
    col = np.array([p[1].value for p in packets], dtype=np.int64)
    hd = np.array([p[2].value for p in packets], dtype=np.int64)
    return r, c, col, hd


def _emission_arrays(instance: GameInstance, t0: int, t1: int):
    rows = []
    for src in instance.sources:
        entry, hd = src.entry(instance.board)
        for e in src.emissions_in(t0 + 1, t1 + 1):
            rows.append((e, entry[0], entry[1], src.color.value, hd.value))
    rows.sort()
    out = np.array(rows, dtype=np.int64).reshape(-1, 5)
    return out[:, 0], out[:, 1], out[:, 2], out[:, 3], out[:, 4]


def simulate_span_state(
    instance: GameInstance,
    state: GameState,
    t1: int,
    want_hash: bool = False,
):
    """Kernel-backed per-tick run over (state.time, t1] under a constant
    field.  Returns (bars, hashes, new_state): bars[j] is the bar after
    tick state.time+1+j."""
    for tick, _cell, _color, _d in instance.player_events:
        if state.time < tick < t1:
            raise PhaseViolation(f"player event at {tick} inside the span")
    grids = _grids(instance.board, state.arrows)
    packets = _packet_arrays(state.packets)
    emissions = _emission_arrays(instance, state.time, t1)
    bars, hashes, (r, c, col, hd) = kernels.simulate_span(
        grids, packets, emissions, state.time, t1, state.bar, want_hash
    )
    new_packets = [
        ((int(r[i]), int(c[i])), Color(int(col[i])), Direction(int(hd[i])))
        for i in range(len(r))
    ]
    arrows = state.arrows
    for tick, cell, color, d in instance.player_events:
        if tick == t1:
            if arrows is state.arrows:
                arrows = dict(state.arrows)
            _place(instance.board, arrows, cell, color, d)
    new_state = GameState(t1, int(bars[-1]) if len(bars) else state.bar, dict(arrows), new_packets)
    return bars, hashes, new_state


def bar_trajectory(instance: GameInstance, t_max: int):
    """bar[t] for t in [0, t_max], honoring player events at any tick."""
    state = make_initial_state(instance)
    bars = np.empty(t_max + 1, dtype=np.int64)
    bars[0] = state.bar
    boundaries = [b for b in event_timeline(instance) if 0 < b <= t_max]
    stops = sorted(set(boundaries + [t_max]))
    for stop in stops:
        if stop <= state.time:
            continue
        seg, _hashes, state = simulate_span_state(instance, state, stop)
        bars[stop - len(seg) + 1 : stop + 1] = seg
    return bars
