"""SGF game records: parsing, serialisation, corpus filtering and training pairs.

Only the main line of a single game is supported.  Point coordinates follow
SGF: the first letter is the column, the second the row, with ``a`` = 0 at the
top-left.  Internally points are ``(row, col)`` like :mod:`convgo.goban`.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from . import goban
from .goban import BLACK, WHITE, Move, Position

log = logging.getLogger(__name__)

__all__ = [
    "FilterCriteria",
    "SgfError",
    "SgfGame",
    "filter_reasons",
    "parse",
    "parse_file",
    "passes_filter",
    "scan_corpus",
    "serialize",
    "to_training_pairs",
]


class SgfError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


@dataclass
class SgfGame:
    size: int = 19
    komi: Optional[float] = None
    handicap: int = 0
    year: Optional[int] = None
    date: Optional[str] = None
    result: Optional[str] = None
    ruleset: Optional[str] = None
    setup_black: list[tuple[int, int]] = field(default_factory=list)
    moves: list[Move] = field(default_factory=list)
    player_to_move: Optional[int] = None  # PL, if present


_PROP_RE = re.compile(rb"[A-Z]+")


def _tokenize(data: bytes):
    """Yield ('(' | ')' | ';', offset) and ('prop', offset, name, [values])."""
    i, n = 0, len(data)
    while i < n:
        ch = data[i:i + 1]
        if ch.isspace():
            i += 1
        elif ch in (b"(", b")", b";"):
            yield (ch.decode(), i)
            i += 1
        elif b"A" <= ch <= b"Z":
            m = _PROP_RE.match(data, i)
            name = m.group().decode()
            start = i
            i = m.end()
            values = []
            while True:
                while i < n and data[i:i + 1].isspace():
                    i += 1
                if i >= n or data[i:i + 1] != b"[":
                    break
                j = i + 1
                buf = bytearray()
                while True:
                    if j >= n:
                        raise SgfError(f"unterminated value of property {name}", j)
                    c = data[j:j + 1]
                    if c == b"\\":
                        if j + 1 >= n:
                            raise SgfError(f"unterminated value of property {name}", j + 1)
                        buf += data[j + 1:j + 2]
                        j += 2
                    elif c == b"]":
                        break
                    else:
                        buf += c
                        j += 1
                values.append(buf.decode("utf-8", errors="replace"))
                i = j + 1
            if not values:
                raise SgfError(f"property {name} has no value", i)
            yield ("prop", start, name, values)
        else:
            raise SgfError(f"unexpected character {ch!r}", i)


def _nodes(data: bytes) -> list[tuple[int, dict[str, list[str]]]]:
    """Main-line nodes of the single game tree in ``data``."""
    depth = 0
    seen_tree = False
    closed = False
    nodes: list[tuple[int, dict]] = []
    current: Optional[dict] = None
    for tok in _tokenize(data):
        kind, off = tok[0], tok[1]
        if closed:
            raise SgfError("multi-game collections are not supported", off)
        if kind == "(":
            if depth >= 1:
                raise SgfError("variations are not supported", off)
            depth += 1
            seen_tree = True
        elif kind == ")":
            if depth == 0:
                raise SgfError("unbalanced ')'", off)
            depth -= 1
            if depth == 0:
                closed = True
        elif kind == ";":
            if depth == 0:
                raise SgfError("node outside a game tree", off)
            current = {}
            nodes.append((off, current))
        else:
            if current is None:
                raise SgfError("property before the first node", off)
            name, values = tok[2], tok[3]
            if name in current:
                raise SgfError(f"duplicate property {name}", off)
            current[name] = values
    if not seen_tree:
        raise SgfError("no game tree", 0)
    if depth:
        raise SgfError("unterminated game tree", len(data))
    if not nodes:
        raise SgfError("empty game tree", 0)
    return nodes


def _point(value: str, size: int, off: int) -> Optional[tuple[int, int]]:
    if value == "" or (value == "tt" and size <= 19):
        return None
    if len(value) != 2 or not value.isalpha() or not value.islower():
        raise SgfError(f"bad point {value!r}", off)
    col, row = ord(value[0]) - 97, ord(value[1]) - 97
    if not (0 <= col < size and 0 <= row < size):
        raise SgfError(f"point {value!r} outside a {size}x{size} board", off)
    return (row, col)


def _number(value: str, name: str, off: int, kind=float):
    try:
        return kind(value.strip())
    except ValueError:
        raise SgfError(f"bad {name} value {value!r}", off) from None


def parse(text) -> SgfGame:
    """Parse one SGF game (main line only)."""
    data = text.encode("utf-8") if isinstance(text, str) else bytes(text)
    nodes = _nodes(data)
    root_off, root = nodes[0]
    game = SgfGame()
    if "GM" in root and root["GM"][0].strip() != "1":
        raise SgfError("not a Go record (GM != 1)", root_off)
    if "SZ" in root:
        sz = root["SZ"][0]
        if ":" in sz:
            raise SgfError("rectangular boards are not supported", root_off)
        game.size = _number(sz, "SZ", root_off, int)
        if game.size > 19:
            raise SgfError(f"board size {game.size} > 19 is not supported", root_off)
        if game.size < goban.MIN_SIZE:
            raise SgfError(f"board size {game.size} is too small", root_off)
    if "KM" in root:
        game.komi = _number(root["KM"][0], "KM", root_off)
    if "HA" in root:
        game.handicap = _number(root["HA"][0], "HA", root_off, int)
    if "DT" in root:
        game.date = root["DT"][0]
        m = re.match(r"\s*(\d{4})", game.date)
        game.year = int(m.group(1)) if m else None
    if "RE" in root:
        game.result = root["RE"][0]
    if "RU" in root:
        game.ruleset = root["RU"][0]
    if "PL" in root:
        pl = root["PL"][0].strip().upper()
        game.player_to_move = {"B": BLACK, "W": WHITE}.get(pl)
    if "AW" in root or "AE" in root:
        raise SgfError("setup stones other than handicap (AB) are not supported", root_off)
    if "AB" in root:
        pts = [_point(v, game.size, root_off) for v in root["AB"]]
        if any(p is None for p in pts):
            raise SgfError("compressed or empty AB lists are not supported", root_off)
        game.setup_black = pts
        game.handicap = max(game.handicap, len(pts))
    for off, node in nodes:
        if node is not root and any(k in node for k in ("AB", "AW", "AE")):
            raise SgfError("setup properties are only supported in the root node", off)
        colours = [c for c in ("B", "W") if c in node]
        if len(colours) > 1:
            raise SgfError("node holds both a black and a white move", off)
        if colours:
            c = colours[0]
            pt = _point(node[c][0], game.size, off)
            game.moves.append(Move(BLACK if c == "B" else WHITE, pt))
    return game


def parse_file(path) -> SgfGame:
    return parse(Path(path).read_bytes())


def _fmt_number(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def _escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace("]", "\\]")


def _sgf_point(pt: Optional[tuple[int, int]]) -> str:
    if pt is None:
        return ""
    return chr(97 + pt[1]) + chr(97 + pt[0])


def serialize(game: SgfGame) -> str:
    parts = [f"(;GM[1]FF[4]SZ[{game.size}]"]
    if game.komi is not None:
        parts.append(f"KM[{_fmt_number(game.komi)}]")
    if game.handicap:
        parts.append(f"HA[{game.handicap}]")
    if game.date is not None:
        parts.append(f"DT[{_escape(game.date)}]")
    elif game.year is not None:
        parts.append(f"DT[{game.year:04d}]")
    if game.result is not None:
        parts.append(f"RE[{_escape(game.result)}]")
    if game.ruleset is not None:
        parts.append(f"RU[{_escape(game.ruleset)}]")
    if game.player_to_move is not None:
        parts.append(f"PL[{goban.color_name(game.player_to_move)}]")
    if game.setup_black:
        parts.append("AB" + "".join(f"[{_sgf_point(p)}]" for p in game.setup_black))
    for mv in game.moves:
        parts.append(f"\n;{goban.color_name(mv.color)}[{_sgf_point(mv.point)}]")
    parts.append(")\n")
    return "".join(parts)


@dataclass(frozen=True)
class FilterCriteria:
    require_size: int = 19
    min_year: int = 1950
    allowed_komi: frozenset = frozenset({2.75, 3.75, 5.5, 6.5})
    max_handicap: int = 0


def filter_reasons(game: SgfGame, crit: FilterCriteria = FilterCriteria()) -> list[str]:
    """Why ``game`` is excluded; empty when it is accepted.  Missing data excludes."""
    reasons = []
    if game.size != crit.require_size:
        reasons.append(f"size {game.size}")
    if game.year is None:
        reasons.append("no date")
    elif game.year <= crit.min_year:
        reasons.append(f"year {game.year}")
    if game.komi is None:
        reasons.append("no komi")
    elif game.komi not in crit.allowed_komi:
        reasons.append(f"komi {game.komi}")
    if game.handicap > crit.max_handicap:
        reasons.append(f"handicap {game.handicap}")
    return reasons


def passes_filter(game: SgfGame, crit: FilterCriteria = FilterCriteria()) -> bool:
    return not filter_reasons(game, crit)


def start_position(game: SgfGame) -> Position:
    to_move = game.player_to_move
    if to_move is None:
        to_move = game.moves[0].color if game.moves else BLACK
    if game.setup_black:
        return goban.setup_position(game.size, black=game.setup_black, to_move=to_move)
    pos = goban.new_position(game.size)
    if to_move != pos.to_move:
        pos = goban.setup_position(game.size, to_move=to_move)
    return pos


def replay(game: SgfGame) -> tuple[list[Position], Optional[goban.IllegalMove]]:
    """Positions before each move, plus the final one; stops at an illegal move."""
    pos = start_position(game)
    out = [pos]
    for mv in game.moves:
        if mv.color != pos.to_move:
            # Records occasionally contain two moves by one side; follow the record.
            pos = goban.with_to_move(pos, mv.color)
            out[-1] = pos
        try:
            pos = goban.play(pos, mv)
        except goban.IllegalMove as exc:
            return out, exc
        out.append(pos)
    return out, None


def to_training_pairs(game: SgfGame, name: str = "<game>") -> list[tuple[Position, Move]]:
    """``(position before move, move)`` for every non-pass move of the record.

    An illegal recorded move ends the game early with a warning; the pairs
    collected before it are kept.
    """
    positions, err = replay(game)
    pairs = []
    for pos, mv in zip(positions[:-1], game.moves):
        if mv.point is not None:
            pairs.append((pos, mv))
    if err is not None:
        log.warning("%s: stopping at move %d: %s", name, len(positions), err)
    return pairs


def scan_corpus(paths: Iterable, crit: FilterCriteria = FilterCriteria(),
                manifest=None) -> list[tuple[str, SgfGame]]:
    """Parse and filter SGF files; write one JSON line per file to ``manifest``."""
    accepted = []
    for path in paths:
        path = str(path)
        try:
            game = parse_file(path)
        except (SgfError, OSError) as exc:
            entry = {"path": path, "accepted": False, "reasons": [f"parse error: {exc}"]}
        else:
            reasons = filter_reasons(game, crit)
            entry = {"path": path, "accepted": not reasons, "reasons": reasons}
            if not reasons:
                accepted.append((path, game))
        if manifest is not None:
            manifest.write(json.dumps(entry) + "\n")
    return accepted
