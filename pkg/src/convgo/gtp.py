"""Go Text Protocol (version 2) engine frontend.

Vertices use GTP's frame: column letters A-T without I from the left, line
numbers counted from the bottom.  Internally a point is ``(row, col)`` with
row 0 at the top, so ``A1`` on a 19x19 board is ``(18, 0)``.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from typing import Optional, TextIO

from . import goban
from .goban import BLACK, WHITE, Move, Position
from .policy_net import PolicyNet, load_weights
from .search import GoGame, SearchConfig, Searcher, action_to_move, greedy_move, move_to_action

log = logging.getLogger(__name__)

__all__ = [
    "COMMANDS",
    "Engine",
    "EngineOptions",
    "GtpError",
    "format_vertex",
    "parse_vertex",
    "serve",
    "vertex_to_xy",
    "xy_to_vertex",
]

COLUMNS = "ABCDEFGHJKLMNOPQRSTUVWXYZ"
NAME = "convgo"
VERSION = "0.1.0"


class GtpError(Exception):
    pass


def xy_to_vertex(x: int, y: int) -> str:
    """``(column, line)`` counted from the lower-left corner, 0-based, to ``"A1"`` style."""
    if not (0 <= x < 25 and 0 <= y < 25):
        raise GtpError("invalid coordinate")
    return f"{COLUMNS[x]}{y + 1}"


def vertex_to_xy(text: str, size: int = 25) -> tuple[int, int]:
    s = text.strip().upper()
    if len(s) < 2 or s[0] not in COLUMNS or not s[1:].isdigit():
        raise GtpError(f"invalid vertex {text!r}")
    x, y = COLUMNS.index(s[0]), int(s[1:]) - 1
    if not (0 <= x < size and 0 <= y < size):
        raise GtpError(f"vertex {text!r} off the board")
    return x, y


def format_vertex(point: Optional[tuple[int, int]], size: int) -> str:
    if point is None:
        return "pass"
    r, c = point
    return xy_to_vertex(c, size - 1 - r)


def parse_vertex(text: str, size: int) -> Optional[tuple[int, int]]:
    """Internal point for a GTP vertex; ``None`` for pass."""
    if text.strip().lower() == "pass":
        return None
    x, y = vertex_to_xy(text, size)
    return (size - 1 - y, x)


def parse_color(text: str) -> int:
    t = text.strip().lower()
    if t in ("b", "black"):
        return BLACK
    if t in ("w", "white"):
        return WHITE
    raise GtpError(f"invalid color {text!r}")


@dataclass
class EngineOptions:
    search: SearchConfig = field(default_factory=SearchConfig)
    greedy: bool = False
    resign_threshold: float = 0.05
    size: int = 19


COMMANDS = [
    "protocol_version",
    "name",
    "version",
    "known_command",
    "list_commands",
    "boardsize",
    "clear_board",
    "komi",
    "play",
    "genmove",
    "final_score",
    "time_settings",
    "quit",
]


class Engine:
    """One GTP session: a game position plus the search that plays it."""

    def __init__(self, opts: Optional[EngineOptions] = None):
        self.opts = opts or EngineOptions()
        if self.opts.greedy and self.opts.search.prior_policy is None:
            raise ValueError("greedy play needs a prior policy network")
        self.komi = self.opts.search.komi
        self.size = self.opts.size
        self.quit = False
        self.last_result = None
        self._reset()

    def _reset(self) -> None:
        self.pos: Position = goban.new_position(self.size)
        cfg = self.opts.search
        self.game = GoGame(self.komi, cfg.rollout_policy, cfg.prior_policy, cfg.rollout_move_cap)
        # The random stream carries over across games so a session never repeats itself.
        old = getattr(self, "searcher", None)
        self.searcher = Searcher(self.game, cfg, old.rng if old is not None else None)

    # -- protocol --------------------------------------------------------

    def handle(self, line: str) -> str:
        """Answer one command line; empty string for blank/comment lines."""
        text = line.split("#", 1)[0].replace("\t", " ").strip()
        if not text:
            return ""
        parts = text.split()
        cid = ""
        if parts[0].isdigit():
            cid = parts.pop(0)
        if not parts:
            return f"?{cid} missing command\n\n"
        name, args = parts[0].lower(), parts[1:]
        handler = getattr(self, f"cmd_{name}", None) if name in COMMANDS else None
        if handler is None:
            return f"?{cid} unknown command\n\n"
        try:
            result = handler(args)
        except GtpError as exc:
            return f"?{cid} {exc}\n\n"
        if result:
            return f"={cid} {result}\n\n"
        return f"={cid}\n\n"

    def cmd_protocol_version(self, args):
        return "2"

    def cmd_name(self, args):
        return NAME

    def cmd_version(self, args):
        return VERSION

    def cmd_known_command(self, args):
        if len(args) != 1:
            raise GtpError("syntax error")
        return "true" if args[0].lower() in COMMANDS else "false"

    def cmd_list_commands(self, args):
        return "\n".join(COMMANDS)

    def cmd_boardsize(self, args):
        if len(args) != 1 or not args[0].isdigit():
            raise GtpError("syntax error")
        n = int(args[0])
        if not goban.MIN_SIZE <= n <= goban.MAX_SIZE:
            raise GtpError("unacceptable size")
        self.size = n
        self._reset()
        return ""

    def cmd_clear_board(self, args):
        self._reset()
        return ""

    def cmd_komi(self, args):
        if len(args) != 1:
            raise GtpError("syntax error")
        try:
            self.komi = float(args[0])
        except ValueError:
            raise GtpError("syntax error") from None
        self.game.komi = self.komi
        return ""

    def cmd_time_settings(self, args):
        return ""

    def cmd_quit(self, args):
        self.quit = True
        return ""

    def cmd_play(self, args):
        if len(args) != 2:
            raise GtpError("syntax error")
        color = parse_color(args[0])
        try:
            point = parse_vertex(args[1], self.size)
        except GtpError:
            raise GtpError("illegal move") from None
        pos = goban.with_to_move(self.pos, color)
        try:
            self.pos = goban.play(pos, Move(color, point))
        except goban.IllegalMove:
            raise GtpError("illegal move") from None
        return ""

    def cmd_genmove(self, args):
        if len(args) != 1:
            raise GtpError("syntax error")
        color = parse_color(args[0])
        pos = goban.with_to_move(self.pos, color)
        mv = self.choose(pos)
        if mv is None:
            return "resign"
        self.pos = goban.play(pos, mv)
        return format_vertex(mv.point, self.size)

    def cmd_final_score(self, args):
        score = goban.score_tromp_taylor(self.pos, self.komi)
        if score == 0:
            return "0"
        return f"B+{score:g}" if score > 0 else f"W+{-score:g}"

    # -- move choice -----------------------------------------------------

    def choose(self, pos: Position) -> Optional[Move]:
        """Move for the side to move in ``pos``; ``None`` means resign."""
        if goban.is_terminal(pos):
            return Move(pos.to_move, None)
        if self.opts.greedy:
            return greedy_move(pos, self.opts.search.prior_policy)
        result = self.searcher.search(pos)
        self.last_result = result
        log.info("search: %s visits=%d value=%.3f %.0f rollouts/s",
                 result.action, max(result.visits), result.value, result.rollouts_per_s)
        if result.value < self.opts.resign_threshold:
            return None
        mv = action_to_move(pos, result.action)
        self.searcher.advance(move_to_action(pos, mv))
        return mv


def serve(engine: Engine, inp: TextIO, out: TextIO) -> None:
    for line in inp:
        reply = engine.handle(line)
        if reply:
            out.write(reply)
            out.flush()
        if engine.quit:
            break


def _load(path: Optional[str]) -> Optional[PolicyNet]:
    return load_weights(path) if path else None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description="GTP engine: batched Monte Carlo tree search for Go.")
    ap.add_argument("--ppn", help="prior policy network weight file")
    ap.add_argument("--rpn", help="rollout policy network weight file")
    ap.add_argument("--rollouts", type=int, default=5120)
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--bandit", choices=["ucb1", "thompson"], default="thompson")
    ap.add_argument("--prior-k", type=float, default=16.0)
    ap.add_argument("--komi", type=float, default=7.5)
    ap.add_argument("--size", type=int, default=19)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--greedy", action="store_true", help="play the prior network's top move")
    ap.add_argument("--resign", type=float, default=0.05, help="resign below this win rate")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def options_from_args(args) -> EngineOptions:
    cfg = SearchConfig(total_rollouts=args.rollouts, batch_size=args.batch, bandit=args.bandit,
                       prior_strength=args.prior_k, rollout_policy=_load(args.rpn),
                       prior_policy=_load(args.ppn), komi=args.komi, seed=args.seed)
    return EngineOptions(search=cfg, greedy=args.greedy, resign_threshold=args.resign,
                         size=args.size)


def main(argv=None) -> None:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(message)s")
    serve(Engine(options_from_args(args)), sys.stdin, sys.stdout)


if __name__ == "__main__":
    main()
