"""Engine-versus-engine matches over GTP, with win-rate statistics.

Engines are either external programs spoken to over pipes or in-process
:class:`convgo.gtp.Engine` objects.  A goban referee checks every move,
so an engine that answers with an illegal move, crashes or times out
forfeits the game.
"""
from __future__ import annotations

import argparse
import json
import math
import queue
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from . import features, goban, sgf
from .goban import BLACK, WHITE, Move, Position
from .gtp import Engine, EngineOptions, GtpError, format_vertex, parse_vertex
from .policy_net import PolicyNet
from .search import GoGame, SearchConfig, Searcher

__all__ = [
    "EngineFailure",
    "GameRecord",
    "MatchConfig",
    "MatchReport",
    "RandomEngine",
    "run_match",
    "measure_throughput",
    "std_error",
]


class EngineFailure(Exception):
    """An engine crashed, hung, or broke the protocol."""


def std_error(p: float, n: int) -> float:
    """Binomial standard error of a proportion ``p`` estimated from ``n`` games."""
    if n < 1:
        raise ValueError("need at least one game")
    return math.sqrt(p * (1.0 - p) / n)


class RandomEngine(Engine):
    """Plays a uniformly random legal point; passes only when none is left."""

    def __init__(self, seed: int = 0, size: int = 19, komi: float = 7.5):
        super().__init__(EngineOptions(search=SearchConfig(komi=komi, total_rollouts=1,
                                                           batch_size=1), size=size))
        self.rng = np.random.default_rng(seed)

    def choose(self, pos: Position) -> Optional[Move]:
        pts = goban.legal_points(pos)
        if goban.is_terminal(pos) or len(pts) == 0:
            return Move(pos.to_move, None)
        f = int(pts[self.rng.integers(len(pts))])
        return Move(pos.to_move, divmod(f, pos.size))


# -- engine connections -------------------------------------------------------

class _InProcess:
    def __init__(self, engine: Engine):
        self.engine = engine

    def send(self, command: str, timeout: float) -> str:
        reply = self.engine.handle(command)
        return _check_reply(command, reply)

    def rollouts_per_s(self) -> Optional[float]:
        res = getattr(self.engine, "last_result", None)
        return res.rollouts_per_s if res is not None else None

    def close(self) -> None:
        pass


class _Subprocess:
    def __init__(self, argv: list[str]):
        try:
            self.proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                         stderr=subprocess.DEVNULL, text=True, bufsize=1)
        except OSError as exc:
            raise EngineFailure(f"cannot start {argv[0]}: {exc}") from None
        self.lines: queue.Queue = queue.Queue()
        threading.Thread(target=self._pump, daemon=True).start()

    def _pump(self) -> None:
        for line in self.proc.stdout:
            self.lines.put(line)
        self.lines.put(None)

    def send(self, command: str, timeout: float) -> str:
        try:
            self.proc.stdin.write(command + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError):
            raise EngineFailure("engine closed its input") from None
        deadline = time.monotonic() + timeout
        buf = []
        while True:
            left = deadline - time.monotonic()
            try:
                line = self.lines.get(timeout=max(left, 0.0))
            except queue.Empty:
                raise EngineFailure(f"no reply to {command!r} within {timeout:g} s") from None
            if line is None:
                raise EngineFailure("engine exited")
            if line.strip() == "" and buf:
                return _check_reply(command, "".join(buf) + "\n")
            if line.strip():
                buf.append(line)

    def rollouts_per_s(self) -> Optional[float]:
        return None

    def close(self) -> None:
        try:
            self.proc.stdin.write("quit\n")
            self.proc.stdin.flush()
            self.proc.wait(timeout=5)
        except Exception:
            self.proc.kill()


def _check_reply(command: str, reply: str) -> str:
    if not reply.startswith("="):
        raise EngineFailure(f"{command!r} failed: {reply.strip()}")
    body = reply[1:].strip()
    parts = body.split(None, 1)
    if parts and parts[0].isdigit():
        body = parts[1] if len(parts) > 1 else ""
    return body


EngineSpec = Union[str, Callable[[int], Engine]]


def _connect(spec: EngineSpec, seed: int):
    if callable(spec):
        return _InProcess(spec(seed))
    if spec.strip() == "random":
        return _InProcess(RandomEngine(seed))
    return _Subprocess(shlex.split(spec))


# -- matches --------------------------------------------------------------------

@dataclass
class MatchConfig:
    engine_a: EngineSpec
    engine_b: EngineSpec
    games: int = 2
    komi: float = 7.5
    size: int = 19
    seed: int = 0
    alternate_colors: bool = True
    out_dir: Optional[str] = None
    move_timeout: float = 300.0

    def __post_init__(self):
        if self.games < 1:
            raise ValueError("a match needs at least one game")


@dataclass
class GameRecord:
    index: int
    a_color: int
    winner: Optional[int]   # BLACK, WHITE or None for a draw
    score: Optional[float]  # Black minus White; None after resignation or forfeit
    moves: list[Move]
    reason: str             # "score", "resign" or "forfeit: ..."
    sgf_path: Optional[str] = None

    @property
    def a_result(self) -> float:
        if self.winner is None:
            return 0.5
        return 1.0 if self.winner == self.a_color else 0.0


@dataclass
class MatchReport:
    games: int
    wins_a: int
    wins_b: int
    draws: int
    forfeits: list[str] = field(default_factory=list)
    records: list[GameRecord] = field(default_factory=list)
    rollouts_per_s_a: Optional[float] = None
    rollouts_per_s_b: Optional[float] = None

    @property
    def win_rate(self) -> float:
        """Engine A's score rate; draws count as half a win."""
        return (self.wins_a + 0.5 * self.draws) / self.games

    @property
    def std_error(self) -> float:
        return std_error(self.win_rate, self.games)

    @property
    def sgf_paths(self) -> list[str]:
        return [r.sgf_path for r in self.records if r.sgf_path]

    def table(self) -> str:
        rows = [
            f"{'games':<12}{self.games}",
            f"{'A wins':<12}{self.wins_a}",
            f"{'B wins':<12}{self.wins_b}",
            f"{'draws':<12}{self.draws}",
            f"{'A win rate':<12}{100 * self.win_rate:.1f} +/- {100 * self.std_error:.1f}",
        ]
        for name, v in (("A rollout/s", self.rollouts_per_s_a), ("B rollout/s", self.rollouts_per_s_b)):
            if v is not None:
                rows.append(f"{name:<12}{v:.0f}")
        if self.forfeits:
            rows.append(f"{'forfeits':<12}{len(self.forfeits)}")
        return "\n".join(rows)

    def to_jsonl(self) -> str:
        lines = [json.dumps({"game": r.index, "a_color": goban.color_name(r.a_color),
                             "winner": goban.color_name(r.winner) if r.winner else None,
                             "score": r.score, "reason": r.reason, "moves": len(r.moves),
                             "sgf": r.sgf_path})
                 for r in self.records]
        lines.append(json.dumps({"games": self.games, "wins_a": self.wins_a, "wins_b": self.wins_b,
                                 "draws": self.draws, "win_rate": self.win_rate,
                                 "std_error": self.std_error,
                                 "rollouts_per_s_a": self.rollouts_per_s_a,
                                 "rollouts_per_s_b": self.rollouts_per_s_b}))
        return "\n".join(lines) + "\n"


def _result_string(winner: Optional[int], score: Optional[float], reason: str) -> str:
    if winner is None:
        return "0"
    tag = goban.color_name(winner)
    if reason == "resign":
        return f"{tag}+R"
    if reason.startswith("forfeit"):
        return f"{tag}+F"
    return f"{tag}+{abs(score):g}"


def play_game(cfg: MatchConfig, index: int, a_black: bool, rates: dict) -> GameRecord:
    """Play one game; ``rates`` collects rollouts/s samples per engine label."""
    seed = cfg.seed * 1_000_003 + index
    a_color = BLACK if a_black else WHITE
    engines = {}
    pos = goban.new_position(cfg.size)
    moves: list[Move] = []
    try:
        try:
            engines["A"] = _connect(cfg.engine_a, seed)
        except EngineFailure as exc:
            return GameRecord(index, a_color, goban.opponent(a_color), None, moves, f"forfeit: A {exc}")
        try:
            engines["B"] = _connect(cfg.engine_b, seed + 1)
        except EngineFailure as exc:
            return GameRecord(index, a_color, a_color, None, moves, f"forfeit: B {exc}")
        label_of = {a_color: "A", goban.opponent(a_color): "B"}
        for label in ("A", "B"):
            try:
                engines[label].send("protocol_version", cfg.move_timeout)
                engines[label].send(f"boardsize {cfg.size}", cfg.move_timeout)
                engines[label].send("clear_board", cfg.move_timeout)
                engines[label].send(f"komi {cfg.komi:g}", cfg.move_timeout)
            except EngineFailure as exc:
                loser = a_color if label == "A" else goban.opponent(a_color)
                return GameRecord(index, a_color, goban.opponent(loser), None, moves,
                                  f"forfeit: {label} {exc}")
        while not goban.is_terminal(pos):
            color = pos.to_move
            label = label_of[color]
            other = "B" if label == "A" else "A"
            cname = "b" if color == BLACK else "w"
            try:
                reply = engines[label].send(f"genmove {cname}", cfg.move_timeout).strip().lower()
                rate = engines[label].rollouts_per_s()
                if rate is not None:
                    rates[label].append(rate)
                if reply == "resign":
                    return GameRecord(index, a_color, goban.opponent(color), None, moves, "resign")
                mv = Move(color, parse_vertex(reply, cfg.size))
                pos = goban.play(pos, mv)
            except (EngineFailure, goban.IllegalMove, GtpError) as exc:
                return GameRecord(index, a_color, goban.opponent(color), None, moves,
                                  f"forfeit: {label} {exc}")
            moves.append(mv)
            try:
                engines[other].send(f"play {cname} {format_vertex(mv.point, cfg.size)}",
                                    cfg.move_timeout)
            except EngineFailure as exc:
                return GameRecord(index, a_color, color, None, moves, f"forfeit: {other} {exc}")
        score = goban.score_tromp_taylor(pos, cfg.komi)
        winner = BLACK if score > 0 else WHITE if score < 0 else None
        return GameRecord(index, a_color, winner, score, moves, "score")
    finally:
        for conn in engines.values():
            conn.close()


def _write_sgf(cfg: MatchConfig, rec: GameRecord) -> str:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    game = sgf.SgfGame(size=cfg.size, komi=cfg.komi, moves=rec.moves,
                       result=_result_string(rec.winner, rec.score, rec.reason),
                       date=time.strftime("%Y-%m-%d"))
    path = out / f"game_{rec.index:04d}.sgf"
    path.write_text(sgf.serialize(game))
    return str(path)


def run_match(cfg: MatchConfig, on_game: Optional[Callable[[GameRecord], None]] = None) -> MatchReport:
    rates: dict[str, list[float]] = {"A": [], "B": []}
    records = []
    for g in range(cfg.games):
        a_black = (g % 2 == 0) if cfg.alternate_colors else True
        rec = play_game(cfg, g, a_black, rates)
        if cfg.out_dir:
            rec.sgf_path = _write_sgf(cfg, rec)
        records.append(rec)
        if on_game is not None:
            on_game(rec)
    wins_a = sum(1 for r in records if r.winner is not None and r.winner == r.a_color)
    draws = sum(1 for r in records if r.winner is None)
    return MatchReport(
        games=cfg.games, wins_a=wins_a, wins_b=cfg.games - wins_a - draws, draws=draws,
        forfeits=[f"game {r.index}: {r.reason}" for r in records if r.reason.startswith("forfeit")],
        records=records,
        rollouts_per_s_a=float(np.mean(rates["A"])) if rates["A"] else None,
        rollouts_per_s_b=float(np.mean(rates["B"])) if rates["B"] else None,
    )


# -- throughput -----------------------------------------------------------------

def measure_throughput(cfg: SearchConfig, position: Position, repeats: int = 1) -> dict:
    """Rollouts per second of a full search, and network positions per second."""
    game = GoGame.from_config(cfg)
    best = None
    for _ in range(repeats):
        res = Searcher(game, cfg).search(position)
        if best is None or res.wall_time < best.wall_time:
            best = res
    out = {"rollouts": best.rollouts, "wall_time": best.wall_time,
           "rollouts_per_s": best.rollouts_per_s}
    nets = [n for n in (cfg.rollout_policy, cfg.prior_policy) if isinstance(n, PolicyNet)]
    if nets:
        out["positions_per_s"] = _positions_per_s(nets[0], position, cfg.batch_size)
    return out


def _positions_per_s(net: PolicyNet, position: Position, batch: int) -> float:
    x = np.repeat(features.extract(position)[None], batch, axis=0)
    masks = np.ones((batch, position.size, position.size), dtype=bool)
    t0 = time.perf_counter()
    net.predict(x, masks)
    return batch / (time.perf_counter() - t0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description="Play a match between two GTP engines.")
    ap.add_argument("--engine-a", required=True, help="command line, or 'random'")
    ap.add_argument("--engine-b", required=True, help="command line, or 'random'")
    ap.add_argument("--games", type=int, default=2)
    ap.add_argument("--komi", type=float, default=7.5)
    ap.add_argument("--size", type=int, default=19)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--no-alternate", action="store_true", help="engine A always plays Black")
    ap.add_argument("--timeout", type=float, default=300.0, help="seconds allowed per move")
    ap.add_argument("--out-dir", help="directory for SGF records and report.jsonl")
    return ap


def main(argv=None) -> None:
    args = build_parser().parse_args(argv)
    cfg = MatchConfig(args.engine_a, args.engine_b, games=args.games, komi=args.komi,
                      size=args.size, seed=args.seed, alternate_colors=not args.no_alternate,
                      out_dir=args.out_dir, move_timeout=args.timeout)
    report = run_match(cfg, on_game=lambda r: print(
        f"game {r.index}: A as {goban.color_name(r.a_color)}, "
        f"{_result_string(r.winner, r.score, r.reason)} ({r.reason})", flush=True))
    print(report.table())
    if args.out_dir:
        (Path(args.out_dir) / "report.jsonl").write_text(report.to_jsonl())


if __name__ == "__main__":
    main()
