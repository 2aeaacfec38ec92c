import io
import subprocess
import sys

import numpy as np
import pytest

from convgo import goban
from convgo.goban import Move
from convgo.gtp import (COMMANDS, Engine, EngineOptions, GtpError, format_vertex, parse_vertex,
                        serve, vertex_to_xy, xy_to_vertex)
from convgo.policy_net import build_architecture, save_weights
from convgo.search import SearchConfig

LIST = "\n".join(COMMANDS)

# (command, expected reply); None marks a genmove whose vertex is only checked for legality.
GOLDEN = [
    ("1 protocol_version", "=1 2\n\n"),
    ("2 name", "=2 convgo\n\n"),
    ("3 version", "=3 0.1.0\n\n"),
    ("4 known_command genmove", "=4 true\n\n"),
    ("5 known_command loadsgf", "=5 false\n\n"),
    ("6 list_commands", f"=6 {LIST}\n\n"),
    ("7 boardsize 9", "=7\n\n"),
    ("8 clear_board", "=8\n\n"),
    ("9 komi 6.5", "=9\n\n"),
    ("10 play b E5", "=10\n\n"),
    ("11 play w E5", "?11 illegal move\n\n"),
    ("12 play w C3", "=12\n\n"),
    ("13 play b Z9", "?13 illegal move\n\n"),
    ("14 play x C4", "?14 invalid color 'x'\n\n"),
    ("15 final_score", "=15 W+6.5\n\n"),
    ("16 genmove b", None),
    ("17 genmove w", None),
    ("18 time_settings 0 1 0", "=18\n\n"),
    ("19 foo", "?19 unknown command\n\n"),
    ("20 boardsize 25", "?20 unacceptable size\n\n"),
    ("21 boardsize 5", "=21\n\n"),
    ("22 clear_board", "=22\n\n"),
    ("23 play b A1", "=23\n\n"),
    ("24 play w B1", "=24\n\n"),
    ("25 play b B2", "=25\n\n"),
    ("26 play w A2", "=26\n\n"),
    ("27 play b A1", "?27 illegal move\n\n"),
    ("28 play b pass", "=28\n\n"),
    ("29 play w pass", "=29\n\n"),
    ("30 final_score", "=30 W+8.5\n\n"),
    ("31 genmove b", "=31 pass\n\n"),
    ("32 komi abc", "?32 syntax error\n\n"),
    ("33 known_command quit", "=33 true\n\n"),
    ("name", "= convgo\n\n"),
    ("35 boardsize", "?35 syntax error\n\n"),
    ("36 clear_board", "=36\n\n"),
    ("37 play white D4", "=37\n\n"),
    ("38 genmove black", None),
    ("39 play b D4", "?39 illegal move\n\n"),
    ("40 quit", "=40\n\n"),
]


def small_engine(seed=0, **kw):
    cfg = SearchConfig(total_rollouts=64, batch_size=32, seed=seed, **kw)
    return Engine(EngineOptions(search=cfg, size=9))


def run_golden(engine):
    """Feed the golden session; return (mismatches, genmove checks)."""
    mismatches, illegal = [], []
    for cmd, want in GOLDEN:
        before = engine.pos
        got = engine.handle(cmd)
        if want is None:
            cid = cmd.split()[0]
            assert got.startswith(f"={cid} ") and got.endswith("\n\n")
            vertex = got[len(cid) + 2:-2]
            color = goban.BLACK if cmd.split()[-1][0] == "b" else goban.WHITE
            if not is_legal_reply(before, color, vertex):
                illegal.append((cmd, got))
        elif got != want:
            mismatches.append((cmd, want, got))
    return mismatches, illegal, engine


def is_legal_reply(pos, color, vertex):
    if vertex == "resign":
        return True
    try:
        point = parse_vertex(vertex, pos.size)
        goban.play(goban.with_to_move(pos, color), Move(color, point))
    except (GtpError, goban.IllegalMove):
        return False
    return True


def test_golden_transcript():
    mismatches, illegal, engine = run_golden(small_engine())
    assert mismatches == []
    assert illegal == []
    assert engine.quit
    assert len(GOLDEN) == 40


def test_serve_stops_at_quit():
    out = io.StringIO()
    serve(small_engine(), io.StringIO("protocol_version\n# comment\n\nquit\nname\n"), out)
    assert out.getvalue() == "= 2\n\n=\n\n"


def test_vertex_codec():
    assert xy_to_vertex(0, 0) == "A1"
    assert xy_to_vertex(8, 0) == "J1"
    assert vertex_to_xy("J1") == (8, 0)
    assert vertex_to_xy("t19", 19) == (18, 18)
    with pytest.raises(GtpError):
        vertex_to_xy("Z9", 19)
    with pytest.raises(GtpError):
        vertex_to_xy("I5", 19)
    with pytest.raises(GtpError):
        vertex_to_xy("A0", 19)
    assert format_vertex(None, 19) == "pass"
    assert parse_vertex("PASS", 19) is None


def test_vertex_codec_is_bijective():
    for n in (5, 9, 19):
        seen = set()
        for r in range(n):
            for c in range(n):
                v = format_vertex((r, c), n)
                seen.add(v)
                assert parse_vertex(v, n) == (r, c)
        assert len(seen) == n * n
    assert format_vertex((18, 0), 19) == "A1"


def test_genmove_legal_in_random_positions():
    rng = np.random.default_rng(0)
    engine = small_engine(1)
    for _ in range(10):
        engine.handle("clear_board")
        for _ in range(int(rng.integers(5, 40))):
            pts = goban.legal_points(engine.pos)
            f = int(rng.choice(pts))
            color = "b" if engine.pos.to_move == goban.BLACK else "w"
            assert engine.handle(f"play {color} {format_vertex(divmod(f, 9), 9)}") == "=\n\n"
        before = engine.pos
        color = "b" if before.to_move == goban.BLACK else "w"
        reply = engine.handle(f"genmove {color}")
        assert is_legal_reply(before, before.to_move, reply[2:-2])


def test_resigns_when_hopeless():
    cfg = SearchConfig(total_rollouts=64, batch_size=32)
    engine = Engine(EngineOptions(search=cfg, size=5, resign_threshold=1.01))
    assert engine.handle("genmove b") == "= resign\n\n"


def test_greedy_engine_needs_network():
    with pytest.raises(ValueError):
        Engine(EngineOptions(greedy=True))


def test_greedy_engine_plays_network_move():
    net = build_architecture("R2", size=9, init="zeros")
    engine = Engine(EngineOptions(search=SearchConfig(prior_policy=net), greedy=True, size=9))
    assert engine.handle("genmove b") == "= A9\n\n"


def test_tree_reuse_across_genmoves():
    engine = small_engine(2)
    engine.handle("genmove b")
    kept = engine.searcher.root
    assert kept is not None
    engine.handle("genmove w")
    assert engine.last_result.rollouts == 64


def test_cli_session(tmp_path):
    net = build_architecture("R2", size=9, seed=0)
    path = tmp_path / "ppn.cpnw"
    save_weights(net, path)
    script = "boardsize 9\nplay b E5\ngenmove w\nquit\n"
    proc = subprocess.run([sys.executable, "-m", "convgo", "gtp", "--ppn", str(path), "--rollouts", "64",
                           "--batch", "32", "--prior-k", "8", "--seed", "3"],
                          input=script, capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    replies = proc.stdout.split("\n\n")
    assert replies[0] == "=" and replies[1] == "="
    assert replies[2].startswith("= ") and replies[3] == "="
