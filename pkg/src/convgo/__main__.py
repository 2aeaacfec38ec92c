"""Command line entry point: ``convgo {gtp,arena,train,corpus} ...``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np


def _train(argv) -> None:
    from . import sgf, trainer
    from .policy_net import build_architecture, save_weights

    ap = argparse.ArgumentParser(prog="convgo train",
                                 description="Train a policy network on a directory of SGF files.")
    ap.add_argument("corpus", help="directory of .sgf files")
    ap.add_argument("--arch", default="R2", help="architecture id: A, B, C, R2 or R3")
    ap.add_argument("--out", required=True, help="weight file to write")
    ap.add_argument("--holdout", type=float, default=0.1, help="fraction of games held out")
    ap.add_argument("--epochs", type=int, help="override the preset epoch count")
    ap.add_argument("--batch-size", type=int, help="override the preset minibatch size")
    ap.add_argument("--augment", action="store_true", help="random board symmetries")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--manifest", help="write accepted/rejected games as JSON lines here")
    ap.add_argument("--report", help="write per-epoch losses and accuracy as JSON lines here")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    paths = sorted(Path(args.corpus).glob("*.sgf"))
    if args.manifest:
        with open(args.manifest, "w") as fh:
            games = sgf.scan_corpus(paths, manifest=fh)
    else:
        games = sgf.scan_corpus(paths)
    if len(games) < 2:
        sys.exit(f"need at least two accepted games, found {len(games)}")
    order = np.random.default_rng(args.seed).permutation(len(games))
    n_hold = max(1, int(round(args.holdout * len(games))))
    hold_idx, train_idx = order[:n_hold], order[n_hold:]
    train_pairs = [p for i in train_idx for p in sgf.to_training_pairs(games[i][1], games[i][0])]
    hold_pairs = [p for i in hold_idx for p in sgf.to_training_pairs(games[i][1], games[i][0])]
    print(f"{len(train_idx)} training games ({len(train_pairs)} positions), "
          f"{len(hold_idx)} held out ({len(hold_pairs)} positions)")

    cfg = trainer.preset(args.arch)
    if args.epochs:
        cfg.epochs = args.epochs
    if args.batch_size:
        cfg.batch_size = args.batch_size
    cfg.augment = args.augment
    cfg.seed = args.seed
    size = train_pairs[0][0].size
    net = build_architecture(args.arch, size=size, seed=args.seed)
    net, report = trainer.train(net, train_pairs, cfg, holdout=hold_pairs or None)
    save_weights(net, args.out)
    print(f"{report.accuracy_split} top-1 accuracy {100 * report.accuracy:.2f}%")
    if args.report:
        Path(args.report).write_text(report.to_jsonl())


def main(argv=None) -> None:
    argv = list(sys.argv[1:] if argv is None else argv)
    commands = {"gtp", "arena", "train", "corpus"}
    if not argv or argv[0] not in commands:
        print("usage: convgo {gtp,arena,train,corpus} [options]", file=sys.stderr)
        sys.exit(2)
    cmd, rest = argv[0], argv[1:]
    if cmd == "gtp":
        from .gtp import main as run
    elif cmd == "arena":
        from .arena import main as run
    elif cmd == "corpus":
        from .corpus import main as run
    else:
        run = _train
    run(rest)


if __name__ == "__main__":
    main()
