#!/usr/bin/env python3
"""End-to-end CLI walkthrough on a toy set.

Writes everything under runs/toy/: the synthesized set, a selection mask, a
lambda sweep, pretrained and fine-tuned checkpoints, metrics, and eval output.
Running it twice produces byte-identical artifacts.
"""

import sys
from pathlib import Path

from skd.cli import main

OUT = Path("runs/toy")


def run(argv):
    print(f"$ skd {' '.join(argv)}")
    code = main(argv)
    if code != 0:
        sys.exit(code)


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    sset = OUT / "toy.skd"
    run(["synth", "--classes", "5", "--per-class", "12", "--teacher-dim", "32",
         "--input-dim", "6", "--versions", "4", "--noise", "0.01",
         "--outlier-fraction", "0.1", "--seed", "7", "--out", str(sset)])
    run(["graph", "dump", "--set", str(sset), "--out", str(OUT / "graph.txt")])
    run(["sweep", "--set", str(sset), "--out", str(OUT / "sweep.csv")])
    run(["select", "--set", str(sset), "--lambda", "-1", "--out", str(OUT / "sel.mask")])
    run(["pretrain", "--set", str(sset), "--epochs", "40", "--lr", "1e-3",
         "--seed", "7", "--out", str(OUT / "pre.ckpt")])
    run(["finetune", "--set", str(sset), "--ckpt", str(OUT / "pre.ckpt"),
         "--mask", str(OUT / "sel.mask"), "--supervision", "sc",
         "--epochs", "80", "--lr", "1e-3", "--seed", "7",
         "--out", str(OUT / "sc.ckpt")])
    run(["eval", "--set", str(sset), "--ckpt", str(OUT / "sc.ckpt"),
         "--task", "verify", "--pairs", "100", "--seed", "7"])
    run(["eval", "--set", str(sset), "--ckpt", str(OUT / "sc.ckpt"), "--task", "identify"])
    run(["bench", "--ckpt", str(OUT / "sc.ckpt")])
    print(f"\nartifacts in {OUT}/")
