#!/usr/bin/env python3
"""Train twice in strict-determinism mode with the same seed and compare final checkpoints byte for byte.

Expects a toy dataset (and, for the conditional mode, an embedding cache) prepared by desk_pipeline.py
or by the CLI directly.
"""
from __future__ import annotations

import argparse
import hashlib
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
MAIN = ROOT / "app" / "main.py"
FINAL = "final.fgan"


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def train(python: str, data: Path, out: Path, args: argparse.Namespace) -> Path:
    cmd = [python, str(MAIN), "train-gan", "--data", str(data), "--out", str(out),
           "--seed", str(args.seed), "--mode", args.mode, "--iterations", str(args.iterations),
           "--strict-determinism", "--no-eval"]
    if args.embeddings:
        cmd += ["--embeddings", str(args.embeddings)]
    subprocess.run(cmd, check=True)
    return out / FINAL


def main(argv: list[str] | None = None):
    p = argparse.ArgumentParser()
    p.add_argument("--data", type=Path, required=True, help="Toy dataset root")
    p.add_argument("--embeddings", type=Path, help="Embedding cache for the conditional mode")
    p.add_argument("--work", type=Path, default=ROOT / "runs" / "determinism")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--mode", choices=["unconditional", "conditional"], default="unconditional")
    p.add_argument("--python", default=sys.executable)
    args = p.parse_args(argv)

    try:
        first = train(args.python, args.data, args.work / "a", args)
        second = train(args.python, args.data, args.work / "b", args)
    except subprocess.CalledProcessError as exc:
        print("Training failed:", exc, file=sys.stderr)
        sys.exit(2)

    a, b = sha256(first), sha256(second)
    print(f"{first}: {a}")
    print(f"{second}: {b}")
    if a != b:
        print("Checkpoints differ", file=sys.stderr)
        sys.exit(1)
    print("Checkpoints are bit-identical")


if __name__ == "__main__":
    main()
