#!/usr/bin/env python3
"""Run the whole desk workflow through the CLI: toy data, encoder, embeddings, GAN.

Each stage is a separate `app/main.py` process; a failing stage stops the pipeline
with its exit code.
"""
from __future__ import annotations

import argparse
import shlex
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
MAIN = ROOT / "app" / "main.py"


def run(cmd: list[str]) -> subprocess.CompletedProcess:
    print("$", shlex.join(cmd))
    return subprocess.run(cmd, check=True)


def stage(python: str, command: str, *args: str) -> list[str]:
    return [python, str(MAIN), command, *args]


def main(argv: list[str] | None = None):
    p = argparse.ArgumentParser()
    p.add_argument("--out", type=Path, default=ROOT / "runs" / "desk", help="Run directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["unconditional", "conditional"], default="conditional")
    p.add_argument("--iterations", type=int, help="Override train.iterations")
    p.add_argument("--config", type=Path, help="Flat section.key = value file")
    p.add_argument("--python", default=sys.executable, help="Interpreter for the CLI")
    args = p.parse_args(argv)

    data = args.out / "toy"
    common = ["--seed", str(args.seed), "--log-dir", str(ROOT / "logs")]
    if args.config:
        common += ["--config", str(args.config)]

    stages = [
        stage(args.python, "make-toy-data", "--out", str(data), *common),
        stage(args.python, "train-encoder", "--data", str(data), "--out", str(args.out), *common),
        stage(args.python, "encode", "--data", str(data), "--out", str(args.out), *common),
    ]
    train = stage(args.python, "train-gan", "--data", str(data), "--out", str(args.out), "--mode", args.mode, *common)
    if args.iterations:
        train += ["--iterations", str(args.iterations)]
    stages.append(train)

    for cmd in stages:
        try:
            run(cmd)
        except subprocess.CalledProcessError as exc:
            print(f"Stage failed: {cmd[2]} (exit {exc.returncode})", file=sys.stderr)
            sys.exit(exc.returncode)
    print(f"Pipeline finished: {args.out}")


if __name__ == "__main__":
    main()
