#!/usr/bin/env python3
"""Walkthrough: the full file-based pipeline through the CLI.

synth writes a seeded instance to disk, sim scores the embedding pair,
ensemble fuses the cosine scores with the synthetic models, and eval reports
Recall@K. Identical seeds reproduce every output byte-for-byte.
"""

import pathlib
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(tempfile.mkdtemp(prefix="rankfuse-demo-"))


def cli(*args):
    cmd = [sys.executable, "-m", "rankfuse.cli", *args]
    print("$ rankfuse", " ".join(args))
    out = subprocess.run(cmd, capture_output=True, text=True)
    if out.stdout:
        print(out.stdout, end="")
    if out.stderr:
        print(out.stderr, end="", file=sys.stderr)
    if out.returncode != 0:
        raise SystemExit(f"command failed with exit code {out.returncode}")


# 1. A 150-item synthetic instance: paired embeddings, two external models,
#    and a manifest carrying the ground truth.
cli("synth", "--out-dir", str(ROOT), "--seed", "5",
    "--n-items", "150", "--dim", "12", "--noise-sigma", "0.5", "--skills", "0.65,0.8")

# 2. Cosine similarity of the embedding pair: the guidance score matrix.
cli("sim", "--queries", str(ROOT / "text.npy"),
    "--gallery", str(ROOT / "image.npy"), "--out", str(ROOT / "guidance.npy"))

# 3. Shortlist audit: which gallery items would a matching head rescore?
cli("select", "--features", str(ROOT / "image.npy"),
    "--guidance", str(ROOT / "guidance.npy"), "--k", "5",
    "--out", str(ROOT / "shortlist.csv"))

# 4. Fuse guidance + the two models, tuning each step's weight on the
#    manifest's ground truth.
cli("ensemble", "--manifest", str(ROOT / "manifest.json"),
    "--model", str(ROOT / "guidance.npy"),
    "--out", str(ROOT / "fused.npy"), "--trace", str(ROOT / "trace.txt"))

# 5. Score the fused matrix.
cli("eval", "--scores", str(ROOT / "fused.npy"),
    "--gt", str(ROOT / "manifest.json"), "--k", "1,5,10")

# 6. Every stochastic stage is seeded: the decision audit below prints the
#    same lines on every machine.
cli("lhp-sample", "--seed", "123", "--count", "5")

print(f"\nartifacts left in {ROOT}")
