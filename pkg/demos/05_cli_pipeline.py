"""The full CLI pipeline in one sitting: generate data, filter it, train,
export representations, and check every kernel's gradients.

Equivalent shell commands are printed before each step. Everything lands
in a temporary directory that is removed at the end.

Run:  python demos/05_cli_pipeline.py
"""

import json
import os
import tempfile

from cleer.cli import main

with tempfile.TemporaryDirectory() as work:
    data = os.path.join(work, "demo.segd")
    filtered = os.path.join(work, "demo_filtered.segd")
    run_dir = os.path.join(work, "run")
    reprs = os.path.join(work, "reprs.csv")

    steps = [
        ["gen-data", "--n-per-class", "20", "--t", "64", "--c", "4",
         "--channels", "1", "--snr-db", "10", "--seed", "5", "--out", data],
        ["preprocess", "--data", data, "--out", filtered,
         "--low-hz", "1", "--high-hz", "30", "--notch-hz", "50"],
        ["train", "--data", filtered, "--out-dir", run_dir,
         "--epochs", "4", "--batch-size", "16", "--k-folds", "3",
         "--hidden-dim", "16", "--repr-dim", "24", "--n-blocks", "2",
         "--conv-channels", "16", "--fc-dims", "8", "--seed", "5"],
        ["export-reprs", "--data", filtered,
         "--ckpt", os.path.join(run_dir, "fold0.ckpt"), "--out", reprs],
        ["gradcheck", "--seed", "1"],
    ]
    for argv in steps:
        print("\n$ cleer " + " ".join(argv))
        code = main(argv)
        assert code == 0, f"step failed with exit code {code}"

    manifest = json.load(open(os.path.join(run_dir, "manifest.json")))
    print("\ntrain manifest keys:", sorted(manifest))
    print("train config snapshot:", manifest["config"]["train"])
    print("output hashes recorded:", len(manifest["outputs"]))
