"""Run the whole pipeline at a small scale and print where the report is.

Usage: python demos/small_lineage.py [OUT_DIR]

Synthesizes 200 clips, trains three short generations with a narrow
network (d=4, full 16384-sample architecture), analyzes Gen0..Gen3 and
writes the report. Takes a few minutes on one core; expect the early
generations to produce mostly unanalyzable noise at this training length.
"""

import json
import sys
import tempfile
from pathlib import Path

from soundchain.cli import main

CONFIG = {
    "corpus": {"n_tv": 180, "n_stv": 20, "seed": 11},
    "gan": {"model_dim": 4, "batch_size": 16, "total_steps": 100},
    "lineage": {"n_generations": 3, "n_generate": 200, "master_seed": 11},
    "stats": {"cap_tv": 157},
}


def run(out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    cfg_path = out / "run.json"
    cfg_path.write_text(json.dumps(CONFIG, indent=2))
    cfg = ["--config", str(cfg_path)]
    steps = [
        ["synth-corpus", "--out", str(out / "corpus")],
        ["run-lineage", "--corpus", str(out / "corpus"), "--out", str(out / "lineage"), "--resume"],
        ["analyze", "--lineage", str(out / "lineage"), "--out", str(out / "analysis")],
        ["report", "--analysis", str(out / "analysis"), "--out", str(out / "report")],
    ]
    for argv in steps:
        print("$ soundchain", " ".join(argv), flush=True)
        code = main(argv + cfg)
        if code:
            return code
    print(f"report: {out / 'report' / 'report.md'}")
    return 0


if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="soundchain-"))
    sys.exit(run(target))
