"""Single-feeder experiment: 2030 design, growth matrix, option values, MDP simulation.

Runs the CLI stages in order against one output directory so the final
``report`` step finds the dispatch and trajectory artifacts it needs.

    python scripts/run_single_network.py --out runs/single [--seed 42] [--trajectories 1000]
"""
import argparse
import json
import sys
import tempfile
from pathlib import Path

from gridnwa.cli import main

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "sample_feeder.json"


def run(config: Path, out: Path, seed: int) -> int:
    for command in ("optimize", "matrix", "value", "simulate", "report"):
        code = main([command, "--config", str(config), "--seed", str(seed), "--out", str(out)])
        if code:
            print(f"{command} failed with exit code {code}", file=sys.stderr)
            return code
    return 0


def cli():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=CONFIG)
    ap.add_argument("--out", type=Path, default=Path("runs/single"))
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--trajectories", type=int, help="override simulate.n_trajectories")
    args = ap.parse_args()

    config = args.config.resolve()
    if args.trajectories:
        data = json.loads(config.read_text())
        data["simulate"]["n_trajectories"] = args.trajectories
        # keep relative paths valid by writing next to the original
        tmp = tempfile.NamedTemporaryFile("w", suffix=".json", dir=config.parent, delete=False)
        json.dump(data, tmp)
        tmp.close()
        config = Path(tmp.name)
    try:
        code = run(config, args.out, args.seed)
    finally:
        if config != args.config.resolve():
            config.unlink()
    if code == 0:
        summary = json.loads((args.out / "simulation_summary.json").read_text())
        print(json.dumps(summary, indent=2))
    sys.exit(code)


if __name__ == "__main__":
    cli()
