"""Four-city scale-up under the storage cost triplet, plus the breakeven search.

    python scripts/run_megacity.py --out runs/megacity
"""
import argparse
import json
import sys
from pathlib import Path

import pandas as pd

from gridnwa.cli import main

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "megacity.json"


def cli():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=CONFIG)
    ap.add_argument("--out", type=Path, default=Path("runs/megacity"))
    args = ap.parse_args()
    code = main(["scale", "--config", str(args.config), "--out", str(args.out)])
    if code:
        sys.exit(code)
    table = pd.read_csv(args.out / "city_aggregates.csv")
    print(table.to_string(index=False))
    print(json.dumps(json.loads((args.out / "scale_summary.json").read_text()), indent=2))


if __name__ == "__main__":
    cli()
