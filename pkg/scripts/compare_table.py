"""Event-triggered versus time-triggered transmission counts for both configurations."""

import argparse
from pathlib import Path

from etnqcs.config import load_config
from etnqcs.harness import compare, dumps

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--json", help="write the table to this file as well")
    args = ap.parse_args()
    rows = {}
    print(f"{'config':<10} {'net':>3} {'etc':>6} {'ttc':>6} {'ratio':>7}")
    for name in ("robot_rr", "robot_tod"):
        report, _, _ = compare(load_config(ROOT / "configs" / f"{name}.toml"))
        rows[name] = report.as_dict()
        for i, net in enumerate(rows[name]["networks"]):
            print(f"{name:<10} {i + 1:>3} {net['etc_count']:>6} {net['ttc_count']:>6} {net['reduction_ratio']:>7.4f}")
    if args.json:
        Path(args.json).write_text(dumps(rows))


if __name__ == "__main__":
    main()
