"""Run the two shipped robot-arm configurations and write their artifacts.

    python3 scripts/run_robot.py [--out out] [--plot]
"""

import argparse
from pathlib import Path

from etnqcs.config import load_config
from etnqcs.harness import settles, simulate, window_maxima, write_artifacts

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = {"robot_rr": ROOT / "configs" / "robot_rr.toml", "robot_tod": ROOT / "configs" / "robot_tod.toml"}


def plot(result, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    t = result.trace.t_steps
    eta = result.trace.eta_steps
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for i, g in enumerate(result.model.eta_groups):
        ax.plot(t, (eta[:, g] ** 2).sum(axis=1) ** 0.5, lw=0.8, label=f"arm {i + 1}")
    ax.set_xlabel("t")
    ax.set_ylabel("|eta_i|")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out")
    ap.add_argument("--plot", action="store_true", help="also save |eta| plots (needs matplotlib)")
    args = ap.parse_args()
    for name, path in CONFIGS.items():
        res = simulate(load_config(path))
        out = Path(args.out) / name
        write_artifacts(res, out)
        maxima = window_maxima(res.trace)
        s = res.trace.summary()
        print(f"{name}: " + ", ".join(f"net{i + 1} {n['triggered']}/{n['samples']} sent"
                                      for i, n in enumerate(s["networks"])))
        print(f"  late window maxima {[round(m, 4) for m in maxima]} settled={settles(maxima)}")
        if res.monitor is not None:
            print(f"  monitor {res.monitor.as_dict()}")
        if args.plot:
            plot(res, out / "eta.png")


if __name__ == "__main__":
    main()
