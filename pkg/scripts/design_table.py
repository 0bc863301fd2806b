"""Largest T and Delta per network from each configuration's design table.

Infeasible tables are reported instead of aborting the whole sweep; the
reason usually is that the conditions already fail at T = 0.
"""

import argparse
from pathlib import Path

from etnqcs.config import design_lambda_bar, load_config
from etnqcs.design import InfeasibleDesign, max_T_Delta

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="*", default=[str(ROOT / "configs" / n) for n in ("robot_rr.toml", "robot_tod.toml")])
    ap.add_argument("--tol", type=float, default=1e-5)
    args = ap.parse_args()
    for path in args.configs:
        cfg = load_config(path)
        for k, spec in enumerate(cfg.design):
            if spec is None:
                continue
            lb = design_lambda_bar(cfg, k)
            p0, p1 = spec.p0, spec.p1
            # both inequalities at tau = 0; if either fails no T > 0 can pass
            a = p0.gamma * p0.phi0 - (1 + p1.varrho) * lb ** 2 * p1.gamma * p1.phi0
            b = p1.gamma * p1.phi0 - (1 + p0.varrho) * p0.gamma * p0.phi0
            head = f"{Path(path).stem} net{k + 1} lambda_bar={lb:.4f}"
            try:
                res = max_T_Delta(p0, p1, lb, tol=args.tol)
                print(f"{head}: T={res.T:.5f} Delta={res.Delta:.5f}")
            except InfeasibleDesign as exc:
                print(f"{head}: infeasible ({exc}); margins at 0: first {a:+.4f}, second {b:+.4f}")


if __name__ == "__main__":
    main()
