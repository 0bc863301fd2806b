"""Command-line entry point: ``etnqcs {simulate,compare,design,validate}``."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .config import ConfigError, load_config
from .design import DesignError, InfeasibleDesign
from .harness import compare, design_table, dumps, simulate, write_artifacts
from .hybrid import SimulationError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INFEASIBLE = 0, 2, 3, 4


def _load(config, seed, step, out_dir):
    cfg = load_config(config, {"seed": seed, "step": step, "out_dir": out_dir})
    return cfg


def _guard(fn):
    try:
        return fn()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    except InfeasibleDesign as exc:
        click.echo(f"infeasible design: {exc}", err=True)
        return EXIT_INFEASIBLE
    except (SimulationError, DesignError, FloatingPointError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return EXIT_NUMERIC


config_opt = click.option("--config", "config", required=True, type=click.Path(dir_okay=False),
                          help="TOML or JSON config file.")
seed_opt = click.option("--seed", type=int, default=None, help="Override the config seed.")
step_opt = click.option("--step", type=float, default=None, help="Override the integrator step.")
out_opt = click.option("--out-dir", type=click.Path(file_okay=False), default=None,
                       help="Directory for artifacts (default: config out_dir).")


@click.group()
def main():
    """Event-triggered networked quantized control simulator."""


@main.command("simulate")
@config_opt
@seed_opt
@out_opt
@step_opt
def simulate_cmd(config, seed, out_dir, step):
    """Run one simulation and write trace, summary and plot data."""
    def go():
        cfg = _load(config, seed, step, out_dir)
        res = simulate(cfg)
        paths = write_artifacts(res, cfg.out_dir)
        s = res.trace.summary()
        for i, net in enumerate(s["networks"]):
            click.echo(f"network {i + 1}: samples={net['samples']} triggered={net['triggered']} "
                       f"saturations={net['saturations']}")
        if res.monitor is not None:
            click.echo(f"monitor: {res.monitor.as_dict()}")
        click.echo(f"wrote {', '.join(str(p) for p in paths.values())}")
        return EXIT_OK
    sys.exit(_guard(go))


@main.command("compare")
@config_opt
@seed_opt
@out_opt
@step_opt
def compare_cmd(config, seed, out_dir, step):
    """Event-triggered run versus its rho = 0 time-triggered twin."""
    def go():
        cfg = _load(config, seed, step, out_dir)
        report, etc, ttc = compare(cfg)
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "comparison.json").write_text(dumps(report.as_dict()))
        write_artifacts(etc, out, "etc_")
        write_artifacts(ttc, out, "ttc_")
        for i, net in enumerate(report.as_dict()["networks"]):
            click.echo(f"network {i + 1}: etc={net['etc_count']} ttc={net['ttc_count']} "
                       f"ratio={net['reduction_ratio']:.4f}")
        return EXIT_OK
    sys.exit(_guard(go))


@main.command("design")
@config_opt
@click.option("--tol", type=float, default=1e-5, show_default=True, help="Bisection tolerance.")
@out_opt
def design_cmd(config, tol, out_dir):
    """Largest MASP and MAD per network from the timer-ODE conditions."""
    def go():
        if not tol > 0:
            raise ConfigError("tol", f"must be positive, got {tol}")
        cfg = _load(config, None, None, out_dir)
        table = design_table(cfg, tol)
        text = dumps(table)
        click.echo(text, nl=False)
        if out_dir is not None:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            (Path(out_dir) / "design.json").write_text(text)
        return EXIT_OK
    sys.exit(_guard(go))


@main.command("validate")
@config_opt
def validate_cmd(config):
    """Parse and validate a config without running it."""
    def go():
        cfg = load_config(config)
        cfg.build_model()
        click.echo(f"{config}: ok ({cfg.model}, {len(cfg.networks)} networks)")
        return EXIT_OK
    sys.exit(_guard(go))


if __name__ == "__main__":
    main()
