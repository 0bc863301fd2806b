from __future__ import annotations

from pathlib import Path

import pytest

from etnqcs.config import load_config

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

# filled by test_acceptance.py, printed once at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def rr_cfg():
    return load_config(CONFIGS / "robot_rr.toml")


@pytest.fixture(scope="session")
def tod_cfg():
    return load_config(CONFIGS / "robot_tod.toml")


def short(cfg, t_end: float):
    from dataclasses import replace
    return replace(cfg, t_end=t_end)
