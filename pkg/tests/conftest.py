from dataclasses import replace

import pytest

from kitewind.config import preset_config
from kitewind.presets import ENV, WINGS
from kitewind.simkit import run


@pytest.fixture(scope="session")
def wing9():
    return WINGS["airush9"]


@pytest.fixture(scope="session")
def env():
    return ENV


def flight(preset="airush9", wind=3.0, duration=120.0, **guidance):
    cfg = preset_config(preset)
    g = replace(cfg.guidance, **guidance) if guidance else cfg.guidance
    return replace(cfg, wind=replace(cfg.wind, nominal_speed=wind), guidance=g, duration=duration)


@pytest.fixture(scope="session")
def nominal_log():
    """Default airush9 flight at 3 m/s for two minutes."""
    return run(flight())


ACCEPTANCE = {}


def record(criterion: int, passed: bool, detail: str):
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
