from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from strata.experiment import units
from strata.surrogate import TrainConfig, train
from strata.synth import SynthConfig, generate

settings.register_profile("strata", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("strata")

COMPUTE_PRODUCT = """\
public static int computeProduct(List<Integer> values) {
    // multiply every entry together
    int product = 1;
    for (int v : values) {
        product *= v;
    }
    return product;
}
"""


@pytest.fixture(scope="session")
def small_records():
    return generate(SynthConfig(n_methods=300, seed=11), "train")


@pytest.fixture(scope="session")
def small_methods(small_records):
    return units(small_records)


@pytest.fixture(scope="session")
def small_model(small_methods):
    return train(small_methods, TrainConfig(epochs=3, seed=5)).model


# criterion id -> (passed, detail), filled by the acceptance module
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: int(c[1:])):
        ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"{cid} {'PASS' if ok else 'FAIL'}  {detail}")
