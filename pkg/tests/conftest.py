import numpy as np
import pytest

from freezeout.layers import ModelSpec

# criterion -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE = {}

ZOO = [
    ("mlp-plain", (2,)),
    ("mlp-residual", (2,)),
    ("mlp-dense", (2,)),
    ("cnn-plain", (1, 6, 6)),
    ("cnn-residual", (1, 6, 6)),
    ("cnn-dense", (1, 6, 6)),
]


def small_spec(arch, input_shape, width=4, depth=3, classes=3):
    return ModelSpec(arch, [width], input_shape, classes, depth=depth)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")
