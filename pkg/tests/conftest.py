"""Shared fixtures and the acceptance-summary reporting hook."""

import numpy as np
import pytest

from nlscma.codebook import LAYER_PRESETS, NonlinearCodebook, default_graph
from nlscma.lattice import make_overlapped_constellation

# (criterion id, passed, detail) tuples appended by tests/test_acceptance.py;
# printed one line per criterion at the end of the run.
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def make_nonlinear(
    seed=0,
    lattice="gaussian",
    window="rectangular",
    layer_rule="mapping-37",
    identity_p=False,
):
    """A valid (usually mediocre) codebook for plumbing tests."""
    rng = np.random.default_rng(seed)
    graph = default_graph()
    code = make_overlapped_constellation(lattice, window)
    labeling = rng.permutation(code.size)
    p = np.arange(graph.label_bits) if identity_p else rng.permutation(graph.label_bits)
    return NonlinearCodebook(
        graph=graph,
        S=code.points,
        labeling=labeling,
        layers=LAYER_PRESETS[layer_rule],
        P=p,
        lattice=code,
    )


@pytest.fixture
def random_codebook():
    return make_nonlinear(seed=7)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {name}: {detail}")
