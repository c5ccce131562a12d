from __future__ import annotations

import numpy as np
import pytest

from fastdata.core import NULL_ID, AttributeDictionary


def matrix_from_transactions(
    transactions: list[list[tuple[str, str]]],
    dictionary: AttributeDictionary,
    columns: list[str],
) -> np.ndarray:
    """Encode per-point attribute lists into a positional id matrix."""
    out = np.full((len(transactions), len(columns)), NULL_ID, dtype=np.int32)
    col_index = {c: j for j, c in enumerate(columns)}
    for i, txn in enumerate(transactions):
        for name, value in txn:
            out[i, col_index[name]] = dictionary.encode(name, value)
    return out


@pytest.fixture
def dictionary() -> AttributeDictionary:
    return AttributeDictionary()


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance gate lines, which per-test capture would hide."""
    try:
        from test_acceptance import GATE_LINES
    except ImportError:
        return
    if GATE_LINES:
        terminalreporter.section("acceptance gates")
        for line in GATE_LINES:
            terminalreporter.write_line(line)
