import doctest
import importlib

import pytest

MODULES = [
    "app.secure_consensus.matrix_core",
    "app.secure_consensus.graph_markov",
    "app.secure_consensus.protocol_core",
    "app.secure_consensus.gain_synthesis",
    "app.secure_consensus.sim_harness",
    "app.secure_consensus.baseline",
]


@pytest.mark.parametrize("name", MODULES)
def test_docstring_examples(name: str) -> None:
    result = doctest.testmod(importlib.import_module(name), optionflags=doctest.NORMALIZE_WHITESPACE)
    assert result.failed == 0
    assert result.attempted > 0
