import doctest
import importlib

import pytest

MODULES = ["semcf.graph", "semcf.conditioning", "semcf.truncated", "semcf.sem", "semcf.engine"]


@pytest.mark.parametrize("name", MODULES)
def test_doctests(name):
    result = doctest.testmod(importlib.import_module(name), optionflags=doctest.NORMALIZE_WHITESPACE)
    assert result.failed == 0
