import pytest

from onevar.formulas import FormulaStore


@pytest.fixture
def store():
    return FormulaStore()
