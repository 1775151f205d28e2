import pytest

from plan_helpers import micro_graph


@pytest.fixture
def micro():
    return micro_graph()
