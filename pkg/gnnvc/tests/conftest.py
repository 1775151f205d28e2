import pytest

from gnn_helpers import tri_instance as _tri_instance


@pytest.fixture
def tri_instance():
    return _tri_instance()
