import pytest

from crossmodal import kansei_graph, session


@pytest.fixture(scope="session")
def slr_structure():
    return kansei_graph.load_fixture()


@pytest.fixture(scope="session")
def exp1_design():
    return session.experiment1_design()


@pytest.fixture(scope="session")
def exp2_design():
    return session.experiment2_design()
