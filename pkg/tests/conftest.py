import os

import pytest
import torch

FIXTURES = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def main_corpus():
    return os.path.join(FIXTURES, "corpus_main.txt")


@pytest.fixture(scope="session")
def cap_corpus():
    return os.path.join(FIXTURES, "corpus_cap.txt")


@pytest.fixture(scope="session")
def golden_dir():
    return os.path.join(FIXTURES, "golden")


@pytest.fixture(scope="session")
def small_workspace(tmp_path_factory):
    import wsutil

    directory = tmp_path_factory.mktemp("ws_small")
    return wsutil.build(str(directory), wsutil.SMALL_WORLD)


@pytest.fixture(scope="session")
def trend_workspace(tmp_path_factory):
    import wsutil

    directory = tmp_path_factory.mktemp("ws_trend")
    return wsutil.build(str(directory), wsutil.TREND_WORLD)
