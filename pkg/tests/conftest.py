import pytest
from hypothesis import settings

from spskit.treebank import LabelInventory, parse_bracketed

# The whole suite is reproducible, property tests included.
settings.register_profile("deterministic", derandomize=True)
settings.load_profile("deterministic")


@pytest.fixture
def fig_inventory():
    return LabelInventory(sps_labels={"adv"}, pos_labels={"t", "w"})


@pytest.fixture
def flat_time_tree():
    return parse_bracketed("(adv (t 昨天) (t 晚上) (w ，))")


@pytest.fixture
def nested_time_tree():
    return parse_bracketed("(adv (t (t 昨天) (t 晚上)) (w ，))")
