import pytest

from dqsim.errors import ConfigError
from dqsim.verify import COLUMNS, run_suite


@pytest.mark.parametrize("suite", ["dbe", "dro", "qnet", "pst", "apps"])
def test_suite_passes(suite):
    table = run_suite(suite)
    assert list(table.columns) == COLUMNS
    assert len(table) > 0
    assert set(table["suite"]) == {suite}
    assert table["passed"].all(), table[~table["passed"]].to_string()


def test_unknown_suite():
    with pytest.raises(ConfigError, match="Unknown verification suite"):
        run_suite("everything")
