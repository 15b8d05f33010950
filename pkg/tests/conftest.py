import pytest

from ris_icas.config import parse_config

SMALL_CONFIG = """\
[experiment]
seed = 5
replicates = 2

[env]
n_elements = 4
n_actions = 4
episode_length_T = 5

[train]
episodes = 4
max_episode_step = 5
batch_size = 4
hidden = 8

[sweep]
weights = 0.0, 0.5, 0.95, 1.0
n_grid = 2, 4
b_grid = 1, 2
learning_rates = 0.1, 0.01
eval_episodes = 3
smoothing_window = 2
static_n_elements = 3
"""


@pytest.fixture
def small_config_text():
    return SMALL_CONFIG


@pytest.fixture
def small_config():
    return parse_config(SMALL_CONFIG)


ACCEPTANCE_LINES = {}


@pytest.fixture
def verdict():
    """Record and print one line per acceptance criterion, then assert it."""

    def record(number, ok, detail):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} | {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
