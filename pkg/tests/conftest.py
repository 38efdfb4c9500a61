import json

import pytest
from reports import synth_spec

from svfair.cli import main


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    """Synthetic scores and metadata written by the synth command (seed 7)."""
    out = tmp_path_factory.mktemp("synth")
    spec = out / "spec.json"
    spec.write_text(json.dumps(synth_spec()))
    assert main(["synth", "--spec", str(spec), "--seed", "7", "--out", str(out)]) == 0
    return out


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_lines():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)
