import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mecbench.app import AppConfig, OffloadApp  # noqa: E402
from mecbench.registry.http import RegistryServer  # noqa: E402
from mecbench.vision.workload import WorkloadProfile  # noqa: E402


@pytest.fixture
def registry_server():
    server = RegistryServer(("127.0.0.1", 0), sweep_interval_ms=50).start()
    yield server
    server.stop()


@pytest.fixture
def cloud_app():
    app = OffloadApp(AppConfig(workload=WorkloadProfile(0.0, calibration=1000.0))).start()
    yield app
    app.stop()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number])
