import os
import sys

import pytest

# Add repository root to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from database.db_manager import DatabaseManager
from sde.engine import StepPlan


def pytest_addoption(parser):
    parser.addoption("--update-golden", action="store_true", default=False,
                     help="rewrite tests/golden/ from the current build")


@pytest.fixture
def update_golden(request):
    return request.config.getoption("--update-golden")


@pytest.fixture
def seed():
    return 20240917


@pytest.fixture
def coarse_plan():
    return StepPlan(1e-2, 1.0)


@pytest.fixture
def archive(tmp_path):
    db_manager = DatabaseManager(tmp_path / "runs.db")
    db_manager.init_db()
    return db_manager
