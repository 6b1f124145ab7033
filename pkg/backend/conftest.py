import os
import sys

# Add backend/ to the path so `app` imports resolve
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

os.environ.setdefault("LOG_JSON", "false")
os.environ.setdefault("LOG_LEVEL", "WARNING")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-scale Monte Carlo runs")
