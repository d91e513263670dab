import os
import sys

# The tests import the shared ``fixtures`` module by name (see run_tests.py),
# so make this directory importable when running under pytest.
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
