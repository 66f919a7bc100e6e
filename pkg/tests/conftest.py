import sys
from pathlib import Path

# test helpers (naive_oracle, test_model fixtures) import from this directory
sys.path.insert(0, str(Path(__file__).parent))
