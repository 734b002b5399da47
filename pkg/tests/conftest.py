import sys
from pathlib import Path

# make sibling test helpers (oracles, harness) importable from any cwd
sys.path.insert(0, str(Path(__file__).parent))
