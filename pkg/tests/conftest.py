import os
import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(Path(__file__).resolve().parent))  # for `import oracles`

#: Directory with the benchmark CSVs produced by scripts/fetch_datasets.py.
DATA_DIR = Path(os.environ.get("DPBOOST_DATA_DIR", REPO_ROOT / "data"))
