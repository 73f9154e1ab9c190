import sys
from pathlib import Path

# the recording script doubles as the source of deterministic fixture pages
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "scripts"))
