import sys
from pathlib import Path

# Allow test modules to import the shared oracle helpers as `import oracles`.
sys.path.insert(0, str(Path(__file__).parent))
