"""Global pytest configuration"""
import sys
from pathlib import Path

from hypothesis import settings

# Ensure nedlin is importable without installation
project_root = Path(__file__).parent.resolve()
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

# Integrations inside property tests are slow and their timing varies.
settings.register_profile("nedlin", deadline=None, max_examples=25)
settings.load_profile("nedlin")
