"""meshfuzz: coverage-guided greybox fuzzing across cooperating components.

Keep this module import-light: simulated target components import subpackages
from here on every restart, and restart latency matters mid-campaign.
"""

__version__ = "0.1.0"
