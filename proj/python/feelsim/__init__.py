"""Federated edge learning simulator.

Thin wrapper over the C++ core: data-aware splitting (Jaccard diversity),
energy-aware participant selection, FedAvg training loop, and the CSV-emitting
experiment harness.
"""

from feelsim._core import *  # noqa: F401,F403
from feelsim._core import __version__  # noqa: F401
