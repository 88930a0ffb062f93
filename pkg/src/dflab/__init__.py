"""dflab: a deterministic lab for deepfake-image binary classification.

Trains and evaluates two from-scratch architectures (a sigmoid MLP and a
row-sequence LSTM) on labeled real/fake face image trees, with a fixed
preprocessing chain and a complete binary-classification metrics suite.
"""

__version__ = "0.1.0"

from .errors import DflError  # noqa: F401
