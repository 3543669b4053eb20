"""
Quixer - quantum transformer simulator, trainer and resource estimator.

Classical statevector simulation of token unitaries mixed by a Linear
Combination of Unitaries and transformed by a trainable polynomial,
trained end-to-end on next-token language modelling.
"""

__version__ = "0.1.0"
