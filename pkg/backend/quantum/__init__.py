"""
Statevector simulation package.

Gate circuits, the LCU mixer and its polynomial transform, all on dense
complex amplitude vectors (qubit k = bit k of the basis index).
"""
