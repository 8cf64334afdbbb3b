"""Physical constants shared across the toolkit (SI units)."""

# Magnetic flux quantum h/2e, Wb
FLUX_QUANTUM = 2.067833848e-15

# NV spin frequency-to-field conversion gamma/2pi, Hz/T
GYROMAGNETIC_RATIO = 28e9

# Validity limit of the linear Zeeman model used for the tracked transition, T
MAX_LINEAR_FIELD = 10e-3
