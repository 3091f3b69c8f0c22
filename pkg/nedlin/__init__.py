"""nedlin: nonuniform contraction, dichotomy spectrum and linearizing maps for nonautonomous ODEs."""

__version__ = "0.1.0"
