#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
semidoa - Robust semiparametric DOA estimation

CES snapshot synthesis, SCM / Tyler / R-estimator shape matrices, MUSIC,
the semiparametric stochastic CRB and a Monte Carlo harness comparing them.

License: MIT
"""

__version__ = "1.0.0"

# Submodules are imported explicitly by callers (storage reads __version__ from here)

__all__ = [
    "hermitian",
    "ces",
    "array_model",
    "estimators",
    "music",
    "bound",
    "simulation",
    "config",
    "storage",
    "plotting",
]
