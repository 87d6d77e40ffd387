#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
semidoa - Robust semiparametric DOA estimation
Main application entry point

Commands:
1. sample   - synthesize CES array snapshots
2. estimate - SCM / Tyler / R-estimator MUSIC on a snapshot file
3. bound    - semiparametric stochastic CRB
4. simulate - Monte Carlo MSE vs SSCRB sweeps
"""

import sys
from pathlib import Path

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent / 'src'))

from semidoa.main import main  # noqa: E402

if __name__ == '__main__':
    sys.exit(main())
