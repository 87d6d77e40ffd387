#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
MSE-vs-sweep figures: one curve per estimator plus the SSCRB curve,
logarithmic vertical axis, rendered to SVG
"""

import logging
from pathlib import Path
from typing import Union

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .exceptions import StorageError  # noqa: E402
from .models import ExperimentResult, Family  # noqa: E402

logger = logging.getLogger(__name__)

CURVE_STYLE = {
    "scm": {"label": "SCM-MUSIC", "marker": "s", "linestyle": "-"},
    "tyler": {"label": "Tyler-MUSIC", "marker": "o", "linestyle": "-"},
    "r": {"label": "R-MUSIC", "marker": "^", "linestyle": "-"},
    "sscrb": {"label": "SSCRB", "marker": None, "linestyle": "--"},
}

# fixed salt keeps the generated element ids (and thus the file) reproducible
PLOT_RC = {
    "svg.hashsalt": "semidoa",
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (6.0, 4.0),
}


def _sweep_label(family: Family) -> str:
    if family is Family.STUDENT_T:
        return r"$\lambda$"
    if family is Family.GENERALIZED_GAUSSIAN:
        return "s"
    return "sweep parameter"


def plot_experiment(result: ExperimentResult, path: Union[str, Path]) -> Path:
    """Write the figure as SVG; every curve is a group with id `curve-<name>`"""
    path = Path(path)
    config = result.config
    sweep = np.array([p.sweep_value for p in result.points])

    with plt.rc_context(PLOT_RC):
        fig, ax = plt.subplots()
        try:
            for name in config.estimators:
                style = CURVE_STYLE[name]
                (line,) = ax.plot(sweep, result.mse(name), label=style["label"],
                                  marker=style["marker"], linestyle=style["linestyle"])
                line.set_gid(f"curve-{name}")
            style = CURVE_STYLE["sscrb"]
            (line,) = ax.plot(sweep, result.sscrb(), label=style["label"], color="black",
                              linestyle=style["linestyle"])
            line.set_gid("curve-sscrb")

            ax.set_yscale("log")
            if config.family is Family.STUDENT_T and sweep.size and sweep.max() / sweep.min() > 20:
                ax.set_xscale("log")
            ax.set_xlabel(_sweep_label(config.family))
            ax.set_ylabel("MSE index")
            ax.grid(True, which="both", alpha=0.3)
            ax.legend()
            fig.tight_layout()

            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as e:
            raise StorageError(f"Cannot write plot {path}: {e}") from e
        finally:
            plt.close(fig)

    logger.info(f"Wrote plot to {path}")
    return path
