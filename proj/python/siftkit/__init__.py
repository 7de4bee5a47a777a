"""Interactive search space reduction with targeted topic modeling."""

from ._core import (
    Session,
    SiftkitError,
    harmonic_mean,
    nmf,
    porter_stem,
    precision_recall_f1,
    pres,
    tokenize,
)

__all__ = [
    "Session",
    "SiftkitError",
    "harmonic_mean",
    "nmf",
    "porter_stem",
    "precision_recall_f1",
    "pres",
    "tokenize",
]
__version__ = "0.1.0"
