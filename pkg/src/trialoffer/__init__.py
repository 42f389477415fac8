"""Trial-offer market dynamics under position bias and power-law social signals."""

from .errors import TrialOfferError
from .model import (
    MarketSpec,
    MarketState,
    Ranking,
    purchase_probabilities,
    purchase_probabilities_from_counts,
    quality_ranking,
    try_probabilities,
)
from .signals import Affine, Power, eval_signal

__all__ = [
    "TrialOfferError",
    "MarketSpec",
    "MarketState",
    "Ranking",
    "Power",
    "Affine",
    "eval_signal",
    "quality_ranking",
    "try_probabilities",
    "purchase_probabilities",
    "purchase_probabilities_from_counts",
]
