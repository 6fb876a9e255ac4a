"""Dark-venue adoption game: analytic solver, Monte Carlo engine and sandwich detector."""
from .model import (
    AgentStrategyProfile,
    BiddingRule,
    ModelParams,
    ParamsError,
    Scenario,
    Venue,
    fee_floor,
    standard_profile,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "AgentStrategyProfile", "BiddingRule", "ModelParams", "ParamsError", "Scenario", "Venue",
    "fee_floor", "standard_profile", "validate",
]
