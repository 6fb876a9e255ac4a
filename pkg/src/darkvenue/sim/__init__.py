"""Monte Carlo engine for the venue game."""
from .auctions import LitAuctionState, run_dark_auction, run_lit_auction, sample_auction_rounds
from .block import Block, PendingTx, assemble_block, assemble_blocks
from .engine import (
    AffineEstimate,
    EpisodeOutcome,
    PayoffEstimate,
    affine_estimate,
    estimate_payoffs,
    paired_gain,
    run_episode,
    simulate_batch,
)

__all__ = [
    "AffineEstimate", "Block", "EpisodeOutcome", "LitAuctionState", "PayoffEstimate", "PendingTx",
    "affine_estimate", "assemble_block", "assemble_blocks", "estimate_payoffs", "paired_gain",
    "run_dark_auction", "run_episode", "run_lit_auction", "sample_auction_rounds", "simulate_batch",
]
