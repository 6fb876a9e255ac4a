"""Sandwich detection, frontrunnability and summary statistics over swap datasets."""
from .arbitrage import ArbitrageMatch, identify_arbitrages, unique_pairs
from .events import IN_OUT, OUT_IN, DuplicateKey, EventFormatError, SwapEvent, load_events, write_events
from .frontrunnable import Classification, FrontrunnableClassifier, classify_frontrunnable
from .ols import OLSRegressor, OLSResult, RankDeficient, design, ols
from .stats import DailyStats, EmptyInput, Summary, daily_series, summary_table
from .synthetic import Corpus, generate_corpus

__all__ = [
    "ArbitrageMatch", "identify_arbitrages", "unique_pairs", "IN_OUT", "OUT_IN", "DuplicateKey", "EventFormatError",
    "SwapEvent",
    "load_events", "write_events", "Classification", "FrontrunnableClassifier", "classify_frontrunnable",
    "OLSRegressor", "OLSResult", "RankDeficient", "design", "ols", "DailyStats", "EmptyInput", "Summary",
    "daily_series", "summary_table", "Corpus", "generate_corpus",
]
