"""Log-periodic power-law fitting for bubbles and antibubbles in price series."""
from .model import LpplParams, OscLayerParams, evaluate, trend_component, oscillatory_component
from .timebase import PriceSeries, ingest_csv, to_decimal_year, from_decimal_year
from .fit_engine import FitConfig, FitResult, fit, fit_fixed_tc, objective

__version__ = "0.1.0"
