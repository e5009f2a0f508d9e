"""Counter-UAS post-detection decisions and the clarification protocols behind them."""

__version__ = "0.1.0"
