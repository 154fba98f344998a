"""UAV-assisted WBAN edge computing with mobility prediction."""

__version__ = "0.1.0"
