"""windflex: weather-driven wind power scenarios, flexibility reserve sizing and SCUC/RT evaluation."""

__version__ = "0.1.0"
