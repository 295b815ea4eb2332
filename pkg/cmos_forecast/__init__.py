"""CMoS forecasting toolkit package."""

from .pipeline import ExperimentPipeline

__all__ = ["ExperimentPipeline"]
