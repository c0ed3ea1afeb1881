"""Hybrid content/collaborative recommender whose neighbourhoods come from a
weighted stochastic block model fitted to the user co-purchase network."""

__version__ = "0.1.0"
