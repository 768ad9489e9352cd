"""Stochastic six-vertex heights: exact laws, samplers, contraction maps and lower-tail rate functions."""

from .height_core import Face, HeightField, Region, Vertex
from .s6v_model import ModelParams
from .rate_functions import RateParams, mu_alpha

__all__ = ["Face", "HeightField", "Region", "Vertex", "ModelParams", "RateParams", "mu_alpha"]
__version__ = "0.1.0"
