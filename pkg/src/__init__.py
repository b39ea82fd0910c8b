"""
Couette Boussinesq-MHD spectral stability lab
Main package initialization
"""

__version__ = "0.1.0"
