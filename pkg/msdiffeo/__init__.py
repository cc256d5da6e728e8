"""
Multi-scale diffeomorphic registration with kernel mixtures and semidirect products
"""

__version__ = "1.0.0"
