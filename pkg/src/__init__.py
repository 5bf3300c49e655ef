"""
Robust Reserve Toolkit
Equilibrium, certificates and stress tests for second-price auctions with a random reserve
under mean constraints on bidder values.
"""

__version__ = "1.0.0"
