"""
lipbound - trivial, tight and empirical Lipschitz bounds for small
feed-forward networks.
"""

__version__ = "0.1.0"
