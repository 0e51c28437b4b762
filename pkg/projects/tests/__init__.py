"""
Test suite for the manifold geodesics project.
"""

__version__ = "0.1.0"
