"""icenav: ship navigation in broken ice"""

__version__ = "1.0.0"
