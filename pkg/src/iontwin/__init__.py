"""Digital twin of a photonics-integrated 88Sr+ surface-electrode ion trap."""

__version__ = "0.1.0"
