"""Object-centric rigid-body dynamics models built on Cl(2,0,1) primitives."""

__version__ = "0.1.0"
