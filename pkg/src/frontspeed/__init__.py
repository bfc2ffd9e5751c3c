"""Front speeds of level-set, quadratic and reaction-diffusion models in periodic flows."""

__version__ = "0.1.0"
