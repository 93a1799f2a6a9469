"""nodalab: a desk-scale laboratory for nodal sets of Laplace eigenfunctions
under geometric surgery (thin handles, attached cavities, perforations)."""

__version__ = "0.1.0"
