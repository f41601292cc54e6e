"""Quantisation of Lie-Poisson manifolds at desk scale.

Submodules: ``numkit`` (grids, trigonometric polynomials, finite differences,
RK4), ``liepoisson`` (brackets on algebroid duals), ``weylrn`` (quantised
symbols on a periodic box), ``nctorus`` (the deformed torus algebra),
``poismap`` (Poisson maps from tangent bundles) and ``experiments`` with the
``qlab`` command line on top.
"""

__version__ = "0.1.0"
