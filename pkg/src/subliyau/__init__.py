"""Gamma calculus, heat semigroups and Li-Yau constants on three model groups.

Heisenberg (rho = 0), SU(2) (rho = 1) and SL(2) (rho = -1), all with
brackets ``[X, Y] = Z``, ``[X, Z] = -rho Y``, ``[Y, Z] = rho X``.
"""
from .groups import HEISENBERG, SL2, SU2, MODELS, GroupModel, get_model
from .jets import ScalarField, apply_field, test_function_suite
from .gamma import gamma, gamma2_definition, gamma2_expanded, L_op, Z_op
from .liyau import LiYauForm, coefficients_from_b, corollary22_form, corollary24_form
from .vprofile import VProfile, functionals, liyau_from_V

__version__ = "0.1.0"

__all__ = [
    "HEISENBERG", "SL2", "SU2", "MODELS", "GroupModel", "get_model",
    "ScalarField", "apply_field", "test_function_suite",
    "gamma", "gamma2_definition", "gamma2_expanded", "L_op", "Z_op",
    "LiYauForm", "coefficients_from_b", "corollary22_form", "corollary24_form",
    "VProfile", "functionals", "liyau_from_V",
]
