"""Classical shadows from Keyl measurements on batches of copies.

Submodules:
    matcore     matrices, random unitaries, seeded streams
    tableaux    partitions, Young tableaux, Schur-Weyl distribution
    schurweyl   isotypic projectors, weak Schur sampling, Keyl's POVM
    balanced    perturbation estimator for near-maximally-mixed states
    splitting   Split/DSplit reduction and the general-state shadow
    gaussproj   Gaussian sketches and the dimension-reduction wrapper
    claimcheck  numerical verification suite
    cli         command-line interface
"""
from .balanced import BalancedEstimate, estimate_balanced, query_balanced
from .splitting import ClassicalShadow, SplitSignature, build_shadow, query_shadow

__all__ = ["BalancedEstimate", "ClassicalShadow", "SplitSignature", "build_shadow",
           "estimate_balanced", "query_balanced", "query_shadow"]
__version__ = "0.1.0"
