"""Determinants of Fuglede-Kadison type, path-integral determinants, Mahler
measures and torsion invariants in finite-dimensional surrogates of finite
von Neumann algebras."""
from .algebra import (AlgebraElement, FiniteDimAlgebra, FiniteGroupSpec, cyclic_group,
                      functional_calculus_hermitian, matrix_algebra, matrix_exp,
                      matrix_log_principal, permutation_group, regular_representation,
                      symmetric_group, trace)
from .errors import BudgetError, DomainError, NcdetError, StructuralError
from .fkdet import (SingularValueProfile, absolute_value, fk_det, fk_det_extended, fkl_det,
                    log_fk_det, log_fkl_det, singular_profile)
from .ktheory import (K0Class, K0Lattice, Membership, equivalent, idempotent_check, k0_lattice,
                      lattice_member, rank_vector, tau_of_class)
from .mahler import (LaurentPolynomial, QuadratureResult, fk_det_zd, mahler_1d_exact,
                     mahler_quadrature)
from .pathdet import (BottLoop, QuotientValue, SampledPath, SegmentProduct, SmoothPath,
                      bott_loop, build_canonical_path, delta_tau, fk_from_delta, integral_delta,
                      pointwise_product, primitive_difference)
from .torsion import (BasedChainComplex, FiniteGroupComplex, GroupRingComplex, LaurentComplex,
                      TorsionValue, chain_contraction, l2_torsion_finite_group, l2_torsion_zd,
                      ray_singer_check, reidemeister_torsion, torsion_milnor, torsion_odd_even,
                      validate_complex)

__version__ = "0.1.0"
