import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ncdet.algebra import (AlgebraElement, FiniteDimAlgebra, matrix_algebra, matrix_exp,
                           random_unitary, trace)
from ncdet.errors import DomainError
from ncdet.fkdet import (absolute_value, fk_det, fk_det_extended, fkl_det, log_fk_det,
                         singular_profile)


def _unitary(A, rng):
    return AlgebraElement([random_unitary(n, rng) for n in A.block_sizes])


def test_profile_examples():
    A = FiniteDimAlgebra((3,), (1 / 3,))
    p = singular_profile(A, A.identity())
    assert p.sigmas == (1.0,) and p.weights == pytest.approx((1.0,))
    A = matrix_algebra(2)
    p = singular_profile(A, AlgebraElement([np.diag([2.0, 0.0])]))
    assert p.pairs() == [(2.0, 0.5), (0.0, 0.5)]


def test_profile_trace_identity(rng):
    A = FiniteDimAlgebra((2, 3, 1), (0.3, 0.1, 0.2))
    for _ in range(20):
        x = A.random_element(rng)
        p = singular_profile(A, x)
        assert p.total_weight == pytest.approx(A.tau_one, rel=1e-14)
        assert list(p.sigmas) == sorted(p.sigmas, reverse=True)
        lhs = sum(w * s * s for s, w in p.pairs())
        assert abs(lhs - trace(A, x.adjoint() @ x).real) <= 1e-10 * lhs


def test_closed_form_matrix_algebra(rng):
    A = matrix_algebra(5)
    for _ in range(20):
        x = A.random_element(rng)
        expect = abs(np.linalg.det(x.blocks[0])) ** (1 / 5)
        assert fk_det(A, x) == pytest.approx(expect, rel=1e-10)


def test_unitary_and_exponential(rng):
    A = FiniteDimAlgebra((2, 3), (0.25, 1 / 6))
    for _ in range(20):
        assert fk_det(A, _unitary(A, rng)) == pytest.approx(1.0, abs=1e-12)
        y = A.random_element(rng)
        expect = abs(np.exp(trace(A, y)))
        assert fk_det(A, matrix_exp(y)) == pytest.approx(expect, rel=1e-10)


def test_singular_input_is_refused():
    A = matrix_algebra(2)
    x = AlgebraElement([np.diag([3.0, 0.0])])
    with pytest.raises(DomainError, match="fkl_det"):
        fk_det(A, x)


def test_extension_and_fkl_on_kernel(rng):
    A = matrix_algebra(3)
    x0 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    X = AlgebraElement([np.pad(x0, ((0, 1), (0, 1)))])
    assert fk_det_extended(A, X) == 0.0
    # nonzero spectrum: singular values of x0 with weight 1/3
    expect = abs(np.linalg.det(x0)) ** (1 / 3)
    assert fkl_det(A, X) == pytest.approx(expect, rel=1e-10)
    assert fkl_det(A, A.zero()) == 1.0


def test_invertible_extensions_agree(rng):
    A = FiniteDimAlgebra((2, 2), (0.5, 0.25))
    for _ in range(10):
        x = A.random_element(rng)
        assert fk_det_extended(A, x) == fk_det(A, x)
        assert fkl_det(A, x) == pytest.approx(fk_det(A, x), rel=1e-12)


def test_limit_law_monotone_to_zero(rng):
    A = matrix_algebra(4)
    z = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    x = AlgebraElement([z @ (rng.standard_normal((3, 4)) + 0j)])
    ax = absolute_value(x)
    vals = [fk_det(A, ax + A.scalar(eps)) for eps in (1e-2, 1e-4, 1e-6)]
    assert vals[0] > vals[1] > vals[2] > 0
    assert fk_det_extended(A, x) == 0.0
    # one zero singular value of weight 1/4: det ~ C eps^(1/4)
    assert vals[2] / vals[1] == pytest.approx(1e-2 ** 0.25, rel=1e-3)


def test_multiplicativity(rng):
    A = FiniteDimAlgebra((3, 2), (0.2, 0.2))
    for _ in range(500):
        x, y = A.random_element(rng), A.random_element(rng)
        assert abs(log_fk_det(A, x @ y) - log_fk_det(A, x) - log_fk_det(A, y)) <= 1e-9


def test_polar_invariance_and_scalar_rule(rng):
    A = FiniteDimAlgebra((2, 3), (0.7, 0.4))
    for _ in range(20):
        x = A.random_element(rng)
        assert fk_det(A, absolute_value(x)) == pytest.approx(fk_det(A, x), rel=1e-10)
    lam = 2.5 - 1.0j
    assert fk_det(A, A.scalar(lam)) == pytest.approx(abs(lam) ** A.tau_one, rel=1e-12)


def test_fkl_unitary_invariance(rng):
    A = matrix_algebra(4)
    for _ in range(20):
        z = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
        x = AlgebraElement([z @ z.conj().T])
        u, v = _unitary(A, rng), _unitary(A, rng)
        assert fkl_det(A, u @ x @ v) == pytest.approx(fkl_det(A, x), rel=1e-10)


@given(st.lists(st.integers(1, 4), min_size=1, max_size=3), st.integers(0, 2 ** 32 - 1))
def test_direct_sum_with_kernel_property(sizes, seed):
    rng = np.random.default_rng(seed)
    A = FiniteDimAlgebra(tuple(sizes), tuple(rng.uniform(0.1, 1.0, len(sizes))))
    x = A.random_element(rng)
    big = A.amplify(2)
    X = x.direct_sum(A.zero())
    assert fk_det_extended(big, X) == 0.0
    assert fkl_det(big, X) == pytest.approx(fk_det(A, x), rel=1e-10)
