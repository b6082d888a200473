import sympy as sp
import pytest

from crdeform.errors import PreconditionError, VerificationError
from crdeform.gallery import build_example_61, example_62_source, example_62_target, sphere
from crdeform.nondeg import (
    DegeneracyVerdict,
    NondegCertificate,
    derivative_rows,
    find_nondegeneracy,
    is_k_nondegenerate,
    multi_indices,
)
from crdeform.series import GaussianRational, SeriesVector, TruncatedSeries

from conftest import gq_to_sympy

G = GaussianRational


def quartic_map(D=8):
    M = example_62_source(D)
    z = TruncatedSeries.variable(M.blocks, D, "z.1")
    w = TruncatedSeries.variable(M.blocks, D, "w.1")
    return SeriesVector([z, TruncatedSeries.zero(M.blocks, D), w]), M, example_62_target(D)


def quartic_rows_oracle(kmax):
    """Rows d^a/dchi^a grad_Z' rho'(0, Hbar(chi, 0)) at chi = 0 by direct differentiation."""
    Z = sp.symbols("Z1:4")
    C = sp.symbols("C1:4")
    chi = sp.Symbol("chi")
    re1 = (Z[0] + C[0]) / 2
    im2 = (Z[1] - C[1]) / (2 * sp.I)
    rho = (Z[2] - C[2]) / (2 * sp.I) - (Z[0] * C[0] + Z[0] ** 2 * C[0] ** 2 + re1 ** 2 * im2)
    # Hbar(chi, tau) = (chi, 0, tau) at tau = 0
    at = {Z[0]: 0, Z[1]: 0, Z[2]: 0, C[0]: chi, C[1]: 0, C[2]: 0}
    rows = []
    for a in range(kmax + 1):
        rows.append([sp.expand(sp.diff(sp.diff(rho, z).subs(at), chi, a).subs(chi, 0)) for z in Z])
    return rows


class TestCertificates:
    def test_sphere_identity(self):
        M = sphere(1, 8)
        cert = find_nondegeneracy(M.identity_map(), M, M.ideal)
        assert isinstance(cert, NondegCertificate)
        assert cert.k0 == 1
        assert cert.det_value == G(0, "-1/2")
        assert str(cert.det_value) == "-1/2*i"

    def test_quartic_map_k0_two(self):
        H, M, tgt = quartic_map()
        cert = find_nondegeneracy(H, M, tgt, 4)
        assert cert.k0 == 2
        assert cert.iota == ((0,), (1,), (2,))
        oracle = quartic_rows_oracle(2)
        mat = sp.Matrix(oracle)
        assert [[gq_to_sympy(v) for v in r] for r in cert.matrix] == [list(r) for r in oracle]
        assert gq_to_sympy(cert.det_value) == sp.nsimplify(mat.det()) == sp.Rational(-1, 8)

    def test_certificate_reverifies(self):
        H, M, tgt = quartic_map()
        cert = find_nondegeneracy(H, M, tgt, 3)
        assert cert.verify(derivative_rows(H, M, tgt, 3))

    def test_exact_order_flag(self):
        H, M, tgt = quartic_map()
        assert not is_k_nondegenerate(H, M, tgt, 1)
        assert is_k_nondegenerate(H, M, tgt, 2, exact=True)
        assert not is_k_nondegenerate(H, M, tgt, 3, exact=True)


class TestDegenerate:
    def test_quartic_identity_has_flat_profile(self):
        rep = build_example_61(8, 4)
        assert isinstance(rep.degenerate_at_origin, DegeneracyVerdict)
        assert list(rep.degenerate_at_origin.rank_profile) == [1, 1, 1, 1, 1]
        assert not rep.degenerate_at_origin

    def test_flat_control_is_one_nondegenerate(self):
        rep = build_example_61(8, 4)
        assert rep.flat_control.k0 == 1


class TestPreconditions:
    def test_map_must_land(self):
        M = sphere(1, 6)
        z = TruncatedSeries.variable(M.blocks, 6, "z.1")
        w = TruncatedSeries.variable(M.blocks, 6, "w.1")
        with pytest.raises(VerificationError):
            find_nondegeneracy(SeriesVector([z, w + z * z]), M, M.ideal, 2)

    def test_base_point_must_be_fixed(self):
        M = sphere(1, 6)
        z = TruncatedSeries.variable(M.blocks, 6, "z.1")
        w = TruncatedSeries.variable(M.blocks, 6, "w.1")
        with pytest.raises(PreconditionError):
            find_nondegeneracy(SeriesVector([z + 1, w]), M, M.ideal, 2)

    def test_multi_indices_are_graded(self):
        assert multi_indices(2, 2) == [(2, 0), (1, 1), (0, 2)]
        assert len(multi_indices(3, 3)) == 10
