import random
from fractions import Fraction

import sympy as sp
import pytest

from crdeform.errors import PreconditionError, VerificationError
from crdeform.gallery import (
    MODEL_POINTS,
    build_example_61,
    build_example_62,
    example_62_counter_family,
    example_62_source,
    example_62_target,
    jet_prescription,
    locus_certificate,
    psi_tau0,
    singular_locus_build,
    sphere,
    whitney_heisenberg,
)
from crdeform.manifold import check_maps_into, graph_blocks, ideal_from_graph
from crdeform.nondeg import find_nondegeneracy
from crdeform.series import Block, GaussianRational, TruncatedSeries, VariableBlocks

from conftest import to_sympy

G = GaussianRational
ST = VariableBlocks((Block("s", 1, "t"), Block("t", 1, "t")))


class TestQuarticTargets:
    def test_degenerate_quartic_bundle(self):
        rep = build_example_61()
        assert rep.ok
        assert rep.certificate.k0 == 2
        assert [str(v) for v in rep.point] == ["1", "2", "17*i"]
        assert bool(rep.map_check)

    def test_whitney_map_is_two_nondegenerate(self):
        M = sphere(1, 8)
        F = whitney_heisenberg(M)
        G3 = graph_blocks(2, 1)
        v = {n: TruncatedSeries.variable(G3, 8, n) for n in ("z.1", "z.2", "chi.1", "chi.2")}
        tgt = ideal_from_graph(v["z.1"] * v["chi.1"] + v["z.2"] * v["chi.2"], 2, 1)
        assert check_maps_into(F, M, tgt)
        cert = find_nondegeneracy(F, M, tgt, 3)
        assert cert.k0 == 2

    def test_quartic_family_bundle(self):
        rep = build_example_62()
        assert rep.certificate.k0 == 2
        assert str(rep.certificate.det_value) == "-1/8"
        assert rep.family_vectors_in_kernel and rep.family_in_span
        assert len(rep.family_span) == 2
        assert rep.iso.ok and rep.iso.dim_hol == rep.iso.dim_def
        # the computed evaluation span is all of the 5-dimensional tangent space
        assert len(rep.evaluation_span) == 5
        assert rep.counter_field_residual_zero

    def test_counter_family_maps_in(self):
        M = example_62_source(8)
        a, H = example_62_counter_family(M)
        assert a == G("9/8")
        point = [0, G(0, 1) * a, 0]
        cert = locus_certificate(M, example_62_target(8), point, H)
        assert cert.certificate.k0 >= 1

    def test_counter_family_needs_its_base_point(self):
        M = example_62_source(8)
        _, H = example_62_counter_family(M)
        with pytest.raises(VerificationError):
            locus_certificate(M, example_62_target(8), [0, G(0, 1), 0], H)


class TestSingularLocus:
    @pytest.mark.parametrize("model", ["cusp", "node", "tacnode"])
    def test_models(self, model):
        inst = singular_locus_build(1, model, trunc=8, tau0=MODEL_POINTS[model])
        assert inst.ok
        assert inst.rank == 5

    def test_cusp_point_is_on_locus(self):
        s, t = Fraction(1, 4), Fraction(1, 8)
        assert t ** 2 == s ** 3
        inst = singular_locus_build(1, "cusp", trunc=8, tau0=[("1/4", "1/8")])
        assert inst.inclusions[0][1]

    def test_point_off_locus_rejected(self):
        with pytest.raises(PreconditionError):
            singular_locus_build(1, "cusp", trunc=6, tau0=[("1/2", "1/2")])

    def test_zero_r_rejected(self):
        with pytest.raises(PreconditionError):
            singular_locus_build(1, TruncatedSeries.zero(ST, 6), trunc=6)

    def test_unperturbed_model_includes_every_point(self):
        zero = TruncatedSeries.zero(VariableBlocks((Block("u", 1, "t"), Block("xy", 2, "t"),
                                                    Block("st", 2, "t"))), 6)
        inst = singular_locus_build(1, "cusp", alpha=[zero], beta=zero, gamma=zero, trunc=6,
                                    tau0=[("1/4", "1/8")])
        target, psi, M = psi_tau0(inst, ("3", "-7/5"))
        assert check_maps_into(psi, M, target)

    def test_psi_certificate(self):
        inst = singular_locus_build(1, "cusp", trunc=8)
        target, psi, M = psi_tau0(inst, ("1/4", "1/8"))
        cert = find_nondegeneracy(psi, M, target, 3)
        assert cert.k0 == 2


class TestJetPrescription:
    def test_worked_case(self):
        s = TruncatedSeries.variable(ST, 6, "s.1")
        jp = jet_prescription(1 + s, s, 2)
        assert jp.alpha == (s - s * s).with_trunc(2)
        assert jp.verified

    def test_unit_q_and_zero_delta(self):
        s = TruncatedSeries.variable(ST, 6, "s.1")
        t = TruncatedSeries.variable(ST, 6, "t.1")
        one = TruncatedSeries.constant(ST, 6, 1)
        delta = s * t + t ** 3
        assert jet_prescription(one, delta, 3).alpha == delta.with_trunc(3)
        assert jet_prescription(1 + s, TruncatedSeries.zero(ST, 6), 3).alpha.is_zero()

    def test_q_must_be_unit(self):
        s = TruncatedSeries.variable(ST, 6, "s.1")
        with pytest.raises(PreconditionError):
            jet_prescription(s, s, 2)

    def test_random_pairs_against_sympy(self):
        rng = random.Random(7)
        S, T = sp.symbols("s t")
        for _ in range(5):
            q = G(rng.randint(1, 5))
            qs = TruncatedSeries.constant(ST, 5, q)
            qe, de = sp.Integer(int(q.re)), sp.Integer(0)
            delta = TruncatedSeries.zero(ST, 5)
            for a in range(4):
                for b in range(4 - a):
                    c1, c2 = Fraction(rng.randint(-4, 4), rng.randint(1, 3)), rng.randint(-3, 3)
                    mono = TruncatedSeries.monomial(ST, 5, (a, b))
                    if a + b:
                        qs = qs + mono * G(c1)
                        qe += sp.Rational(c1.numerator, c1.denominator) * S ** a * T ** b
                    delta = delta + mono * G(c2)
                    de += c2 * S ** a * T ** b
            jp = jet_prescription(qs, delta, 3)
            assert jp.verified
            ser = sp.expand(sp.series((de / qe).subs({S: S * sp.Symbol("e"), T: T * sp.Symbol("e")}),
                                      sp.Symbol("e"), 0, 4).removeO().subs(sp.Symbol("e"), 1))
            assert sp.expand(to_sympy(jp.alpha).subs({sp.Symbol("s_1"): S, sp.Symbol("t_1"): T}) - ser) == 0
