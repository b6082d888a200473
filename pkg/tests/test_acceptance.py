"""End-to-end acceptance checks; each test prints a single PASS/FAIL line."""

import os
import random
import subprocess
import sys
import time
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path

import pytest

import test_properties as props
from crdeform.gallery import (
    build_example_61,
    build_example_62,
    example_62_family,
    example_62_source,
    example_62_target,
    jet_prescription,
    psi_tau0,
    singular_locus_build,
    sphere,
)
from crdeform.infdef import (
    basepoint_iso_check,
    hol_def_jets,
    hol_jets,
    hol_k_jets,
)
from crdeform.jetparam import admissible_jet, jet_certificate, reconstruct
from crdeform.manifold import base_point_deformation, from_graph, graph_blocks, graph_chart
from crdeform.nondeg import NondegCertificate, derivative_rows, find_nondegeneracy
from crdeform.segre import minimality_order, segre_map
from crdeform.series import Block, GaussianRational, SeriesVector, TruncatedSeries, VariableBlocks, jet

from test_infdef import sphere_polynomial_fields

G = GaussianRational
ROOT = Path(__file__).resolve().parent.parent


@contextmanager
def criterion(capsys, label, budget):
    start = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - start
        assert elapsed < budget, f"took {elapsed:.1f}s, budget {budget}s"
    except BaseException as exc:
        with capsys.disabled():
            print(f"\n[acceptance {label}] FAIL: {str(exc).splitlines()[0] if str(exc) else type(exc).__name__}")
        raise
    with capsys.disabled():
        print(f"\n[acceptance {label}] PASS ({elapsed:.1f}s)")


def _graph_vars(n, d, D):
    B = graph_blocks(n, d)
    return {nm: TruncatedSeries.variable(B, D, nm)
            for nm in [f"z.{k}" for k in range(1, n + 1)] + [f"chi.{k}" for k in range(1, n + 1)]}


def test_normal_coordinate_invariants(capsys):
    D = 10
    with criterion(capsys, "1 normal coordinates", 10):
        v = _graph_vars(2, 2, D)
        quadric = from_graph([v["z.1"] * v["chi.1"] + v["z.2"] * v["chi.2"],
                              v["z.1"] * v["chi.2"] + v["z.2"] * v["chi.1"]], 2, 2)
        flat = from_graph(TruncatedSeries.zero(graph_blocks(1, 1), D), 1, 1)
        _, _, locus_source = psi_tau0(singular_locus_build(1, "cusp", trunc=D), ("1/4", "1/8"))
        shipped = {
            "sphere": sphere(1, D),
            "quartic source": example_62_source(D),
            "flat": flat,
            "codimension-2 quadric": quadric,
            "locus source": locus_source,
        }
        for name, M in shipped.items():
            assert M.trunc == D, name
            assert M.normality_holds(), f"{name}: normality"
            assert M.reality_holds(), f"{name}: reality"


def test_segre_maps_and_minimality(capsys):
    with criterion(capsys, "2 segre/minimality", 10):
        M = sphere(1, 8)
        assert segre_map(M, 2).map.to_text() == ["1*x1.1", "2*i*x1.1*x2.1"]
        assert segre_map(M, 4).map.to_text() == [
            "1*x1.1", "2*i*x1.1*x2.1 + -2*i*x2.1*x3.1 + 2*i*x3.1*x4.1"]
        assert minimality_order(M).t == 2
        flat = from_graph(TruncatedSeries.zero(graph_blocks(1, 1), 8), 1, 1)
        rep = minimality_order(flat)
        # d + 1 = 2 orders examined, rank never reaches 2n + d = 3
        assert not rep.minimal and rep.t is None and len(rep.ranks) == 2


def test_nondegeneracy_certificates(capsys):
    with criterion(capsys, "3 nondegeneracy", 30):
        M = sphere(1, 8)
        cert = find_nondegeneracy(M.identity_map(), M, M.ideal)
        assert isinstance(cert, NondegCertificate) and cert.k0 == 1
        assert cert.det_value and cert.verify(derivative_rows(M.identity_map(), M, M.ideal, 1))

        Q = example_62_source(8)
        cert62 = find_nondegeneracy(example_62_family(Q), Q, example_62_target(8), 4)
        assert isinstance(cert62, NondegCertificate) and cert62.k0 == 2
        assert str(cert62.det_value) == "-1/8"

        verdict = build_example_61(8, 4).degenerate_at_origin
        assert not verdict and verdict.k_max == 4


def test_hol_dimension_stabilizes_on_sphere(capsys):
    with criterion(capsys, "4a sphere hol dimension", 120):
        M = sphere(1, 12)
        H = M.identity_map()
        dims = [hol_jets(H, M, M.ideal, kappa + 4).projected_dim(kappa) for kappa in range(2, 6)]
        assert dims == [5, 5, 5, 5], dims
        # dense polynomial solve, independent of the series machinery
        assert sphere_polynomial_fields(2) == sphere_polynomial_fields(3) == 8 - 3


def test_quartic_family_evaluation_span(capsys):
    with criterion(capsys, "4b evaluation span equals family tangent", 120):
        rep = build_example_62()
        assert rep.family_vectors_in_kernel
        assert rep.family_in_span
        assert rep.span_equals_family, (
            f"evaluation span has dimension {len(rep.evaluation_span)}, family tangent "
            f"{len(rep.family_span)}; extra field {rep.counter_field.to_text()} has zero "
            f"residual={rep.counter_field_residual_zero}")


def test_basepoint_isomorphism_on_both_targets(capsys):
    with criterion(capsys, "4c base-point isomorphism", 120):
        M = sphere(1, 8)
        H = M.identity_map()
        dfm = base_point_deformation(M.ideal, graph_chart(M.phi, 1, 1))
        iso = basepoint_iso_check(H, M, M.ideal, dfm, 3)
        assert iso.ok and iso.dim_hol == iso.dim_def
        rep = build_example_62(8, 3)
        assert rep.iso.ok and rep.iso.dim_hol == rep.iso.dim_def


def test_first_order_system_is_hol_def(capsys):
    with criterion(capsys, "4d hol_k at k=1", 120):
        M = sphere(1, 8)
        H = M.identity_map()
        dfm = base_point_deformation(M.ideal, graph_chart(M.phi, 1, 1))
        first = hol_k_jets(H, M, M.ideal, dfm, 1, 3).first_order
        direct = hol_def_jets(H, M, dfm, 3)
        assert first.dim == direct.dim
        assert all(direct.contains(v, Y) for v, Y in first.fields())
        assert all(first.contains(v, Y) for v, Y in direct.fields())


def test_jet_round_trip(capsys):
    with criterion(capsys, "5 jet parametrization", 120):
        M = sphere(1, 8)
        z = TruncatedSeries.variable(M.blocks, 4, "z.1")
        w = TruncatedSeries.variable(M.blocks, 4, "w.1")
        Lam = SeriesVector([z, w])
        cert = jet_certificate(M, M.ideal, Lam, 3)
        rec = reconstruct(M, M.ideal, cert, Lam, 6)
        assert cert.k0 == 1 and rec.t == 2 and rec.t0 == 2 * rec.t * cert.k0
        assert rec.attained_degree >= 6
        assert rec.H.with_trunc(6).to_text() == ["1*z.1", "1*w.1"]
        bad = admissible_jet(M, M.ideal, SeriesVector([z + z * w, w]), 6)
        assert not bad.ok
        assert any(not r.is_zero() for r in bad.check.residuals)


def _random_pair(rng, blocks, D):
    q = TruncatedSeries.constant(blocks, D, G(Fraction(rng.choice([-1, 1]) * rng.randint(1, 5),
                                                     rng.randint(1, 4))))
    delta = TruncatedSeries.zero(blocks, D)
    for a in range(D + 1):
        for b in range(D + 1 - a):
            mono = TruncatedSeries.monomial(blocks, D, (a, b))
            if a + b:
                q = q + mono * G(Fraction(rng.randint(-4, 4), rng.randint(1, 4)))
            delta = delta + mono * G(Fraction(rng.randint(-4, 4), rng.randint(1, 4)))
    return q, delta


def test_singular_locus_construction(capsys):
    with criterion(capsys, "6 singular-locus construction", 60):
        inst = singular_locus_build(1, "cusp", trunc=8, tau0=[("1/4", "1/8")])
        assert inst.rank == 2 * 1 + 3 == 5 and inst.rank_minor
        assert inst.inclusions[0][1]
        assert inst.ok

        ST = VariableBlocks((Block("s", 1, "t"), Block("t", 1, "t")))
        rng = random.Random(20240601)
        for _ in range(10):
            q, delta = _random_pair(rng, ST, 5)
            jp = jet_prescription(q, delta, 3)
            assert jp.verified
            assert jet(q.with_trunc(3) * jp.alpha, 3) == jet(delta, 3)


SUITES = [
    props.test_ring_axioms,
    props.test_composition_associative,
    props.test_conjugation_is_involutive_and_multiplicative,
    props.test_solve_implicit_residual_vanishes,
    props.test_invert_map_slice_right_inverse,
    props.test_kernel_fields_satisfy_identity,
    props.test_projected_dimensions_never_increase,
]


def test_property_suites(capsys):
    assert props.PROPS.max_examples == 200
    with criterion(capsys, "7 property suites", 180):
        for suite in SUITES:
            suite()


REPORT_SCRIPT = """
import sys
from crdeform.cli import Options, execute
from crdeform.manifest import parse_manifest
from crdeform.report import emit_report
sph = parse_manifest(sys.argv[1] + "/sphere.crd")
runs = [("nondeg", sph, "id", Options()),
        ("segre", sph, "sphere", Options(order=4)),
        ("hol", sph, "id", Options(kappa_range=(2, 4), projection=2)),
        ("reconstruct", sph, "id4", Options(degree_goal=6)),
        ("admissible", sph, "bent4", Options(degree_goal=6))]
for g in ("example-6-1", "example-6-2", "singular-cusp", "jet-prescription"):
    runs.append(("gallery", None, g, Options()))
for command, mf, name, opts in runs:
    report, _ = execute(command, mf, name, opts)
    sys.stdout.buffer.write(emit_report(report, "structured"))
"""


def _reports(seed):
    env = dict(os.environ, PYTHONHASHSEED=str(seed))
    out = subprocess.run([sys.executable, "-c", REPORT_SCRIPT, str(ROOT / "manifests")],
                         env=env, capture_output=True, check=True)
    return out.stdout


def test_reports_are_byte_identical(capsys):
    with criterion(capsys, "8 determinism", 300):
        first, second = _reports(0), _reports(4242)
        assert first
        assert first == second


@pytest.mark.parametrize("command", ["gallery example-6-2", "gallery singular-cusp"])
def test_cli_entry_point_is_repeatable(command):
    args = [sys.executable, "-m", "crdeform", *command.split(), "--format", "structured"]
    outs = {subprocess.run(args, capture_output=True, check=True).stdout for _ in range(2)}
    assert len(outs) == 1
