import json

import pytest

from crdeform.cli import execute, main
from crdeform.errors import InputError
from crdeform.expr import ExprError, parse_number, parse_series
from crdeform.manifest import ManifestError, parse_manifest, parse_manifest_text, validate
from crdeform.report import emit_report, parse_structured
from crdeform.series import GaussianRational, VariableBlocks

SPHERE = """
[manifold sphere]
n = 1
phi = z.1*chi.1

[target sphere]
manifold = sphere

[map id]
source = sphere
target = sphere
components = z; w
"""


def run(capsys, *argv):
    code = main(list(map(str, argv)))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestExpressions:
    def test_exact_literals(self):
        assert parse_number("-3/4") == GaussianRational("-3/4")
        assert parse_number("1/4 + 1/8*i") == GaussianRational("1/4", "1/8")

    def test_float_rejected_with_hint(self):
        with pytest.raises(ExprError, match="use 1/2"):
            parse_number("0.5")

    def test_series_and_division(self):
        B = VariableBlocks.make(("x", 1, "x"))
        f = parse_series("x^2/(1 - x)", B, 4)
        assert f.to_text() == "1*x.1^2 + 1*x.1^3 + 1*x.1^4"

    def test_division_by_non_unit(self):
        B = VariableBlocks.make(("x", 1, "x"))
        with pytest.raises(ExprError, match="vanishing"):
            parse_series("1/x", B, 4)

    def test_unknown_variable_has_position(self):
        B = VariableBlocks.make(("x", 1, "x"))
        with pytest.raises(ExprError) as err:
            parse_series("x + y", B, 3, line=7)
        assert err.value.line == 7 and "y" in str(err.value)


class TestManifest:
    def test_sphere_q(self):
        mf = parse_manifest_text(SPHERE)
        assert mf.manifold("sphere").Q.to_text() == ["1*tau.1 + 2*i*z.1*chi.1"]
        validate(mf)

    def test_empty(self):
        with pytest.raises(ManifestError, match="no sections"):
            parse_manifest_text("# nothing here\n")

    def test_float_literal(self):
        with pytest.raises(ExprError, match="line 4, column 7: non-exact literal '0.5'; use 1/2"):
            parse_manifest_text(SPHERE.replace("z.1*chi.1", "0.5*z.1*chi.1")).manifold("sphere")

    def test_unresolved_reference(self):
        with pytest.raises(ManifestError, match="unresolved"):
            parse_manifest_text(SPHERE.replace("target = sphere", "target = ball")).map("id")

    def test_duplicate_section(self):
        with pytest.raises(ManifestError, match="duplicate"):
            parse_manifest_text(SPHERE + "\n[manifold sphere]\nn = 1\nphi = 0\n")

    def test_missing_file(self):
        with pytest.raises(InputError):
            parse_manifest("/nonexistent/file.crd")

    def test_shipped_manifests_validate(self, manifests_dir):
        for path in sorted(manifests_dir.glob("*.crd")):
            validate(parse_manifest(path))


class TestExecute:
    def test_minimality(self, manifests_dir):
        rep, code = execute("minimality", parse_manifest(manifests_dir / "sphere.crd"), "sphere")
        assert code == 0 and rep["result"]["t"] == 2

    def test_nondeg_quartic(self, manifests_dir):
        rep, code = execute("nondeg", parse_manifest(manifests_dir / "example62.crd"), "H00")
        assert code == 0 and rep["result"]["k0"] == 2

    def test_gallery_bundle(self):
        rep, code = execute("gallery", None, "example-6-2")
        res = rep["result"]
        assert code == 0
        assert res["certificate"]["k0"] == 2
        assert res["family_vectors_in_kernel"]

    def test_unknown_command(self):
        with pytest.raises(InputError):
            execute("frobnicate", None, "x")


class TestMain:
    def test_exit_codes(self, capsys, manifests_dir):
        sph = manifests_dir / "sphere.crd"
        assert run(capsys, "nondeg", sph, "id")[0] == 0
        assert run(capsys, "check-map", sph, "bad")[0] == 2
        assert run(capsys, "tangency", sph, "twist", "--order", "2")[0] == 2
        assert run(capsys, "admissible", sph, "bent4", "--degree-goal", "6")[0] == 2
        assert run(capsys, "nondeg", sph, "id", "--kmax", "9")[0] == 3
        assert run(capsys, "nondeg", sph, "nosuchmap")[0] == 4
        assert run(capsys, "nondeg", "/nonexistent.crd", "id")[0] == 4
        assert run(capsys, "hol", sph, "id", "--kappa-range", "3:2")[0] == 4

    def test_degenerate_verdict_exits_two(self, capsys, tmp_path):
        p = tmp_path / "quartic.crd"
        p.write_text("""
[manifold quartic]
n = 2
phi = z.1^2*chi.1^2 + z.2^2*chi.2^2

[target quartic]
manifold = quartic

[map id]
source = quartic
target = quartic
components = z.1; z.2; w
""")
        code, out, _ = run(capsys, "nondeg", p, "id", "--kmax", "3")
        assert code == 2
        assert "degenerate up to order 3" in out

    def test_text_contains_exact_determinant(self, capsys, manifests_dir):
        code, out, _ = run(capsys, "nondeg", manifests_dir / "sphere.crd", "id")
        assert "determinant: -1/2*i" in out

    def test_deterministic_bytes(self, capsys, manifests_dir):
        args = ("hol", manifests_dir / "sphere.crd", "id", "--kappa-range", "2:4", "--format", "structured")
        first = run(capsys, *args)[1]
        second = run(capsys, *args)[1]
        assert first == second
        data = parse_structured(first)
        assert data["command"] == {"command": "hol", "target": "id"}
        assert emit_report(data, "structured").decode() == first

    def test_help_lists_flags(self, capsys):
        with pytest.raises(SystemExit):
            main(["hol", "--help"])
        out = capsys.readouterr().out
        for flag in ("--trunc", "--kmax", "--kappa-range", "--degree-goal", "--x0-box"):
            assert flag in out


def test_emit_report_formats():
    rep = {"b": [1, 2], "a": {"x": None, "y": True}, "c": GaussianRational(0, -1)}
    assert emit_report(rep, "text") == b"a:\n  x: none\n  y: true\nb:\n  [1, 2]\nc: -i\n"
    assert json.loads(emit_report(rep, "structured")) == {"a": {"x": None, "y": True}, "b": [1, 2], "c": "-i"}
    with pytest.raises(ValueError):
        emit_report(rep, "yaml")
