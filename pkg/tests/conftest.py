import sympy as sp
import pytest

from crdeform.series import GaussianRational, TruncatedSeries, VariableBlocks


def sym_var(name: str) -> sp.Symbol:
    return sp.Symbol(name.replace(".", "_"))


def to_sympy(f: TruncatedSeries) -> sp.Expr:
    names = [sym_var(n) for n in f.blocks.names()]
    out = sp.Integer(0)
    for e, c in f.terms.items():
        coeff = sp.Rational(int(c.re.numerator), int(c.re.denominator)) + sp.I * sp.Rational(
            int(c.im.numerator), int(c.im.denominator))
        mono = sp.Integer(1)
        for s, k in zip(names, e):
            if k:
                mono *= s ** k
        out += coeff * mono
    return sp.expand(out)


def sympy_truncate(expr: sp.Expr, names, D: int) -> sp.Expr:
    """Drop every monomial of total degree > D in the listed variables."""
    poly = sp.Poly(sp.expand(expr), *names)
    out = sp.Integer(0)
    for mon, c in poly.terms():
        if sum(mon) <= D:
            out += c * sp.Mul(*[s ** k for s, k in zip(names, mon)])
    return sp.expand(out)


def from_sympy(expr, blocks: VariableBlocks, D: int) -> TruncatedSeries:
    names = [sym_var(n) for n in blocks.names()]
    poly = sp.Poly(sp.expand(expr), *names)
    terms = {}
    for mon, c in poly.terms():
        re, im = (sp.Rational(v) for v in c.as_real_imag())
        terms[mon] = GaussianRational(f"{re.p}/{re.q}", f"{im.p}/{im.q}")
    return TruncatedSeries(blocks, D, terms)


def gq_to_sympy(c: GaussianRational) -> sp.Expr:
    return sp.Rational(int(c.re.numerator), int(c.re.denominator)) + sp.I * sp.Rational(
        int(c.im.numerator), int(c.im.denominator))


@pytest.fixture(scope="session")
def manifests_dir():
    from pathlib import Path

    return Path(__file__).resolve().parent.parent / "manifests"
