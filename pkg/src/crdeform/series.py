"""Truncated multivariate power series over the Gaussian rationals.

A :class:`TruncatedSeries` is a representative of C{X}/m^(D+1): a sparse map
from exponent tuples to exact coefficients, with every stored monomial of
total degree at most ``trunc``.  Variables are grouped into named blocks
(:class:`VariableBlocks`) carrying a role tag, and holomorphic blocks may be
paired with antiholomorphic ones so that the formal bar operation
(:func:`conjugate_swap`) is defined.

All values are immutable after construction and every function here is pure.
"""

from __future__ import annotations

import itertools
import math
import operator
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from gmpy2 import mpq

from .errors import (
    BlockMismatchError,
    DegreeExhaustedError,
    PairingError,
    PreconditionError,
    SingularJacobianError,
)

__all__ = [
    "GaussianRational",
    "Block",
    "VariableBlocks",
    "TruncatedSeries",
    "SeriesVector",
    "gq",
    "I",
    "ONE",
    "ZERO",
    "compose",
    "substitute",
    "recenter",
    "differentiate",
    "conjugate_swap",
    "solve_implicit",
    "invert_map_slice",
    "jet",
    "evaluate",
    "specialize",
    "embed",
    "reciprocal",
    "truncate_block",
]

_ZERO_Q = mpq(0)
_ONE_Q = mpq(1)


class GaussianRational:
    """Exact element re + im*i of Q(i); ``re`` and ``im`` are gmpy2 rationals."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = mpq(re)
        self.im = mpq(im)

    @classmethod
    def _raw(cls, re, im) -> "GaussianRational":
        obj = object.__new__(cls)
        obj.re = re
        obj.im = im
        return obj

    @classmethod
    def coerce(cls, value) -> "GaussianRational":
        if isinstance(value, GaussianRational):
            return value
        if isinstance(value, float):
            raise TypeError("floating point scalars are not exact; use a Fraction")
        if isinstance(value, complex):
            raise TypeError("complex floats are not exact; use GaussianRational")
        return cls(value, 0)

    @classmethod
    def parse(cls, text: str) -> "GaussianRational":
        """Inverse of ``str``: accepts ``a/b``, ``c/d*i`` and ``a/b+c/d*i``."""
        s = text.strip().replace(" ", "")
        if s.startswith("(") and s.endswith(")"):
            s = s[1:-1]
        if "." in s or "e" in s.lower():
            raise ValueError(f"not an exact Gaussian rational: {text!r}")
        if s.endswith("i") and not s.endswith("*i"):
            s = s[:-1] + "1*i"  # bare unit: "i", "-i", "2+i"
        if not s.endswith("*i"):
            return cls(mpq(s), 0)
        body = s[:-2]
        # split real and imaginary part at the last sign that is not leading
        cut = max(body.rfind("+", 1), body.rfind("-", 1))
        if cut <= 0:
            return cls(0, mpq(body))
        return cls(mpq(body[:cut]), mpq(body[cut:].lstrip("+")))

    def __add__(self, other):
        if not isinstance(other, GaussianRational):
            other = GaussianRational.coerce(other)
        return GaussianRational._raw(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, GaussianRational):
            other = GaussianRational.coerce(other)
        return GaussianRational._raw(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return GaussianRational.coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, GaussianRational):
            if isinstance(other, TruncatedSeries):
                return NotImplemented
            other = GaussianRational.coerce(other)
        a, b, c, d = self.re, self.im, other.re, other.im
        if not b and not d:
            return GaussianRational._raw(a * c, _ZERO_Q)
        return GaussianRational._raw(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def __neg__(self):
        return GaussianRational._raw(-self.re, -self.im)

    def __truediv__(self, other):
        other = GaussianRational.coerce(other)
        return self * other.inverse()

    def __rtruediv__(self, other):
        return GaussianRational.coerce(other) * self.inverse()

    def inverse(self) -> "GaussianRational":
        n = self.re * self.re + self.im * self.im
        if not n:
            raise ZeroDivisionError("inverse of zero Gaussian rational")
        return GaussianRational._raw(self.re / n, -self.im / n)

    def conjugate(self) -> "GaussianRational":
        return GaussianRational._raw(self.re, -self.im)

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        if isinstance(other, GaussianRational):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, mpq)) or hasattr(other, "denominator"):
            return not self.im and self.re == other
        return NotImplemented

    def __hash__(self):
        if not self.im:
            return hash(self.re)
        return hash((self.re, self.im))

    def is_real(self) -> bool:
        return not self.im

    def __str__(self):
        re, im = self.re, self.im
        if not im:
            return str(re)
        if im == 1:
            ims = "i"
        elif im == -1:
            ims = "-i"
        else:
            ims = f"{im}*i"
        if not re:
            return ims
        sign = "" if ims.startswith("-") else "+"
        return f"{re}{sign}{ims}"

    def __repr__(self):
        return f"GaussianRational({self})"


def gq(re=0, im=0) -> GaussianRational:
    """Shorthand constructor; accepts ints, Fractions, mpq or strings like '1/2'."""
    return GaussianRational(mpq(re) if not isinstance(re, str) else mpq(re),
                            mpq(im) if not isinstance(im, str) else mpq(im))


ZERO = GaussianRational(0, 0)
ONE = GaussianRational(1, 0)
I = GaussianRational(0, 1)

ROLES = ("Z", "zeta", "eps", "t", "x")


@dataclass(frozen=True)
class Block:
    name: str
    arity: int
    role: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown block role {self.role!r}")
        if self.arity < 0:
            raise ValueError("block arity must be non-negative")
        if not self.name or "." in self.name:
            raise ValueError(f"invalid block name {self.name!r}")


@dataclass(frozen=True)
class VariableBlocks:
    """Ordered named variable blocks plus a holomorphic/antiholomorphic pairing.

    ``pairs`` lists (Z-block name, zeta-block name) couples.  Variables are
    addressed as ``"<block>.<k>"`` with k starting at 1.
    """

    blocks: tuple[Block, ...]
    pairs: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        names = [b.name for b in self.blocks]
        if len(set(names)) != len(names):
            raise ValueError(f"block names must be unique: {names}")
        by_name = {b.name: b for b in self.blocks}
        seen = set()
        for hol, anti in self.pairs:
            if hol not in by_name or anti not in by_name:
                raise ValueError(f"pair ({hol}, {anti}) references unknown block")
            if by_name[hol].role != "Z" or by_name[anti].role != "zeta":
                raise ValueError(f"pair ({hol}, {anti}) must couple a Z and a zeta block")
            if by_name[hol].arity != by_name[anti].arity:
                raise ValueError(f"paired blocks {hol}, {anti} differ in arity")
            if hol in seen or anti in seen:
                raise ValueError(f"block paired twice in ({hol}, {anti})")
            seen.update((hol, anti))

    @classmethod
    def make(cls, *specs: tuple[str, int, str], pairs: Iterable[tuple[str, str]] = ()):
        return cls(tuple(Block(*s) for s in specs), tuple(tuple(p) for p in pairs))

    @property
    def nvars(self) -> int:
        return sum(b.arity for b in self.blocks)

    def block(self, name: str) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise BlockMismatchError(f"no block named {name!r} in {self.block_names()}")

    def has_block(self, name: str) -> bool:
        return any(b.name == name for b in self.blocks)

    def block_names(self) -> list[str]:
        return [b.name for b in self.blocks]

    def offset(self, name: str) -> int:
        off = 0
        for b in self.blocks:
            if b.name == name:
                return off
            off += b.arity
        raise BlockMismatchError(f"no block named {name!r} in {self.block_names()}")

    def block_slice(self, name: str) -> range:
        off = self.offset(name)
        return range(off, off + self.block(name).arity)

    def names(self) -> list[str]:
        return [f"{b.name}.{k + 1}" for b in self.blocks for k in range(b.arity)]

    def index(self, var: str) -> int:
        if "." not in var:
            b = self.block(var)
            if b.arity != 1:
                raise BlockMismatchError(f"variable {var!r} is ambiguous (block arity {b.arity})")
            return self.offset(var)
        name, _, k = var.rpartition(".")
        b = self.block(name)
        k = int(k)
        if not 1 <= k <= b.arity:
            raise BlockMismatchError(f"variable {var!r} out of range for block of arity {b.arity}")
        return self.offset(name) + k - 1

    def role_of_index(self, idx: int) -> str:
        off = 0
        for b in self.blocks:
            if idx < off + b.arity:
                return b.role
            off += b.arity
        raise IndexError(idx)

    def partner(self, name: str) -> str | None:
        for hol, anti in self.pairs:
            if hol == name:
                return anti
            if anti == name:
                return hol
        return None

    def concat(self, other: "VariableBlocks") -> "VariableBlocks":
        return VariableBlocks(self.blocks + other.blocks, self.pairs + other.pairs)

    def without(self, *names: str) -> "VariableBlocks":
        drop = set(names)
        return VariableBlocks(
            tuple(b for b in self.blocks if b.name not in drop),
            tuple(p for p in self.pairs if p[0] not in drop and p[1] not in drop),
        )

    def swap_permutation(self) -> list[int]:
        """Index permutation exchanging every paired Z block with its zeta block."""
        for b in self.blocks:
            if b.role in ("Z", "zeta") and self.partner(b.name) is None:
                raise PairingError(f"block {b.name!r} (role {b.role}) has no conjugate partner")
        perm = list(range(self.nvars))
        for hol, anti in self.pairs:
            for a, z in zip(self.block_slice(hol), self.block_slice(anti)):
                perm[a], perm[z] = z, a
        return perm


def _check_same_blocks(a: "TruncatedSeries", b: "TruncatedSeries"):
    if a.blocks is not b.blocks and a.blocks != b.blocks:
        raise BlockMismatchError(
            f"block mismatch: {a.blocks.block_names()} vs {b.blocks.block_names()}"
        )


def _gr_key(exp: tuple[int, ...]):
    return (sum(exp), tuple(-e for e in exp))


def _mul_terms(a: Mapping, b: Mapping, D: int) -> dict:
    """Product of two term maps, dropping monomials of degree > D."""
    if not a or not b:
        return {}
    if len(a) > len(b):
        a, b = b, a
    groups: dict[int, list] = {}
    for e, c in b.items():
        groups.setdefault(sum(e), []).append((e, c.re, c.im))
    bdeg = sorted(groups.items())
    acc: dict = {}
    add = operator.add
    for ea, ca in a.items():
        da = sum(ea)
        room = D - da
        if room < 0:
            continue
        ar, ai = ca.re, ca.im
        for db, items in bdeg:
            if db > room:
                break
            for eb, br, bi in items:
                e = tuple(map(add, ea, eb))
                if ai or bi:
                    pr = ar * br - ai * bi
                    pi = ar * bi + ai * br
                else:
                    pr = ar * br
                    pi = _ZERO_Q
                cur = acc.get(e)
                if cur is None:
                    acc[e] = [pr, pi]
                else:
                    cur[0] += pr
                    cur[1] += pi
    raw = GaussianRational._raw
    return {e: raw(v[0], v[1]) for e, v in acc.items() if v[0] or v[1]}


class TruncatedSeries:
    """Exact truncated power series; see module docstring."""

    __slots__ = ("blocks", "trunc", "terms")

    def __init__(self, blocks: VariableBlocks, trunc: int, terms: Mapping | None = None,
                 *, _trusted: bool = False):
        if trunc < 0:
            raise ValueError("truncation degree must be non-negative")
        self.blocks = blocks
        self.trunc = int(trunc)
        if _trusted:
            self.terms = terms
            return
        n = blocks.nvars
        clean = {}
        for e, c in (terms or {}).items():
            e = tuple(int(x) for x in e)
            if len(e) != n:
                raise BlockMismatchError(f"exponent {e} has arity {len(e)}, expected {n}")
            if any(x < 0 for x in e):
                raise ValueError(f"negative exponent {e}")
            if sum(e) > trunc:
                continue
            c = GaussianRational.coerce(c)
            if c:
                clean[e] = c
        self.terms = clean

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, blocks: VariableBlocks, trunc: int) -> "TruncatedSeries":
        return cls(blocks, trunc, {}, _trusted=True)

    @classmethod
    def constant(cls, blocks: VariableBlocks, trunc: int, value) -> "TruncatedSeries":
        c = GaussianRational.coerce(value)
        terms = {(0,) * blocks.nvars: c} if c else {}
        return cls(blocks, trunc, terms, _trusted=True)

    @classmethod
    def variable(cls, blocks: VariableBlocks, trunc: int, name: str | int,
                 coeff=ONE) -> "TruncatedSeries":
        idx = name if isinstance(name, int) else blocks.index(name)
        e = [0] * blocks.nvars
        e[idx] = 1
        return cls(blocks, trunc, {tuple(e): coeff})

    @classmethod
    def monomial(cls, blocks: VariableBlocks, trunc: int, exp: Sequence[int],
                 coeff=ONE) -> "TruncatedSeries":
        return cls(blocks, trunc, {tuple(exp): coeff})

    # -- basic queries ----------------------------------------------------
    @property
    def nvars(self) -> int:
        return self.blocks.nvars

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, exp: Sequence[int]) -> GaussianRational:
        return self.terms.get(tuple(exp), ZERO)

    def constant_term(self) -> GaussianRational:
        return self.terms.get((0,) * self.nvars, ZERO)

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def valuation(self) -> int | None:
        return min((sum(e) for e in self.terms), default=None)

    def sorted_terms(self) -> list[tuple[tuple[int, ...], GaussianRational]]:
        return sorted(self.terms.items(), key=lambda kv: _gr_key(kv[0]))

    def lowest_term(self):
        """First term in graded-lex order, or None for the zero series."""
        if not self.terms:
            return None
        e = min(self.terms, key=_gr_key)
        return e, self.terms[e]

    def with_trunc(self, trunc: int) -> "TruncatedSeries":
        if trunc > self.trunc:
            raise DegreeExhaustedError(
                f"cannot raise truncation from {self.trunc} to {trunc}"
            )
        if trunc == self.trunc:
            return self
        return TruncatedSeries(self.blocks, trunc,
                               {e: c for e, c in self.terms.items() if sum(e) <= trunc},
                               _trusted=True)

    def map_coefficients(self, fn) -> "TruncatedSeries":
        return TruncatedSeries(self.blocks, self.trunc, {e: fn(c) for e, c in self.terms.items()})

    def depends_on(self, name: str) -> bool:
        """True if any stored monomial involves a variable of the named block or variable."""
        idxs = (list(self.blocks.block_slice(name)) if "." not in name
                else [self.blocks.index(name)])
        return any(e[i] for e in self.terms for i in idxs)

    # -- arithmetic -------------------------------------------------------
    def _coerce_other(self, other):
        if isinstance(other, TruncatedSeries):
            _check_same_blocks(self, other)
            return other
        return TruncatedSeries.constant(self.blocks, self.trunc, other)

    def __add__(self, other):
        other = self._coerce_other(other)
        D = min(self.trunc, other.trunc)
        out = {e: c for e, c in self.terms.items() if sum(e) <= D}
        for e, c in other.terms.items():
            if sum(e) > D:
                continue
            cur = out.get(e)
            if cur is None:
                out[e] = c
            else:
                s = cur + c
                if s:
                    out[e] = s
                else:
                    del out[e]
        return TruncatedSeries(self.blocks, D, out, _trusted=True)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries(self.blocks, self.trunc,
                               {e: -c for e, c in self.terms.items()}, _trusted=True)

    def __sub__(self, other):
        return self + (-self._coerce_other(other))

    def __rsub__(self, other):
        return self._coerce_other(other) - self

    def __mul__(self, other):
        if isinstance(other, TruncatedSeries):
            _check_same_blocks(self, other)
            D = min(self.trunc, other.trunc)
            return TruncatedSeries(self.blocks, D, _mul_terms(self.terms, other.terms, D),
                                   _trusted=True)
        c = GaussianRational.coerce(other)
        if not c:
            return TruncatedSeries.zero(self.blocks, self.trunc)
        return TruncatedSeries(self.blocks, self.trunc,
                               {e: v * c for e, v in self.terms.items()}, _trusted=True)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative powers are not defined; use reciprocal()")
        result = TruncatedSeries.constant(self.blocks, self.trunc, ONE)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def mul_trunc(self, other: "TruncatedSeries", D: int) -> "TruncatedSeries":
        """Product computed only up to degree D (<= both truncations)."""
        _check_same_blocks(self, other)
        D = min(D, self.trunc, other.trunc)
        return TruncatedSeries(self.blocks, D, _mul_terms(self.terms, other.terms, D),
                               _trusted=True)

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return (self.trunc == other.trunc and self.blocks == other.blocks
                and self.terms == other.terms)

    def __hash__(self):
        return hash((self.trunc, frozenset(self.terms.items())))

    def equal_mod(self, other: "TruncatedSeries", degree: int | None = None) -> bool:
        """Equality of all coefficients of degree <= ``degree`` (default: common trunc)."""
        _check_same_blocks(self, other)
        D = min(self.trunc, other.trunc) if degree is None else degree
        return (self - other).jet_terms(D) == {}

    def jet_terms(self, k: int) -> dict:
        return {e: c for e, c in self.terms.items() if sum(e) <= k}

    # -- text -------------------------------------------------------------
    def to_text(self) -> str:
        if not self.terms:
            return "0"
        names = self.blocks.names()
        parts = []
        for e, c in self.sorted_terms():
            mono = "*".join(
                names[i] if k == 1 else f"{names[i]}^{k}" for i, k in enumerate(e) if k
            )
            cs = str(c)
            if c.re and c.im:
                cs = f"({cs})"
            parts.append(cs if not mono else f"{cs}*{mono}")
        return " + ".join(parts)

    def __str__(self):
        return self.to_text()

    def __repr__(self):
        return f"TruncatedSeries[D={self.trunc}]({self.to_text()})"


class SeriesVector:
    """An ordered tuple of series sharing blocks and truncation."""

    __slots__ = ("components",)

    def __init__(self, components: Iterable[TruncatedSeries]):
        comps = tuple(components)
        if not comps:
            raise ValueError("a SeriesVector needs at least one component")
        b0, d0 = comps[0].blocks, comps[0].trunc
        for c in comps[1:]:
            if c.blocks != b0:
                raise BlockMismatchError("SeriesVector components must share blocks")
            if c.trunc != d0:
                raise BlockMismatchError(
                    f"SeriesVector components must share truncation ({d0} vs {c.trunc})"
                )
        self.components = comps

    @classmethod
    def aligned(cls, components: Iterable[TruncatedSeries]) -> "SeriesVector":
        """Build a vector, lowering every component to the smallest truncation."""
        comps = list(components)
        D = min(c.trunc for c in comps)
        return cls(c.with_trunc(D) for c in comps)

    @property
    def blocks(self) -> VariableBlocks:
        return self.components[0].blocks

    @property
    def trunc(self) -> int:
        return self.components[0].trunc

    def __len__(self):
        return len(self.components)

    def __iter__(self) -> Iterator[TruncatedSeries]:
        return iter(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def __eq__(self, other):
        if not isinstance(other, SeriesVector):
            return NotImplemented
        return self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def map(self, fn) -> "SeriesVector":
        return SeriesVector.aligned(fn(c) for c in self.components)

    def with_trunc(self, trunc: int) -> "SeriesVector":
        return SeriesVector(c.with_trunc(trunc) for c in self.components)

    def to_text(self) -> list[str]:
        return [c.to_text() for c in self.components]

    def __repr__(self):
        return f"SeriesVector[D={self.trunc}]({'; '.join(self.to_text())})"


def identity_vector(blocks: VariableBlocks, trunc: int) -> SeriesVector:
    return SeriesVector(TruncatedSeries.variable(blocks, trunc, k) for k in range(blocks.nvars))


# ---------------------------------------------------------------------------
# composition and substitution
# ---------------------------------------------------------------------------

def compose(f: TruncatedSeries, subs: SeriesVector | Sequence[TruncatedSeries]) -> TruncatedSeries:
    """Formal composition f(subs_1, ..., subs_n) modulo the smallest truncation.

    Every substitute must have zero constant term; use :func:`recenter` first
    otherwise.
    """
    subs = subs if isinstance(subs, SeriesVector) else SeriesVector.aligned(subs)
    if len(subs) != f.nvars:
        raise BlockMismatchError(
            f"compose: {len(subs)} substitutes for {f.nvars} variables {f.blocks.names()}"
        )
    for k, s in enumerate(subs):
        c = s.constant_term()
        if c:
            raise PreconditionError(
                f"compose: substitute for {f.blocks.names()[k]} has nonzero constant term {c}"
            )
    tb = subs.blocks
    D = min(f.trunc, subs.trunc)
    one = {(0,) * tb.nvars: ONE}
    vals = [s.valuation() for s in subs]
    # valuation of a zero substitute is infinite
    vals = [v if v is not None else D + 1 for v in vals]
    powers: list[list[dict]] = [[one] for _ in subs]

    def power(i: int, k: int) -> dict:
        plist = powers[i]
        while len(plist) <= k:
            plist.append(_mul_terms(plist[-1], subs[i].terms, D))
        return plist[k]

    result: dict = {}
    n = f.nvars
    # memoised partial products over exponent prefixes; a prefix product is only
    # needed up to D minus the valuation of the remaining factors, so each entry
    # remembers the degree it was computed to and is redone when more is needed
    prefix_cache: dict = {}
    for e, c in f.terms.items():
        low = sum(k * v for k, v in zip(e, vals))
        if low > D:
            continue
        key = ()
        prod = one
        rest = low
        for i in range(n):
            k = e[i]
            key = key + (k,)
            if not k:
                continue
            rest -= k * vals[i]
            need = D - rest
            hit = prefix_cache.get(key)
            if hit is None or hit[0] < need:
                hit = (need, _mul_terms(prod, power(i, k), need))
                prefix_cache[key] = hit
            prod = hit[1]
            if not prod:
                break
        if not prod:
            continue
        cr, ci = c.re, c.im
        for pe, pc in prod.items():
            if sum(pe) > D:
                continue
            if ci or pc.im:
                vr = cr * pc.re - ci * pc.im
                vi = cr * pc.im + ci * pc.re
            else:
                vr, vi = cr * pc.re, _ZERO_Q
            cur = result.get(pe)
            if cur is None:
                result[pe] = [vr, vi]
            else:
                cur[0] += vr
                cur[1] += vi
    raw = GaussianRational._raw
    terms = {e: raw(v[0], v[1]) for e, v in result.items() if v[0] or v[1]}
    return TruncatedSeries(tb, D, terms, _trusted=True)


def substitute(f: TruncatedSeries, mapping: Mapping[str, TruncatedSeries],
               target: VariableBlocks | None = None, trunc: int | None = None) -> TruncatedSeries:
    """Compose f with a partial substitution.

    ``mapping`` sends variable names (``"w.1"``) or whole block names (``"w"``,
    then the value must be a SeriesVector or sequence) to series over
    ``target``.  Unmapped variables go to the same-named variable of
    ``target`` (default: f's own blocks).
    """
    target = target or f.blocks
    D = f.trunc if trunc is None else trunc
    for v in mapping.values():
        seq = v if isinstance(v, (SeriesVector, list, tuple)) else [v]
        for s in seq:
            D = min(D, s.trunc)
    per_var: dict[int, TruncatedSeries] = {}
    for key, val in mapping.items():
        if "." in key or f.blocks.block(key).arity == 1 and not isinstance(
                val, (SeriesVector, list, tuple)):
            idx = f.blocks.index(key)
            per_var[idx] = val
        else:
            rng = f.blocks.block_slice(key)
            vals = list(val)
            if len(vals) != len(rng):
                raise BlockMismatchError(f"block {key!r} needs {len(rng)} substitutes")
            for i, s in zip(rng, vals):
                per_var[i] = s
    names = f.blocks.names()
    subs = []
    for i, nm in enumerate(names):
        if i in per_var:
            s = per_var[i]
            if s.blocks != target:
                raise BlockMismatchError(f"substitute for {nm} lives in the wrong blocks")
            subs.append(s.with_trunc(min(D, s.trunc)))
        else:
            try:
                idx = target.index(nm)
            except BlockMismatchError:
                if f.depends_on(nm):
                    raise BlockMismatchError(
                        f"variable {nm} has no substitute and no counterpart in target blocks"
                    ) from None
                subs.append(TruncatedSeries.zero(target, D))
                continue
            subs.append(TruncatedSeries.variable(target, D, idx))
    subs = [s.with_trunc(D) for s in subs]
    return compose(f.with_trunc(min(D, f.trunc)), SeriesVector(subs))


def embed(f: TruncatedSeries, target: VariableBlocks, rename: Mapping[str, str] | None = None
          ) -> TruncatedSeries:
    """Re-express f over ``target`` by matching variable names (after optional block renames).

    Variables of f that do not exist in ``target`` must not occur in f.
    """
    rename = rename or {}
    names = f.blocks.names()
    pos = []
    for nm in names:
        blk, _, k = nm.rpartition(".")
        nm2 = f"{rename.get(blk, blk)}.{k}"
        try:
            pos.append(target.index(nm2))
        except BlockMismatchError:
            pos.append(None)
    n2 = target.nvars
    out = {}
    for e, c in f.terms.items():
        ne = [0] * n2
        for i, k in enumerate(e):
            if k:
                if pos[i] is None:
                    raise BlockMismatchError(f"variable {names[i]} missing from target blocks")
                ne[pos[i]] += k
        out[tuple(ne)] = c
    return TruncatedSeries(target, f.trunc, out, _trusted=True)


def embed_vector(v: SeriesVector, target: VariableBlocks, rename=None) -> SeriesVector:
    return SeriesVector(embed(c, target, rename) for c in v)


def specialize(f: TruncatedSeries, values: Mapping[str, object]) -> TruncatedSeries:
    """Set the named variables (or whole blocks) to exact constants.

    Exact for the stored polynomial representative; setting variables to 0 is
    always exact.  The variables stay in the blocks with exponent 0.
    """
    idx_val: dict[int, GaussianRational] = {}
    for key, val in values.items():
        if "." in key or f.blocks.block(key).arity == 1 and not isinstance(val, (list, tuple)):
            idx_val[f.blocks.index(key)] = GaussianRational.coerce(val)
        else:
            for i, v in zip(f.blocks.block_slice(key), val):
                idx_val[i] = GaussianRational.coerce(v)
    out: dict = {}
    for e, c in f.terms.items():
        ne = list(e)
        coef = c
        for i, v in idx_val.items():
            k = e[i]
            if k:
                if not v:
                    coef = ZERO
                    break
                coef = coef * _gpow(v, k)
                ne[i] = 0
        if not coef:
            continue
        t = tuple(ne)
        cur = out.get(t)
        out[t] = coef if cur is None else cur + coef
    return TruncatedSeries(f.blocks, f.trunc, {e: c for e, c in out.items() if c}, _trusted=True)


def _gpow(v: GaussianRational, k: int) -> GaussianRational:
    r = ONE
    for _ in range(k):
        r = r * v
    return r


def recenter(f: TruncatedSeries, point: Sequence) -> TruncatedSeries:
    """Taylor expansion of the stored polynomial f at ``point``, in shifted variables.

    The result keeps f's truncation; it is exact for polynomial input.  For a
    genuinely truncated series the tail beyond ``trunc`` is unknown and the
    caller is responsible for the degree budget.
    """
    pt = [GaussianRational.coerce(p) for p in point]
    if len(pt) != f.nvars:
        raise BlockMismatchError(f"recenter: point has {len(pt)} entries, need {f.nvars}")
    active = [i for i, p in enumerate(pt) if p]
    if not active:
        return f
    out: dict = {}
    D = f.trunc
    for e, c in f.terms.items():
        # expand prod (p_i + y_i)^{e_i} over active variables
        factors = []
        for i in active:
            k = e[i]
            if k:
                factors.append([(j, math.comb(k, j) * _gpow(pt[i], k - j)) for j in range(k + 1)])
            else:
                factors.append([(0, ONE)])
        for combo in itertools.product(*factors):
            ne = list(e)
            coef = c
            for i, (j, w) in zip(active, combo):
                ne[i] = j
                coef = coef * w
            if sum(ne) > D or not coef:
                continue
            t = tuple(ne)
            cur = out.get(t)
            out[t] = coef if cur is None else cur + coef
    return TruncatedSeries(f.blocks, D, {e: c for e, c in out.items() if c}, _trusted=True)


def differentiate(f: TruncatedSeries, var: str | int) -> TruncatedSeries:
    """Exact partial derivative; the truncation drops by one."""
    if f.trunc == 0:
        raise DegreeExhaustedError("cannot differentiate a series truncated at degree 0")
    idx = var if isinstance(var, int) else f.blocks.index(var)
    out = {}
    for e, c in f.terms.items():
        k = e[idx]
        if k:
            ne = list(e)
            ne[idx] = k - 1
            out[tuple(ne)] = c * k
    return TruncatedSeries(f.blocks, f.trunc - 1, out, _trusted=True)


def conjugate_swap(f: TruncatedSeries) -> TruncatedSeries:
    """Formal bar operation: conjugate coefficients, exchange paired Z/zeta exponents.

    Parameter and auxiliary blocks only see coefficient conjugation.
    """
    perm = f.blocks.swap_permutation()
    out = {}
    for e, c in f.terms.items():
        ne = [0] * len(e)
        for i, k in enumerate(e):
            ne[perm[i]] = k
        out[tuple(ne)] = c.conjugate()
    return TruncatedSeries(f.blocks, f.trunc, out, _trusted=True)


def conjugate_coefficients(f: TruncatedSeries) -> TruncatedSeries:
    return TruncatedSeries(f.blocks, f.trunc, {e: c.conjugate() for e, c in f.terms.items()},
                           _trusted=True)


def jet(f: TruncatedSeries, k: int) -> TruncatedSeries:
    """k-jet of f: drop all monomials of degree > k (requires k <= trunc)."""
    if k > f.trunc:
        raise DegreeExhaustedError(f"jet of order {k} requested from series truncated at {f.trunc}")
    return f.with_trunc(k)


def evaluate(f: TruncatedSeries, point: Sequence) -> GaussianRational:
    pt = [GaussianRational.coerce(p) for p in point]
    if len(pt) != f.nvars:
        raise BlockMismatchError(f"evaluate: point has {len(pt)} entries, need {f.nvars}")
    total = ZERO
    for e, c in f.terms.items():
        v = c
        for p, k in zip(pt, e):
            if k:
                v = v * _gpow(p, k)
        total = total + v
    return total


def truncate_block(f: TruncatedSeries, names: Sequence[str], degree: int) -> TruncatedSeries:
    """Drop monomials whose joint degree in the given blocks exceeds ``degree``."""
    idxs = [i for nm in names for i in f.blocks.block_slice(nm)]
    return TruncatedSeries(
        f.blocks, f.trunc,
        {e: c for e, c in f.terms.items() if sum(e[i] for i in idxs) <= degree},
        _trusted=True,
    )


def coefficient_in(f: TruncatedSeries, names: Sequence[str], exp: Sequence[int]) -> TruncatedSeries:
    """Coefficient of the monomial ``exp`` in the variables of blocks ``names``.

    Returns a series over the same blocks in which those variables no longer
    occur; its truncation drops by |exp|.
    """
    idxs = [i for nm in names for i in f.blocks.block_slice(nm)]
    if len(idxs) != len(exp):
        raise BlockMismatchError("coefficient_in: exponent length mismatch")
    d = sum(exp)
    if d > f.trunc:
        raise DegreeExhaustedError(f"coefficient of degree {d} exceeds truncation {f.trunc}")
    target = tuple(exp)
    out = {}
    for e, c in f.terms.items():
        if tuple(e[i] for i in idxs) == target:
            ne = list(e)
            for i in idxs:
                ne[i] = 0
            out[tuple(ne)] = c
    return TruncatedSeries(f.blocks, f.trunc - d, out, _trusted=True)


def reciprocal(f: TruncatedSeries) -> TruncatedSeries:
    """1/f for a series with nonzero constant term, by Newton iteration."""
    c0 = f.constant_term()
    if not c0:
        raise PreconditionError("reciprocal of a series with zero constant term")
    inv0 = c0.inverse()
    g = TruncatedSeries.constant(f.blocks, f.trunc, inv0)
    prec = 0
    while prec < f.trunc:
        # g <- g (2 - f g), doubling the number of correct degrees
        g = g * (2 - f * g)
        prec = 2 * prec + 1
    return g


# ---------------------------------------------------------------------------
# implicit and inverse functions
# ---------------------------------------------------------------------------

def _constant_jacobian(F: Sequence[TruncatedSeries], idxs: Sequence[int]) -> list[list[GaussianRational]]:
    n = F[0].nvars
    rows = []
    for comp in F:
        row = []
        for j in idxs:
            e = [0] * n
            e[j] = 1
            row.append(comp.coefficient(e))
        rows.append(row)
    return rows


def solve_implicit(F: SeriesVector, unknowns: Sequence[str], base: Sequence | None = None
                   ) -> SeriesVector:
    """Solve F(x, y) = 0 for y = y(x) with y(0) = base, modulo F's truncation.

    ``unknowns`` names the y variables (one per component of F); all other
    variables of F's blocks are the independent x.  The returned vector lives
    in F's blocks and does not involve the y variables.
    """
    from . import linalg

    blocks = F.blocks
    D = F.trunc
    uidx = [blocks.index(u) for u in unknowns]
    if len(uidx) != len(F):
        raise BlockMismatchError(
            f"solve_implicit: {len(F)} equations for {len(uidx)} unknowns"
        )
    y0 = [GaussianRational.coerce(b) for b in (base or [0] * len(uidx))]
    point = [ZERO] * blocks.nvars
    for i, v in zip(uidx, y0):
        point[i] = v
    G = [recenter(c, point) for c in F]
    for c in G:
        if c.constant_term():
            raise PreconditionError(
                f"solve_implicit: F(0, y0) = {c.constant_term()} is not zero"
            )
    J = _constant_jacobian(G, uidx)
    det = linalg.det(J)
    if not det:
        raise SingularJacobianError("solve_implicit: Jacobian with respect to unknowns is singular",
                                    determinant=det)
    Jinv = linalg.inverse(J)
    m = len(uidx)
    delta = [TruncatedSeries.zero(blocks, D) for _ in range(m)]
    ident = [TruncatedSeries.variable(blocks, D, k) for k in range(blocks.nvars)]
    for _ in range(D + 2):
        subs = list(ident)
        for i, d in zip(uidx, delta):
            subs[i] = d
        resid = [compose(c, SeriesVector(subs)) for c in G]
        if all(r.is_zero() for r in resid):
            break
        delta = [
            delta[a] - sum((resid[b] * Jinv[a][b] for b in range(m) if Jinv[a][b]),
                           TruncatedSeries.zero(blocks, D))
            for a in range(m)
        ]
    else:  # pragma: no cover - the fixed point gains one degree per step
        raise RuntimeError("solve_implicit: fixed-point iteration did not converge")
    return SeriesVector(d + v for d, v in zip(delta, y0))


def invert_map_slice(A: SeriesVector, base: Sequence, slice_vars: Sequence[str],
                     target: VariableBlocks | None = None) -> SeriesVector:
    """Right inverse T of A near ``base`` with A(T(Z)) = Z modulo truncation.

    A maps C^m -> C^N (m >= N) with A(base) = 0.  Only the N ``slice_vars``
    move; every other coordinate of T is frozen at its base value.  T lives
    in ``target`` (default: a single block ``Z`` of arity N) and T(0) = base.
    """
    N = len(A)
    xb = A.blocks
    if len(slice_vars) != N:
        raise BlockMismatchError(f"slice must name {N} variables, got {len(slice_vars)}")
    if target is None:
        target = VariableBlocks.make(("Z", N, "x"))
    if target.nvars != N:
        raise BlockMismatchError("target blocks must have one variable per component of A")
    x0 = [GaussianRational.coerce(b) for b in base]
    if len(x0) != xb.nvars:
        raise BlockMismatchError("base point arity mismatch")
    for k, comp in enumerate(A):
        v = evaluate(comp, x0)
        if v:
            raise PreconditionError(f"invert_map_slice: A(base) component {k} = {v} is not zero")
    sidx = [xb.index(s) for s in slice_vars]
    shifted = [recenter(c, x0) for c in A]
    frozen = {nm: 0 for i, nm in enumerate(xb.names()) if i not in sidx}
    restricted = [specialize(c, frozen) if frozen else c for c in shifted]
    J = _constant_jacobian(restricted, sidx)
    from . import linalg

    det = linalg.det(J)
    if not det:
        raise SingularJacobianError(
            "invert_map_slice: slice Jacobian is singular at the base point; "
            "check generic rank or choose another slice",
            determinant=det,
        )
    # clash-free joint blocks: the target block first, x blocks renamed if needed
    ren = {b.name: (b.name if not target.has_block(b.name) else b.name + "_src")
           for b in xb.blocks}
    xb2 = VariableBlocks(tuple(Block(ren[b.name], b.arity, "x") for b in xb.blocks))
    joint = target.concat(xb2)
    D = A.trunc
    eqs = []
    for k, c in enumerate(restricted):
        ce = embed(c, joint, ren)
        eqs.append(ce - TruncatedSeries.variable(joint, D, k))
    unk = [f"{ren[nm.rpartition('.')[0]]}.{nm.rpartition('.')[2]}" for nm in slice_vars]
    sol = solve_implicit(SeriesVector(eqs), unk)
    drop = {b.name for b in xb2.blocks}
    comps = []
    sol_by_var = dict(zip(sidx, sol))
    for i in range(xb.nvars):
        if i in sol_by_var:
            s = sol_by_var[i]
            proj = {e[:N]: c for e, c in s.terms.items()}
            if any(any(e[N:]) for e in s.terms):  # pragma: no cover - solve excludes unknowns
                raise RuntimeError("inverse depends on source variables")
            comps.append(TruncatedSeries(target, D, proj, _trusted=True) + x0[i])
        else:
            comps.append(TruncatedSeries.constant(target, D, x0[i]))
    del drop
    return SeriesVector(comps)
