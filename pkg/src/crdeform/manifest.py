"""Manifest files: named manifolds, targets, deformations, maps, curves and jets.

Format::

    # comment
    [settings]
    trunc = 8

    [manifold sphere]
    n = 1
    phi = z.1*chi.1              # Im w = phi(z, chi, u); ';' separates components

    [target sphere]
    manifold = sphere            # or: graph = ... with n, d; or: rho = ... with N [, eps]

    [map id]
    source = sphere
    target = sphere
    components = z.1; w

Indented lines continue the previous value.  Every literal is exact.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InputError
from .expr import ExprError, parse_number, parse_series
from .infdef import CurveInT, _with_t
from .manifold import (
    DefiningIdeal,
    Deformation,
    GenericManifold,
    base_point_deformation,
    from_graph,
    graph_blocks,
    graph_chart,
    ideal_from_graph,
    target_blocks,
)
from .series import SeriesVector, TruncatedSeries

__all__ = ["ManifestError", "Section", "Manifest", "parse_manifest", "parse_manifest_text"]

KINDS = ("settings", "manifold", "target", "deformation", "map", "curve", "jet")
DEFAULT_TRUNC = 8

_HEADER = re.compile(r"^\[\s*([A-Za-z]+)(?:\s+([A-Za-z_][\w\-]*))?\s*\]\s*$")
_KEY = re.compile(r"^([A-Za-z_][\w\-]*)\s*=(.*)$")


class ManifestError(ExprError):
    pass


@dataclass
class Entry:
    value: str
    line: int
    col: int  # 0-based column where the value starts


@dataclass
class Section:
    kind: str
    name: str
    line: int
    entries: dict = field(default_factory=dict)

    def get(self, key: str, default=None) -> Entry | None:
        return self.entries.get(key, default)

    def need(self, key: str) -> Entry:
        e = self.entries.get(key)
        if e is None:
            raise ManifestError(f"[{self.kind} {self.name}] is missing key {key!r}", self.line)
        return e

    def int(self, key: str, default: int | None = None) -> int | None:
        e = self.entries.get(key)
        if e is None:
            return default
        v = e.value.strip()
        if not re.fullmatch(r"-?\d+", v):
            raise ManifestError(f"{key} must be an integer, got {v!r}", e.line, e.col + 1)
        return int(v)


def _split_components(entry: Entry) -> list[tuple[str, int]]:
    """Split on ';' keeping the column of each piece."""
    out, start = [], 0
    text = entry.value
    for k, ch in enumerate(text + ";"):
        if ch == ";":
            piece = text[start:k]
            if piece.strip():
                out.append((piece, entry.col + start))
            start = k + 1
    if not out:
        raise ManifestError("empty component list", entry.line, entry.col + 1)
    return out


def _lex(text: str) -> list[Section]:
    sections: list[Section] = []
    current: Section | None = None
    last: Entry | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if line[0] in " \t" and last is not None and not line.lstrip().startswith("["):
            # continuation: keep columns relative to the joined value
            last.value = last.value + " " + line.strip()
            continue
        m = _HEADER.match(line.strip())
        if m:
            kind, name = m.group(1).lower(), m.group(2)
            if kind not in KINDS:
                raise ManifestError(f"unknown section kind {kind!r}; expected one of {list(KINDS)}",
                                    lineno, raw.index("[") + 2)
            if kind != "settings" and not name:
                raise ManifestError(f"section [{kind}] needs a name", lineno, 1)
            current = Section(kind, name or "settings", lineno)
            sections.append(current)
            last = None
            continue
        if line.strip().startswith("["):
            raise ManifestError(f"malformed section header {line.strip()!r}", lineno, 1)
        m = _KEY.match(line.strip())
        if not m:
            raise ManifestError(f"expected 'key = value', got {line.strip()!r}", lineno,
                                len(line) - len(line.lstrip()) + 1)
        if current is None:
            raise ManifestError("key outside of any section", lineno, 1)
        key = m.group(1)
        if key in current.entries:
            raise ManifestError(f"duplicate key {key!r} in [{current.kind} {current.name}]", lineno, 1)
        val = m.group(2)
        col = line.index("=") + 1
        last = Entry(val, lineno, col)
        current.entries[key] = last
    if not sections:
        raise ManifestError("no sections")
    return sections


@dataclass
class Manifest:
    """Resolved objects; built lazily so a command only pays for what it uses."""

    sections: dict  # (kind, name) -> Section
    settings: dict
    trunc_override: int | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    # -- helpers -----------------------------------------------------------------
    def names(self, kind: str) -> list[str]:
        return sorted(n for k, n in self.sections if k == kind)

    def section(self, kind: str, name: str) -> Section:
        try:
            return self.sections[(kind, name)]
        except KeyError:
            known = self.names(kind)
            raise ManifestError(f"unresolved reference to {kind} {name!r}; known: {known}") from None

    def trunc(self, sec: Section | None = None) -> int:
        if self.trunc_override is not None:
            return self.trunc_override
        if sec is not None and sec.get("trunc") is not None:
            return sec.int("trunc")
        return self.settings.get("trunc", DEFAULT_TRUNC)

    def _cached(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def _series_list(self, entry: Entry, blocks, trunc) -> list[TruncatedSeries]:
        return [parse_series(p, blocks, trunc, entry.line, c) for p, c in _split_components(entry)]

    # -- objects -----------------------------------------------------------------
    def manifold(self, name: str) -> GenericManifold:
        return self._cached(("manifold", name), lambda: self._build_manifold(name))

    def _build_manifold(self, name: str) -> GenericManifold:
        sec = self.section("manifold", name)
        n = sec.int("n")
        if n is None or n < 1:
            raise ManifestError(f"[manifold {name}] needs n >= 1", sec.line)
        phi_e = sec.need("phi")
        pieces = _split_components(phi_e)
        d = sec.int("d", len(pieces))
        if d != len(pieces):
            raise ManifestError(f"d = {d} but {len(pieces)} graph components given", phi_e.line)
        D = self.trunc(sec)
        G = graph_blocks(n, d)
        phi = [parse_series(p, G, D, phi_e.line, c) for p, c in pieces]
        return from_graph(SeriesVector(phi), n, d, name)

    def target(self, name: str) -> DefiningIdeal:
        return self._cached(("target", name), lambda: self._build_target(name))

    def target_graph(self, name: str):
        """(phi, n, d) when the target was given by a graph (directly or through a manifold)."""
        sec = self.section("target", name)
        if sec.get("manifold"):
            M = self.manifold(sec.get("manifold").value.strip())
            return M.phi, M.n, M.d
        if sec.get("graph"):
            n, d = sec.int("n"), sec.int("d", 1)
            G = graph_blocks(n, d)
            e = sec.get("graph")
            return SeriesVector(self._series_list(e, G, self.trunc(sec))), n, d
        return None

    def _build_target(self, name: str) -> DefiningIdeal:
        sec = self.section("target", name)
        D = self.trunc(sec)
        kinds = [k for k in ("manifold", "graph", "rho") if sec.get(k) is not None]
        if len(kinds) != 1:
            raise ManifestError(f"[target {name}] needs exactly one of manifold, graph, rho", sec.line)
        if kinds[0] == "manifold":
            ideal = self.manifold(sec.get("manifold").value.strip()).ideal
        elif kinds[0] == "graph":
            phi, n, d = self.target_graph(name)
            if n is None:
                raise ManifestError(f"[target {name}] graph needs n", sec.line)
            ideal = ideal_from_graph(phi, n, d)
        else:
            N = sec.int("N")
            if N is None:
                raise ManifestError(f"[target {name}] rho needs N", sec.line)
            m = sec.int("eps", 0)
            T = target_blocks(N, m)
            ideal = DefiningIdeal(SeriesVector(self._series_list(sec.get("rho"), T, D)))
            if not ideal.reality_check():
                from .errors import RealityError

                raise RealityError(f"[target {name}] defining functions are not real")
        if sec.get("point") is not None:
            from .gallery import translate_target

            e = sec.get("point")
            pt = [parse_number(p, e.line, c) for p, c in _split_components(e)]
            ideal = translate_target(ideal, pt)
        return ideal

    def deformation(self, name: str) -> Deformation:
        return self._cached(("deformation", name), lambda: self._build_deformation(name))

    def _build_deformation(self, name: str) -> Deformation:
        sec = self.section("deformation", name)
        if sec.get("chart") is not None:
            if sec.get("chart").value.strip() != "graph":
                raise ManifestError("chart must be 'graph'", sec.get("chart").line)
            tname = sec.need("target").value.strip()
            g = self.target_graph(tname)
            if g is None:
                raise ManifestError(f"target {tname!r} has no graph form for a base-point chart", sec.line)
            phi, n, d = g
            return base_point_deformation(self.target(tname), graph_chart(phi, n, d))
        m = sec.int("eps")
        N = sec.int("N")
        if m is None or N is None:
            raise ManifestError(f"[deformation {name}] needs chart = graph, or rho with N and eps", sec.line)
        T = target_blocks(N, m)
        rho = SeriesVector(self._series_list(sec.need("rho"), T, self.trunc(sec)))
        return Deformation(DefiningIdeal(rho))

    def _source_and_target(self, sec: Section):
        M = self.manifold(sec.need("source").value.strip())
        tgt = sec.get("target")
        dfm = sec.get("deformation")
        ideal = self.target(tgt.value.strip()) if tgt is not None else None
        D = self.deformation(dfm.value.strip()) if dfm is not None else None
        if ideal is None and D is None:
            raise ManifestError(f"[{sec.kind} {sec.name}] needs a target or a deformation", sec.line)
        return M, ideal, D

    def map(self, name: str):
        """(H, M, target ideal or None, deformation or None)."""
        def build():
            sec = self.section("map", name)
            M, ideal, dfm = self._source_and_target(sec)
            D = min(self.trunc(sec), M.trunc)
            H = SeriesVector(self._series_list(sec.need("components"), M.blocks, D))
            return H, M, ideal, dfm
        return self._cached(("map", name), build)

    def curve(self, name: str):
        """(CurveInT, M, ideal used for tangency)."""
        def build():
            sec = self.section("curve", name)
            M, ideal, dfm = self._source_and_target(sec)
            D = min(self.trunc(sec), M.trunc)
            ctx = _with_t(M.blocks)
            H = SeriesVector(self._series_list(sec.need("components"), ctx, D))
            eps = ()
            if sec.get("eps") is not None:
                eps = tuple(self._series_list(sec.get("eps"), ctx, D))
            use = dfm.ideal if dfm is not None else ideal
            return CurveInT(eps, H), M, use
        return self._cached(("curve", name), build)

    def jet(self, name: str):
        """(Lambda, M, target ideal)."""
        def build():
            sec = self.section("jet", name)
            M, ideal, _ = self._source_and_target(sec)
            order = sec.int("order")
            if order is None:
                raise ManifestError(f"[jet {name}] needs order", sec.line)
            Lam = SeriesVector(self._series_list(sec.need("components"), M.blocks, order))
            return Lam, M, ideal
        return self._cached(("jet", name), build)


def parse_manifest_text(text: str, trunc_override: int | None = None) -> Manifest:
    sections = _lex(text)
    table: dict = {}
    settings: dict = {}
    for sec in sections:
        if sec.kind == "settings":
            for key in sec.entries:
                if key not in ("trunc", "kmax"):
                    raise ManifestError(f"unknown setting {key!r}", sec.entries[key].line)
                settings[key] = sec.int(key)
            continue
        key = (sec.kind, sec.name)
        if key in table:
            raise ManifestError(f"duplicate section [{sec.kind} {sec.name}]", sec.line)
        table[key] = sec
    return Manifest(table, settings, trunc_override)


def parse_manifest(path: str | Path, trunc_override: int | None = None) -> Manifest:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read manifest {str(p)!r}: {exc.strerror}") from None
    return parse_manifest_text(text, trunc_override)


def validate(manifest: Manifest) -> None:
    """Resolve every object once; raises on the first problem."""
    getters = {"manifold": manifest.manifold, "target": manifest.target,
               "deformation": manifest.deformation, "map": manifest.map,
               "curve": manifest.curve, "jet": manifest.jet}
    for kind, name in sorted(manifest.sections):
        getters[kind](name)
