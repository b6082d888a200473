"""Command-line front end.

    crdeform COMMAND MANIFEST NAME [flags]
    crdeform gallery NAME [flags]

Exit codes: 0 success, 2 verification-failure verdict, 3 budget error,
4 input error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

from . import __version__
from .errors import BudgetError, CRDeformError, InputError, VerificationError
from .manifest import Manifest, parse_manifest

__all__ = ["main", "execute", "Options", "COMMANDS", "GALLERY"]

EXIT_OK, EXIT_VERDICT, EXIT_BUDGET, EXIT_INPUT = 0, 2, 3, 4

COMMANDS = ("segre", "minimality", "check-map", "nondeg", "hol", "hol-def", "hol-k",
            "tangency", "reconstruct", "admissible", "isolation")
GALLERY = ("example-6-1", "example-6-2", "singular-cusp", "singular-node", "singular-tacnode",
           "jet-prescription")


@dataclass(frozen=True)
class Options:
    trunc: int | None = None
    kmax: int | None = None
    kappa_range: tuple | None = None
    degree_goal: int | None = None
    x0_box: int = 1
    order: int | None = None
    projection: int | None = None
    relaxed: bool = False
    method: str = "linear"


def _kappa_range(text: str) -> tuple:
    try:
        if ":" in text:
            a, b = text.split(":")
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError:
        raise InputError(f"--kappa-range expects LO:HI, got {text!r}") from None
    if lo < 0 or hi < lo:
        raise InputError(f"--kappa-range {text!r} is empty or negative")
    return tuple(range(lo, hi + 1))


def _default_kappas(opts: Options, lo: int = 2, hi: int = 4) -> tuple:
    return opts.kappa_range or tuple(range(lo, hi + 1))


# ---------------------------------------------------------------------------
# command implementations: each returns (result dict, verdict ok)
# ---------------------------------------------------------------------------

def _cmd_segre(mf: Manifest, name: str, opts: Options):
    from .segre import generic_rank, segre_map

    M = mf.manifold(name)
    q = opts.order or M.d + 1
    S = segre_map(M, q)
    g = generic_rank(S.map)
    return {"manifold": name, "q": q, "trunc": S.trunc, "segre_map": S.map.to_text(),
            "generic_rank": g.to_dict()}, True


def _cmd_minimality(mf: Manifest, name: str, opts: Options):
    from .segre import minimality_order

    M = mf.manifold(name)
    rep = minimality_order(M, opts.order)
    return {"manifold": name, **rep.to_dict()}, True


def _map(mf: Manifest, name: str):
    H, M, ideal, dfm = mf.map(name)
    if ideal is None:
        ideal = dfm.at_base()
    return H, M, ideal, dfm


def _cmd_check_map(mf: Manifest, name: str, opts: Options):
    from .manifold import check_maps_into

    H, M, ideal, _ = _map(mf, name)
    chk = check_maps_into(H, M, ideal)
    return {"map": name, "maps_into": chk.ok, "degree": chk.degree, "detail": chk.describe(),
            "residuals": [r.to_text() for r in chk.residuals]}, chk.ok


def _cmd_nondeg(mf: Manifest, name: str, opts: Options):
    from .nondeg import NondegCertificate, find_nondegeneracy

    H, M, ideal, _ = _map(mf, name)
    kmax = opts.kmax if opts.kmax is not None else mf.settings.get("kmax")
    res = find_nondegeneracy(H, M, ideal, kmax)
    ok = isinstance(res, NondegCertificate)
    out = {"map": name, "nondegenerate": ok}
    out.update(res.to_dict())
    return out, ok


def _cmd_hol(mf: Manifest, name: str, opts: Options, deformation: bool = False):
    from .infdef import stabilized_dim

    H, M, ideal, dfm = _map(mf, name)
    if deformation and dfm is None:
        raise InputError(f"map {name!r} has no deformation; give 'deformation = ...' in its section")
    kappas = _default_kappas(opts)
    proj = opts.projection if opts.projection is not None else kappas[0]
    rep = stabilized_dim(H, M, ideal, kappas, proj, dfm if deformation else None,
                         vanish_at_base=not opts.relaxed)
    out = {"map": name, "space": "hol_def" if deformation else "hol",
           "vanish_at_base": not opts.relaxed, **rep.to_dict()}
    return out, True


def _cmd_hol_k(mf: Manifest, name: str, opts: Options):
    from .infdef import hol_k_jets

    H, M, ideal, dfm = _map(mf, name)
    k = opts.order or 2
    kappa = (opts.kappa_range or (3,))[-1]
    sysk = hol_k_jets(H, M, ideal, dfm, k, kappa, vanish_at_base=not opts.relaxed)
    first = sysk.first_order
    extendable = 0
    details = []
    for v, Y in first.fields():
        ws, Ys = [v], [Y]
        for _ in range(2, k + 1):
            nxt = sysk.extend(ws, Ys)
            if nxt is None:
                break
            ws.append(nxt[0])
            Ys.append(nxt[1])
        reached = len(Ys)
        if reached == k:
            extendable += 1
        details.append(reached)
    return {"map": name, "order": k, "kappa": kappa, "first_order_dim": first.dim,
            "extendable_to_order": extendable, "reached_orders": details}, True


def _cmd_tangency(mf: Manifest, name: str, opts: Options):
    from .infdef import curve_tangency

    curve, M, ideal = mf.curve(name)
    r = opts.order if opts.order is not None else 1
    res = curve_tangency(curve, M, ideal, r)
    return {"curve": name, **res.to_dict()}, res.ok


def _jet_setup(mf: Manifest, name: str, opts: Options):
    from .jetparam import jet_certificate

    Lam, M, ideal = mf.jet(name)
    kmax = opts.kmax if opts.kmax is not None else min(Lam.trunc, mf.settings.get("kmax", 4))
    cert = jet_certificate(M, ideal, Lam, kmax)
    return Lam, M, ideal, cert


def _cmd_reconstruct(mf: Manifest, name: str, opts: Options):
    from .jetparam import reconstruct

    Lam, M, ideal, cert = _jet_setup(mf, name, opts)
    goal = opts.degree_goal if opts.degree_goal is not None else Lam.trunc + 2
    rec = reconstruct(M, ideal, cert, Lam, goal, method=opts.method, x0_box=opts.x0_box)
    out = {"jet": name, "degree_goal": goal, "certificate": cert.to_dict(), **rec.to_dict()}
    return out, rec.consistent and rec.jet_consistent


def _cmd_admissible(mf: Manifest, name: str, opts: Options):
    from .jetparam import admissible_jet

    Lam, M, ideal, cert = _jet_setup(mf, name, opts)
    goal = opts.degree_goal if opts.degree_goal is not None else Lam.trunc + 2
    res = admissible_jet(M, ideal, Lam, goal, cert)
    return {"jet": name, "degree_goal": goal, **res.to_dict()}, res.ok


def _cmd_isolation(mf: Manifest, name: str, opts: Options):
    from .infdef import isolation_report, stabilized_dim

    H, M, ideal, dfm = _map(mf, name)
    kappas = _default_kappas(opts)
    proj = opts.projection if opts.projection is not None else kappas[0]
    rep = stabilized_dim(H, M, ideal, kappas, proj, dfm, vanish_at_base=True)
    verdict = isolation_report(rep)
    return {"map": name, "sweep": rep.to_dict(), **verdict.to_dict()}, True


_DISPATCH = {
    "segre": _cmd_segre,
    "minimality": _cmd_minimality,
    "check-map": _cmd_check_map,
    "nondeg": _cmd_nondeg,
    "hol": _cmd_hol,
    "hol-def": lambda mf, n, o: _cmd_hol(mf, n, o, deformation=True),
    "hol-k": _cmd_hol_k,
    "tangency": _cmd_tangency,
    "reconstruct": _cmd_reconstruct,
    "admissible": _cmd_admissible,
    "isolation": _cmd_isolation,
}


def _gallery(name: str, opts: Options):
    from . import gallery

    D = opts.trunc
    if name == "example-6-1":
        rep = gallery.build_example_61(D or 8, opts.kmax or 4)
        return rep.to_dict(), rep.ok
    if name == "example-6-2":
        kappa = (opts.kappa_range or (4,))[-1]
        rep = gallery.build_example_62(D or 10, kappa)
        # the report carries the computed evaluation span, whatever it is
        return rep.to_dict(), rep.ok
    if name.startswith("singular-"):
        model = name.split("-", 1)[1]
        inst = gallery.singular_locus_build(1, model, trunc=D or 8,
                                            tau0=gallery.MODEL_POINTS[model])
        out = inst.to_dict()
        out["name"] = name
        return out, inst.ok
    if name == "jet-prescription":
        from .series import Block, TruncatedSeries, VariableBlocks

        B = VariableBlocks((Block("s", 1, "t"), Block("t", 1, "t")))
        Dj = D or 6
        s = TruncatedSeries.variable(B, Dj, "s")
        q = TruncatedSeries.constant(B, Dj, 1) + s
        jp = gallery.jet_prescription(q, s, 2)
        return {"name": name, "q": q.to_text(), "delta": s.to_text(), **jp.to_dict()}, jp.verified
    raise InputError(f"unknown gallery item {name!r}; choose from {list(GALLERY)}")


def execute(command: str, manifest: Manifest | None, name: str, opts: Options = Options()):
    """Run one command; returns (report dict, exit code)."""
    echo = {"command": command, "target": name}
    defaults = vars(Options())
    flags = {k: v for k, v in vars(opts).items() if v != defaults[k]}
    if command == "gallery":
        result, ok = _gallery(name, opts)
    else:
        if command not in _DISPATCH:
            raise InputError(f"unknown command {command!r}")
        result, ok = _DISPATCH[command](manifest, name, opts)
    report = {"command": echo, "flags": {k: (list(v) if isinstance(v, tuple) else v)
                                          for k, v in sorted(flags.items())},
              "result": result, "verdict": "ok" if ok else "failed"}
    return report, EXIT_OK if ok else EXIT_VERDICT


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--trunc", type=int, help="truncation degree for every series")
    common.add_argument("--kmax", type=int, help="largest derivative order for nondegeneracy")
    common.add_argument("--kappa-range", help="jet orders LO:HI for deformation sweeps")
    common.add_argument("--degree-goal", type=int, help="target degree for reconstruction")
    common.add_argument("--x0-box", type=int, default=1, help="search box for the inversion point")
    common.add_argument("--order", type=int, help="Segre order, deformation order k, or tangency order r")
    common.add_argument("--projection", type=int, help="jet order of the projection in sweeps")
    common.add_argument("--relaxed", action="store_true", help="do not force fields to vanish at 0")
    common.add_argument("--method", choices=("linear", "slice"), default="linear",
                        help="reconstruction method")
    common.add_argument("--format", choices=("text", "structured"), default="text")
    p = argparse.ArgumentParser(prog="crdeform", description=__doc__.split("\n\n")[0],
                                parents=[common])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for c in COMMANDS:
        sp = sub.add_parser(c, parents=[common])
        sp.add_argument("manifest")
        sp.add_argument("name")
    sp = sub.add_parser("gallery", parents=[common])
    sp.add_argument("name", choices=GALLERY)
    return p


def main(argv=None) -> int:
    from .report import emit_report

    p = _parser()
    args = p.parse_args(argv)
    try:
        opts = Options(args.trunc, args.kmax,
                       _kappa_range(args.kappa_range) if args.kappa_range else None,
                       args.degree_goal, args.x0_box, args.order, args.projection,
                       args.relaxed, args.method)
        mf = None
        if args.command != "gallery":
            mf = parse_manifest(args.manifest, args.trunc)
        report, code = execute(args.command, mf, args.name, opts)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BudgetError as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERDICT
    except CRDeformError as exc:  # pragma: no cover - every error has a family
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    sys.stdout.buffer.write(emit_report(report, args.format))
    sys.stdout.flush()
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
