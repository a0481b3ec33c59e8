"""Command-line front end: ``specflow <subcommand> ...``.

Reports are canonical JSON on stdout (or ``--out``).  Failures are JSON
lines on stderr and exit status 1.
"""
from __future__ import annotations

import os

# Thread count must be fixed before numpy loads its BLAS.
_threads = os.environ.get("SPECFLOW_NUM_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[_var] = _threads

import argparse  # noqa: E402
import json  # noqa: E402
import sys  # noqa: E402
import time  # noqa: E402

import numpy as np  # noqa: E402

from . import cover as cov  # noqa: E402
from . import deformation as dfm  # noqa: E402
from . import family as fam  # noqa: E402
from . import frames as frm  # noqa: E402
from . import gerbe as grb  # noqa: E402
from . import io  # noqa: E402
from . import mesh as msh  # noqa: E402
from .errors import InconsistencyError, SpecflowError  # noqa: E402
from .spectral_flow import build_sf_cocycle, crossing_oracle, evaluate_on_loop  # noqa: E402

# Generic oracle levels: irrational-looking so they avoid the model bands.
DEFAULT_ORACLE_LEVELS = (0.513, 0.271, -1.337)
STAR_TAU = 0.3
BALL_RADIUS = 1.2
BALL_INNER = 0.8


class _Failed(Exception):
    """Checks ran but did not pass; carries the violation list."""

    def __init__(self, report, violations):
        super().__init__("checks failed")
        self.report = report
        self.violations = violations


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text):
    return [int(t) for t in text.split(",") if t.strip()]


def _key(simplex):
    return "-".join(str(int(i)) for i in simplex)


# -- shared options -------------------------------------------------------------

def _add_tolerances(p):
    g = p.add_argument_group("tolerances")
    g.add_argument("--gap-margin", type=float, default=cov.GAP_MARGIN)
    g.add_argument("--continuity-min", type=float, default=grb.CONTINUITY_MIN)
    g.add_argument("--angle-max", type=float, default=frm.ANGLE_MAX)
    g.add_argument("--phase-tol", type=float, default=grb.PHASE_TOL)
    g.add_argument("--residual-max", type=float, default=grb.RESIDUAL_MAX)
    g.add_argument("--berry-residual-max", type=float, default=grb.BERRY_RESIDUAL_MAX)
    g.add_argument("--unwrap-jump", type=float, default=grb.UNWRAP_JUMP)


def _tolerances(a):
    return {k: getattr(a, k) for k in ("gap_margin", "continuity_min", "angle_max", "phase_tol",
                                       "residual_max", "berry_residual_max", "unwrap_jump")}


def _add_cover(p):
    g = p.add_argument_group("cover")
    m = g.add_mutually_exclusive_group()
    m.add_argument("--cover", help="cover JSON file")
    m.add_argument("--auto-cover", action="store_true", help="grow a spectral-gap cover")
    m.add_argument("--star-cover", type=float, nargs="?", const=STAR_TAU, metavar="TAU",
                   help="star cover from coarse barycentric weights")
    g.add_argument("--levels", type=_floats, help="comma-separated levels for built covers")


def _add_ball(p):
    g = p.add_argument_group("ball")
    g.add_argument("--ball-center", type=int, help="centre vertex (default: marked point)")
    g.add_argument("--ball-radius", type=float)
    g.add_argument("--ball-inner", type=float)


def _add_loops(p):
    p.add_argument("--loop", action="append", type=_ints, default=None,
                   help="closed mesh vertex loop, comma separated (repeatable)")


def _load_family(path):
    return io.load_family(path)


def _make_cover(a, family):
    mesh = family.mesh
    if a.cover:
        c = io.load_cover(a.cover, family)
        bad = cov.validate_cover(c, family)
        if bad:
            raise _Failed({"command": "cover", "violations": bad}, bad)
        return c, {"source": "file"}
    star = a.star_cover
    if star is None and not a.auto_cover and mesh.dim >= 3 and "coarse_weights" in mesh.meta:
        star = STAR_TAU
    if star is not None:
        sets = cov.star_cover_sets(mesh, star)
        c = cov.build_cover(family, sets=sets, levels=a.levels, gap_margin=a.gap_margin)
        return c, {"source": "star", "tau": star}
    c = cov.build_cover(family, levels=a.levels, gap_margin=a.gap_margin)
    return c, {"source": "auto"}


def _cover_summary(c, info):
    return {**info, "n_sets": len(c), "levels": c.levels, "f_vector": list(c.f_vector()),
            "notes": list(c.notes)}


def _default_loops(a, mesh):
    if a.loop:
        return a.loop
    if mesh.dim == 1:
        return [list(range(mesh.n_vertices))]
    return []


def _ball(a, family, default_radius=None, default_inner=None):
    mesh = family.mesh
    center = a.ball_center
    if center is None:
        center = family.meta.get("center", fam.monopole_center(mesh))
    radius = a.ball_radius if a.ball_radius is not None else default_radius
    inner = a.ball_inner if a.ball_inner is not None else default_inner
    if radius is None:
        return None
    inner = radius if inner is None else inner
    ball = msh.BallRegion.geodesic(mesh, mesh.positions[int(center)], radius, inner)
    return ball, {"center": int(center), "radius": radius, "inner": inner,
                  "n_vertices": int(ball.vertices.size), "n_inner": int(ball.inner.size)}


# -- computations -----------------------------------------------------------------

def _sf_section(a, family, c, loops):
    cocycle = build_sf_cocycle(family, c)
    evals, oracle = [], []
    for loop in loops:
        evals.append(evaluate_on_loop(cocycle, cov.nerve_loop(c, loop)))
        oracle.append([crossing_oracle(family, loop, lv, a.gap_margin) for lv in a.oracle_levels])
    match = all(o == e for e, os in zip(evals, oracle) for o in os)
    return {"cocycle": {_key(s): v for s, v in sorted(cocycle.values.items())},
            "loop_evaluations": evals, "oracle_levels": list(a.oracle_levels),
            "oracle": oracle, "match": match}


def _gerbe_cocycle(a, family, c, rng=None, gauge=False):
    return grb.build_gerbe_cocycle(family, c, rng=rng, gauge=gauge,
                                   continuity_min=a.continuity_min, angle_max=a.angle_max,
                                   phase_tol=a.phase_tol, residual_max=a.residual_max,
                                   unwrap_jump=a.unwrap_jump)


def _berry(a, family, ball, bands):
    surf = ball.boundary()
    flux = grb.berry_flux(family, surf, tuple(bands))
    chern = grb.berry_chern_oracle(family, surf, tuple(bands), a.berry_residual_max)
    return {"bands": list(bands), "flux": float(flux), "chern": chern,
            "residual": float(abs(flux - chern))}


def _gerbe_section(a, family, c):
    if not c.nerve.get(3):
        raise SpecflowError("cover nerve has no 3-simplices; the gerbe class needs a 3-manifold")
    gc = _gerbe_cocycle(a, family, c)
    fclass = cov.pushforward_fundamental(c, family.mesh)
    out = {"g_phases": {_key(s): float(np.angle(v)) for s, v in sorted(gc.g.values.items())},
           "n": {_key(s): v for s, v in sorted(gc.n.values.items())},
           "fundamental_class": {_key(s): v for s, v in sorted(fclass.items())},
           "dd_pair": grb.dd_pair(gc, fclass),
           "certificates": gc.certificates}
    if getattr(a, "gauge_trials", 0):
        rng = np.random.default_rng(a.seed)
        dds = [grb.dd_pair(_gerbe_cocycle(a, family, c, rng=rng, gauge=True), fclass)
               for _ in range(a.gauge_trials)]
        out["gauge_trials"] = dds
        out["gauge_independent"] = all(d == out["dd_pair"] for d in dds)
    return out


def _monopole_like(family):
    return family.mesh.dim == 3 and "center" in family.meta


def _invariants(family, c, loops):
    out = {"sf_mesh_loops": [evaluate_on_loop(build_sf_cocycle(family, c), cov.nerve_loop(c, l))
                             for l in loops]}
    if c.nerve.get(3):
        out["dd_pair"] = grb.dd_pair(grb.build_gerbe_cocycle(family, c),
                                     cov.pushforward_fundamental(c, family.mesh))
    return out


# -- subcommands -----------------------------------------------------------------

def _mesh_for(a, model):
    kind = a.mesh or ("s3" if model in ("monopole", "monopole-pair") else "circle")
    if kind == "circle":
        return msh.circle_mesh(a.vertices)
    if kind == "s3":
        return msh.s3_mesh(a.refine)
    if kind == "torus3":
        return msh.torus3_mesh(m=a.refine)
    if kind == "sphere2":
        return msh.sphere2_mesh(a.refine)
    raise SpecflowError("unknown mesh", mesh=kind)


def cmd_generate(a):
    mesh = _mesh_for(a, a.model)
    window = tuple(a.window)
    if a.model == "winding":
        f = fam.winding_family(mesh, a.param, window)
    elif a.model == "monopole":
        f = fam.monopole_family(mesh, a.param, window=window, collapse_radius=a.collapse_radius)
    elif a.model == "monopole-pair":
        f = fam.direct_sum(
            fam.monopole_family(mesh, a.param, window=window, collapse_radius=a.collapse_radius),
            fam.monopole_family(mesh, -a.param, window=window, collapse_radius=a.collapse_radius))
    elif a.model == "ladder":
        f = fam.ladder_family(mesh, window, multiplicity=max(1, a.param))
    else:
        f = fam.constant_family(mesh, a.levels or [-1.0, 1.0], window, a.offset)
    if a.pullback_degree is not None:
        if mesh.dim != 1:
            raise SpecflowError("circle pullback needs a circle family")
        n = mesh.n_vertices
        f = fam.pullback(f, msh.circle_mesh(a.pullback_degree * n),
                         fam.circle_cover_map(n, a.pullback_degree))
    if a.negate:
        f = fam.negate(f)
    return f, None


def cmd_validate_cover(a):
    family = _load_family(a.family)
    if a.cover:
        c = io.load_cover(a.cover, family)
        info = {"source": "file"}
    else:
        c, info = _make_cover(a, family)
    bad = cov.validate_cover(c, family)
    report = {"command": "validate-cover", "family": io.fingerprint(io.family_to_dict(family)),
              "cover": _cover_summary(c, info), "valid": not bad, "violations": bad}
    if a.write:
        io.save_cover(c, a.write)
    if bad:
        raise _Failed(report, bad)
    return report


def cmd_sf(a):
    family = _load_family(a.family)
    c, info = _make_cover(a, family)
    loops = _default_loops(a, family.mesh)
    report = {"command": "sf", "family": io.fingerprint(io.family_to_dict(family)),
              "cover": _cover_summary(c, info), "loops": loops, **_sf_section(a, family, c, loops)}
    if not report["match"]:
        raise _Failed(report, [{"violation": "loop evaluation differs from crossing oracle"}])
    return report


def cmd_gerbe(a):
    family = _load_family(a.family)
    c, info = _make_cover(a, family)
    report = {"command": "gerbe", "family": io.fingerprint(io.family_to_dict(family)),
              "cover": _cover_summary(c, info), **_gerbe_section(a, family, c)}
    radius = family.meta.get("ball_radius") if _monopole_like(family) else None
    ball = _ball(a, family, radius)
    violations = []
    if ball is not None:
        region, report["ball"] = ball
        report["oracle"] = {"berry": _berry(a, family, region, a.oracle_bands)}
        report["match"] = report["oracle"]["berry"]["chern"] == report["dd_pair"]
        if not report["match"]:
            violations.append({"violation": "dd_pair differs from Berry oracle"})
    if report.get("gauge_independent") is False:
        violations.append({"violation": "dd_pair depends on the gauge"})
    if violations:
        raise _Failed(report, violations)
    return report


def _apply_move(f, move, region, a):
    name = move["move"]
    if name == "flatten":
        return dfm.flatten(f, move["bands"], region, move.get("value", 0.0)), {}
    if name == "extend_splitting":
        g = dfm.extend_splitting(f, move["bands"], region, a.continuity_min, a.angle_max)
        smin, amax = dfm.frame_certificate(g, move["bands"], region.vertices)
        return g, {"frame_certificate": {"sigma_min": smin, "angle_max": amax}}
    if name == "scale":
        g = dfm.scale(f, move["bands"], move.get("eps"), region, move.get("extend", True))
        return g, {}
    if name == "sep1":
        g, steps = dfm.sep1_pipeline(f, region, tuple(move.get("lower", (0, 1))),
                                     tuple(move.get("upper", (2, 3))), move.get("value", 0.0),
                                     move.get("eps"))
        return g, {"steps": steps}
    raise SpecflowError("unknown move", move=name)


def cmd_deform(a):
    family = _load_family(a.family)
    with open(a.script, encoding="utf-8") as fh:
        script = json.load(fh)
    region, ball_info = _ball(a, family, BALL_RADIUS, BALL_INNER)
    problems = region.check()
    if problems:
        raise SpecflowError("ball region is not a ball", problems=problems)
    base = None
    loops = a.loop or []
    if not a.no_invariants:
        base, _ = _make_cover(a, family)
    moves = []
    f = family
    ref = _invariants(f, base, loops) if base is not None else None
    for move in script:
        f, cert = _apply_move(f, move, region, a)
        entry = {"move": move, **cert}
        if "lower" in move or "upper" in move or move["move"] == "sep1":
            lower, upper = move.get("lower", (0, 1)), move.get("upper", (2, 3))
            entry["separated"] = dfm.is_separated(f, tuple(lower), tuple(upper))
        if base is not None:
            c = cov.build_cover(f, sets=base.sets, levels=base.levels,
                                gap_margin=base.gap_margin, check_contractible=False)
            entry["invariants"] = _invariants(f, c, loops)
            if entry["invariants"] != ref:
                raise InconsistencyError("move changed an invariant", move=move["move"],
                                         before=ref, after=entry["invariants"])
        moves.append(entry)
    report = {"command": "deform", "family": io.fingerprint(io.family_to_dict(family)),
              "result": io.fingerprint(io.family_to_dict(f)), "ball": ball_info,
              "invariants": ref, "moves": moves}
    return report, f


def cmd_standard_form(a):
    family = _load_family(a.family)
    c = None
    if family.mesh.dim == 1 or a.cover or a.auto_cover or a.star_cover is not None \
            or "coarse_weights" in family.mesh.meta:
        c, _ = _make_cover(a, family)
    ball = _ball(a, family, BALL_RADIUS if _monopole_like(family) else None, BALL_INNER)
    region = ball[0] if ball else None
    loops = _default_loops(a, family.mesh)
    rep = dfm.standard_form_decompose(family, c, region, loops, tuple(a.oracle_levels))
    rep["dichotomy"] = _dichotomy(family)
    return {"command": "standard-form", "family": io.fingerprint(io.family_to_dict(family)),
            "ball": ball[1] if ball else None, "loops": loops, **rep}


def _dichotomy(family):
    d = dfm.dichotomy(family)
    return {"case": d["case"], "trivial": d["trivial"], "locus": d["locus"].as_dict()}


def cmd_verify(a):
    family = _load_family(a.family)
    with open(a.expected, encoding="utf-8") as fh:
        expected = json.load(fh)
    c, info = _make_cover(a, family)
    loops = _default_loops(a, family.mesh)
    report = {"command": "verify", "family": io.fingerprint(io.family_to_dict(family)),
              "cover": _cover_summary(c, info), "loops": loops, "expected": expected}
    checks = []
    sf = _sf_section(a, family, c, loops)
    report["sf"] = sf
    checks.append({"check": "sf matches crossing oracle", "passed": sf["match"]})
    if "sf" in expected:
        want = expected["sf"]
        want = [want] * len(loops) if isinstance(want, int) else list(want)
        checks.append({"check": "sf loop evaluations", "passed": sf["loop_evaluations"] == want,
                       "expected": want, "actual": sf["loop_evaluations"]})
    if c.nerve.get(3):
        gs = _gerbe_section(a, family, c)
        report["gerbe"] = gs
        if "dd" in expected:
            checks.append({"check": "dd_pair", "passed": gs["dd_pair"] == expected["dd"],
                           "expected": expected["dd"], "actual": gs["dd_pair"]})
        if _monopole_like(family):
            region, report["ball"] = _ball(a, family, family.meta.get("ball_radius", 1.0))
            b = _berry(a, family, region, a.oracle_bands)
            report["berry"] = b
            checks.append({"check": "dd_pair matches Berry oracle",
                           "passed": b["chern"] == gs["dd_pair"]})
    elif "dd" in expected:
        checks.append({"check": "dd_pair", "passed": expected["dd"] == 0, "expected": expected["dd"],
                       "actual": 0, "note": "no 3-simplices in the nerve"})
    report["checks"] = checks
    report["passed"] = all(ch["passed"] for ch in checks)
    if not report["passed"]:
        raise _Failed(report, [ch for ch in checks if not ch["passed"]])
    return report


# -- parser ------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="specflow", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the main output here instead of stdout")
    common.add_argument("--no-timings", action="store_true", help="omit the timings key")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a model family", parents=[common])
    g.add_argument("--model", required=True,
                   choices=["winding", "monopole", "monopole-pair", "ladder", "constant"])
    g.add_argument("--param", type=int, default=1)
    g.add_argument("--mesh", choices=["circle", "s3", "torus3", "sphere2"])
    g.add_argument("--vertices", type=int, default=64, help="circle vertices")
    g.add_argument("--refine", type=int, default=12, help="subdivision of the coarse mesh")
    g.add_argument("--window", type=_floats, default=[-3.5, 3.5])
    g.add_argument("--levels", type=_floats, help="band values of a constant family")
    g.add_argument("--offset", type=int, default=0, help="index of the lowest constant band")
    g.add_argument("--collapse-radius", type=float)
    g.add_argument("--pullback-degree", type=int)
    g.add_argument("--negate", action="store_true")

    for name, help_ in (("validate-cover", "check a cover against a family"),
                        ("sf", "spectral-flow cocycle and loop evaluations"),
                        ("gerbe", "gerbe cocycle and its pairing with the fundamental class"),
                        ("deform", "apply a JSON move script"),
                        ("standard-form", "(sf, k) decomposition report"),
                        ("verify", "full invariant suite against expected values")):
        s = sub.add_parser(name, help=help_, parents=[common])
        s.add_argument("family")
        _add_cover(s)
        _add_tolerances(s)
        _add_loops(s)
        s.add_argument("--oracle-levels", type=_floats, default=list(DEFAULT_ORACLE_LEVELS))
        s.add_argument("--oracle-bands", type=_ints, default=[0])
        _add_ball(s)
        if name == "validate-cover":
            s.add_argument("--write", help="also save the cover here")
        if name == "gerbe":
            s.add_argument("--gauge-trials", type=int, default=0)
            s.add_argument("--seed", type=int, default=0)
        if name == "deform":
            s.add_argument("script", help="JSON list of moves")
            s.add_argument("--family-out", required=True)
            s.add_argument("--no-invariants", action="store_true")
        if name == "verify":
            s.add_argument("expected", help="JSON {sf: int | [int], dd: int}")
    return p


_COMMANDS = {"validate-cover": cmd_validate_cover, "sf": cmd_sf, "gerbe": cmd_gerbe,
             "standard-form": cmd_standard_form, "verify": cmd_verify}


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _error_line(obj):
    sys.stderr.write(json.dumps(obj, sort_keys=True, default=str) + "\n")


def main(argv=None):
    a = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        if a.command == "generate":
            family, _ = cmd_generate(a)
            _emit(io.dumps(io.family_to_dict(family)), a.out)
            return 0
        if a.command == "deform":
            report, family = cmd_deform(a)
            io.save_family(family, a.family_out)
        else:
            report = _COMMANDS[a.command](a)
    except _Failed as failed:
        for v in failed.violations:
            _error_line(v)
        report = failed.report
        report.setdefault("tolerances", _tolerances(a))
        _emit(io.dumps(report), a.out)
        return 1
    except SpecflowError as err:
        _error_line(err.as_dict())
        return 1
    report["tolerances"] = _tolerances(a)
    if not a.no_timings:
        report["timings"] = {"total_s": time.perf_counter() - t0}
    _emit(io.dumps(report), a.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
