"""Command line front end: ``resonant-wave {q0,solve,sweep,cantor,eigcheck}``.

Exit codes: 0 success, 1 configuration parse error, 2 validation error,
3 numerical failure, 4 Diophantine rejection (``solve`` requires an
accepted parameter).  Outputs are deterministic for a fixed configuration
and seed; the timestamp lives only in ``metadata.json``.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .bifurcation import choose_sign, continue_branch, find_critical_point
from .cantor_measure import excluded_intervals_exact
from .config import load_config
from .errors import DiophantineRejection, ValidationError, WaveError
from .linearized_inverse import check_asymptotics, sl_spectrum, spectrum_csv
from .nash_moser import DiophantineParams
from .nonlinearity import eval_du_g, melnikov_M, time_average_coeff
from .q2_solver import Q2Config

log = logging.getLogger("resonant_wave")

__all__ = ["main", "cmd_q0", "cmd_solve", "cmd_sweep", "cmd_cantor", "cmd_eigcheck", "prepare"]


# --------------------------------------------------------------------------
# output helpers


def _clean(obj):
    """JSON-safe copy: numpy scalars -> python, non-finite floats -> strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dumps(obj):
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_atomic(path, text):
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _tag(delta):
    return f"{delta:.6e}"


# --------------------------------------------------------------------------
# shared pipeline pieces


def q2_config(cfg, N=None):
    return Q2Config(N=N or cfg.N or 1, sigma=cfg.sigma_q2, s=cfg.s, tol=cfg.q2_tol)


def prepare(cfg):
    """Sign choice and delta = 0 critical point; returns (nl, cp, note)."""
    nl, note = cfg.nl, ""
    if cfg.s_star_auto:
        s, note = choose_sign(nl.a_p, nl.p)
        nl = nl.with_sign(s)
    cp = find_critical_point(nl, cfg.L, cfg.J, q2_config(cfg), N="auto" if cfg.N is None else cfg.N)
    return nl, cp, note


def melnikov_at(nl, delta, u):
    a0, _ = time_average_coeff(eval_du_g(nl, delta, u))
    return melnikov_M(a0)


def _q0_report(nl, cp, note):
    return {
        "s_star": nl.s_star,
        "sign_note": note,
        "N": cp.N,
        "level": cp.level,
        "mountain_pass_level": cp.mp_level,
        "gradient_norm": cp.grad_norm,
        "nondegenerate_mod_S1": cp.nondegenerate_mod_S1,
        "hessian_eigenvalues": list(cp.hessian_eigs),
        "R": cp.R,
        "q2_contraction_ratio": cp.q2_ratio,
        "v1_amplitudes": [[a.real, a.imag] for a in cp.v1bar.amps],
        "critical_levels_found": cp.all_levels,
        "melnikov_M0": melnikov_at(nl, 0.0, cp.u0),
    }


# --------------------------------------------------------------------------
# commands


def cmd_q0(cfg, out):
    nl, cp, note = prepare(cfg)
    write_atomic(os.path.join(out, "u0.json"), _dumps(cp.u0.to_dict()))
    rows = ["index,eigenvalue"] + [f"{i},{float(e)!r}" for i, e in enumerate(cp.hessian_eigs)]
    write_atomic(os.path.join(out, "hessian.csv"), "\n".join(rows) + "\n")
    rep = _q0_report(nl, cp, note)
    write_atomic(os.path.join(out, "q0_report.json"), _dumps(rep))
    return rep


def _point_payload(pt):
    rep = pt.nm.report() if pt.nm is not None else None
    return {
        "delta": pt.delta,
        "omega": pt.omega,
        "eps": pt.eps,
        "accepted": pt.accepted,
        "rejected_stage": pt.rejected_stage,
        "residual": pt.residual,
        "q1_residual": pt.q1_residual,
        "q1_iterations": pt.q1_iterations,
        "v1_norm": pt.v1_norm,
        "w_norm": pt.w_norm,
        "amp_dev": pt.amp_dev,
        "terminated": pt.terminated,
        "nash_moser": rep,
    }


def cmd_solve(cfg, out, delta=None):
    delta = cfg.delta if delta is None else delta
    if delta is None:
        raise ValidationError("no delta given (use --delta or [solve] delta)")
    if not 0 <= delta <= cfg.delta0:
        raise ValidationError(f"delta = {delta} outside [0, delta0 = {cfg.delta0}]")
    nl, cp, _ = prepare(cfg)
    br = continue_branch(nl, cp, cfg.schedule(), [delta], q2_config(cfg, cp.N), tol=cfg.q1_tol)
    pt = br.points[-1]
    if pt.terminated:
        raise WaveError(f"continuation failed: {pt.terminated}")
    tag = _tag(delta)
    write_atomic(
        os.path.join(out, f"solution_{tag}.json"),
        _dumps({"delta": delta, "omega": pt.omega, "v1": pt.v1.to_dict(), "w": pt.w.to_dict(), "v2": pt.v2.to_dict()}),
    )
    rep = _point_payload(pt)
    rep["residual_ok"] = bool(pt.residual <= cfg.residual_tol)
    rep["residual_tol"] = cfg.residual_tol
    write_atomic(os.path.join(out, f"report_{tag}.json"), _dumps(rep))
    if not pt.accepted:
        raise DiophantineRejection(pt.rejected_stage)
    return rep


def _sweep_chunk(args):
    nl, cp, sched, deltas, q2cfg, tol = args
    br = continue_branch(nl, cp, sched, deltas, q2cfg, tol=tol)
    fields = [
        {"v1": pt.v1.to_dict(), "w": pt.w.to_dict(), "v2": pt.v2.to_dict()} for pt in br.points
    ]
    for pt in br.points:
        pt.nm_report = pt.nm.report() if pt.nm is not None else None
        pt.nm = None  # solver state is not needed downstream
    return br, fields


def cmd_sweep(cfg, out, workers=1):
    if not cfg.deltas:
        raise ValidationError("[sweep] deltas is empty")
    nl, cp, _ = prepare(cfg)
    sched, q2cfg = cfg.schedule(), q2_config(cfg, cp.N)
    deltas = sorted(cfg.deltas)
    if workers > 1:
        # contiguous chunks, each continued from delta = 0 on its own
        chunks = [list(c) for c in np.array_split(deltas, min(workers, len(deltas))) if len(c)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_sweep_chunk, [(nl, cp, sched, c, q2cfg, cfg.q1_tol) for c in chunks]))
    else:
        parts = [_sweep_chunk((nl, cp, sched, deltas, q2cfg, cfg.q1_tol))]
    branch = parts[0][0]
    fields = list(parts[0][1])
    for br, f in parts[1:]:
        branch.points.extend(br.points)
        fields.extend(f)
    for i, (pt, fl) in enumerate(zip(branch.points, fields)):
        payload = {
            k: v for k, v in _point_payload(pt).items() if k != "nash_moser"
        }
        payload["nash_moser"] = getattr(pt, "nm_report", None)
        payload["fields"] = fl
        write_atomic(os.path.join(out, "points", f"point_{i:03d}_{_tag(pt.delta)}.json"), _dumps(payload))
    write_atomic(os.path.join(out, "branch.csv"), branch.csv())
    write_atomic(os.path.join(out, "branch.json"), _dumps(branch.to_dict()))
    return branch


def _cantor_row(args):
    dp, p, s_star, M, eta, n, K_max, seed = args
    return excluded_intervals_exact(dp, p, s_star, M, eta, K_max, n_samples=n, seed=seed)


def cmd_cantor(cfg, out, workers=1):
    etas = list(cfg.etas)
    if any(b >= a for a, b in zip(etas[:-1], etas[1:])):
        raise ValidationError("[cantor] etas must be strictly decreasing")
    nl = cfg.nl
    M = cfg.M
    if M is None or cfg.s_star_auto:
        nl, cp, _ = prepare(cfg)
        if M is None:
            M = melnikov_at(nl, 0.0, cp.u0)
    dp = DiophantineParams(cfg.gamma, cfg.tau)
    jobs = [(dp, nl.p, nl.s_star, M, e, cfg.n_samples, cfg.K_max, cfg.seed) for e in etas]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            ests = list(ex.map(_cantor_row, jobs))
    else:
        ests = [_cantor_row(j) for j in jobs]
    rows = ["eta,density_interval,density_sampled,stderr,n_samples,K_max,excluded_measure"]
    for e in ests:
        rows.append(
            f"{e.eta!r},{e.density_interval!r},{e.density_sampled!r},{e.stderr!r},"
            f"{e.n_samples},{e.K_max},{e.eta * (1 - e.density_interval)!r}"
        )
        write_atomic(os.path.join(out, f"intervals_{_tag(e.eta)}.csv"), e.intervals_csv())
    write_atomic(os.path.join(out, "density.csv"), "\n".join(rows) + "\n")
    write_atomic(os.path.join(out, "cantor.json"), _dumps({"M": M, "rows": [e.summary() for e in ests]}))
    return ests


def cmd_eigcheck(cfg, out):
    a0, eps, J = cfg.eig_a0, cfg.eig_eps, cfg.eig_J
    M = melnikov_M(a0)
    omega = math.sqrt(1.0 + 2.0 * eps)
    spectra, reports = [], []
    rrows = ["k,j,r"]
    for k in cfg.eig_k:
        sp = sl_spectrum(eps, a0, k, J)
        rep = check_asymptotics(sp, eps, M, a0)
        spectra.append(sp)
        reports.append(
            {"k": k, "sup": rep.sup, "slope": rep.slope, "passed": rep.passed, "window": list(rep.window)}
        )
        rrows += [f"{k},{int(j)},{float(r)!r}" for j, r in zip(rep.j, rep.r)]
    write_atomic(os.path.join(out, "eigenvalues.csv"), spectrum_csv(spectra, omega))
    write_atomic(os.path.join(out, "asymptotics.csv"), "\n".join(rrows) + "\n")
    summary = {"eps": eps, "J": J, "M": M, "a0": a0.to_dict(), "reports": reports}
    write_atomic(os.path.join(out, "eigcheck.json"), _dumps(summary))
    return summary


# --------------------------------------------------------------------------
# entry point


def _parser():
    ap = argparse.ArgumentParser(prog="resonant-wave", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=["q0", "solve", "sweep", "cantor", "eigcheck"])
    ap.add_argument("--config", required=True, help="key-value configuration file")
    ap.add_argument("--delta", type=float, default=None, help="amplitude parameter for 'solve'")
    ap.add_argument("--out", default=None, help="output directory (overrides [output] dir)")
    ap.add_argument("--workers", type=int, default=1, help="worker processes for sweep/cantor")
    ap.add_argument("--seed", type=int, default=None, help="override [output] seed")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            from dataclasses import replace

            cfg = replace(cfg, seed=args.seed)
        out = args.out or cfg.out_dir
        os.makedirs(out, exist_ok=True)
        write_atomic(
            os.path.join(out, "metadata.json"),
            _dumps(
                {
                    "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
                    "version": __version__,
                    "command": args.command,
                    "argv": argv,
                    "numpy": np.__version__,
                    "config": cfg.to_dict(),
                }
            ),
        )
        if args.command == "q0":
            cmd_q0(cfg, out)
        elif args.command == "solve":
            rep = cmd_solve(cfg, out, args.delta)
            if not rep["residual_ok"]:
                print(f"warning: residual {rep['residual']:.3e} above tolerance", file=sys.stderr)
        elif args.command == "sweep":
            cmd_sweep(cfg, out, args.workers)
        elif args.command == "cantor":
            cmd_cantor(cfg, out, args.workers)
        else:
            cmd_eigcheck(cfg, out)
    except WaveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
