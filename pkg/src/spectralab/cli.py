"""Config-driven experiment runner.

Subcommands
-----------
solve     build the problem, solve for the smallest eigenpairs, write
          eigenvalues.csv and report.json
check     solve, then evaluate the inequality suite; writes bounds.csv and
          report.json, exit 3 on any failed check
converge  solve across a ladder of resolutions, report Richardson
          extrapolation and observed order in convergence.csv
presets   list the coefficient presets

Configuration is a flat JSON object; command-line flags override config
keys.  Exit codes: 0 success, 1 usage/config error, 2 solver
non-convergence, 3 bound-check failure.  SPECTRA_THREADS caps BLAS
parallelism (default 1); single-threaded runs byte-reproduce their output
files.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

__all__ = ["main", "ExperimentConfig", "cmd_solve", "cmd_check", "cmd_converge", "cmd_presets"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_CONVERGENCE = 2
EXIT_CHECK_FAILED = 3


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 on usage errors, per the CLI contract."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _configure_threads() -> None:
    """Apply the SPECTRA_THREADS cap before numpy spins up its BLAS."""
    threads = os.environ.get("SPECTRA_THREADS", "1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, threads)


@dataclass
class ExperimentConfig:
    domain: dict
    coefficients: dict
    resolution: object          # int, or strictly increasing list for converge
    k: int = 10
    checks: object = "all"      # "all" or list of check ids
    tol: float = 1e-8
    tol_rel: Optional[float] = None
    maxiter: int = 5000
    output_dir: str = "."
    inject: dict = field(default_factory=dict)  # {index: value} corruption hook

    @classmethod
    def load(cls, path: str, overrides: argparse.Namespace) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {"domain", "coefficients", "resolution", "k", "checks", "tol",
                 "tol_rel", "maxiter", "output_dir"}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for required in ("domain", "coefficients", "resolution"):
            if required not in raw:
                raise ValueError(f"config is missing the {required!r} key")
        cfg = cls(**raw)

        if getattr(overrides, "resolution", None) is not None:
            cfg.resolution = overrides.resolution
        for key in ("k", "tol", "tol_rel", "maxiter", "output_dir"):
            val = getattr(overrides, key, None)
            if val is not None:
                setattr(cfg, key, val)
        if getattr(overrides, "checks", None) is not None:
            cfg.checks = overrides.checks
        for index, value in getattr(overrides, "inject_lambda", []) or []:
            cfg.inject[index] = value

        if not isinstance(cfg.k, int) or cfg.k < 1:
            raise ValueError(f"k must be a positive integer, got {cfg.k!r}")
        if not cfg.tol > 0:
            raise ValueError(f"tol must be positive, got {cfg.tol}")
        return cfg

    def to_dict(self) -> dict:
        out = {
            "domain": self.domain,
            "coefficients": self.coefficients,
            "resolution": self.resolution,
            "k": self.k,
            "checks": self.checks,
            "tol": self.tol,
            "maxiter": self.maxiter,
            "output_dir": self.output_dir,
        }
        if self.tol_rel is not None:
            out["tol_rel"] = self.tol_rel
        if self.inject:
            out["injected_lambdas"] = {str(i): v for i, v in self.inject.items()}
        return out


def _build_domain(conf: dict):
    from . import domain as dom

    kinds = {
        "interval": (dom.Interval, ("a", "b")),
        "rectangle": (dom.Rectangle, ("ax", "bx", "ay", "by")),
        "annulus": (dom.Annulus, ("r_inner", "r_outer")),
        "circle_arc": (dom.CircleArc, ("radius", "arc_length")),
    }
    kind = conf.get("kind")
    if kind not in kinds:
        raise ValueError(f"unknown domain kind {kind!r}; valid kinds: {', '.join(sorted(kinds))}")
    cls, fields = kinds[kind]
    missing = [f for f in fields if f not in conf]
    if missing:
        raise ValueError(f"domain {kind!r} is missing parameters: {', '.join(missing)}")
    return cls(*(float(conf[f]) for f in fields))


def _build_coeffs(conf: dict, n: int):
    from . import coeffs as cf

    params = {key: val for key, val in conf.items() if key != "preset"}
    name = conf.get("preset")
    if name is None:
        raise ValueError("coefficients config needs a 'preset' key")
    return cf.preset(name, n, **params)


def _single_resolution(cfg: ExperimentConfig) -> int:
    if isinstance(cfg.resolution, list):
        raise ValueError("this command needs a single integer resolution, not a list")
    if not isinstance(cfg.resolution, int) or cfg.resolution < 2:
        raise ValueError(f"resolution must be an integer >= 2, got {cfg.resolution!r}")
    return cfg.resolution


def _solve_pipeline(cfg: ExperimentConfig, resolution: int):
    from . import assemble as asm
    from . import coeffs as cf
    from . import domain as dom
    from . import eigen as eig

    spec = _build_domain(cfg.domain)
    coeffs = _build_coeffs(cfg.coefficients, spec.n)
    mesh = dom.build_mesh(spec, resolution)
    dp = asm.assemble(mesh, coeffs)
    spectrum = eig.solve_smallest(dp, cfg.k, cfg.tol, maxiter=cfg.maxiter)
    imm = dom.immersion_data(spec, coeffs)
    constants = cf.compute_constants(spec, mesh, coeffs, imm)
    return spec, coeffs, mesh, dp, spectrum, imm, constants


def _spectrum_summary(spectrum) -> dict:
    return {
        "k": spectrum.k,
        "eigenvalues": [float(v) for v in spectrum.eigenvalues],
        "residuals": [float(r) for r in spectrum.residuals],
        "converged": [bool(c) for c in spectrum.converged],
        "all_converged": spectrum.all_converged,
    }


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _fmt(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def cmd_solve(cfg: ExperimentConfig) -> int:
    from . import eigen as eig

    resolution = _single_resolution(cfg)
    _, _, _, _, spectrum, _, constants = _solve_pipeline(cfg, resolution)

    os.makedirs(cfg.output_dir, exist_ok=True)
    with open(os.path.join(cfg.output_dir, "eigenvalues.csv"), "w", encoding="utf-8") as fh:
        eig.write_spectrum_csv(spectrum, fh)
    _write_json(
        os.path.join(cfg.output_dir, "report.json"),
        {
            "config": cfg.to_dict(),
            "constants": constants.to_dict(),
            "spectrum": _spectrum_summary(spectrum),
        },
    )
    print(f"solved {spectrum.k} eigenpairs; converged: {spectrum.all_converged}")
    return EXIT_OK if spectrum.all_converged else EXIT_NO_CONVERGENCE


def _requested_checks(cfg: ExperimentConfig):
    from . import bounds as bnd

    if cfg.checks in ("all", None):
        return None
    if not isinstance(cfg.checks, list):
        raise ValueError(f"checks must be 'all' or a list of ids, got {cfg.checks!r}")
    wanted = set()
    for cid in cfg.checks:
        matches = [known for known in bnd.CHECK_IDS if known == cid or known.startswith(cid)]
        if not matches:
            raise ValueError(f"unknown check id {cid!r}; valid ids: {', '.join(bnd.CHECK_IDS)}")
        wanted.update(matches)
    return wanted


def _accuracy_estimate(cfg: ExperimentConfig, resolution: int, fine_spectrum) -> tuple[list, Optional[int]]:
    """Relative eigenvalue accuracy from a two-level Richardson estimate.

    Solving one coarser level and assuming second-order convergence gives
    err(fine) ~= |coarse - fine| / 3 per eigenvalue.
    """
    import numpy as np

    coarse_res = max(2, resolution // 2)
    if coarse_res == resolution:
        return [], None
    _, _, _, _, coarse, _, _ = _solve_pipeline(cfg, coarse_res)
    if not coarse.all_converged:
        return [], None
    lam_f = fine_spectrum.eigenvalues
    lam_c = coarse.eigenvalues[: lam_f.size]
    rel = np.abs(lam_c - lam_f) / (3.0 * np.abs(lam_f))
    return [float(r) for r in rel], coarse_res


def cmd_check(cfg: ExperimentConfig) -> int:
    import numpy as np

    from . import bounds as bnd
    from . import domain as dom
    from . import eigen as eig

    if cfg.k < 2:
        raise ValueError("k must be at least 2 when inequality checks are requested")
    wanted = _requested_checks(cfg)

    resolution = _single_resolution(cfg)
    spec, coeffs, _, _, spectrum, imm, constants = _solve_pipeline(cfg, resolution)
    if not spectrum.all_converged:
        print("solver did not converge; no checks were run", file=sys.stderr)
        os.makedirs(cfg.output_dir, exist_ok=True)
        _write_json(
            os.path.join(cfg.output_dir, "report.json"),
            {
                "config": cfg.to_dict(),
                "constants": constants.to_dict(),
                "spectrum": _spectrum_summary(spectrum),
                "reports": [],
            },
        )
        return EXIT_NO_CONVERGENCE

    accuracy, coarse_res = _accuracy_estimate(cfg, resolution, spectrum)
    if cfg.tol_rel is not None:
        tol_rel = cfg.tol_rel
    elif accuracy:
        tol_rel = max(bnd.DEFAULT_TOL_REL, 3.0 * max(accuracy))
    else:
        tol_rel = bnd.DEFAULT_TOL_REL

    injected = {}
    if cfg.inject:
        lam = spectrum.eigenvalues.copy()
        for index, value in sorted(cfg.inject.items()):
            if not 1 <= index <= lam.size:
                raise ValueError(f"--inject-lambda index {index} out of range 1..{lam.size}")
            injected[str(index)] = {"old": float(lam[index - 1]), "new": float(value)}
            lam[index - 1] = value
        spectrum = eig.Spectrum.analytic(lam)

    binput = bnd.BoundInput(
        spectrum=spectrum,
        constants=constants,
        n=spec.n,
        volume=imm.volume,
        omega_n=imm.unit_ball_volume,
        flat=spec.flat,
        t_identity=coeffs.t_identity,
        gaussian=(coeffs.name == "gaussian_soliton"),
        inf_sq_radius=(spec.r_inner**2 if isinstance(spec, dom.Annulus) else None),
        tol_rel=tol_rel,
    )
    reports = bnd.run_all(binput, cfg.k - 1, checks=wanted)

    os.makedirs(cfg.output_dir, exist_ok=True)
    header = ["id", "k", "lhs", "rhs", "slack", "tightness", "pass", "status"]
    with open(os.path.join(cfg.output_dir, "bounds.csv"), "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for rep in reports:
            d = rep.to_dict()
            fh.write(",".join(_fmt(d[col]) for col in header) + "\n")
    payload = {
        "config": cfg.to_dict(),
        "constants": constants.to_dict(),
        "spectrum": _spectrum_summary(spectrum),
        "tol_rel": tol_rel,
        "accuracy": {
            "per_eigenvalue_relative": accuracy,
            "coarse_resolution": coarse_res,
        },
        "reports": [rep.to_dict() for rep in reports],
    }
    if injected:
        payload["injected"] = injected
    _write_json(os.path.join(cfg.output_dir, "report.json"), payload)

    bad = [r for r in reports if (r.status == "checked" and not r.passed) or r.status == "error"]
    counts = {
        "checked": sum(r.status == "checked" for r in reports),
        "failed": len(bad),
        "not-applicable": sum(r.status == "not-applicable" for r in reports),
    }
    print(
        f"{counts['checked']} checks evaluated, {counts['failed']} failed, "
        f"{counts['not-applicable']} not applicable (tol_rel = {tol_rel:.3g})"
    )
    if bad:
        print("failing checks:", file=sys.stderr)
        for rep in bad:
            print(
                f"  {rep.id} k={rep.k} lhs={_fmt(rep.lhs)} rhs={_fmt(rep.rhs)} "
                f"slack={_fmt(rep.slack)} status={rep.status}",
                file=sys.stderr,
            )
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _observed_order(h: list, lam: list) -> Optional[float]:
    """Order p from the last three levels: solves the two-ratio equation."""
    from scipy.optimize import brentq

    h1, h2, h3 = h[-3:]
    l1, l2, l3 = lam[-3:]
    d12, d23 = l1 - l2, l2 - l3
    if d23 == 0.0 or (d12 > 0.0) != (d23 > 0.0):
        return None
    ratio = d12 / d23

    def f(p):
        return (h1**p - h2**p) / (h2**p - h3**p) - ratio

    try:
        return brentq(f, 0.05, 10.0)
    except ValueError:
        return None


def cmd_converge(cfg: ExperimentConfig) -> int:
    import numpy as np

    if not isinstance(cfg.resolution, list) or len(cfg.resolution) < 3:
        raise ValueError("converge needs a list of at least 3 resolutions")
    resolutions = cfg.resolution
    if any(not isinstance(r, int) or r < 2 for r in resolutions):
        raise ValueError(f"resolutions must be integers >= 2, got {resolutions}")
    if any(b <= a for a, b in zip(resolutions, resolutions[1:])):
        raise ValueError(f"resolutions must be strictly increasing, got {resolutions}")

    from . import domain as dom

    levels = []
    all_converged = True
    for res in resolutions:
        spec, _, mesh, _, spectrum, _, _ = _solve_pipeline(cfg, res)
        all_converged &= spectrum.all_converged
        if mesh.dim == 1:
            h = float(np.max(mesh.element_volumes))
        else:
            p = mesh.vertices[mesh.elements]
            edges = np.linalg.norm(p - np.roll(p, 1, axis=1), axis=2)
            h = float(np.max(edges))
        levels.append((res, h, spectrum.eigenvalues.copy()))

    hs = [lvl[1] for lvl in levels]
    extrapolated, orders, monotone = [], [], []
    for i in range(cfg.k):
        lam = [float(lvl[2][i]) for lvl in levels]
        diffs = np.diff(lam)
        is_monotone = bool(np.all(diffs <= 0.0) or np.all(diffs >= 0.0))
        monotone.append(is_monotone)
        order = _observed_order(hs, lam) if is_monotone else None
        orders.append(order)
        if order is not None:
            h2, h3 = hs[-2], hs[-1]
            l2, l3 = lam[-2], lam[-1]
            extrapolated.append((h2**order * l3 - h3**order * l2) / (h2**order - h3**order))
        else:
            extrapolated.append(None)

    if not all(monotone):
        bad = [i + 1 for i, ok in enumerate(monotone) if not ok]
        print(
            f"warning: eigenvalues {bad} are not monotone across levels; "
            "their observed order is marked unreliable",
            file=sys.stderr,
        )

    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, "convergence.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("resolution,h,index,lambda,extrapolated,order\n")
        for level_idx, (res, h, lam) in enumerate(levels):
            final = level_idx == len(levels) - 1
            for i in range(cfg.k):
                ext = extrapolated[i] if final else None
                order = orders[i] if final else None
                fh.write(
                    f"{res},{_fmt(h)},{i + 1},{_fmt(float(lam[i]))},"
                    f"{_fmt(ext)},{_fmt(order)}\n"
                )
    shown = [f"{o:.3f}" if o is not None else "unreliable" for o in orders]
    print(f"observed orders: {', '.join(shown)}")
    return EXIT_OK if all_converged else EXIT_NO_CONVERGENCE


def cmd_presets(as_json: bool) -> int:
    from . import coeffs as cf

    catalog = cf.preset_catalog()
    if as_json:
        print(json.dumps(catalog, indent=2))
        return EXIT_OK
    print("available coefficient presets:")
    for name, schema in catalog.items():
        print(f"  {name}: {schema['doc']}")
        for pname, pdoc in schema["params"].items():
            print(f"      {pname}: {pdoc}")
    return EXIT_OK


def _parse_inject(text: str) -> tuple[int, float]:
    try:
        index, value = text.split("=", 1)
        return int(index), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected i=VALUE with integer i and float VALUE, got {text!r}"
        ) from None


def _parse_resolution(text: str):
    parts = text.split(",")
    if len(parts) == 1:
        return int(parts[0])
    return [int(p) for p in parts]


def _parse_checks(text: str):
    if text == "all":
        return "all"
    return [p for p in text.split(",") if p]


def _build_parser() -> _Parser:
    parser = _Parser(prog="spectralab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_common(p):
        p.add_argument("--config", required=True, help="path to the JSON experiment config")
        p.add_argument("--resolution", type=_parse_resolution,
                       help="mesh resolution (or comma list for converge)")
        p.add_argument("--k", type=int, help="number of eigenpairs")
        p.add_argument("--tol", type=float, help="solver residual tolerance")
        p.add_argument("--tol-rel", dest="tol_rel", type=float,
                       help="relative tolerance for bound checks")
        p.add_argument("--maxiter", type=int, help="solver iteration cap")
        p.add_argument("--checks", type=_parse_checks, help="'all' or comma list of check ids")
        p.add_argument("--output-dir", dest="output_dir", help="directory for output files")
        # test-only corruption hook: replaces the i-th eigenvalue before checks
        p.add_argument("--inject-lambda", dest="inject_lambda", action="append",
                       type=_parse_inject, help=argparse.SUPPRESS)

    for name in ("solve", "check", "converge"):
        add_common(sub.add_parser(name))
    p_presets = sub.add_parser("presets")
    p_presets.add_argument("--json", action="store_true", help="machine-readable catalog")
    return parser


def main(argv=None) -> int:
    _configure_threads()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.command == "presets":
        return cmd_presets(args.json)

    try:
        cfg = ExperimentConfig.load(args.config, args)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "check":
            return cmd_check(cfg)
        return cmd_converge(cfg)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
