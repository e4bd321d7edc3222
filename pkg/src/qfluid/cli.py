"""Command-line front end: ``qfluid simulate | sweep | compare | select | verify``.

Exit codes: 0 clean, 2 audit failure, 3 solver failure, 4 usage or input error.
Every command writes a machine-readable JSON summary into its output
directory, also on failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import discretization as disc
from . import energy as en
from . import galerkin_solver as gs
from . import limits, relative_energy as rel, semiflow
from .errors import QFluidError, ParseError, ValidationError
from .identities import identity_suite
from .physics import FluidParams
from .trajectory import SCHEMA_VERSION, config_hash, save_trajectory, write_json

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_AUDIT, EXIT_SOLVER, EXIT_USAGE = 0, 2, 3, 4
FAMILIES = ("constant", "sine-perturbation", "gaussian-bump")
SYSTEMS = (en.NAVIER_STOKES, en.EULER)
RESOLUTION_TAIL_TOL = 1e-8

log = logging.getLogger("qfluid")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ExperimentConfig:
    system: str
    domain: disc.Domain
    params: FluidParams
    solver: gs.SolverConfig
    initial: dict
    t_final: float
    snapshot_every: int = 1
    E0: float = None
    output: str = None
    reproducible: bool = True
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def hash(self):
        return config_hash(self.raw)

    def basis(self):
        return disc.galerkin_basis(self.domain, self.solver.n_modes)


def _initial_fields(domain, spec):
    fam = spec.get("family", "constant")
    rho_bar = float(spec.get("rho_bar", 1.0))
    x = domain.coords
    L = domain.lengths
    # periodic modes have period L, wall modes are cosines of period 2L
    kappa = [(2.0 if domain.periodic else 1.0) * np.pi * int(spec.get("wavenumber", 1)) / Li for Li in L]
    u = np.zeros((domain.dim,) + domain.grid_shape)
    if fam == "constant":
        rho = np.full(domain.grid_shape, rho_bar)
    elif fam == "sine-perturbation":
        amp = float(spec.get("amplitude", 0.1))
        rho = rho_bar + amp * np.cos(kappa[0] * x[0]) * np.ones(domain.grid_shape)
        vamp = float(spec.get("velocity_amplitude", 0.0))
        axis = domain.dim - 1
        u[0] = vamp * np.sin(kappa[axis] * x[axis])
    elif fam == "gaussian-bump":
        amp = float(spec.get("amplitude", 0.5))
        width = float(spec.get("width", 0.5))
        center = spec.get("center", [Li / 2 for Li in L])
        r2 = sum((xi - ci) ** 2 for xi, ci in zip(x, center))
        rho = rho_bar + amp * np.exp(-r2 / (2 * width ** 2))
    else:
        raise ValidationError([f"unknown initial family {fam!r}; expected one of {FAMILIES}"])
    rho = disc.ScalarField(domain, np.broadcast_to(rho, domain.grid_shape).copy())
    return rho, disc.VectorField(domain, u) * rho


def _family_problems(spec):
    fam = spec.get("family", "constant")
    if fam not in FAMILIES:
        return [f"initial.family must be one of {FAMILIES} (got {fam!r})"]
    rho_bar = float(spec.get("rho_bar", 1.0))
    probs = []
    if not rho_bar > 0:
        probs.append("initial.rho_bar must be > 0")
    if fam == "sine-perturbation" and not rho_bar - abs(float(spec.get("amplitude", 0.1))) > 0:
        probs.append("initial density rho_bar - |amplitude| must be > 0")
    if fam == "gaussian-bump":
        if not rho_bar + min(0.0, float(spec.get("amplitude", 0.5))) > 0:
            probs.append("initial density rho_bar + amplitude must be > 0")
        if not float(spec.get("width", 0.5)) > 0:
            probs.append("initial.width must be > 0")
    return probs


def _load_raw(path):
    ext = os.path.splitext(path)[1].lower()
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        if ext == ".toml":
            return tomllib.loads(data.decode())
        if ext == ".json":
            return json.loads(data)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    raise ParseError(f"{path}: unknown config extension {ext!r} (use .toml or .json)")


def build_config(raw):
    """Validate a config mapping; raises :class:`ValidationError` listing every problem."""
    problems = []
    known = {"system", "domain", "params", "solver", "initial", "run", "output", "reproducible"}
    problems += [f"unknown top-level key {k!r}" for k in sorted(set(raw) - known)]
    system = raw.get("system", en.NAVIER_STOKES)
    if system not in SYSTEMS:
        problems.append(f"system must be one of {SYSTEMS} (got {system!r})")

    dom = dict(raw.get("domain", {}))
    dim = int(dom.get("dim", 1))
    lengths = dom.get("lengths", [2 * np.pi] * dim)
    resolution = dom.get("resolution", [64] * dim)
    if np.isscalar(lengths):
        lengths = [lengths] * dim
    if np.isscalar(resolution):
        resolution = [resolution] * dim
    domain = None
    try:
        domain = disc.make_domain(dim, lengths, resolution, dom.get("bc", "periodic"))
    except (ValueError, QFluidError) as exc:
        problems.append(f"domain: {exc}")

    pr = dict(raw.get("params", {}))
    pr.setdefault("dim", dim)
    params = None
    gamma = pr.get("gamma", 2.0)
    if not gamma > 1:
        problems.append(f"params.gamma must be > 1 (got {gamma})")
    elif system == en.EULER and (pr.get("mu", 0.0) or pr.get("lambda_bulk", 0.0)):
        problems.append("euler system requires mu = 0 and lambda_bulk = 0")
    else:
        try:
            params = FluidParams(**pr)
        except (TypeError, ValueError) as exc:
            problems.append(f"params: {exc}")

    solver = None
    try:
        solver = gs.SolverConfig(**raw.get("solver", {}))
    except (TypeError, ValueError) as exc:
        problems.append(f"solver: {exc}")
    if solver is not None and domain is not None and solver.n_modes > min(domain.resolution) // 2:
        problems.append(f"solver.n_modes={solver.n_modes} exceeds resolution/2")

    initial = dict(raw.get("initial", {"family": "constant"}))
    problems += _family_problems(initial)
    run = dict(raw.get("run", {}))
    t_final = float(run.get("t_final", 0.1))
    if not t_final >= 0:
        problems.append("run.t_final must be >= 0")
    snapshot_every = int(run.get("snapshot_every", 1))
    if problems:
        raise ValidationError(problems)

    rho, J = _initial_fields(domain, initial)
    basis = disc.galerkin_basis(domain, solver.n_modes)
    start = gs.make_state(rho, J, basis, params, 0.0, system)
    E0 = initial.get("E0")
    if E0 is None:
        E0 = float(start.energy)
    elif float(E0) < start.energy * (1 - 1e-12):
        raise ValidationError([f"initial.E0={E0} is below the initial energy {start.energy}"])
    return ExperimentConfig(system, domain, params, solver, initial, t_final, snapshot_every,
                            float(E0), raw.get("output"), bool(raw.get("reproducible", True)), raw)


def parse_config(path):
    """Read and validate a TOML or JSON experiment file."""
    return build_config(_load_raw(path))


def initial_state(cfg):
    rho, J = _initial_fields(cfg.domain, cfg.initial)
    return gs.make_state(rho, J, cfg.basis(), cfg.params, 0.0, cfg.system)


def load_unchecked_init(directory):
    """Raw ``(rho, J)`` from snapshot files ``rho.snap`` and ``momentum.snap``."""
    rho = disc.read_snapshot(os.path.join(directory, "rho.snap"))
    mom_path = os.path.join(directory, "momentum.snap")
    if os.path.exists(mom_path):
        mom = disc.read_snapshot(mom_path)
    else:
        mom = disc.VectorField(rho.domain, np.zeros((rho.domain.dim,) + rho.domain.grid_shape))
    return rho, mom


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------
def _summary(out, payload, code):
    payload = dict(payload, schema_version=SCHEMA_VERSION, exit_code=code)
    payload.setdefault("config_hash", "")
    if out:
        os.makedirs(out, exist_ok=True)
        write_json(os.path.join(out, "summary.json"), payload)
    return code


def _write_text(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def cmd_simulate(cfg, out, raw_init=None):
    rho0, J0 = raw_init if raw_init is not None else _initial_fields(cfg.domain, cfg.initial)
    basis = disc.galerkin_basis(rho0.domain, cfg.solver.n_modes)
    init = gs.make_state(rho0, J0, basis, cfg.params, 0.0, cfg.system)
    traj = gs.run_simulation(init, cfg.solver, cfg.params, basis, cfg.t_final, cfg.snapshot_every,
                             cfg.system, e0=cfg.E0, label=cfg.hash)
    os.makedirs(out, exist_ok=True)
    save_trajectory(traj, os.path.join(out, "trajectory"))
    report = en.energy_report(traj, cfg.params, cfg.solver, system=cfg.system)
    _write_text(os.path.join(out, "energy.csv"), report.to_csv())
    audit = {"energy": report.summary()}
    ok = report.passed
    tail = disc.spectral_tail(init.rho)
    audit["resolution"] = {"spectral_tail": tail, "tol": RESOLUTION_TAIL_TOL,
                           "passed": tail <= RESOLUTION_TAIL_TOL}
    ok = ok and tail <= RESOLUTION_TAIL_TOL
    if cfg.solver.epsilon > 0:
        b = gs.check_density_bounds(traj, strict=False)
        audit["density_bounds"] = {"passed": b.passed, "div_sup": b.div_sup,
                                   "first_violation": b.first_violation}
        ok = ok and b.passed
    mass = np.array([disc.integrate(s.rho) for s in traj.states])
    audit["mass_drift"] = float(np.max(np.abs(mass - mass[0])) / mass[0])
    write_json(os.path.join(out, "energy.json"), dict(audit["energy"], schema_version=SCHEMA_VERSION,
                                                     config_hash=cfg.hash))
    code = EXIT_SOLVER if traj.error else (EXIT_OK if ok else EXIT_AUDIT)
    return _summary(out, {"command": "simulate", "config_hash": cfg.hash, "error": traj.error,
                          "t_reached": traj.horizon, "samples": len(traj), "audit": audit,
                          "projection_gap": gs.projection_gap(rho0, J0, basis)},
                    code)


def cmd_sweep(cfg, out, param, ladder, jobs=1):
    init = initial_state(cfg)
    args = dict(config=cfg.solver, t_final=cfg.t_final, snapshot_every=cfg.snapshot_every, jobs=jobs)
    if param == "delta":
        res = limits.viscosity_sweep(init, cfg.params, ladder, **args)
    elif param == "epsilon":
        res = limits.epsilon_sweep(init, cfg.params, ladder, **args)
    elif param == "modes":
        res = limits.mode_sweep(init, cfg.params, [int(v) for v in ladder], **args)
    else:
        raise ValidationError([f"unknown sweep parameter {param!r}"])
    res.save(out)
    failed_run = any(e for e in res.errors)
    failed_audit = any(a is None or not a["passed"] for a in res.audits)
    code = EXIT_SOLVER if failed_run else (EXIT_AUDIT if failed_audit else EXIT_OK)
    return _summary(out, {"command": "sweep", "config_hash": res.manifest()["config_hash"],
                          "parameter": param, "findings": res.findings, "errors": res.errors}, code)


def cmd_compare(cfg, out, ref_kind, rho_bar=None, velocity=None, atol=1e-10, L_max=1.0):
    init = initial_state(cfg)
    if rho_bar is None:
        rho_bar = disc.integrate(init.rho) / cfg.domain.volume
    ref = rel.manufactured_strong_solution(ref_kind, cfg.params, cfg.domain, rho_bar, velocity)
    traj = gs.run_simulation(init, cfg.solver, cfg.params, init.basis, cfg.t_final, cfg.snapshot_every,
                             cfg.system, e0=cfg.E0, label=cfg.hash)
    report = rel.weak_strong_compare(traj, ref, cfg.params, atol=atol, L_max=L_max)
    os.makedirs(out, exist_ok=True)
    _write_text(os.path.join(out, "relative_energy.csv"), report.to_csv())
    h = config_hash(cfg.raw, ref_kind, rho_bar, velocity)
    write_json(os.path.join(out, "relative_energy.json"),
               dict(report.summary(), schema_version=SCHEMA_VERSION, config_hash=h, reference=ref_kind))
    code = EXIT_SOLVER if traj.error else (EXIT_OK if report.passed else EXIT_AUDIT)
    return _summary(out, {"command": "compare", "config_hash": h, "error": traj.error,
                          "relative_energy": report.summary()}, code)


def cmd_select(manifest, out, functionals, rate=1.0, horizon=None):
    cands = semiflow.load_manifest(manifest)
    fs = [semiflow.SelectionFunctional(name, rate) for name in functionals]
    winner, report = semiflow.select_with_report(cands, fs, horizon)
    os.makedirs(out, exist_ok=True)
    payload = report.to_dict()
    payload["candidates"] = sorted(c.config_hash for c in cands)
    write_json(os.path.join(out, "selection.json"), payload)
    return _summary(out, {"command": "select", "config_hash": payload["config_hash"],
                          "winner": report.winner}, EXIT_OK)


def cmd_verify(out, suite="identities", resolution=256):
    if suite != "identities":
        raise ValidationError([f"unknown suite {suite!r}"])
    checks = identity_suite(resolution)
    rows = [c.to_dict() for c in checks]
    width = max(len(c.name) for c in checks)
    for c in checks:
        print(f"{c.name:<{width}}  {'PASS' if c.passed else 'FAIL'}  {c.value:.3e} (tol {c.tol:.0e})")
    ok = all(c.passed for c in checks)
    h = config_hash(suite, resolution)
    if out:
        os.makedirs(out, exist_ok=True)
        write_json(os.path.join(out, "verify.json"),
                   {"schema_version": SCHEMA_VERSION, "config_hash": h, "checks": rows, "passed": ok})
    return _summary(out, {"command": "verify", "config_hash": h, "passed": ok},
                    EXIT_OK if ok else EXIT_AUDIT)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------
class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc


def build_parser():
    p = _Parser(prog="qfluid", description="Quantum Navier-Stokes / Euler experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one simulation and audit it")
    s.add_argument("-c", "--config", required=True)
    s.add_argument("-o", "--out", required=True)
    s.add_argument("--unchecked-init", metavar="DIR",
                   help="start from rho.snap/momentum.snap in DIR instead of the named family")

    s = sub.add_parser("sweep", help="run a parameter ladder")
    s.add_argument("-c", "--config", required=True)
    s.add_argument("-o", "--out", required=True)
    s.add_argument("--param", required=True, choices=["epsilon", "delta", "modes"])
    s.add_argument("--ladder", required=True, type=_floats)
    s.add_argument("--jobs", type=int, default=1)

    s = sub.add_parser("compare", help="relative energy against a manufactured solution")
    s.add_argument("-c", "--config", required=True)
    s.add_argument("-o", "--out", required=True)
    s.add_argument("--ref", required=True, choices=list(rel.REFERENCE_KINDS))
    s.add_argument("--rho-bar", type=float)
    s.add_argument("--velocity", type=_floats)
    s.add_argument("--atol", type=float, default=1e-10)
    s.add_argument("--l-max", type=float, default=1.0)

    s = sub.add_parser("select", help="semiflow selection over a candidate manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("-o", "--out", required=True)
    s.add_argument("--functionals", default="energy",
                   type=lambda t: [v.strip() for v in t.split(",") if v.strip()])
    s.add_argument("--rate", type=float, default=1.0)
    s.add_argument("--horizon", type=float)

    s = sub.add_parser("verify", help="run the operator identity suite")
    s.add_argument("--suite", default="identities")
    s.add_argument("--resolution", type=int, default=256)
    s.add_argument("-o", "--out")
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"qfluid: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = getattr(args, "out", None)
    try:
        if args.command == "verify":
            return cmd_verify(out, args.suite, args.resolution)
        if args.command == "select":
            return cmd_select(args.manifest, out, args.functionals, args.rate, args.horizon)
        cfg = parse_config(args.config)
        if args.command == "simulate":
            raw_init = load_unchecked_init(args.unchecked_init) if args.unchecked_init else None
            return cmd_simulate(cfg, out, raw_init)
        if args.command == "sweep":
            return cmd_sweep(cfg, out, args.param, args.ladder, args.jobs)
        if args.command == "compare":
            return cmd_compare(cfg, out, args.ref, args.rho_bar, args.velocity, args.atol, args.l_max)
    except ValidationError as exc:
        print(f"qfluid: invalid input: {exc}", file=sys.stderr)
        return _summary(out, {"command": args.command, "error": str(exc),
                              "problems": list(exc.problems)}, EXIT_USAGE)
    except (ParseError, ValueError, QFluidError, OSError) as exc:
        kind = type(exc).__name__
        print(f"qfluid: {kind}: {exc}", file=sys.stderr)
        code = EXIT_SOLVER if isinstance(exc, gs.SolverError) else EXIT_USAGE
        return _summary(out, {"command": args.command, "error": f"{kind}: {exc}"}, code)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
