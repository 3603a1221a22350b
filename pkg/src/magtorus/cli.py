"""Config-driven experiment runner.

One JSON config per run describes the fields, the observation region, the
basis size, and per-command parameter blocks; each subcommand binds the
library modules into a batch experiment and writes CSV/JSON artifacts plus
a manifest (command, config digest, package versions, wall time) into the
output directory.  Files are written atomically (temp + rename) so partial
runs never leave truncated artifacts.

Exit codes: 0 success, 2 malformed config, 3 numerical precondition failed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .basis import ModeBasis, ModeVector
from .fields import (CircleFunction, ConstantFunctionError, FourierField2D,
                     TruncationRiskError, VectorPotential)
from .geometry import Direction, Region, gcc_check, mgcc_check
from .obs import (ObsReport, gramian, hum_control, observability_constant,
                  region_mass_matrix, resolvent_scan, sharp_obs_experiment)
from .quasimode import residual_scan, witness_experiment
from .spectral import (assemble, damped_operator, eigendecompose, propagate)
from .weyl import NormalFormSpec, normal_form_g2


class ConfigError(ValueError):
    """Malformed or incomplete experiment configuration."""


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

_TOP_KEYS = {"fields", "region", "basis", "mgcc", "simulate", "obs",
             "sharp_obs", "resolvent", "quasimode", "witness", "control",
             "damped", "normal_form"}


def _check_keys(block: dict, allowed: set, where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _load_config(path: str) -> dict:
    try:
        with open(path) as f:
            cfg = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(cfg, _TOP_KEYS, "config root")
    return cfg


def _field_from_records(records, what: str) -> FourierField2D:
    if not isinstance(records, list):
        raise ConfigError(f"{what} must be a list of coefficient records")
    try:
        return FourierField2D.from_json(records)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad coefficient table for {what}: {exc}") from exc


def _parse_fields(cfg: dict) -> tuple:
    block = cfg.get("fields")
    if block is None:
        raise ConfigError("config is missing the 'fields' block")
    _check_keys(block, {"A1", "A2", "V"}, "fields")
    A = VectorPotential(_field_from_records(block.get("A1", []), "fields.A1"),
                        _field_from_records(block.get("A2", []), "fields.A2"))
    V = _field_from_records(block.get("V", []), "fields.V")
    return A, V


def _parse_region(cfg: dict) -> Region:
    block = cfg.get("region")
    if block is None:
        raise ConfigError("config is missing the 'region' block")
    if block == "full":
        return Region.full_torus()
    _check_keys(block, {"rects"}, "region")
    try:
        return Region.from_json(block)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad region: {exc}") from exc


def _parse_basis(cfg: dict) -> ModeBasis:
    block = cfg.get("basis")
    if block is None:
        raise ConfigError("config is missing the 'basis' block")
    _check_keys(block, {"N"}, "basis")
    N = block.get("N")
    if not isinstance(N, int) or N < 1:
        raise ConfigError("basis.N must be a positive integer")
    return ModeBasis(N)


def _block(cfg: dict, name: str, allowed: set, required: set = frozenset()) -> dict:
    block = cfg.get(name)
    if block is None:
        raise ConfigError(f"config is missing the '{name}' block")
    _check_keys(block, allowed, name)
    missing = required - set(block)
    if missing:
        raise ConfigError(f"missing keys in {name}: {sorted(missing)}")
    return block


# ---------------------------------------------------------------------------
# Atomic artifact writing
# ---------------------------------------------------------------------------

def _atomic_write(path: str, writer) -> None:
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as f:
            writer(f)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: str, rows) -> None:
    rows = list(rows)

    def writer(f):
        w = csv.writer(f)
        for row in rows:
            w.writerow(row)
    _atomic_write(path, writer)


def _write_json(path: str, obj) -> None:
    _atomic_write(path, lambda f: json.dump(obj, f, indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _cmd_check_mgcc(cfg, out, args, warnings):
    A, _ = _parse_fields(cfg)
    region = _parse_region(cfg)
    block = cfg.get("mgcc", {})
    _check_keys(block, {"tol"}, "mgcc")
    report = mgcc_check(A, region, tol=float(block.get("tol", 1e-6)),
                        verify_beyond_cutoff=args.verify_beyond_cutoff)
    _write_json(os.path.join(out, "mgcc_report.json"), report.to_json())
    _write_csv(os.path.join(out, "mgcc_report.csv"), report.csv_rows())
    return {"verdict": report.verdict}


def _cmd_gcc(cfg, out, args, warnings):
    region = _parse_region(cfg)
    report = gcc_check(region)
    _write_json(os.path.join(out, "gcc_report.json"), {
        "holds": report.holds,
        "direction_cutoff": report.cutoff,
        "offenders": [{"p": d.p, "q": d.q, "gap_midpoint": s}
                      for d, s in report.offenders],
    })
    return {"holds": report.holds}


def _cmd_simulate(cfg, out, args, warnings):
    A, V = _parse_fields(cfg)
    basis = _parse_basis(cfg)
    region = _parse_region(cfg)
    block = _block(cfg, "simulate", {"T", "steps", "initial_mode"}, {"T", "steps"})
    T, steps = float(block["T"]), int(block["steps"])
    mode = tuple(block.get("initial_mode", (1, 0)))
    eig = eigendecompose(assemble(A, V, basis))
    state = ModeVector.single_mode(basis, mode)
    Mw = region_mass_matrix(region, basis)
    rows = [("t", "norm", "energy", "region_mass")]
    for t in np.linspace(0.0, T, steps + 1):
        u = propagate(eig, state, float(t))
        energy = float(np.vdot(u.coeffs, eig_apply(eig, u)).real)
        rmass = float(np.vdot(u.coeffs, Mw.entries @ u.coeffs).real)
        rows.append((f"{t:.10g}", f"{u.norm():.12g}", f"{energy:.12g}",
                     f"{rmass:.12g}"))
    _write_csv(os.path.join(out, "trajectory.csv"), rows)
    return {"steps": steps}


def eig_apply(eig, u):
    Q = eig.eigenvectors
    return Q @ (eig.eigenvalues * (Q.conj().T @ u.coeffs))


def _cmd_obs_constant(cfg, out, args, warnings):
    A, V = _parse_fields(cfg)
    basis = _parse_basis(cfg)
    region = _parse_region(cfg)
    block = _block(cfg, "obs", {"T"}, {"T"})
    T = float(block["T"])
    eig = eigendecompose(assemble(A, V, basis))
    Mw = region_mass_matrix(region, basis)
    report = observability_constant(gramian(eig, Mw, T), T)
    _write_csv(os.path.join(out, "obs_constant.csv"), [
        ("T", "lambda_min", "C_obs", "dim"),
        (f"{report.T:.10g}", f"{report.lambda_min:.10g}",
         f"{report.constant:.10g}", str(report.dim)),
    ])
    return {"constant": report.constant}


def _cmd_sharp_obs(cfg, out, args, warnings):
    A, V = _parse_fields(cfg)
    basis = _parse_basis(cfg)
    region = _parse_region(cfg)
    block = _block(cfg, "sharp_obs", {"h_list", "rho", "T"},
                   {"h_list", "rho", "T"})
    eig = eigendecompose(assemble(A, V, basis))
    Mw = region_mass_matrix(region, basis)
    rows = [("h", "T_eff", "lambda_min", "C_obs", "dim")]
    for h in block["h_list"]:
        r = sharp_obs_experiment(eig, Mw, float(h), float(block["rho"]),
                                 float(block["T"]))
        t_eff = r.T * np.sqrt(r.h)
        lam_min = r.rate * t_eff
        c_obs = float("inf") if lam_min <= 0 else 1.0 / lam_min
        rows.append((f"{r.h:.10g}", f"{t_eff:.10g}", f"{lam_min:.10g}",
                     f"{c_obs:.10g}", str(r.shell_dimension)))
    _write_csv(os.path.join(out, "sharp_obs.csv"), rows)
    return {"points": len(rows) - 1}


def _cmd_resolvent_scan(cfg, out, args, warnings):
    A, V = _parse_fields(cfg)
    basis = _parse_basis(cfg)
    region = _parse_region(cfg)
    block = _block(cfg, "resolvent", {"lambda_min", "lambda_max", "step"},
                   {"lambda_min", "lambda_max", "step"})
    lambdas = np.arange(float(block["lambda_min"]),
                        float(block["lambda_max"]) + 1e-9, float(block["step"]))
    op = assemble(A, V, basis)
    Mw = region_mass_matrix(region, basis)
    scan = resolvent_scan(op, Mw, lambdas)
    _write_csv(os.path.join(out, "resolvent_scan.csv"), scan.csv_rows())
    return {"max_constant": scan.max_constant()}


def _y_circle(f: FourierField2D) -> CircleFunction:
    if any(k1 != 0 and abs(v) > 1e-13 for (k1, _), v in f.coeffs.items()):
        raise ValueError("quasimode commands require y-only potentials")
    return CircleFunction.from_coeffs(
        2 * np.pi, {k2: v for (k1, k2), v in f.coeffs.items() if k1 == 0},
        is_real=f.is_real)


def _cmd_quasimode(cfg, out, args, warnings):
    A, V = _parse_fields(cfg)
    block = _block(cfg, "quasimode", {"hbar_list", "b", "y_star", "n_grid"},
                   {"hbar_list", "b"})
    scan = residual_scan(
        _y_circle(A.a1), _y_circle(A.a2),
        _y_circle(A.squared_norm_field() + V),
        y_star=float(block.get("y_star", 0.0)), b=float(block["b"]),
        hbar_list=[float(h) for h in block["hbar_list"]],
        n_grid=int(block.get("n_grid", 4096)))
    _write_csv(os.path.join(out, "quasimode_residuals.csv"), scan.csv_rows())
    _write_json(os.path.join(out, "wkb_solution.json"), {
        "slope": scan.slope,
        "solutions": [s.to_json() for s in scan.solutions],
    })
    return {"slope": scan.slope}


def _cmd_witness(cfg, out, args, warnings):
    A, V = _parse_fields(cfg)
    region = _parse_region(cfg)
    block = _block(cfg, "witness", {"k_list", "T", "b", "M"}, {"k_list", "T"})
    scan = witness_experiment(A, V, region,
                              [int(k) for k in block["k_list"]],
                              T=float(block["T"]),
                              b=float(block.get("b", 2.6)),
                              M=int(block.get("M", 28)))
    _write_csv(os.path.join(out, "witness_mass.csv"), scan.csv_rows())
    ratios = [r.mass_ratio for r in scan.records]
    return {"first": ratios[0], "final": ratios[-1]}


def _cmd_control(cfg, out, args, warnings):
    A, V = _parse_fields(cfg)
    basis = _parse_basis(cfg)
    region = _parse_region(cfg)
    block = _block(cfg, "control",
                   {"T", "reg", "source_mode", "target_mode", "samples"},
                   {"T"})
    T = float(block["T"])
    eig = eigendecompose(assemble(A, V, basis))
    Mw = region_mass_matrix(region, basis)
    psi0 = ModeVector.single_mode(basis, tuple(block.get("source_mode", (0, 0)))).coeffs
    psi1 = ModeVector.single_mode(basis, tuple(block.get("target_mode", (1, 0)))).coeffs
    result = hum_control(eig, Mw, T, psi0, psi1,
                         regularization=float(block.get("reg", 1e-10)))
    rows = [("t", "mode_index", "re", "im")]
    for t in np.linspace(0.0, T, int(block.get("samples", 50)) + 1):
        hvec = result.control_at(eig, Mw, float(t))
        for idx in np.nonzero(np.abs(hvec) > 1e-12)[0]:
            rows.append((f"{t:.10g}", str(int(idx)),
                         f"{hvec[idx].real:.12g}", f"{hvec[idx].imag:.12g}"))
    _write_csv(os.path.join(out, "control_trajectory.csv"), rows)
    _write_json(os.path.join(out, "control_report.json"), {
        "T": T, "regularization": result.regularization, "error": result.error,
    })
    return {"error": result.error}


def _cmd_damped(cfg, out, args, warnings):
    A, V = _parse_fields(cfg)
    basis = _parse_basis(cfg)
    block = _block(cfg, "damped", {"damping", "T", "steps"},
                   {"damping", "T", "steps"})
    damp = _field_from_records(block["damping"], "damped.damping")
    op = damped_operator(assemble(A, V, basis), damp)
    alpha = op.spectral_abscissa
    # decay trace of an initial low mode under the damped flow
    from scipy.linalg import expm
    T, steps = float(block["T"]), int(block["steps"])
    u = ModeVector.single_mode(basis, (1, 0)).coeffs
    step = expm(-1j * (T / steps) * op.entries)
    rows = [("t", "norm")]
    rows.append(("0", "1"))
    for i in range(1, steps + 1):
        u = step @ u
        rows.append((f"{i * T / steps:.10g}", f"{np.linalg.norm(u):.12g}"))
    _write_csv(os.path.join(out, "damped_trace.csv"), rows)
    _write_json(os.path.join(out, "damped_report.json"),
                {"spectral_abscissa": alpha})
    return {"spectral_abscissa": alpha}


def _cmd_normal_form(cfg, out, args, warnings):
    A, V = _parse_fields(cfg)
    block = _block(cfg, "normal_form", {"h_list", "alpha", "N", "states"},
                   {"h_list", "alpha", "N"})
    alpha, N = float(block["alpha"]), int(block["N"])
    rows = [("h", "alpha", "remainder_norm")]
    for h in block["h_list"]:
        h = float(h)
        basis = ModeBasis(N, center=(int(round(1 / h)), 0))
        spec = NormalFormSpec(h=h, alpha=alpha)
        _, report = normal_form_g2(A, spec, basis, V,
                                   n_states=int(block.get("states", 4)))
        rows.append((f"{h:.10g}", f"{alpha:.10g}",
                     f"{report.max_remainder:.10g}"))
    _write_csv(os.path.join(out, "normal_form_remainders.csv"), rows)
    return {"points": len(rows) - 1}


_COMMANDS = {
    "check-mgcc": _cmd_check_mgcc,
    "gcc": _cmd_gcc,
    "simulate": _cmd_simulate,
    "obs-constant": _cmd_obs_constant,
    "sharp-obs": _cmd_sharp_obs,
    "resolvent-scan": _cmd_resolvent_scan,
    "quasimode": _cmd_quasimode,
    "witness": _cmd_witness,
    "control": _cmd_control,
    "damped": _cmd_damped,
    "normal-form": _cmd_normal_form,
}


def _set_threads(n: int) -> None:
    if n <= 0:
        return
    try:
        from threadpoolctl import threadpool_limits
        threadpool_limits(limits=n)
    except ImportError:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="magtorus",
        description="Batch experiments for magnetic Schrödinger operators "
                    "on the 2-torus")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--threads", type=int, default=0,
                        help="BLAS thread cap (0 = library default)")
    parser.add_argument("--verify-beyond-cutoff", action="store_true",
                        help="audit directions past the constructive cutoff")
    args = parser.parse_args(argv)

    _set_threads(args.threads)
    warnings: list = []
    t0 = time.monotonic()
    try:
        cfg = _load_config(args.config)
        os.makedirs(args.out, exist_ok=True)
        summary = _COMMANDS[args.command](cfg, args.out, args, warnings)
    except ConfigError as exc:
        _report_error(args, "config", str(exc))
        return 2
    except (TruncationRiskError, ConstantFunctionError, ValueError) as exc:
        _report_error(args, "numerical-precondition", str(exc))
        return 3

    with open(args.config, "rb") as f:
        digest = hashlib.sha256(f.read()).hexdigest()
    manifest = {
        "command": args.command,
        "config_sha256": digest,
        "versions": {"magtorus": __version__, "numpy": np.__version__},
        "wall_time_s": time.monotonic() - t0,
        "warnings": warnings,
        "summary": summary,
    }
    _write_json(os.path.join(args.out, "manifest.json"), manifest)
    return 0


def _report_error(args, kind: str, message: str) -> None:
    report = {"error": kind, "message": message, "command": args.command}
    print(json.dumps(report), file=sys.stderr)
    try:
        os.makedirs(args.out, exist_ok=True)
        _write_json(os.path.join(args.out, "error.json"), report)
    except OSError:
        pass


if __name__ == "__main__":
    sys.exit(main())
