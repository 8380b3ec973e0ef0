"""Reproducible experiment runner.

Each command loads a JSON config, executes one pipeline, writes its
artifacts into the output directory, and appends every file to a MANIFEST
with a sha-256 content hash.  Artifacts carry no timestamps and all floats
are written in shortest round-trip form, so identical configs produce
identical hashes.

Exit codes: 0 all gates pass, 1 a numerical gate failed, 2 usage or config
error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import assembly as asm
from . import geometry as geo
from . import mesh as msh
from . import multiplier as mult
from . import observability as obs
from . import shape as shp
from . import spectral as sp
from . import wave as wv

COMMANDS = ("certify", "spectrum", "wave", "identities", "sweep", "observe",
            "all")

_DEFAULT_TOLERANCES = {
    "sign_tol": 1e-9,
    "hardy_tol": 1e-8,
    "poincare_tol": 1e-8,
    "eig_residual_max": 1e-9,
    "energy_drift_max": 1e-10,
    "pointwise_ratio_tol": 1e-11,
    "pointwise_identity_tol": 1e-10,
    "identity_rel_max": 0.02,
    "identity_floor": 1e-6,
    "trace_frac_max": 0.05,
    "obs_slack": 0.15,
}


class ConfigError(Exception):
    """CONFIG_INVALID: malformed or inconsistent experiment description."""


@dataclass
class ExperimentConfig:
    domain: str = "pinched_annulus"
    alpha: float = 0.5
    epsilons: list = field(default_factory=lambda: [0.04, 0.02, 0.01])
    h_max: float = 0.05
    grading: float = 1.0
    m: int = 64
    T: float = 8.0
    T_grid: list = field(default_factory=lambda: [4.0, 8.0])
    initial: list = field(default_factory=lambda: [
        obs.InitialBump((0.0, 1.5), 0.4)])
    outputs: str = "out"
    seeds: list = field(default_factory=lambda: [20240917])
    samples: int = 10_000
    tolerances: dict = field(default_factory=dict)
    obs_epsilon: float | None = None

    def tol(self, name: str) -> float:
        if name in self.tolerances:
            return float(self.tolerances[name])
        return _DEFAULT_TOLERANCES[name]

    def observe_epsilon(self) -> float:
        if self.obs_epsilon is not None:
            return self.obs_epsilon
        return self.epsilons[1] if len(self.epsilons) > 1 else self.epsilons[0]

    def validate(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha = {self.alpha} outside (0, 1)")
        if self.h_max <= 0:
            raise ConfigError("h_max must be positive")
        if not 0.0 <= self.grading <= 2.0:
            raise ConfigError("grading must lie in [0, 2]")
        if self.m < 1:
            raise ConfigError("m must be a positive integer")
        if self.T <= 0 or any(t <= 0 for t in self.T_grid):
            raise ConfigError("time horizons must be positive")
        if not self.epsilons:
            raise ConfigError("epsilons must be nonempty")
        if any(e <= 0 for e in self.epsilons):
            raise ConfigError("epsilons must be positive")
        for k, v in self.tolerances.items():
            if k not in _DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance {k!r}")
            if float(v) < 0:
                raise ConfigError(f"tolerance {k} must be nonnegative")
        try:
            geo.load_domain(self.domain)
        except geo.GeometryError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {"domain", "alpha", "epsilons", "h_max", "grading", "m", "T",
                 "T_grid", "initial", "outputs", "seeds", "samples",
                 "tolerances", "obs_epsilon"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        initial = [
            obs.InitialBump(tuple(b["center"]), float(b["radius"]),
                            float(b.get("amplitude", 1.0)),
                            b.get("field", "position"))
            for b in data.get("initial", [{"center": [0.0, 1.5],
                                           "radius": 0.4}])
        ]
        cfg = cls(
            domain=data.get("domain", "pinched_annulus"),
            alpha=float(data.get("alpha", 0.5)),
            epsilons=[float(e) for e in data.get("epsilons",
                                                 [0.04, 0.02, 0.01])],
            h_max=float(data.get("h_max", 0.05)),
            grading=float(data.get("grading", 1.0)),
            m=int(data.get("m", 64)),
            T=float(data.get("T", 8.0)),
            T_grid=[float(t) for t in data.get("T_grid", [4.0, 8.0])],
            initial=initial,
            outputs=data.get("outputs", "out"),
            seeds=[int(s) for s in data.get("seeds", [20240917])],
            samples=int(data.get("samples", 10_000)),
            tolerances=dict(data.get("tolerances", {})),
            obs_epsilon=(None if data.get("obs_epsilon") is None
                         else float(data["obs_epsilon"])),
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)


class Workspace:
    """Shared caches so `all` equals the six commands run separately."""

    def __init__(self, cfg: ExperimentConfig, out_dir: Path):
        self.cfg = cfg
        self.out = out_dir
        self.domain = geo.load_domain(cfg.domain)
        self.artifacts: list[Path] = []
        self._meshes: dict = {}
        self._ops: dict = {}
        self._bases: dict = {}
        self._ladder = None
        self.obs_cache: dict = {}

    def mesh(self, eps: float | None) -> msh.TriMesh:
        key = eps
        if key not in self._meshes:
            spec = self.domain if eps is None else geo.cut_domain(self.domain,
                                                                  eps)
            self._meshes[key] = msh.triangulate(
                spec, h_max=self.cfg.h_max, grading=self.cfg.grading)
        return self._meshes[key]

    def operator(self, eps: float | None) -> asm.WeightedOperator:
        if eps not in self._ops:
            self._ops[eps] = asm.assemble(self.mesh(eps), self.cfg.alpha)
        return self._ops[eps]

    def basis(self, eps: float | None) -> sp.ModalBasis:
        if eps not in self._bases:
            self._bases[eps] = sp.solve_eigs(self.operator(eps), self.cfg.m)
        return self._bases[eps]

    def ladder(self) -> msh.MeshLadder:
        if self._ladder is None:
            self._ladder = msh.build_epsilon_ladder(
                self.domain, self.cfg.epsilons, self.cfg.h_max,
                self.cfg.grading)
        return self._ladder

    def emit(self, name: str, writer) -> Path:
        path = self.out / name
        writer(path)
        self.artifacts.append(path)
        return path

    def emit_json(self, name: str, payload: dict) -> Path:
        return self.emit(name, lambda p: Path(p).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n",
            encoding="utf-8"))


def cmd_certify(ws: Workspace) -> bool:
    cfg = ws.cfg
    cert = geo.certify_domain(ws.domain, samples=max(cfg.samples, 1000),
                              sign_tol=cfg.tol("sign_tol"))
    ws.emit_json("certification.json", cert.to_dict())
    return cert.passed


def cmd_spectrum(ws: Workspace) -> bool:
    cfg = ws.cfg
    basis = ws.basis(None)
    ws.emit("eigs.csv", lambda p: sp.write_eigen_report(basis, p))
    bound = sp.lambda1_lower_bound(cfg.alpha, ws.domain.M)
    ok = bool(basis.eigenvalues[0] >= bound)
    ok &= bool(np.max(basis.residuals) <= cfg.tol("eig_residual_max"))
    op = ws.operator(None)
    gram = basis.eigenvectors.T @ (op.mass_interior() @ basis.eigenvectors)
    ok &= bool(np.max(np.abs(gram - np.eye(basis.m))) <= 1e-10)
    ws.emit_json("spectrum_gates.json", {
        "lambda1": float(basis.eigenvalues[0]),
        "lambda1_lower_bound": bound,
        "max_residual": float(np.max(basis.residuals)),
        "pass": ok,
    })
    return ok


def _modal_data(ws: Workspace, eps: float | None):
    cfg = ws.cfg
    spec = ws.domain if eps is None else geo.cut_domain(ws.domain, eps)
    return obs.modal_data_from_bumps(cfg.initial, ws.mesh(eps),
                                     ws.operator(eps), ws.basis(eps), spec)


def cmd_wave(ws: Workspace) -> bool:
    cfg = ws.cfg
    y0, y1 = _modal_data(ws, None)
    traj = wv.solve_modal(wv.WaveProblem(ws.basis(None), y0, y1, T=cfg.T))
    ws.emit("trajectory.csv", lambda p: wv.write_energy_series(traj, p))
    e0 = traj.energy[0]
    drift = float(np.max(np.abs(traj.energy - e0)) / e0) if e0 > 0 else 0.0
    ok = drift <= cfg.tol("energy_drift_max")
    ws.emit_json("wave_gates.json", {"E0": float(e0), "max_drift": drift,
                                     "pass": bool(ok)})
    return ok


def cmd_identities(ws: Workspace) -> bool:
    cfg = ws.cfg
    rng = np.random.default_rng(cfg.seeds[0])
    worst_ratio = 0.0
    worst_identity = 0.0
    n = 0
    while n < 1000:
        x = rng.uniform(-2.0, 2.0, 2)
        if np.linalg.norm(x) < 1e-2:
            continue
        n += 1
        X = rng.standard_normal(2)
        alpha = rng.uniform(0.05, 0.95)
        worst_ratio = max(worst_ratio, abs(
            mult.radial_field_dilation_ratio(x, X, alpha)
            - 0.5 * (2.0 - alpha)))
        a_mat = rng.standard_normal((2, 2))
        a_mat = a_mat + a_mat.T
        b_vec = rng.standard_normal(2)
        j_mat = rng.standard_normal((2, 2))
        h0 = rng.standard_normal(2)

        def probe(xx):
            return 0.5 * xx @ a_mat @ xx + b_vec @ xx, a_mat @ xx + b_vec, a_mat

        def fld(xx):
            return j_mat @ xx + h0, j_mat

        worst_identity = max(worst_identity,
                             mult.gradient_field_identity_residual(
                                 x, probe, fld, alpha))
    ok = worst_ratio <= cfg.tol("pointwise_ratio_tol")
    ok &= worst_identity <= cfg.tol("pointwise_identity_tol")

    # Integral identities on the largest cut over a 3-level h-refinement.
    eps0 = cfg.epsilons[0]
    cut = geo.cut_domain(ws.domain, eps0)
    levels = [4.0 * cfg.h_max, 2.0 * cfg.h_max, cfg.h_max]
    per_level = {mult.IDENTITY_1: [], mult.IDENTITY_2: []}
    reports = []
    for h in levels:
        mesh = msh.triangulate(cut, h_max=h, grading=cfg.grading)
        op = asm.assemble(mesh, cfg.alpha)
        basis = sp.solve_eigs(op, cfg.m)
        y0 = np.zeros(cfg.m)
        y0[0] = 1.0
        traj = wv.solve_modal(wv.WaveProblem(basis, y0, np.zeros(cfg.m),
                                             T=min(cfg.T, 4.0)))
        for which in (mult.IDENTITY_1, mult.IDENTITY_2):
            res = mult.multiplier_identity_residual(traj, op, mesh, which)
            per_level[which].append(res.relative_residual)
            reports.append(res.to_dict())

    floor = cfg.tol("identity_floor")
    for which, series in per_level.items():
        ok &= series[-1] <= cfg.tol("identity_rel_max")
        decreasing = all(b < a for a, b in zip(series, series[1:]))
        at_floor = all(v <= floor for v in series)
        ok &= decreasing or at_floor

    ws.emit_json("identities.json", {
        "pointwise_ratio_worst": worst_ratio,
        "pointwise_identity_worst": worst_identity,
        "levels_h": levels,
        "relative_residuals": {k: v for k, v in per_level.items()},
        "reports": reports,
        "pass": bool(ok),
    })
    return bool(ok)


def cmd_sweep(ws: Workspace) -> bool:
    cfg = ws.cfg
    result = shp.run_sweep(ws.domain, cfg.epsilons, cfg.alpha, cfg.initial,
                           T=min(cfg.T, 4.0), m=cfg.m, h_max=cfg.h_max,
                           grading=cfg.grading, ladder=ws.ladder())
    ws.emit("sweep.csv", lambda p: result.save_csv(p))
    ws.emit("sweep_plot.csv", lambda p: result.save_plot_data(p))
    ok = result.energy_monotone() and result.trace_monotone()
    ok &= result.final_trace_fraction() <= cfg.tol("trace_frac_max")
    ws.emit_json("sweep_gates.json", {
        "energy_monotone": result.energy_monotone(),
        "trace_monotone": result.trace_monotone(),
        "final_trace_fraction": result.final_trace_fraction(),
        "pass": bool(ok),
    })
    return bool(ok)


def cmd_observe(ws: Workspace) -> bool:
    cfg = ws.cfg
    eps = cfg.observe_epsilon()
    reports = []
    for t_hor in cfg.T_grid:
        reports.append(obs.observability_report(
            ws.domain, eps, cfg.alpha, cfg.initial, t_hor, cfg.m, cfg.h_max,
            obs_slack=cfg.tol("obs_slack"), grading=cfg.grading,
            cache=ws.obs_cache))
    ws.emit("summary.csv", lambda p: obs.write_summary_csv(reports, p))
    ws.emit_json("observability.json",
                 {"reports": [r.to_dict() for r in reports]})
    ok = all(r.verdict != obs.VERDICT_FAIL for r in reports)
    ok &= any(r.verdict == obs.VERDICT_PASS for r in reports)
    return bool(ok)


_COMMAND_FNS = {
    "certify": cmd_certify,
    "spectrum": cmd_spectrum,
    "wave": cmd_wave,
    "identities": cmd_identities,
    "sweep": cmd_sweep,
    "observe": cmd_observe,
}


def write_manifest(ws: Workspace) -> Path:
    lines = []
    for path in sorted(set(ws.artifacts)):
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        lines.append(f"{path.relative_to(ws.out).as_posix()} {digest}")
    manifest = ws.out / "MANIFEST"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def run(command: str, cfg: ExperimentConfig, out_dir: str | Path) -> int:
    """Execute one command (or `all`); returns the process exit code."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ws = Workspace(cfg, out)
    names = COMMANDS[:-1] if command == "all" else (command,)
    all_ok = True
    summary = {}
    for name in names:
        ok = _COMMAND_FNS[name](ws)
        summary[name] = bool(ok)
        all_ok &= ok
    ws.emit_json("gates.json", {"commands": summary, "pass": bool(all_ok)})
    write_manifest(ws)
    return 0 if all_ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="degenwave",
        description="certificates for a boundary-degenerate wave equation")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=str, default=None,
                        help="JSON experiment config (defaults built in)")
    parser.add_argument("--out", type=str, default=None,
                        help="output directory (overrides config)")
    parser.add_argument("--threads", type=int, default=None,
                        help="advisory thread count for BLAS backends")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the first property-test seed")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        cfg = (ExperimentConfig.load(args.config) if args.config
               else ExperimentConfig())
        if args.seed is not None:
            cfg.seeds = [args.seed] + cfg.seeds[1:]
        out_dir = args.out if args.out else cfg.outputs
        return run(args.command, cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (geo.GeometryError, msh.MeshFailure, msh.LadderConflict,
            asm.QuadratureOverflow, sp.EigsNoConverge) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
