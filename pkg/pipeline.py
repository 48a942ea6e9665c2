"""
Stage orchestration: stationary -> verify-asymptotics -> evolve -> q-check -> decay-fit.

Each stage writes its artifacts under <root>/<output_prefix>/ and registers
them in the manifest together with the config hash. A stage whose input
is neither produced in the same run nor already on disk is refused with
DependencyMissing before anything runs.

Copyright 2025 Intellegix
Licensed under the Apache License, Version 2.0
"""
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np

from degenerate_asymptotics import verify_expansion
from diagnostics import (QFORM_COLUMNS, WeightSpec, decay_fit, energy_observer,
                         mass_observer, norm_observer, predicted_norm_exponent,
                         quadratic_form_check, reference_beta)
from errors import (ConfigError, DegenerateFit, DependencyMissing, InsufficientTail,
                    SheathLabError, StageFailure)
from evolution import (PerturbationSpec, advance, evolve, make_initial_perturbation,
                       state_from_profile)
from params import PlasmaParams, RegimeKind, classify_regime
from persistence import (Manifest, read_csv, read_profile, read_snapshot,
                         resolve_output_root, write_csv, write_gnuplot, write_json,
                         write_profile, write_snapshot)
from run_config import RunConfig, config_hash
from stationary import (GridRequest, SheathProfile, predicted_decay_rate,
                        residual_check, solve_stationary, tail_decay_fit)

logger = logging.getLogger(__name__)

STAGES = ("stationary", "verify-asymptotics", "evolve", "q-check", "decay-fit")
PREREQUISITES = {"verify-asymptotics": "stationary", "evolve": "stationary", "decay-fit": "evolve"}
DEGENERATE_ONLY = ("verify-asymptotics", "q-check")

PROFILE = "profile"
SERIES = "series.csv"


def resolve_weight(cfg: RunConfig, params: PlasmaParams) -> WeightSpec:
    """Weight from the diagnostics options; beta defaults to a fraction of the sheath scale"""
    opts = cfg.diagnostics
    beta = opts.weight_beta
    if beta is None:
        regime = classify_regime(params)
        if regime.kind is RegimeKind.DEGENERATE and params.phi_b > 0:
            beta = reference_beta(params, opts.beta_fraction)
        elif regime.kind is RegimeKind.NONDEGENERATE:
            beta = opts.beta_fraction * predicted_decay_rate(params)
        else:
            beta = opts.beta_fraction
    if opts.weight_kind == "exponential":
        return WeightSpec.exponential(beta)
    return WeightSpec.algebraic(opts.weight_alpha, beta)


@dataclass
class PipelineResult:
    root: Path
    manifest: Manifest
    stages_run: List[str] = field(default_factory=list)
    stages_skipped: List[str] = field(default_factory=list)


class Pipeline:
    """Runs a subset of stages for one configuration"""

    def __init__(self, cfg: RunConfig, out: Optional[str] = None,
                 profile_path: Optional[str] = None, series_path: Optional[str] = None,
                 restart: Optional[str] = None):
        self.cfg = cfg
        self.root = resolve_output_root(out) / cfg.output_prefix
        self.hash = config_hash(cfg)
        self.manifest = Manifest.load(self.root)
        self.profile_path = Path(profile_path) if profile_path else self.root / f"{PROFILE}.csv"
        self.series_path = Path(series_path) if series_path else self.root / SERIES
        self.restart = restart
        self._profile: Optional[SheathProfile] = None
        self._handlers: Dict[str, Callable[[], List[Path]]] = {
            "stationary": self._stationary,
            "verify-asymptotics": self._verify,
            "evolve": self._evolve,
            "q-check": self._qcheck,
            "decay-fit": self._decay_fit,
        }

    # helpers -------------------------------------------------------------

    def _artifact_on_disk(self, stage: str) -> bool:
        if stage == "stationary":
            return self.profile_path.is_file()
        if stage == "evolve":
            return self.series_path.is_file()
        return False

    def check_dependencies(self, stages: List[str]):
        for stage in stages:
            needed = PREREQUISITES.get(stage)
            if needed and needed not in stages and not self._artifact_on_disk(needed):
                raise DependencyMissing(
                    f"stage '{stage}' needs the '{needed}' output; run it first or include it"
                )

    def profile(self) -> SheathProfile:
        if self._profile is None:
            self._profile = read_profile(self.profile_path)
        return self._profile

    def _record(self, stage: str, paths: Iterable[Path]) -> List[Path]:
        paths = list(paths)
        for path in paths:
            self.manifest.add(path, stage, self.hash)
        return paths

    # stages --------------------------------------------------------------

    def _stationary(self) -> List[Path]:
        cfg = self.cfg
        grid = GridRequest(L=cfg.grid.L, N=cfg.grid.N, L_max=cfg.stationary.L_max)
        profile = solve_stationary(cfg.params, grid, tail_eps=cfg.stationary.tail_eps,
                                   quad_tol=cfg.stationary.quad_tol)
        self._profile = profile
        paths = write_profile(profile, self.root / PROFILE, self.hash)
        paths.append(write_gnuplot(self.root / f"{PROFILE}.gp", f"{PROFILE}.csv",
                                   "stationary sheath profile", [2, 3, 4, 5]))
        residuals = residual_check(profile)
        logger.info("[STATIONARY] residuals: poisson=%.3e first_integral=%.3e",
                    residuals.poisson, residuals.first_integral)
        paths.append(write_json(self.root / "residuals.json",
                                dict(asdict(residuals), config_hash=self.hash)))
        if profile.params.phi_b != 0.0:
            try:
                tail = tail_decay_fit(profile)
                paths.append(write_json(self.root / "tail.json", {
                    "kind": tail.kind.value, "fitted": tail.fitted, "predicted": tail.predicted,
                    "x_lo": tail.x_lo, "x_hi": tail.x_hi, "r_squared": tail.r_squared,
                    "config_hash": self.hash,
                }))
            except InsufficientTail as e:
                logger.warning("[STATIONARY] tail fit skipped: %s", e)
        return paths

    def _verify(self) -> List[Path]:
        report = verify_expansion(self.profile(), self.cfg.verify.max_order)
        payload = report.to_dict()
        payload["config_hash"] = self.hash
        return [write_json(self.root / "asymptotics.json", payload)]

    def _evolve(self) -> List[Path]:
        cfg = self.cfg
        opts = cfg.evolution
        profile = self.profile()
        weight = resolve_weight(cfg, profile.params)
        pert = opts.perturbation
        spec = PerturbationSpec(shape=pert.shape, amplitude=pert.amplitude, center=pert.center,
                                width=pert.width, components=tuple(pert.components),
                                weight_compat=weight)
        baseline = state_from_profile(profile, opts.poisson_tol)
        if self.restart:
            initial = read_snapshot(self.restart)
            logger.info("[EVOLVE] restarting from %s at t=%.6g", self.restart, initial.t)
            baseline = advance(baseline, initial.t, opts.cfl, opts.strict, opts.poisson_tol)
        else:
            initial = make_initial_perturbation(profile, spec, opts.poisson_tol)

        observers = {
            "norm": norm_observer(profile, weight, cfg.diagnostics.norm_order),
            "energy": energy_observer(profile, weight),
            "mass": mass_observer(),
        }
        tolerances = {"cfl": opts.cfl, "poisson_tol": opts.poisson_tol}
        paths: List[Path] = []
        last = {}

        def on_sample(k, state):
            last["state"] = state
            every = opts.snapshot_every
            if every and abs(state.t / every - round(state.t / every)) < 1e-9:
                paths.extend(write_snapshot(state, self.root / "snapshots" / f"snapshot_{k:05d}",
                                            self.hash, tolerances))

        self.series_path.parent.mkdir(parents=True, exist_ok=True)
        series = evolve(initial, opts.t_end, opts.observer_period, observers, baseline=baseline,
                        cfl=opts.cfl, strict=opts.strict, poisson_tol=opts.poisson_tol,
                        stream_path=str(self.series_path), on_sample=on_sample)
        logger.info("[EVOLVE] %d samples, final norm %.6e", len(series), series.column("norm")[-1])
        paths.insert(0, self.series_path)
        paths.insert(1, write_gnuplot(self.root / "series.gp", self.series_path.name,
                                      "perturbation norm and energy", [2, 3], xlabel="t",
                                      logscale_y=True))
        paths.extend(write_snapshot(last["state"], self.root / "final", self.hash, tolerances))
        return paths

    def _qcheck(self) -> List[Path]:
        opts = self.cfg.diagnostics
        params = self.cfg.params
        beta = reference_beta(params, opts.qcheck_beta_fraction)
        x = np.linspace(0.0, opts.qcheck_x_max, opts.qcheck_samples)
        report = quadratic_form_check(params, opts.qcheck_epsilon, beta, x)
        summary = {"epsilon": report.epsilon, "beta": report.beta, "passed": report.passed,
                   "c_cubic": report.c_cubic, "c_coercive": report.c_coercive,
                   "samples": len(report.samples), "config_hash": self.hash}
        rows = report.rows()
        return [
            write_json(self.root / "qform.json", summary),
            write_csv(self.root / "qform.csv", QFORM_COLUMNS, [rows[:, j] for j in range(rows.shape[1])]),
            write_gnuplot(self.root / "qform.gp", "qform.csv", "quadratic form margins", [7, 8, 10]),
        ]

    def _decay_fit(self) -> List[Path]:
        cfg = self.cfg
        opts = cfg.diagnostics
        header, data = read_csv(self.series_path)
        if "norm" not in header:
            raise ConfigError(f"{self.series_path} has no 'norm' column")
        t = data[:, 0]
        weight = resolve_weight(cfg, cfg.params)
        model = opts.fit_model or ("alg" if opts.weight_kind == "algebraic" else "exp")
        window = tuple(opts.fit_window) if opts.fit_window else None
        beta = weight.beta if model == "alg" else None

        fit = decay_fit(t, data[:, header.index("norm")], model, window, beta)
        payload = {"norm": fit.to_dict(), "config_hash": self.hash, "energy": None,
                   "predicted_exponent": None}
        if "energy" in header:
            try:
                payload["energy"] = decay_fit(t, data[:, header.index("energy")], model, window,
                                              beta).to_dict()
            except DegenerateFit as e:
                logger.warning("[DECAY] energy fit skipped: %s", e)
        kind = classify_regime(cfg.params).kind
        if model == "alg" and 0 < opts.qcheck_epsilon < opts.weight_alpha:
            payload["predicted_exponent"] = predicted_norm_exponent(kind, opts.weight_alpha,
                                                                    opts.qcheck_epsilon)
        return [write_json(self.root / "decay.json", payload)]

    # driver --------------------------------------------------------------

    def run(self, stages: Optional[Iterable[str]] = None) -> PipelineResult:
        requested = set(STAGES if stages is None else stages)
        unknown = requested - set(STAGES)
        if unknown:
            raise ConfigError(f"unknown stages: {sorted(unknown)}")
        ordered = [s for s in STAGES if s in requested]
        self.check_dependencies(ordered)

        regime = classify_regime(self.cfg.params)
        result = PipelineResult(root=self.root, manifest=self.manifest)
        self.root.mkdir(parents=True, exist_ok=True)
        for index, stage in enumerate(ordered, 1):
            tag = f"[{index}/{len(ordered)}]"
            if stage in DEGENERATE_ONLY and regime.kind is not RegimeKind.DEGENERATE:
                logger.warning("%s %s skipped: needs the degenerate regime, got %s",
                               tag, stage, regime.kind.value)
                result.stages_skipped.append(stage)
                continue
            logger.info("%s %s...", tag, stage)
            try:
                paths = self._handlers[stage]()
            except (DependencyMissing, ConfigError):
                raise
            except SheathLabError as e:
                raise StageFailure(stage, e) from e
            self._record(stage, paths)
            self.manifest.write()
            result.stages_run.append(stage)
            logger.info("      %d artifacts", len(paths))
        return result


def run_pipeline(cfg: RunConfig, stages: Optional[Iterable[str]] = None,
                 out: Optional[str] = None, **kwargs) -> PipelineResult:
    return Pipeline(cfg, out, **kwargs).run(stages)
