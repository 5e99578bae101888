"""Run driver: sampling, field dumps, steady-state and breakup stops, report output."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io, plotting
from .analysis import DropletMetrics, measure
from .cases import Case, CaseConfig, build_case

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    case: Case
    metrics: list = field(default_factory=list)
    stop_reason: str = "steps"
    files: dict = field(default_factory=dict)

    @property
    def last(self) -> DropletMetrics:
        return self.metrics[-1]


def sample(case: Case) -> DropletMetrics:
    sim = case.sim
    sim.refresh()
    step = int(sim.state.time)
    return measure(sim.state, sim.grid, sim.params, sim.stencil, step, case.tbar(step))


def is_steady(metrics: list, window: float, tol: float) -> bool:
    """|dD/dt| below ``tol`` (per unit tbar) over the last ``window`` of tbar, single fragment."""
    if len(metrics) < 3 or metrics[-1].fragments != 1:
        return False
    now = metrics[-1]
    past = [m for m in metrics if m.tbar <= now.tbar - window]
    if not past or not math.isfinite(now.D):
        return False
    then = past[-1]
    recent = [m for m in metrics if m.tbar >= then.tbar]
    if any(m.fragments != 1 or not math.isfinite(m.D) for m in recent):
        return False
    ds = np.array([m.D for m in recent])
    return float(ds.max() - ds.min()) <= tol * (now.tbar - then.tbar)


def derived_values(case: Case) -> dict:
    out = dict(case.lattice.as_dict())
    out["rate"] = case.rate
    for k, v in case.info.items():
        if isinstance(v, (int, float, tuple)):
            out[k] = v
    cal = case.info.get("calibration")
    if cal is not None:
        out["extension_eps_measured"] = cal.eps
        out["extension_eps_y_measured"] = cal.eps_y
    return out


def run_case(case: Case, out_dir=None, figures: bool = True, progress=None) -> RunResult:
    """Advance ``case`` for config.steps steps with sampling and optional output."""
    cfg = case.config
    res = RunResult(case=case)
    out = io.ensure_dir(out_dir) if out_dir is not None else None
    writer = None
    if out is not None:
        res.files["manifest"] = io.write_manifest(out / "manifest.txt", cfg, derived_values(case))
        writer = io.MetricsWriter(out / "metrics.csv")
        res.files["metrics"] = writer.path
    dumps = []
    try:
        sim = case.sim
        while True:
            m = sample(case)
            res.metrics.append(m)
            if writer is not None:
                writer.write(m)
            if out is not None and cfg.dump_every and m.step % cfg.dump_every == 0:
                dumps.append(io.write_vtk(out / f"fields_{m.step:09d}.vtk", sim.state, sim.grid,
                                          m.step, m.tbar))
            if progress is not None:
                progress(m)
            log.info("step %d tbar %.4f D %.5f theta %.2f fragments %d", m.step, m.tbar, m.D,
                     m.theta_deg, m.fragments)
            if cfg.stop_at_fragments and m.fragments >= cfg.stop_at_fragments:
                res.stop_reason = "breakup"
                break
            if cfg.stop_when_steady and is_steady(res.metrics, cfg.steady_window, cfg.steady_tol):
                res.stop_reason = "steady"
                break
            if m.step >= cfg.steps:
                break
            sim.step(min(cfg.sample_every, cfg.steps - m.step))
    finally:
        if writer is not None:
            writer.close()
    if out is not None:
        sim = case.sim
        res.files["final"] = io.write_vtk(out / "fields_final.vtk", sim.state, sim.grid,
                                          res.last.step, res.last.tbar)
        res.files["dumps"] = dumps
        if figures:
            res.files.update(render_report(out, sim))
    return res


def render_report(out: Path, sim=None) -> dict:
    files = {}
    data = io.read_metrics_csv(Path(out) / "metrics.csv")
    files["deformation_png"] = plotting.plot_deformation(data, Path(out) / "deformation.png")
    files["mass_png"] = plotting.plot_mass(data, Path(out) / "mass.png")
    if sim is not None:
        files["phi_png"] = plotting.plot_field(sim.state.phi, Path(out) / "phi_final.png",
                                               sim.grid.fluid)
    return files


def run_config(config: CaseConfig, out_dir=None, workers: int | None = None, figures=True,
               progress=None) -> RunResult:
    """Build and run ``config``; nothing is written when ``out_dir`` is None."""
    case = build_case(config, workers)
    try:
        return run_case(case, out_dir, figures, progress)
    finally:
        case.sim.close()
