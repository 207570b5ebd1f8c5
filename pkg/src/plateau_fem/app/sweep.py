"""Sweeps over beta and field orientation, with CSV, VTK and log output."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..admm import AdmmDivergenceError, AdmmOperators, AdmmState, admm_run, build_u0, compute_c_m, diagnostics
from ..mesh import TetMesh, build_box_mesh, read_msh
from ..regions import classify_cells, cut_out_interior
from ..shapes import make_shape
from .config import RunConfig
from .vtk import result_fields, write_vtk

log = logging.getLogger("plateau_fem.run")

CSV_COLUMNS = ("beta", "phi", "psi", "energy", "c_m", "energy_plus_cm", "iters", "r_p", "r_q", "seconds")


@dataclass(frozen=True)
class SweepRow:
    beta: float
    phi: float
    psi: float
    energy: float
    c_m: float
    iters: int
    r_p: float
    r_q: float
    seconds: float
    diverged: bool = False
    component_count: Optional[int] = None
    side_fraction: Optional[float] = None
    region_masses: dict = field(default_factory=dict)

    @property
    def energy_plus_cm(self) -> float:
        return self.energy + self.c_m

    def csv_values(self) -> list:
        return [self.beta, self.phi, self.psi, self.energy, self.c_m, self.energy_plus_cm, self.iters, self.r_p, self.r_q, self.seconds]


def log_progress(state: AdmmState, every_n: int, logger: logging.Logger = log) -> bool:
    """Log iteration, energy and residuals every ``every_n`` iterations; 0 disables.

    A non-finite energy is always reported, with its iteration index.
    Returns whether a line was written.
    """
    k = state.iteration
    energy = state.energy[-1] if state.energy else 0.0
    if not math.isfinite(energy):
        logger.error("diverged at iteration %d (energy %s)", k, energy)
        return True
    if every_n <= 0 or k % every_n:
        return False
    logger.info("iter %6d  E_h %.8g  r_p %.3e  r_q %.3e", k, energy, state.r_p[-1], state.r_q[-1])
    return True


class OperatorCache:
    """One factorization per (mesh, gamma_m, gamma_c)."""

    def __init__(self):
        self._ops = {}
        self.factorizations = 0

    def get(self, mesh: TetMesh, gamma_m: float, gamma_c: float) -> AdmmOperators:
        key = (id(mesh), gamma_m, gamma_c)
        if key not in self._ops:
            self._ops[key] = AdmmOperators.build(mesh, gamma_m, gamma_c)
            self.factorizations += 1
        return self._ops[key]


def load_mesh(config: RunConfig, shape) -> TetMesh:
    if config.msh is not None:
        mesh = read_msh(config.msh)
    else:
        w = config.box if config.box is not None else 2.0 * shape.circumradius
        mesh = build_box_mesh(config.subdiv, (w, w, w))
    return cut_out_interior(mesh, shape) if config.cut_out else mesh


def setup_logging(out_dir: Path, level=logging.INFO) -> list[logging.Handler]:
    """Send run messages to standard output and ``out_dir/run.log``."""
    fmt = logging.Formatter("%(asctime)s %(levelname)s %(message)s")
    handlers = [logging.FileHandler(out_dir / "run.log", mode="w"), logging.StreamHandler(sys.stdout)]
    for handler in handlers:
        handler.setFormatter(fmt)
        log.addHandler(handler)
    log.setLevel(level)
    return handlers


def write_csv(rows, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row.csv_values()])
    return path


def run_sweep(config: RunConfig, cache: Optional[OperatorCache] = None, mesh: Optional[TetMesh] = None) -> list[SweepRow]:
    """Run every (beta, phi, psi) point of ``config`` and write the outputs.

    The mesh is built once and reused for all orientations (only H rotates);
    operators are factorized once per step-size pair. A diverging point is
    recorded with NaN energy and the sweep moves on.
    """
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    handlers = setup_logging(out)
    cache = cache or OperatorCache()
    try:
        base = make_shape(config.shape, **config.shape_params)
        if mesh is None:
            mesh = load_mesh(config, base)
        log.info("mesh: %d nodes, %d edges, %d cells, h = %.4g", mesh.n_nodes, mesh.n_edges, mesh.n_cells, mesh.h)
        params = config.admm
        ops = cache.get(mesh, params.gamma_m, params.gamma_c)
        d_gamma = mesh.h if params.d_gamma is None else params.d_gamma

        rows = []
        setup = None
        for index, (beta, phi, psi) in enumerate(config.sweep_points()):
            if setup is None or setup[0] != (phi, psi):
                shape = base.oriented(phi, psi)
                labels = classify_cells(mesh, shape, params.w_E, params.eps)
                gamma0 = build_u0(mesh, labels, shape, d_gamma, params.u0_profile, params.u0_shift)
                if not gamma0.curl_u0.any():
                    log.warning("phi %g psi %g: initial line field is empty; the particle is under-resolved along H", phi, psi)
                setup = ((phi, psi), shape, labels, gamma0, compute_c_m(mesh, labels, shape))
            _, shape, labels, gamma0, c_m = setup
            log.info("point %d: beta %g phi %g psi %g", index, beta, phi, psi)
            start = time.perf_counter()
            try:
                result = admm_run(
                    mesh,
                    labels,
                    shape,
                    dataclasses.replace(params, beta=beta),
                    ops=ops,
                    gamma0=gamma0,
                    callback=lambda s: log_progress(s, config.log_every),
                    compute_cm=False,
                )
            except AdmmDivergenceError as err:
                rows.append(SweepRow(beta, phi, psi, math.nan, c_m, err.iteration, math.nan, math.nan, time.perf_counter() - start, diverged=True))
                continue
            diag = diagnostics(mesh, labels, shape, result)
            row = SweepRow(
                beta, phi, psi, result.energy, c_m, result.iterations, result.r_p, result.r_q, result.seconds,
                component_count=diag.component_count, side_fraction=diag.side_fraction, region_masses=diag.region_masses,
            )
            rows.append(row)
            log.info("done: E_h %.6g  C_M %.6g  E_h+C_M %.6g  (%d iterations, %.1f s)", row.energy, c_m, row.energy_plus_cm, row.iters, row.seconds)
            if config.vtk:
                write_vtk(mesh, result_fields(result.p, result.q, labels.labels), out / f"point_{index:03d}.vtk")
        write_csv(rows, out / "results.csv")
        log.info("wrote %s (%d rows, %d factorizations)", out / "results.csv", len(rows), cache.factorizations)
        return rows
    finally:
        for handler in handlers:
            log.removeHandler(handler)
            handler.close()

