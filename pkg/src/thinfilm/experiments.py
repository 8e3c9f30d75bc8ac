"""
Experiment configuration, initial conditions, runs, convergence studies and sweeps.

Config files are INI-style ``key = value`` text with the sections below. Every
key is optional; unknown sections or keys are errors.

``[model]``
    ``variant`` (1), ``alpha``, ``p``, ``q``, ``epsilon_sq``, ``gamma``;
    ``F_f``, ``L_ES``, ``L_isl``, ``b``, ``C_DF`` (physical preset);
    ``chi`` (default: the concavity threshold), ``floor`` (1e-16), ``dt``
    (0.01), ``t_end`` (per initial condition), ``N`` (128) or ``N1``/``N2``,
    ``L`` (2 pi) or ``L1``/``L2``, ``dealias`` (false), ``zeta_file``
    (snapshot used as constant-in-time deposition).
``[init]``
    ``kind`` (example1 | example2 | example3 | example4 | example5_random |
    modes | file), ``modes`` (``"xi1 xi2 amp kind; ..."`` with kind one of
    sinsin, sincos, cossin, coscos), ``path``, ``scale`` (1.0), ``seed`` (0).
``[output]``
    ``dir`` (output), ``record_every`` (1), ``snapshot_times`` (comma list).
``[sweep]``
    ``parameter`` (gamma | epsilon_sq), ``values``, ``workers`` (1),
    ``dt_ladder``, ``reference_refinement`` (64), ``n_ladder``,
    ``n_reference``.

The ES strength and slopes come either from ``alpha``/``p``/``q`` or from the
physical preset keys, never both; with neither, the default preset is used.
``gamma`` and ``epsilon_sq`` given alongside a preset override the derived
values (this is how perturbation studies are expressed).
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .diagnostics import (
    DiagnosticsRecord,
    DiagnosticsRecorder,
    MonitorResult,
    check_energy_law,
    check_global_roughness_bound,
    check_h2_bound,
    interpolated_growth_constant,
    local_growth_rate,
    rough_smooth_rough,
    steady_state_time,
    write_series,
)
from .es_model import DEFAULT_FLOOR, EsParams, PhysicalPreset, SplittingParams, chi_min, preset_from_physical
from .spectral_grid import GridSpec, RealField, read_snapshot, write_snapshot
from .stepper import ModelConfig, build, run, step, steps_between

log = logging.getLogger(__name__)

__all__ = [
    "ConfigError",
    "FourierMode",
    "InitialCondition",
    "ExperimentConfig",
    "RunResult",
    "ConvergenceRow",
    "SweepRow",
    "parse_config",
    "make_initial",
    "run_experiment",
    "evaluate_monitors",
    "convergence_study",
    "spatial_convergence",
    "perturbation_sweep",
]

INIT_KINDS = ("example1", "example2", "example3", "example4", "example5_random", "modes", "file")
MODE_KINDS = ("sinsin", "sincos", "cossin", "coscos")
DEFAULT_T_END = {
    "example1": 300.0,
    "example2": 2000.0,
    "example3": 300.0,
    "example4": 300.0,
    "example5_random": 300.0,
    "modes": 300.0,
    "file": 300.0,
}
PRESET_KEYS = ("F_f", "L_ES", "L_isl", "b", "C_DF")
EXPLICIT_KEYS = ("alpha", "p", "q")
SWEEP_PARAMETERS = ("gamma", "epsilon_sq")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FourierMode:
    xi1: int
    xi2: int
    amp: float
    kind: str = "sinsin"

    def __post_init__(self):
        if self.kind not in MODE_KINDS:
            raise ConfigError(f"init.modes: unknown mode kind {self.kind!r}; expected one of {MODE_KINDS}")


@dataclass(frozen=True)
class InitialCondition:
    kind: str = "example1"
    modes: tuple[FourierMode, ...] = ()
    path: str | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in INIT_KINDS:
            raise ConfigError(f"init.kind: unknown initial condition {self.kind!r}; expected one of {INIT_KINDS}")
        if self.kind == "modes" and not self.modes:
            raise ConfigError("init.modes: kind = modes needs at least one mode")
        if self.kind == "file" and not self.path:
            raise ConfigError("init.path: kind = file needs a snapshot path")


def _trig(kind: str, a: np.ndarray) -> np.ndarray:
    return np.sin(a) if kind == "sin" else np.cos(a)


def make_initial(init: InitialCondition, grid: GridSpec, seed: int = 0) -> RealField:
    """Sample an initial height field and remove its mean.

    Formulas use coordinates scaled onto ``(0, 2 pi)^2``. Modes above the grid
    Nyquist number alias as they would in any sampled computation (example4's
    ``cos 100 y`` at N = 128 lands on mode 28).

    ``example5_random`` draws uniform values in ``[-0.5, 0.5)`` from NumPy's
    PCG64 generator seeded with ``seed``.
    """
    x, y = grid.scaled_coordinates()
    kind = init.kind
    if kind == "example1":
        h = 0.1 * (np.sin(3 * x) * np.sin(2 * y) + np.sin(5 * x) * np.sin(5 * y))
    elif kind == "example2":
        h = 0.01 * (np.sin(30 * x) * np.sin(20 * y) + np.sin(50 * x) * np.sin(50 * y))
    elif kind == "example3":
        h = np.sin(2 * x) * np.cos(3 * y)
    elif kind == "example4":
        h = 0.01 * (np.sin(3 * x) * np.sin(2 * y) + np.cos(50 * x) * np.cos(100 * y))
    elif kind == "example5_random":
        rng = np.random.Generator(np.random.PCG64(seed))
        h = rng.random(grid.shape) - 0.5
    elif kind == "modes":
        h = np.zeros(grid.shape)
        for m in init.modes:
            h += m.amp * _trig(m.kind[:3], m.xi1 * x) * _trig(m.kind[3:], m.xi2 * y)
    else:
        field_, _ = read_snapshot(init.path)
        if field_.grid != grid:
            raise ConfigError(f"init.path: snapshot grid {field_.grid} does not match model grid {grid}")
        h = field_.values
    h = init.scale * h
    return RealField(grid, h - h.mean())


@dataclass(frozen=True)
class ExperimentConfig:
    variant: int = 1
    alpha: float | None = None
    p: float | None = None
    q: float | None = None
    preset: PhysicalPreset | None = None
    gamma: float | None = None
    epsilon_sq: float | None = None
    chi: float | None = None
    floor: float = DEFAULT_FLOOR
    dt: float = 0.01
    t_end: float | None = None
    N1: int = 128
    N2: int = 128
    L1: float = 2 * math.pi
    L2: float = 2 * math.pi
    dealias: bool = False
    zeta_file: str | None = None
    init: InitialCondition = field(default_factory=InitialCondition)
    seed: int = 0
    output_dir: str = "output"
    record_every: int = 1
    snapshot_times: tuple[float, ...] = ()
    sweep_parameter: str | None = None
    sweep_values: tuple[float, ...] = ()
    workers: int = 1
    dt_ladder: tuple[float, ...] = ()
    reference_refinement: int = 64
    n_ladder: tuple[int, ...] = ()
    n_reference: int | None = None

    def __post_init__(self):
        self.resolved()  # validates the physical parameters
        try:
            self.grid
        except ValueError as exc:
            raise ConfigError(f"model.N/L: {exc}") from None
        if not self.dt > 0:
            raise ConfigError(f"model.dt: must be > 0, got {self.dt}")
        if self.record_every < 1:
            raise ConfigError("output.record_every: must be >= 1")
        t_end = self.final_time
        if not t_end >= 0:
            raise ConfigError(f"model.t_end: must be >= 0, got {t_end}")
        for t in self.snapshot_times:
            if not 0 <= t <= t_end:
                raise ConfigError(f"output.snapshot_times: {t} lies outside [0, {t_end}]")
        if self.sweep_parameter is not None and self.sweep_parameter not in SWEEP_PARAMETERS:
            raise ConfigError(f"sweep.parameter: must be one of {SWEEP_PARAMETERS}, got {self.sweep_parameter!r}")
        if self.workers < 1:
            raise ConfigError("sweep.workers: must be >= 1")

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.N1, self.N2, self.L1, self.L2)

    @property
    def final_time(self) -> float:
        return DEFAULT_T_END[self.init.kind] if self.t_end is None else self.t_end

    def resolved(self) -> tuple[EsParams, float, float, float]:
        """Return ``(es, gamma, epsilon_sq, chi)`` after preset expansion and checks."""
        if self.variant not in (1, 2, 3):
            raise ConfigError(f"model.variant: must be 1, 2 or 3, got {self.variant!r}")
        explicit = [k for k in EXPLICIT_KEYS if getattr(self, k) is not None]
        if explicit and self.preset is not None:
            raise ConfigError(
                f"model: give either explicit {', '.join(EXPLICIT_KEYS)} or the physical preset keys, not both"
            )
        if explicit:
            missing = [k for k in EXPLICIT_KEYS if getattr(self, k) is None]
            if missing:
                raise ConfigError(f"model.{missing[0]}: required when explicit ES parameters are given")
            if not 0 < self.p < self.q:
                raise ConfigError(f"model.p/model.q: need 0 < p < q, got p={self.p}, q={self.q}")
            if not self.alpha > 0:
                raise ConfigError(f"model.alpha: must be > 0, got {self.alpha}")
            es = EsParams(self.variant, self.alpha, self.p, self.q, self.floor)
            gamma, eps_sq = 0.0, preset_from_physical(PhysicalPreset()).epsilon_sq
        else:
            pm = preset_from_physical(self.preset or PhysicalPreset(), self.floor)
            es, gamma, eps_sq = pm.for_variant(self.variant), pm.gamma, pm.epsilon_sq
        if self.gamma is not None:
            gamma = self.gamma
        if self.epsilon_sq is not None:
            eps_sq = self.epsilon_sq
        if not gamma >= 0:
            raise ConfigError(f"model.gamma: must be >= 0, got {gamma}")
        if not eps_sq > 0:
            raise ConfigError(f"model.epsilon_sq: must be > 0, got {eps_sq}")
        threshold = chi_min(es)
        chi = threshold if self.chi is None else self.chi
        if chi < threshold:
            raise ConfigError(f"model.chi: {chi} is below the concavity threshold chi_min = {threshold!r}")
        return es, gamma, eps_sq, chi

    def model_config(self) -> ModelConfig:
        es, gamma, eps_sq, chi = self.resolved()
        grid = self.grid
        zeta = None
        if self.zeta_file:
            zeta, _ = read_snapshot(self.zeta_file)
            if zeta.grid != grid:
                raise ConfigError(f"model.zeta_file: snapshot grid {zeta.grid} does not match model grid {grid}")
        return ModelConfig(
            es=es,
            grid=grid,
            epsilon_sq=eps_sq,
            gamma=gamma,
            dt=self.dt,
            split=SplittingParams(chi),
            zeta=zeta,
            dealias=self.dealias,
        )

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_sections(self) -> dict[str, dict[str, str]]:
        """Config as section -> key -> text, re-parseable by :func:`parse_config`."""
        model: dict[str, object] = {"variant": self.variant}
        for k in EXPLICIT_KEYS + ("gamma", "epsilon_sq", "chi"):
            if getattr(self, k) is not None:
                model[k] = getattr(self, k)
        if self.preset is not None:
            model.update({k: getattr(self.preset, k) for k in PRESET_KEYS})
        model.update(floor=self.floor, dt=self.dt, t_end=self.final_time, N1=self.N1, N2=self.N2,
                     L1=self.L1, L2=self.L2, dealias=self.dealias)
        if self.zeta_file:
            model["zeta_file"] = self.zeta_file
        init: dict[str, object] = {"kind": self.init.kind, "scale": self.init.scale, "seed": self.seed}
        if self.init.modes:
            init["modes"] = "; ".join(f"{m.xi1} {m.xi2} {m.amp!r} {m.kind}" for m in self.init.modes)
        if self.init.path:
            init["path"] = self.init.path
        output = {
            "dir": self.output_dir,
            "record_every": self.record_every,
            "snapshot_times": ", ".join(repr(t) for t in self.snapshot_times),
        }
        sweep: dict[str, object] = {"workers": self.workers, "reference_refinement": self.reference_refinement}
        if self.sweep_parameter:
            sweep["parameter"] = self.sweep_parameter
        for key, vals in (("values", self.sweep_values), ("dt_ladder", self.dt_ladder), ("n_ladder", self.n_ladder)):
            if vals:
                sweep[key] = ", ".join(repr(v) for v in vals)
        if self.n_reference is not None:
            sweep["n_reference"] = self.n_reference
        render = lambda v: repr(v) if isinstance(v, float) else str(v).lower() if isinstance(v, bool) else str(v)
        return {
            name: {k: render(v) for k, v in sec.items()}
            for name, sec in (("model", model), ("init", init), ("output", output), ("sweep", sweep))
        }


def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s: str) -> tuple[float, ...]:
    return tuple(_float(x) for x in s.replace(",", " ").split())


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.replace(",", " ").split())


def _modes(s: str) -> tuple[FourierMode, ...]:
    out = []
    for chunk in filter(None, (c.strip() for c in s.split(";"))):
        parts = chunk.split()
        if len(parts) not in (3, 4):
            raise ValueError(f"mode {chunk!r} must be 'xi1 xi2 amp [kind]'")
        out.append(FourierMode(int(parts[0]), int(parts[1]), _float(parts[2]), *parts[3:]))
    return tuple(out)


SCHEMA = {
    "model": {
        "variant": int, "alpha": _float, "p": _float, "q": _float, "epsilon_sq": _float, "gamma": _float,
        "F_f": _float, "L_ES": _float, "L_isl": _float, "b": _float, "C_DF": _float,
        "chi": _float, "floor": _float, "dt": _float, "t_end": _float,
        "N": int, "N1": int, "N2": int, "L": _float, "L1": _float, "L2": _float,
        "dealias": _bool, "zeta_file": str,
    },
    "init": {"kind": str, "modes": _modes, "path": str, "scale": _float, "seed": int},
    "output": {"dir": str, "record_every": int, "snapshot_times": _floats},
    "sweep": {
        "parameter": str, "values": _floats, "workers": int, "dt_ladder": _floats,
        "reference_refinement": int, "n_ladder": _ints, "n_reference": int,
    },
}


def _apply_override(sections: dict[str, dict[str, str]], override: str) -> None:
    if "=" not in override:
        raise ConfigError(f"override {override!r} must look like key=value or section.key=value")
    key, value = (s.strip() for s in override.split("=", 1))
    if "." in key:
        section, key = key.split(".", 1)
    else:
        owners = [sec for sec, keys in SCHEMA.items() if key in keys]
        if len(owners) != 1:
            raise ConfigError(f"override key {key!r} is unknown or ambiguous; use section.key")
        section = owners[0]
    sections.setdefault(section, {})[key] = value


def parse_config(text: str, overrides: Sequence[str] = ()) -> ExperimentConfig:
    """Parse config text (plus ``key=value`` overrides) into a validated config."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    sections = {s: dict(parser[s]) for s in parser.sections()}
    for ov in overrides:
        _apply_override(sections, ov)

    values: dict[str, dict[str, object]] = {}
    for section, entries in sections.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]; expected one of {sorted(SCHEMA)}")
        for key, raw in entries.items():
            conv = SCHEMA[section].get(key)
            if conv is None:
                raise ConfigError(f"unknown key {section}.{key}")
            try:
                values.setdefault(section, {})[key] = conv(raw)
            except (ValueError, ConfigError) as exc:
                raise ConfigError(f"{section}.{key}: invalid value {raw!r} ({exc})") from None

    model = values.get("model", {})
    init = values.get("init", {})
    output = values.get("output", {})
    sweep = values.get("sweep", {})

    preset_given = {k: model[k] for k in PRESET_KEYS if k in model}
    try:
        preset = PhysicalPreset(**preset_given) if preset_given else None
    except ValueError as exc:
        raise ConfigError(f"model preset: {exc}") from None
    n = model.get("N", 128)
    length = model.get("L", 2 * math.pi)
    ic = InitialCondition(
        kind=init.get("kind", "example1"),
        modes=init.get("modes", ()),
        path=init.get("path"),
        scale=init.get("scale", 1.0),
    )
    return ExperimentConfig(
        variant=model.get("variant", 1),
        alpha=model.get("alpha"),
        p=model.get("p"),
        q=model.get("q"),
        preset=preset,
        gamma=model.get("gamma"),
        epsilon_sq=model.get("epsilon_sq"),
        chi=model.get("chi"),
        floor=model.get("floor", DEFAULT_FLOOR),
        dt=model.get("dt", 0.01),
        t_end=model.get("t_end"),
        N1=model.get("N1", n),
        N2=model.get("N2", n),
        L1=model.get("L1", length),
        L2=model.get("L2", length),
        dealias=model.get("dealias", False),
        zeta_file=model.get("zeta_file"),
        init=ic,
        seed=init.get("seed", 0),
        output_dir=output.get("dir", "output"),
        record_every=output.get("record_every", 1),
        snapshot_times=output.get("snapshot_times", ()),
        sweep_parameter=sweep.get("parameter"),
        sweep_values=sweep.get("values", ()),
        workers=sweep.get("workers", 1),
        dt_ladder=sweep.get("dt_ladder", ()),
        reference_refinement=sweep.get("reference_refinement", 64),
        n_ladder=sweep.get("n_ladder", ()),
        n_reference=sweep.get("n_reference"),
    )


@dataclass
class RunResult:
    status: int
    output_dir: Path
    records: list[DiagnosticsRecord]
    monitors: list[MonitorResult]
    final: RealField

    @property
    def final_omega(self) -> float:
        return self.records[-1].omega

    @property
    def final_energy(self) -> float:
        return self.records[-1].energy


class _SnapshotWriter:
    def __init__(self, out_dir: Path, times: Sequence[float], dt: float):
        self.out_dir = out_dir
        self.steps: dict[int, float] = {}
        for t in times:
            self.steps.setdefault(round(t / dt), t)

    def write(self, state) -> None:
        requested = self.steps.get(state.step_index)
        if requested is not None:
            write_snapshot(self.out_dir / f"snapshot_t{requested:g}.txt", state.h, state.time)

    def __call__(self, state, prev) -> None:
        self.write(state)


def evaluate_monitors(
    records: Sequence[DiagnosticsRecord], zeta_sq: Sequence[float], model: ModelConfig
) -> list[MonitorResult]:
    """Asserted and report-only monitors for a recorded run."""
    out = [
        check_energy_law(
            [(r.t, r.energy, z) for r, z in zip(records, zeta_sq)], model.dt, dealias=model.dealias
        )
    ]
    omega = [(r.t, r.omega) for r in records]
    forced = any(z > 0 for z in zeta_sq)
    if model.es.variant in (1, 3) and not forced:
        out.append(check_global_roughness_bound(omega, model.es))
    if model.es.variant in (1, 2):
        out.append(check_h2_bound([r.lap_sq for r in records], model, records[0].energy))
    rsr = rough_smooth_rough(omega)
    out.append(MonitorResult("rough_smooth_rough", rsr, float(rsr), f"detected={rsr}", asserted=False))
    rate = local_growth_rate(omega)
    out.append(MonitorResult("local_growth_rate", True, rate, f"max d ln(w^2)/dt = {rate:.6g}", asserted=False))
    c43 = interpolated_growth_constant(omega)
    out.append(MonitorResult("interpolated_growth", True, c43, f"max d w^(4/3)/dt = {c43:.6g}", asserted=False))
    t_ss = steady_state_time(records)
    out.append(
        MonitorResult(
            "steady_state", t_ss is not None, math.nan if t_ss is None else t_ss,
            "not reached" if t_ss is None else f"reached at t={t_ss:g}", asserted=False,
        )
    )
    return out


PLOT_SCRIPT = '''\
"""Plot the diagnostics series of this run (requires matplotlib)."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "series.csv"
with open(path) as fh:
    rows = list(csv.DictReader(fh))
t = [float(r["t"]) for r in rows]
fig, axes = plt.subplots(2, 2, figsize=(10, 7), sharex=True)
for ax, key in zip(axes.flat, ("omega", "energy", "grad_sq", "lap_sq")):
    ax.plot(t, [float(r[key]) for r in rows])
    ax.set_ylabel(key)
for ax in axes[1]:
    ax.set_xlabel("t")
fig.tight_layout()
fig.savefig("series.png", dpi=120)
'''


def run_experiment(config: ExperimentConfig, output_dir: str | Path | None = None) -> RunResult:
    """Run one simulation and write series, snapshots, manifest and monitor report.

    Returns status 0 when every asserted monitor passes and 1 otherwise. Monitor
    failures never abort the run; they are logged at error level.
    """
    out = Path(output_dir if output_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = config.model_config()
    h0 = make_initial(config.init, model.grid, config.seed)
    t_end = config.final_time
    steps_between(0.0, t_end, model.dt)

    state = build(model, h0)
    recorder = DiagnosticsRecorder(model, config.record_every)
    recorder.start(state)
    snaps = _SnapshotWriter(out, config.snapshot_times, model.dt)
    snaps.write(state)
    final = run(state, model, t_end, [recorder, snaps])
    if final.step_index % config.record_every:
        recorder.append(final)

    write_series(out / "series.csv", recorder.records)
    monitors = evaluate_monitors(recorder.records, recorder.zeta_sq, model)
    es, gamma, eps_sq, chi = config.resolved()
    manifest = {
        "code": {"package": "thinfilm", "version": __version__},
        "config": config.to_sections(),
        "resolved": {
            "variant": es.variant, "alpha": es.alpha, "p": es.p, "q": es.q, "floor": es.floor,
            "gamma": gamma, "epsilon_sq": eps_sq, "chi": chi, "dt": model.dt, "t_end": t_end,
            "steps": final.step_index, "grid": dataclasses.asdict(model.grid),
        },
        "zeta_sq": recorder.zeta_sq[-1],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    (out / "monitors.txt").write_text("\n".join(m.line() for m in monitors) + "\n")
    (out / "plot_series.py").write_text(PLOT_SCRIPT)

    failed = [m for m in monitors if m.asserted and not m.passed]
    for m in failed:
        log.error("monitor failure in %s: %s", out, m.line())
    return RunResult(1 if failed else 0, out, recorder.records, monitors, final.h)


@dataclass(frozen=True)
class ConvergenceRow:
    dt: float
    error: float
    order: float


def _integrate_to(model: ModelConfig, h0: RealField, t_end: float) -> RealField:
    state = build(model, h0)
    for _ in range(steps_between(0.0, t_end, model.dt)):
        state = step(state, model)
    return state.h


def _l2(a: RealField, b: RealField) -> float:
    d = a.values - b.values
    return math.sqrt(float(np.sum(d * d)) * a.grid.cell_area)


def convergence_study(
    config: ExperimentConfig,
    dt_ladder: Sequence[float] | None = None,
    reference_refinement: int | None = None,
) -> list[ConvergenceRow]:
    """Temporal errors at ``t_end`` against a run at ``dt_ladder[0] / reference_refinement``.

    Errors are L^2(Omega) norms; the order of row ``j`` is ``log2(e_{j-1} / e_j)``
    (NaN for the first row).
    """
    ladder = tuple(dt_ladder if dt_ladder is not None else config.dt_ladder)
    refine = reference_refinement if reference_refinement is not None else config.reference_refinement
    if len(ladder) < 2:
        raise ConfigError("sweep.dt_ladder: need at least two time steps")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigError("sweep.dt_ladder: must be strictly descending")
    if refine < 1:
        raise ConfigError("sweep.reference_refinement: must be >= 1")
    t_end = config.final_time
    dt_ref = ladder[0] / refine
    for dt in ladder + (dt_ref,):
        try:
            steps_between(0.0, t_end, dt)
        except ValueError:
            raise ConfigError(f"sweep.dt_ladder: dt={dt:g} does not divide t_end={t_end:g}") from None

    base = config.model_config()
    h0 = make_initial(config.init, base.grid, config.seed)
    reference = _integrate_to(base.with_(dt=dt_ref), h0, t_end)
    rows: list[ConvergenceRow] = []
    for dt in ladder:
        err = _l2(_integrate_to(base.with_(dt=dt), h0, t_end), reference)
        order = math.log2(rows[-1].error / err) if rows else math.nan
        rows.append(ConvergenceRow(dt, err, order))
    return rows


def spatial_convergence(
    config: ExperimentConfig,
    n_ladder: Sequence[int] | None = None,
    n_reference: int | None = None,
) -> list[tuple[int, float]]:
    """Max-norm error at ``t_end`` of square-grid runs vs a finer reference.

    The reference is compared at the coarse nodes, so each ``N`` must divide
    ``n_reference``.
    """
    ladder = tuple(n_ladder if n_ladder is not None else config.n_ladder)
    n_ref = n_reference if n_reference is not None else config.n_reference
    if not ladder or n_ref is None:
        raise ConfigError("sweep.n_ladder and sweep.n_reference are required")
    for n in ladder:
        if n_ref % n:
            raise ConfigError(f"sweep.n_ladder: N={n} does not divide n_reference={n_ref}")
    t_end = config.final_time

    def solve(n: int) -> RealField:
        cfg = config.replace(N1=n, N2=n)
        model = cfg.model_config()
        return _integrate_to(model, make_initial(cfg.init, model.grid, cfg.seed), t_end)

    ref = solve(n_ref).values
    rows = []
    for n in ladder:
        stride = n_ref // n
        rows.append((n, float(np.abs(solve(n).values - ref[::stride, ::stride]).max())))
    return rows


@dataclass(frozen=True)
class SweepRow:
    value: float
    final_omega: float
    final_energy: float
    status: int
    error: str = ""


def _sweep_one(args) -> SweepRow:
    config, parameter, value, out_dir = args
    try:
        result = run_experiment(config.replace(**{parameter: value}), out_dir)
        return SweepRow(value, result.final_omega, result.final_energy, result.status)
    except Exception as exc:  # isolate per-run failures
        log.exception("sweep run %s=%g failed", parameter, value)
        return SweepRow(value, math.nan, math.nan, 2, f"{type(exc).__name__}: {exc}")


def perturbation_sweep(
    config: ExperimentConfig,
    parameter: str | None = None,
    values: Sequence[float] | None = None,
    workers: int | None = None,
    output_dir: str | Path | None = None,
) -> list[SweepRow]:
    """One run per value of ``gamma`` or ``epsilon_sq``, plus ``summary.csv``."""
    parameter = parameter or config.sweep_parameter
    values = tuple(values if values is not None else config.sweep_values)
    workers = workers or config.workers
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"sweep.parameter: must be one of {SWEEP_PARAMETERS}, got {parameter!r}")
    if not values:
        raise ConfigError("sweep.values: at least one value is required")
    root = Path(output_dir if output_dir is not None else config.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    jobs = [(config, parameter, v, root / f"{parameter}={v:g}") for v in values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(job) for job in jobs]
    with open(root / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([parameter, "final_omega", "final_energy", "status", "error"])
        for r in rows:
            writer.writerow([repr(r.value), format(r.final_omega, ".17g"), format(r.final_energy, ".17g"), r.status, r.error])
    return rows


