"""Configuration loading, parameter sweeps and CSV / plot emission."""
from __future__ import annotations

import csv
import dataclasses
import json
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import analytic
from .analytic import TheoryOptions
from .montecarlo import rates_from_records, simulate_records, worker_count
from .params import FIELD_NAMES, NetworkParams, Topology, validate
from .specfun import QuadratureSpec

CSV_HEADER = ["sweep_var", "value", "topology", "tier", "variant", "source", "mean", "ci", "n", "seed"]

# curve order used for sorting and plotting
CURVES = (("MU", "WithCache"), ("SU", "NoCache"), ("SU", "WithCache"))

# parameters that do not change the simulated geometry, SIR draws or loads
SIM_REUSABLE = frozenset({"gamma", "mu", "eta", "F_sc", "F", "tau_mc", "tau_sc"})

_OPTION_KEYS = {
    "include_leading_factor", "integrate_to_infinity", "use_one_minus_gamma_for_su",
    "c2_cap_use_tau_sc", "nu_grid_nodes",
}
_RUN_KEYS = {
    "topology", "mode", "sweep", "from", "to", "steps", "scale", "realizations", "seed",
    "chunk_size_bytes", "per_realization_load", "rel_tol",
}
_BYTE_UNITS = {"b": 1, "byte": 1, "bytes": 1, "kb": 1e3, "kbyte": 1e3, "mb": 1e6, "mbyte": 1e6,
               "gb": 1e9, "gbyte": 1e9, "gbytes": 1e9, "tb": 1e12, "tbyte": 1e12}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    start: float
    stop: float
    steps: int
    scale: str = "linear"

    def __post_init__(self):
        if self.variable not in FIELD_NAMES:
            raise ConfigError(f"sweep variable {self.variable!r} is not a network parameter")
        if not self.start < self.stop:
            raise ConfigError("sweep requires from < to")
        if self.steps < 2:
            raise ConfigError("sweep requires at least 2 steps")
        if self.scale not in ("linear", "log"):
            raise ConfigError("scale must be linear or log")
        if self.scale == "log" and self.start <= 0:
            raise ConfigError("log sweeps need a positive start")

    def values(self) -> list[float]:
        if self.scale == "log":
            v = np.geomspace(self.start, self.stop, self.steps)
        else:
            v = np.linspace(self.start, self.stop, self.steps)
        return [float(x) for x in v]


@dataclass
class RunOptions:
    mode: str = "both"
    realizations: int = 10000
    seed: int = 1
    workers: Optional[int] = None
    per_realization_load: bool = False
    theory: TheoryOptions = field(default_factory=TheoryOptions)
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    defaults_applied: tuple = ()


@dataclass
class Config:
    params: NetworkParams
    topology: Topology
    sweep: Optional[SweepSpec]
    run: RunOptions


@dataclass
class RunRecord:
    sweep_var: str
    value: float
    topology: Topology
    tier: str
    variant: str
    source: str
    mean: float
    ci_half_width: float
    n_samples: int
    seed: Optional[int]
    factors: dict = field(default_factory=dict)
    flags: tuple = ()
    timestamp: float = 0.0


# --- config -----------------------------------------------------------------

def _parse_bool(key, text):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def _parse_storage(key, text, chunk_size):
    m = re.fullmatch(r"\s*([-+0-9.eE]+)\s*([A-Za-z]*)\s*", text)
    if not m:
        raise ConfigError(f"{key}: cannot parse {text!r}")
    value = float(m.group(1))
    unit = m.group(2).lower()
    if not unit:
        return value
    if unit not in _BYTE_UNITS:
        raise ConfigError(f"{key}: unknown unit {m.group(2)!r}")
    return value * _BYTE_UNITS[unit] / chunk_size


def parse_config_text(text: str, source: str = "<config>") -> Config:
    raw: dict[str, tuple[int, str]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in body.split("=", 1))
        if key not in FIELD_NAMES and key not in _OPTION_KEYS and key not in _RUN_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        raw[key] = (lineno, value)

    def get(key, conv, default=None):
        if key not in raw:
            return default
        lineno, text_value = raw[key]
        try:
            return conv(text_value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {text_value!r}") from None

    chunk = get("chunk_size_bytes", float, 1e9)
    values = {}
    for name in FIELD_NAMES:
        if name in ("F_sc", "F"):
            v = get(name, lambda s, n=name: _parse_storage(n, s, chunk))
        elif name in ("lambda_ut_m", "dist_k", "dist_nu"):
            v = get(name, lambda s: None if s.lower() == "none" else float(s))
        else:
            v = get(name, float)
        if v is not None:
            values[name] = v
    defaults_applied = tuple(n for n in FIELD_NAMES if n not in raw)
    topology = get("topology", Topology.parse, Topology.COVERAGE)
    params = validate(NetworkParams(**values), topology)

    sweep = None
    if "sweep" in raw:
        sweep = SweepSpec(get("sweep", str), get("from", float), get("to", float), get("steps", int, 9),
                          get("scale", str, "linear"))
    opt_values = {}
    for k in sorted(_OPTION_KEYS & raw.keys()):
        if k == "nu_grid_nodes":
            opt_values[k] = get(k, int)
        else:
            opt_values[k] = get(k, lambda s, k=k: _parse_bool(k, s))
    opts = TheoryOptions(**opt_values)
    quad = QuadratureSpec(rel_tol=get("rel_tol", float, 1e-8))
    mode = get("mode", str, "both")
    if mode not in ("theory", "sim", "both"):
        raise ConfigError(f"{source}: mode must be theory, sim or both")
    run = RunOptions(mode=mode, realizations=get("realizations", int, 10000), seed=get("seed", int, 1),
                     per_realization_load=get("per_realization_load",
                                              lambda s: _parse_bool("per_realization_load", s), False),
                     theory=opts, quad=quad, defaults_applied=defaults_applied)
    return Config(params, topology, sweep, run)


def load_config(path) -> Config:
    """Read a flat ``key = value`` file; omitted parameters take documented defaults."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config_text(text, str(path))


def bundled_config(name: str) -> Path:
    """Path of a config shipped with the package (``fig3.conf`` or ``fig4.conf``)."""
    return Path(__file__).with_name("configs") / name


# --- sweeps -----------------------------------------------------------------

def _theory_point(args):
    p, t, q, opts = args
    mu = analytic.avg_rate_mu(t, p, q, opts)
    su_nc = analytic.avg_rate_su(t, p, q, opts, cache=False)
    su = analytic.avg_rate_su(t, p, q, opts, cache=True)
    return mu, su_nc, su


def _defaults_flags(cfg: Config) -> tuple:
    return tuple(f"default:{n}" for n in cfg.run.defaults_applied)


def run_sweep(cfg: Config, mode: Optional[str] = None) -> list[RunRecord]:
    """Evaluate theory and/or simulation at every sweep point."""
    mode = mode or cfg.run.mode
    if mode not in ("theory", "sim", "both"):
        raise ValueError(f"unknown mode {mode!r}")
    if cfg.sweep is None:
        raise ConfigError("no sweep specified")
    t, run, sw = cfg.topology, cfg.run, cfg.sweep
    values = sw.values()
    points = []
    for v in values:
        try:
            points.append(validate(cfg.params.replace(**{sw.variable: v}), t))
        except ValueError as exc:
            raise ConfigError(f"sweep point {sw.variable}={v!r}: {exc}") from None
    extra = _defaults_flags(cfg)
    stamp = time.time()
    records: list[RunRecord] = []

    if mode in ("theory", "both"):
        tasks = [(p, t, run.quad, run.theory) for p in points]
        nw = worker_count(run.workers)
        reusable = sw.variable in SIM_REUSABLE
        try:
            if nw > 1 and len(tasks) > 1 and not reusable:
                with ProcessPoolExecutor(max_workers=min(nw, len(tasks))) as ex:
                    results = list(ex.map(_theory_point, tasks))
            else:
                results = [_theory_point(task) for task in tasks]
        except ArithmeticError as exc:
            raise ArithmeticError(f"theory failed during {sw.variable} sweep: {exc}") from exc
        for v, trio in zip(values, results):
            for tb in trio:
                records.append(RunRecord(sw.variable, v, t, tb.tier, tb.variant, "theory", tb.avg_rate, 0.0, 0,
                                         None, dict(tb.factors), tuple(tb.flags) + extra, stamp))

    if mode in ("sim", "both"):
        shared = None
        for v, p in zip(values, points):
            try:
                if sw.variable in SIM_REUSABLE:
                    if shared is None:
                        shared = simulate_records(p, t, run.realizations, run.seed, run.workers)
                    rec = shared
                else:
                    rec = simulate_records(p, t, run.realizations, run.seed, run.workers)
                est = rates_from_records(rec, p, t, run.per_realization_load)
            except (ArithmeticError, RuntimeError) as exc:
                raise ArithmeticError(f"simulation failed at {sw.variable}={v!r}: {exc}") from exc
            for key, (tier, variant) in zip(("MU", "SU-NoCache", "SU"), CURVES):
                e = est[key]
                records.append(RunRecord(sw.variable, v, t, tier, variant, "sim", e.mean, e.ci_half_width,
                                         e.n_samples, run.seed, {}, extra, stamp))

    order = {c: i for i, c in enumerate(CURVES)}
    records.sort(key=lambda r: (values.index(r.value), r.source != "theory", order[(r.tier, r.variant)]))
    return records


# --- output -----------------------------------------------------------------

def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def emit_csv(records: list[RunRecord], path) -> None:
    """Write records with the fixed header; numbers use shortest round-trip form."""
    if not records:
        raise ValueError("no records to write")
    path = Path(path)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        for r in records:
            wr.writerow([r.sweep_var, _num(r.value), Topology.parse(r.topology).value, r.tier, r.variant,
                         r.source, _num(r.mean), _num(r.ci_half_width), str(int(r.n_samples)),
                         "" if r.seed is None else str(int(r.seed))])


def read_csv(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            row["value"] = float(row["value"])
            row["mean"] = float(row["mean"])
            row["ci"] = float(row["ci"])
            row["n"] = int(row["n"])
            row["seed"] = int(row["seed"]) if row["seed"] else None
            rows.append(row)
    return rows


def emit_metadata(records: list[RunRecord], path) -> None:
    """Sidecar JSON with factor breakdowns and assumption flags of every record."""
    out = []
    for r in records:
        d = dataclasses.asdict(r)
        d["topology"] = Topology.parse(r.topology).value
        d["flags"] = list(r.flags)
        out.append(d)
    Path(path).write_text(json.dumps(out, indent=1, sort_keys=True))


def curve_label(tier: str, variant: str, source: str) -> str:
    kind = "The." if source == "theory" else "Sim."
    suffix = " (No Cache)" if variant == "NoCache" else ""
    return f"{tier} {kind}{suffix}"


def emit_plot(records: list[RunRecord], path) -> list[str]:
    """Static SVG of mean rate against the sweep variable, one curve per tier/variant/source.

    Returns the legend labels in drawing order.
    """
    if not records:
        raise ValueError("no records to plot")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = []
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    try:
        for source in ("theory", "sim"):
            for tier, variant in CURVES:
                rows = [r for r in records if r.source == source and r.tier == tier and r.variant == variant]
                if not rows:
                    continue
                x = [r.value for r in rows]
                y = [r.mean for r in rows]
                label = curve_label(tier, variant, source)
                if source == "theory":
                    ax.plot(x, y, "-", marker="o", mfc="none", label=label)
                else:
                    ax.errorbar(x, y, yerr=[r.ci_half_width for r in rows], fmt="--", marker="x",
                                capsize=2, label=label)
                labels.append(label)
        ax.set_xlabel(records[0].sweep_var)
        ax.set_ylabel("average delivery rate [nats/s/Hz]")
        ax.grid(True, which="major")
        ax.legend(ncol=2, fontsize="small")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    return labels
