"""Configuration-driven runs that write CSV tables plus a JSON manifest."""

import ast
import csv
import json
import math
import operator
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__, kernels
from .dissipators import JumpSet, build_dephasing_set, build_jump_set
from .errors import ConfigError, SolverError
from .lattice import LatticeSpec, build_tasaki, classify_states, eigendecompose
from .observables import eigenbasis_matrix, fidelity, localized_fraction, phase_profile, spatial_diagonal
from .solvers import DENSE_CAP, evolve, spectral_gap, steady_state
from .superop import assemble_liouvillian

WORKERS_ENV = "FLATDISS_WORKERS"
DEFAULT_SWEEP_POINTS = 33
# reference indices at L = 60 (N = 121) and L = 200 (N = 401)
_REF_LOCALIZED_INIT = 20
_REF_EIGENSTATES = (34, 244)

# --------------------------------------------------------------------------
# value parsing

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def parse_number(text):
    """Float from a literal or a small arithmetic expression in ``pi``."""
    text = str(text).strip()
    try:
        return float(text)
    except ValueError:
        pass
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse number {text!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ConfigError(f"unsupported expression {text!r}")

    try:
        return float(ev(tree))
    except ZeroDivisionError as exc:
        raise ConfigError(f"division by zero in {text!r}") from exc


def parse_grid(text):
    """``start:stop:count`` (inclusive linspace) or a comma-separated list."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid must be start:stop:count, got {text!r}")
        start, stop = parse_number(parts[0]), parse_number(parts[1])
        count = _parse_int(parts[2], "grid count")
        if count < 1:
            raise ConfigError("grid count must be >= 1")
        return tuple(float(a) for a in np.linspace(start, stop, count))
    return tuple(parse_number(p) for p in text.split(",") if p.strip())


def _parse_int(text, name):
    try:
        value = float(str(text).strip())
    except ValueError as exc:
        raise ConfigError(f"{name} must be an integer, got {text!r}") from exc
    if not value.is_integer():
        raise ConfigError(f"{name} must be an integer, got {text!r}")
    return int(value)


def _parse_bool(text, name):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{name} must be a boolean, got {text!r}")


def _parse_int_list(text, name):
    t = str(text).strip().lower()
    if t in ("", "auto"):
        return None
    return tuple(_parse_int(p, name) for p in t.split(",") if p.strip())


def _parse_optional_number(text):
    t = str(text).strip().lower()
    if t in ("", "auto", "none"):
        return None
    return parse_number(text)


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    lattice: LatticeSpec = field(default_factory=lambda: LatticeSpec(30))
    l: int = 1
    alpha: float | None = None
    alpha_grid: tuple | None = None
    gamma: float = 1.0
    dephasing_gamma: float | None = None
    two_site: bool = True
    solver: str = "linear"
    dense_cap: int = DENSE_CAP
    initial_states: tuple | None = None
    t_max: float | None = None
    n_points: int = 201
    dynamics_method: str = "adaptive_rk"
    retain_states: bool = False
    output_dir: str = "out"
    seed: int = 0
    eigenstate_indices: tuple | None = None
    amp_tol: float = 1e-10
    energy_tol: float = 1e-8
    gnuplot: bool = False

    def __post_init__(self):
        n = self.lattice.n_sites
        if self.alpha is not None and self.alpha_grid is not None:
            raise ConfigError("give either alpha or alpha_sweep, not both")
        if self.alpha_grid is not None and len(self.alpha_grid) == 0:
            raise ConfigError("alpha_sweep is empty")
        if self.l < 1 or self.l >= n:
            raise ConfigError(f"range l must satisfy 1 <= l < {n}, got {self.l}")
        if not self.gamma > 0:
            raise ConfigError("gamma must be > 0")
        if self.dephasing_gamma is not None and not self.dephasing_gamma > 0:
            raise ConfigError("dephasing_gamma must be > 0")
        if not self.two_site and self.dephasing_gamma is None:
            raise ConfigError("no dissipation: two_site is off and dephasing_gamma is unset")
        if self.solver not in ("linear", "dense"):
            raise ConfigError(f"solver must be 'linear' or 'dense', got {self.solver!r}")
        if self.dynamics_method not in ("adaptive_rk", "krylov_expm", "dense_expm"):
            raise ConfigError(f"unknown dynamics_method {self.dynamics_method!r}")
        for name in ("initial_states", "eigenstate_indices"):
            idx = getattr(self, name)
            if idx is not None and any(not 1 <= i <= n for i in idx):
                raise ConfigError(f"{name} must lie in [1, {n}], got {idx}")
        if self.t_max is not None and not self.t_max > 0:
            raise ConfigError("t_max must be > 0")
        if self.n_points < 2:
            raise ConfigError("n_points must be >= 2")

    @property
    def single_alpha(self):
        if self.alpha_grid is not None:
            raise ConfigError("this command needs a single alpha, not alpha_sweep")
        return math.pi if self.alpha is None else self.alpha

    @property
    def sweep_grid(self):
        if self.alpha_grid is not None:
            return self.alpha_grid
        if self.alpha is not None:
            raise ConfigError("sweep needs alpha_sweep, got a single alpha")
        return tuple(float(a) for a in np.linspace(0.0, math.pi, DEFAULT_SWEEP_POINTS))

    def echo(self):
        d = asdict(self)
        d["lattice"] = {"L": self.lattice.L, "u": self.lattice.u, "v": self.lattice.v}
        for key in ("alpha_grid", "initial_states", "eigenstate_indices"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d


_KEYS = {
    "L": lambda s: _parse_int(s, "L"),
    "u": parse_number,
    "v": parse_number,
    "l": lambda s: _parse_int(s, "l"),
    "alpha": parse_number,
    "alpha_sweep": parse_grid,
    "gamma": parse_number,
    "dephasing_gamma": _parse_optional_number,
    "two_site": lambda s: _parse_bool(s, "two_site"),
    "solver": lambda s: str(s).strip(),
    "dense_cap": lambda s: _parse_int(s, "dense_cap"),
    "initial_states": lambda s: _parse_int_list(s, "initial_states"),
    "t_max": _parse_optional_number,
    "n_points": lambda s: _parse_int(s, "n_points"),
    "dynamics_method": lambda s: str(s).strip(),
    "retain_states": lambda s: _parse_bool(s, "retain_states"),
    "output_dir": lambda s: str(s).strip(),
    "seed": lambda s: _parse_int(s, "seed"),
    "eigenstate_indices": lambda s: _parse_int_list(s, "eigenstate_indices"),
    "amp_tol": parse_number,
    "energy_tol": parse_number,
    "gnuplot": lambda s: _parse_bool(s, "gnuplot"),
}


def parse_config_text(text):
    """``key = value`` lines into a raw dict; ``#`` starts a comment."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def build_config(raw):
    """RunConfig from string values (config file entries and CLI overrides)."""
    values = {}
    for key, text in raw.items():
        if text is None:
            continue
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = _KEYS[key](text)
    lat = {k: values.pop(k) for k in ("L", "u", "v") if k in values}
    try:
        lattice = LatticeSpec(**{"L": 30, **lat})
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if "alpha_sweep" in values:
        values["alpha_grid"] = values.pop("alpha_sweep")
    return RunConfig(lattice=lattice, **values)


def load_config(path=None, overrides=None):
    raw = {}
    if path is not None:
        try:
            raw = parse_config_text(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = str(value)
    if "alpha" in (overrides or {}) and overrides["alpha"] is not None:
        raw.pop("alpha_sweep", None)
    return build_config(raw)


# --------------------------------------------------------------------------
# output


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


@dataclass
class OutputBundle:
    directory: Path
    manifest: dict
    tables: dict

    @property
    def ok(self):
        return self.manifest.get("status") == "ok"


class _BundleWriter:
    def __init__(self, config, command):
        self.config = config
        self.command = command
        self.directory = Path(config.output_dir)
        self.tables = {}
        self.columns = {}
        self.extra = {}

    def table(self, name, header, rows):
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.tables[name] = path
        self.columns[name] = list(header)

    def finish(self, status="ok", **extra):
        self.directory.mkdir(parents=True, exist_ok=True)
        manifest = {
            "command": self.command,
            "status": status,
            "parameters": self.config.echo(),
            "versions": {
                "flatdiss": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
                "kernel_backend": kernels.backend(),
            },
            "tables": sorted(self.tables),
            **self.extra,
            **extra,
        }
        if self.config.gnuplot:
            manifest["gnuplot"] = {
                name: {"columns": {c: i + 1 for i, c in enumerate(cols)}, "separator": ","}
                for name, cols in sorted(self.columns.items())
            }
        with open(self.directory / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return OutputBundle(self.directory, manifest, dict(self.tables))


# --------------------------------------------------------------------------
# runs


def _workers():
    text = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(text)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {text!r}") from exc
    return max(1, n)


def _map(fn, items):
    items = list(items)
    workers = min(_workers(), len(items)) or 1
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))  # results arrive in submission order


def _spectrum(config):
    h = build_tasaki(config.lattice)
    return h, eigendecompose(h)


def build_jumps(config, alpha):
    n = config.lattice.n_sites
    jumps = JumpSet((), n)
    if config.two_site:
        jumps = jumps + build_jump_set(n, config.l, alpha, config.gamma)
    if config.dephasing_gamma is not None:
        jumps = jumps + build_dephasing_set(n, config.dephasing_gamma)
    return jumps


def _phase_jumps(config):
    return build_jump_set(config.lattice.n_sites, config.l, 0.0, config.gamma)


def _gauge_info(spectrum):
    return [[start + 1, stop] for start, stop in spectrum.degenerate_blocks]


def default_eigenstate_indices(n):
    return tuple(sorted({max(1, min(n, round(i * n / 401))) for i in _REF_EIGENSTATES}))


def default_initial_states(L):
    """(localized, mid-spectrum extended, top of spectrum), 1-based."""
    n = 2 * L + 1
    localized = max(1, min(L + 1, round(_REF_LOCALIZED_INIT * (L + 1) / 61)))
    mid = min(n, L + 2)
    idx = []
    for i in (localized, mid, n):
        if i not in idx:
            idx.append(i)
    return tuple(idx)


def run_spectrum(config):
    """spectrum.csv, phase_profile.csv and eigenstate_<n>.csv tables."""
    writer = _BundleWriter(config, "spectrum")
    _, spec = _spectrum(config)
    cls = classify_states(spec, config.lattice.v, config.energy_tol)
    n = spec.n_states
    loc = np.zeros(n, dtype=bool)
    loc[cls.localized_indices] = True
    writer.table(
        "spectrum.csv",
        ["n", "energy", "ipr", "is_localized"],
        [(i + 1, spec.energies[i], cls.ipr[i], loc[i]) for i in range(n)],
    )
    pin = phase_profile(spec, config.l, _phase_jumps(config), config.amp_tol)
    writer.table("phase_profile.csv", ["n", "P_in"], [(i + 1, pin[i]) for i in range(n)])
    selected = config.eigenstate_indices or default_eigenstate_indices(n)
    for q in selected:
        col = spec.states[:, q - 1]
        writer.table(f"eigenstate_{q}.csv", ["j", "amplitude"], [(j + 1, col[j]) for j in range(n)])
    return writer.finish(
        localized_count=cls.localized_count,
        flat_band_count=int(cls.flat_band_indices.size),
        flat_band_is_prefix=cls.flat_band_is_prefix,
        classification_rules_agree=cls.rules_agree,
        gauge_sensitive_blocks=_gauge_info(spec),
        pair_count=_phase_jumps(config).pair_count,
        selected_eigenstates=list(selected),
    )


def _solve(config, h, alpha):
    superop = assemble_liouvillian(h, build_jumps(config, alpha))
    kwargs = {"dense_cap": config.dense_cap} if config.solver == "dense" else {}
    return superop, steady_state(superop, config.solver, **kwargs)


def _gap(superop, config):
    try:
        return spectral_gap(superop, dense_cap=config.dense_cap)
    except (SolverError, ValueError, np.linalg.LinAlgError):
        return float("nan")


def run_steady(config):
    """rho_eig.csv, eig_diag.csv, spatial_diag.csv and scalars.csv."""
    writer = _BundleWriter(config, "steady")
    alpha = config.single_alpha
    h, spec = _spectrum(config)
    try:
        superop, report = _solve(config, h, alpha)
    except SolverError as exc:
        writer.finish(status="failed", error=f"{type(exc).__name__}: {exc}")
        raise
    gap = report.gap if report.gap is not None else _gap(superop, config)
    rho = report.state
    eig = eigenbasis_matrix(rho, spec)
    n = spec.n_states
    writer.table(
        "rho_eig.csv",
        ["m", "n", "re", "im"],
        [(m + 1, q + 1, eig[m, q].real, eig[m, q].imag) for m in range(n) for q in range(n)],
    )
    diag = np.real(np.diagonal(eig))
    writer.table("eig_diag.csv", ["n", "rho_nn"], [(i + 1, diag[i]) for i in range(n)])
    space = spatial_diagonal(rho)
    writer.table("spatial_diag.csv", ["j", "rho_jj"], [(j + 1, space[j]) for j in range(n)])
    p_l = localized_fraction(eig, spec.localized_count)
    writer.table(
        "scalars.csv",
        ["P_l", "residual", "gap", "zero_multiplicity"],
        [(p_l, report.residual, gap, report.zero_multiplicity)],
    )
    peak = int(np.argmax(diag))
    return writer.finish(
        alpha=alpha,
        solver=report.method,
        localized_count=spec.localized_count,
        max_eig_diag={"n": peak + 1, "value": float(diag[peak]), "is_localized": peak < spec.localized_count},
        gauge_sensitive_blocks=_gauge_info(spec),
    )


def run_sweep(config):
    """pl_vs_alpha.csv over the configured alpha grid."""
    writer = _BundleWriter(config, "sweep")
    grid = config.sweep_grid
    h, spec = _spectrum(config)

    def point(alpha):
        try:
            _, report = _solve(config, h, alpha)
        except SolverError as exc:
            return alpha, float("nan"), float("nan"), f"{type(exc).__name__}: {exc}"
        eig = eigenbasis_matrix(report.state, spec)
        return alpha, localized_fraction(eig, spec.localized_count), report.residual, None

    results = _map(point, grid)
    writer.table("pl_vs_alpha.csv", ["alpha", "P_l", "residual"], [r[:3] for r in results])
    failures = [{"alpha": r[0], "error": r[3]} for r in results if r[3]]
    return writer.finish(
        status="ok" if not failures else "partial",
        failures=failures,
        localized_count=spec.localized_count,
    )


def dynamics_horizon(superop, config):
    """``(t_max, gap)``: 10/gap when the gap is available, else 50/gamma."""
    gap = _gap(superop, config)
    if config.t_max is not None:
        return config.t_max, gap
    if math.isfinite(gap) and gap > 0:
        return 10.0 / gap, gap
    return 50.0 / config.gamma, gap


def run_dynamics(config):
    """fidelity.csv (t, index, F) and invariants.csv (worst case over runs)."""
    writer = _BundleWriter(config, "dynamics")
    alpha = config.single_alpha
    h, spec = _spectrum(config)
    superop = assemble_liouvillian(h, build_jumps(config, alpha))
    t_max, gap = dynamics_horizon(superop, config)
    times = np.linspace(0.0, t_max, config.n_points)
    indices = config.initial_states or default_initial_states(config.lattice.L)

    def one(index):
        psi = spec.states[:, index - 1]
        rho0 = np.outer(psi, psi).astype(complex)
        try:
            rec = evolve(
                h,
                superop.jumps,
                rho0,
                times,
                method=config.dynamics_method,
                dense_cap=config.dense_cap,
                retain_states=config.retain_states,
                observables={"F": lambda rho: fidelity(rho, rho0)},
                superop=superop,
            )
        except SolverError as exc:
            return index, None, {"index": index, "error": f"{type(exc).__name__}: {exc}", "last_valid_time": getattr(exc, "last_time", None)}
        return index, rec, None

    results = _map(one, indices)
    rows = []
    for index, rec, _ in results:
        if rec is not None:
            rows.extend((t, index, f) for t, f in zip(rec.times, rec.observables["F"]))
    writer.table("fidelity.csv", ["t", "index", "F"], rows)
    recs = [rec for _, rec, _ in results if rec is not None]
    if recs:
        trace_err = np.max([r.observables["trace_err"] for r in recs], axis=0)
        min_eig = np.min([r.observables["min_eig"] for r in recs], axis=0)
        herm_err = np.max([r.observables["herm_err"] for r in recs], axis=0)
        inv_rows = list(zip(times, trace_err, min_eig, herm_err))
    else:
        inv_rows = []
    writer.table("invariants.csv", ["t", "trace_err", "min_eig", "herm_err"], inv_rows)
    failures = [f for _, _, f in results if f]
    localized = spec.localized_count
    roles = {}
    for i in indices:
        if i <= localized:
            roles[str(i)] = "localized"
        elif i == spec.n_states:
            roles[str(i)] = "top_of_spectrum"
        else:
            roles[str(i)] = "extended"
    return writer.finish(
        status="ok" if not failures else "partial",
        failures=failures,
        alpha=alpha,
        t_max=t_max,
        gap=gap,
        initial_states=list(indices),
        initial_state_roles=roles,
        initial_state_mapping="reference L=60 indices (20, 61, 121) mapped to (round(20(L+1)/61), L+2, 2L+1)",
        invariants_aggregation="worst case over initial states at each time",
        localized_count=localized,
    )


RUNNERS = {
    "spectrum": run_spectrum,
    "steady": run_steady,
    "sweep": run_sweep,
    "dynamics": run_dynamics,
}


def with_output(config, directory):
    return replace(config, output_dir=str(directory))
