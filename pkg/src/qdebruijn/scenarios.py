"""Scenario configs, runs and reports.

A scenario is a TOML document (bundled files use the ``.cfg`` suffix)
describing one model, one initial state and a time grid. Running it
produces a table of per-time values plus a list of identity checks.

Top-level keys
--------------
kind         one of ``gds``, ``finite_lindblad``, ``classical_ou``, ``cross_validate``
name         optional label, defaults to the file stem
hbar         reduced Planck constant (default 1)
seed         integer seed for randomised checks (default 0)
fd_step      finite-difference step (default chosen from the generator norm)
output_path  output file stem relative to the output directory (default ``name``)

Tables: ``[time_grid]`` (``t_start``, ``t_end``, ``n_points``), ``[model]``,
``[initial_state]`` and the optional ``[expect]``, ``[monte_carlo]`` and
``[fock]``. Complex numbers are written ``[re, im]``; matrices are
row-major lists of rows.
"""

import math
import sys
import time
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__, classical, dqfi, fock, gaussian, linalg, lindblad
from .errors import ConfigError, DegeneracyError, QdbError, ValidationError

KINDS = ("gds", "finite_lindblad", "classical_ou", "cross_validate")

COLUMNS = {
    "gds": ("t", "S_vn", "h_wigner", "delta", "psi", "rate_analytic", "rate_fd", "gap_theta", "nu_min"),
    "finite_lindblad": ("t", "S_vn", "delta", "psi", "rate_fd", "spohn_pi", "phi_dot"),
    "classical_ou": ("t", "h", "diffusion_term", "drift_term", "rate_analytic", "rate_fd"),
    "cross_validate": ("t", "delta_fock", "delta_gauss", "psi_fock", "psi_gauss", "eps_trunc"),
}

_TOP_KEYS = {"kind", "name", "hbar", "seed", "fd_step", "output_path",
             "time_grid", "model", "initial_state", "expect", "monte_carlo", "fock"}
_MODEL_KEYS = {
    "gds": {"n_modes", "b_matrix", "xi", "lindblad_vectors", "diffusion", "dissipation"},
    "cross_validate": {"n_modes", "b_matrix", "xi", "lindblad_vectors", "diffusion", "dissipation"},
    "finite_lindblad": {"dim", "hamiltonian", "lindblads"},
    "classical_ou": {"dim", "drift", "noise", "offset"},
}
_STATE_KEYS = {
    "gds": {"mean", "covariance", "stationary_scale"},
    "cross_validate": {"mean", "covariance", "stationary_scale"},
    "finite_lindblad": {"rho", "mix_epsilon"},
    "classical_ou": {"mean", "covariance"},
}
_EXPECT_KEYS = {
    "gds": {"psi_zero", "converge_to_stationary", "stationary_covariance"},
    "cross_validate": {"psi_zero"},
    "finite_lindblad": {"initial_delta"},
    "classical_ou": {"heat_channel"},
}
DEFAULT_MIX_EPSILON = 1e-6
_MC_KEYS = {"n_paths", "step", "t", "max_z"}
_FOCK_KEYS = {"cutoff", "check_convergence"}
_GRID_KEYS = {"t_start", "t_end", "n_points"}


@dataclass
class ScenarioConfig:
    kind: str
    name: str
    hbar: float
    seed: int
    fd_step: float
    output_path: str
    times: np.ndarray
    model: object
    initial_state: object
    expect: dict = field(default_factory=dict)
    monte_carlo: dict = None
    fock_cutoff: int = 40
    check_convergence: bool = False
    source: str = None


@dataclass
class Check:
    name: str
    max_error: float
    tolerance: float

    @property
    def passed(self):
        return bool(np.isfinite(self.max_error) and self.max_error <= self.tolerance)


@dataclass
class RunReport:
    name: str
    kind: str
    columns: tuple
    rows: list
    checks: list
    wall_time: float = 0.0
    version: str = __version__

    @property
    def passed(self):
        return all(c.passed for c in self.checks)


class _CheckSet:
    """Collects per-time errors; keeps the worst error/tolerance ratio per name."""

    def __init__(self):
        self._checks = {}

    def add(self, name, error, tolerance):
        error = float(error)
        tolerance = float(tolerance)
        cur = self._checks.get(name)
        if cur is None or _ratio(error, tolerance) > _ratio(cur.max_error, cur.tolerance):
            self._checks[name] = Check(name, error, tolerance)

    def result(self):
        return list(self._checks.values())


def _ratio(error, tol):
    if not np.isfinite(error):
        return math.inf
    return error / tol if tol > 0 else (0.0 if error == 0 else math.inf)


# -- parsing helpers ------------------------------------------------------------------


class _Problems(list):
    def add(self, path, msg):
        self.append((path, msg))


def _number(x, path, problems, allow_complex=False):
    if isinstance(x, bool):
        problems.add(path, "expected a number, got a boolean")
        return None
    if isinstance(x, (int, float)):
        return float(x)
    if allow_complex and isinstance(x, list) and len(x) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in x
    ):
        return complex(x[0], x[1])
    kind = "a number or [re, im] pair" if allow_complex else "a number"
    problems.add(path, f"expected {kind}, got {x!r}")
    return None


def _vector(x, path, problems, length=None, allow_complex=False):
    if not isinstance(x, list):
        problems.add(path, "expected a list")
        return None
    vals = [_number(v, f"{path}[{i}]", problems, allow_complex) for i, v in enumerate(x)]
    if any(v is None for v in vals):
        return None
    if length is not None and len(vals) != length:
        problems.add(path, f"expected length {length}, got {len(vals)}")
        return None
    return np.array(vals, dtype=complex if allow_complex else float)


def _matrix(x, path, problems, shape=None, allow_complex=False):
    if not isinstance(x, list) or not x:
        problems.add(path, "expected a non-empty list of rows")
        return None
    rows = []
    for i, row in enumerate(x):
        r = _vector(row, f"{path}[{i}]", problems, allow_complex=allow_complex)
        if r is None:
            return None
        rows.append(r)
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        problems.add(path, "rows have different lengths")
        return None
    m = np.array(rows)
    if shape is not None and m.shape != shape:
        problems.add(path, f"expected shape {shape}, got {m.shape}")
        return None
    return m


def _check_keys(table, allowed, path, problems, strict):
    if not isinstance(table, dict):
        problems.add(path or "<root>", "expected a table")
        return False
    if strict:
        for key in table:
            if key not in allowed:
                problems.add(f"{path}.{key}" if path else key, "unknown key")
    return True


def _positive_int(x, path, problems, minimum=1):
    if isinstance(x, bool) or not isinstance(x, int) or x < minimum:
        problems.add(path, f"expected an integer >= {minimum}")
        return None
    return x


def _parse_grid(raw, problems, strict):
    if raw is None:
        problems.add("time_grid", "missing table")
        return None
    if not _check_keys(raw, _GRID_KEYS, "time_grid", problems, strict):
        return None
    t0 = _number(raw.get("t_start", 0.0), "time_grid.t_start", problems)
    t1 = _number(raw.get("t_end"), "time_grid.t_end", problems) if "t_end" in raw else None
    n = _positive_int(raw.get("n_points"), "time_grid.n_points", problems) if "n_points" in raw else None
    if "t_end" not in raw:
        problems.add("time_grid.t_end", "missing key")
    if "n_points" not in raw:
        problems.add("time_grid.n_points", "missing key")
    if t0 is None or t1 is None or n is None:
        return None
    if t0 < 0:
        problems.add("time_grid.t_start", "must be non-negative")
        return None
    if n > 1 and not t1 > t0:
        problems.add("time_grid.t_end", "time grid must be strictly increasing (t_end > t_start)")
        return None
    return np.linspace(t0, t1, n) if n > 1 else np.array([t0])


def _parse_gds_model(raw, hbar, problems):
    n = _positive_int(raw.get("n_modes"), "model.n_modes", problems)
    if n is None:
        return None
    dim = 2 * n
    b = _matrix(raw.get("b_matrix", np.zeros((dim, dim)).tolist()), "model.b_matrix", problems, (dim, dim))
    xi = _vector(raw.get("xi", [0.0] * dim), "model.xi", problems, dim)
    if b is not None:
        if np.abs(b - b.T).max() > 1e-12 * max(1.0, np.abs(b).max()):
            problems.add("model.b_matrix", "must be symmetric")
            b = None
        elif np.linalg.eigvalsh(b)[0] < -1e-10:
            problems.add("model.b_matrix", "must be positive semidefinite")
            b = None
    has_vecs = "lindblad_vectors" in raw
    has_mats = "diffusion" in raw or "dissipation" in raw
    if has_vecs == has_mats:
        problems.add("model", "give either lindblad_vectors or diffusion/dissipation matrices")
        return None
    if has_vecs:
        vecs_raw = raw["lindblad_vectors"]
        if not isinstance(vecs_raw, list):
            problems.add("model.lindblad_vectors", "expected a list of vectors")
            return None
        vecs = [
            _vector(v, f"model.lindblad_vectors[{i}]", problems, dim, allow_complex=True)
            for i, v in enumerate(vecs_raw)
        ]
        if b is None or xi is None or any(v is None for v in vecs):
            return None
        try:
            return gaussian.GdsModel(n, b, xi, np.array(vecs).reshape(-1, dim), hbar)
        except ValidationError as exc:
            problems.add("model.lindblad_vectors", str(exc))
            return None
    d = _matrix(raw.get("diffusion", np.zeros((dim, dim)).tolist()), "model.diffusion", problems, (dim, dim))
    c = _matrix(raw.get("dissipation", np.zeros((dim, dim)).tolist()), "model.dissipation", problems, (dim, dim))
    if b is None or xi is None or d is None or c is None:
        return None
    try:
        return gaussian.model_from_matrices(n, b, xi, d, c, hbar)
    except ValidationError as exc:
        problems.add("model.diffusion", str(exc))
        return None


def _parse_gds_state(raw, model, problems):
    dim = model.dim
    if "stationary_scale" in raw:
        if "covariance" in raw:
            problems.add("initial_state", "give either covariance or stationary_scale")
            return None
        scale = _number(raw["stationary_scale"], "initial_state.stationary_scale", problems)
        if scale is None:
            return None
        try:
            vs = gaussian.stationary_covariance(model)
        except QdbError as exc:
            problems.add("initial_state.stationary_scale", str(exc))
            return None
        cov = scale * vs.covariance
        default_mean = vs.mean
    else:
        cov = _matrix(raw.get("covariance"), "initial_state.covariance", problems, (dim, dim))
        default_mean = np.zeros(dim)
    mean = _vector(raw["mean"], "initial_state.mean", problems, dim) if "mean" in raw else default_mean
    if cov is None or mean is None:
        return None
    try:
        return gaussian.GaussianState(mean, cov)
    except ValidationError as exc:
        problems.add("initial_state.covariance", str(exc))
        return None


def _parse_lindblad_model(raw, hbar, problems):
    dim = _positive_int(raw.get("dim"), "model.dim", problems)
    if dim is None:
        return None
    h = _matrix(raw.get("hamiltonian", np.zeros((dim, dim)).tolist()), "model.hamiltonian", problems,
                (dim, dim), allow_complex=True)
    ls_raw = raw.get("lindblads", [])
    if not isinstance(ls_raw, list):
        problems.add("model.lindblads", "expected a list of matrices")
        return None
    ls = [_matrix(x, f"model.lindblads[{i}]", problems, (dim, dim), allow_complex=True) for i, x in enumerate(ls_raw)]
    if h is None or any(x is None for x in ls):
        return None
    try:
        return lindblad.LindbladModel(h, tuple(ls), hbar)
    except ValidationError as exc:
        problems.add("model.hamiltonian", str(exc))
        return None


def _parse_density(raw, dim, problems):
    """Density matrix; rank-deficient seeds are mixed with ``mix_epsilon * I/d``."""
    rho = _matrix(raw.get("rho"), "initial_state.rho", problems, (dim, dim), allow_complex=True)
    eps = _number(raw.get("mix_epsilon", DEFAULT_MIX_EPSILON), "initial_state.mix_epsilon", problems)
    if eps is not None and not 0 < eps < 1:
        problems.add("initial_state.mix_epsilon", "must lie in (0, 1)")
        return None
    if rho is None or eps is None:
        return None
    try:
        rho = linalg.check_density(rho)
    except ValidationError as exc:
        problems.add("initial_state.rho", str(exc))
        return None
    if np.linalg.eigvalsh(rho)[0] <= lindblad.FULL_RANK_TOL:
        rho = (1 - eps) * rho + eps * np.eye(dim) / dim
    return rho


def _parse_ou(raw, problems):
    dim = _positive_int(raw.get("dim"), "model.dim", problems)
    if dim is None:
        return None
    a = _matrix(raw.get("drift"), "model.drift", problems, (dim, dim))
    s = _matrix(raw.get("noise"), "model.noise", problems)
    off = _vector(raw.get("offset", [0.0] * dim), "model.offset", problems, dim)
    if s is not None and s.shape[0] != dim:
        problems.add("model.noise", f"expected {dim} rows, got {s.shape[0]}")
        return None
    if a is None or s is None or off is None:
        return None
    return classical.OuModel(a, s, off)


def _parse_density_gaussian(raw, dim, problems):
    cov = _matrix(raw.get("covariance"), "initial_state.covariance", problems, (dim, dim))
    mean = _vector(raw.get("mean", [0.0] * dim), "initial_state.mean", problems, dim)
    if cov is None or mean is None:
        return None
    try:
        return classical.GaussianDensity(mean, cov)
    except QdbError as exc:
        problems.add("initial_state.covariance", str(exc))
        return None


def parse_config(data, name="scenario", strict=False, source=None):
    """Validate a parsed TOML document; raises :class:`ConfigError` listing every problem."""
    problems = _Problems()
    if not _check_keys(data, _TOP_KEYS, "", problems, strict):
        raise ConfigError(problems)
    kind = data.get("kind")
    if kind not in KINDS:
        problems.add("kind", f"expected one of {', '.join(KINDS)}, got {kind!r}")
        raise ConfigError(problems)
    name = data.get("name", name)
    if not isinstance(name, str) or not name:
        problems.add("name", "expected a non-empty string")
    hbar = _number(data.get("hbar", 1.0), "hbar", problems)
    if hbar is not None and not hbar > 0:
        problems.add("hbar", "must be positive")
        hbar = None
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        problems.add("seed", "expected a non-negative integer")
    fd_step = data.get("fd_step")
    if fd_step is not None:
        fd_step = _number(fd_step, "fd_step", problems)
        if fd_step is not None and not fd_step > 0:
            problems.add("fd_step", "must be positive")
    output_path = data.get("output_path", name)
    if not isinstance(output_path, str) or not output_path:
        problems.add("output_path", "expected a non-empty string")
    times = _parse_grid(data.get("time_grid"), problems, strict)

    model_raw = data.get("model")
    state_raw = data.get("initial_state")
    model = state = None
    if model_raw is None:
        problems.add("model", "missing table")
    if state_raw is None:
        problems.add("initial_state", "missing table")
    if (
        model_raw is not None
        and state_raw is not None
        and _check_keys(model_raw, _MODEL_KEYS[kind], "model", problems, strict)
        and _check_keys(state_raw, _STATE_KEYS[kind], "initial_state", problems, strict)
        and hbar is not None
    ):
        if kind in ("gds", "cross_validate"):
            model = _parse_gds_model(model_raw, hbar, problems)
            if model is not None:
                state = _parse_gds_state(state_raw, model, problems)
        elif kind == "finite_lindblad":
            model = _parse_lindblad_model(model_raw, hbar, problems)
            if model is not None:
                state = _parse_density(state_raw, model.dim, problems)
        else:
            model = _parse_ou(model_raw, problems)
            if model is not None:
                state = _parse_density_gaussian(state_raw, model.dim, problems)

    expect = data.get("expect", {})
    if _check_keys(expect, _EXPECT_KEYS[kind], "expect", problems, strict):
        expect = {k: v for k, v in expect.items() if k in _EXPECT_KEYS[kind]}
        if "stationary_covariance" in expect and model is not None:
            sc = _matrix(expect["stationary_covariance"], "expect.stationary_covariance", problems,
                         (model.dim, model.dim))
            expect["stationary_covariance"] = sc
        if "initial_delta" in expect:
            expect["initial_delta"] = _number(expect["initial_delta"], "expect.initial_delta", problems)
        for key in ("psi_zero", "converge_to_stationary", "heat_channel"):
            if key in expect and not isinstance(expect[key], bool):
                problems.add(f"expect.{key}", "expected true or false")

    mc = data.get("monte_carlo")
    if mc is not None:
        if kind != "classical_ou":
            problems.add("monte_carlo", "only valid for kind classical_ou")
        elif _check_keys(mc, _MC_KEYS, "monte_carlo", problems, strict):
            mc = {
                "n_paths": _positive_int(mc.get("n_paths", 100_000), "monte_carlo.n_paths", problems, 2),
                "step": _number(mc.get("step", 1e-3), "monte_carlo.step", problems),
                "t": _number(mc["t"], "monte_carlo.t", problems) if "t" in mc else None,
                "max_z": _number(mc.get("max_z", 5.0), "monte_carlo.max_z", problems),
            }
            if mc["step"] is not None and not mc["step"] > 0:
                problems.add("monte_carlo.step", "must be positive")
            if mc["t"] is None and times is not None:
                mc["t"] = float(times[-1])

    cutoff, check_conv = 40, False
    fk = data.get("fock")
    if fk is not None:
        if kind != "cross_validate":
            problems.add("fock", "only valid for kind cross_validate")
        elif _check_keys(fk, _FOCK_KEYS, "fock", problems, strict):
            cutoff = _positive_int(fk.get("cutoff", 40), "fock.cutoff", problems, 2)
            check_conv = fk.get("check_convergence", False)
            if not isinstance(check_conv, bool):
                problems.add("fock.check_convergence", "expected true or false")

    if problems:
        raise ConfigError(problems)
    return ScenarioConfig(
        kind=kind,
        name=name,
        hbar=hbar,
        seed=seed,
        fd_step=fd_step,
        output_path=output_path,
        times=times,
        model=model,
        initial_state=state,
        expect=expect,
        monte_carlo=mc,
        fock_cutoff=cutoff,
        check_convergence=check_conv,
        source=source,
    )


def load_config(path, strict=False):
    """Read and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([(str(path), f"cannot read file: {exc.strerror}")]) from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([(str(path), f"parse error: {exc}")]) from None
    return parse_config(data, name=path.stem, strict=strict, source=str(path))


def bundled_scenarios():
    """Names of the scenario files shipped with the package."""
    root = resources.files("qdebruijn") / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def bundled_path(name):
    root = resources.files("qdebruijn") / "scenarios"
    return Path(str(root / f"{name}.cfg"))


def resolve_path(spec):
    """A file path, or the name of a bundled scenario."""
    p = Path(spec)
    if p.exists():
        return p
    if spec in bundled_scenarios():
        return bundled_path(spec)
    return p


# -- runners -----------------------------------------------------------------------------


def _richardson_rate(entropy_at, h):
    """Central difference at ``h`` and ``h/2`` combined by one Richardson step."""
    coarse = (entropy_at(h) - entropy_at(-h)) / (2 * h)
    fine = (entropy_at(h / 2) - entropy_at(-h / 2)) / h
    return (4 * fine - coarse) / 3


def _gds_fd_step(cfg):
    if cfg.fd_step is not None:
        return cfg.fd_step
    m = cfg.model
    scale = max(1.0, np.linalg.norm(m.drift, 2), np.linalg.norm(m.diffusion, 2) / m.hbar)
    return 1e-3 / scale


def _run_gds(cfg):
    m, s0 = cfg.model, cfg.initial_state
    h = _gds_fd_step(cfg)
    checks = _CheckSet()
    rows = []
    j = m.symplectic
    state = s0
    prev_t = 0.0
    for t in cfg.times:
        state = gaussian.evolve_moments(m, state, float(t - prev_t)) if t > prev_t else state
        prev_t = t
        nu = gaussian.symplectic_eigenvalues(state)
        rate = gaussian.quantum_debruijn_rate(m, state)
        fd = _richardson_rate(
            lambda d, st=state: gaussian.vn_entropy_gaussian(gaussian.flow_moments(m, st, d, "expm")), h
        )
        gap = gaussian.entropy_rate_gap(m, state)
        shannon = gaussian.shannon_debruijn_rate(m, state)
        u = gaussian.u_matrix(state)
        v = state.covariance
        rows.append((t, gaussian.vn_entropy_gaussian(state), gaussian.shannon_entropy_wigner(state),
                     rate.delta, rate.psi, rate.rate, fd, gap, nu[0]))
        checks.add("rate_vs_finite_difference", abs(fd - rate.rate), 1e-6 * max(1.0, abs(rate.rate)))
        checks.add("rate_vs_covariance_flow",
                   abs(gaussian.entropy_rate_from_covariance_flow(m, state) - rate.rate),
                   1e-9 * max(1.0, abs(rate.rate)))
        checks.add("gap_identity", abs(gap - (rate.rate - shannon)), 1e-8 * max(1.0, abs(rate.rate)))
        checks.add("u_commutes_with_vj", np.abs(u @ v @ j - j @ v @ u).max(), 1e-9 * max(1.0, np.abs(u @ v).max()))
        checks.add("physical_covariance", max(0.0, 0.5 - 1e-8 - nu[0]), 0.0)
        checks.add("dissipative_term_from_m_matrix",
                   abs(np.trace(m.dissipation @ j @ gaussian.m_matrix_gaussian(state)) - rate.psi),
                   1e-10 * max(1.0, abs(rate.psi)))
        if cfg.expect.get("psi_zero"):
            checks.add("psi_zero", abs(rate.psi), 1e-12)
    lang = gaussian.langevin_forces(m)
    recon = lang.sigma.T @ lang.sigma + lang.sigma_bar.T @ lang.sigma_bar
    checks.add("langevin_decomposition", np.abs(recon - m.diffusion).max(), 1e-12 * max(1.0, np.abs(m.diffusion).max()))
    if "stationary_covariance" in cfg.expect or cfg.expect.get("converge_to_stationary"):
        vs = gaussian.stationary_covariance(m)
        if "stationary_covariance" in cfg.expect:
            checks.add("stationary_closed_form", np.abs(vs.covariance - cfg.expect["stationary_covariance"]).max(), 1e-10)
        if cfg.expect.get("converge_to_stationary"):
            checks.add("converged_covariance", np.abs(state.covariance - vs.covariance).max(), 1e-6)
            checks.add("converged_rate", abs(rows[-1][5]), 1e-6)
    return rows, checks.result()


def _run_finite(cfg):
    m, rho0 = cfg.model, cfg.initial_state
    rng = np.random.default_rng(cfg.seed)
    checks = _CheckSet()
    try:
        rho_s = lindblad.stationary_state(m)
        lindblad.require_full_rank(rho_s)
    except (DegeneracyError, ValidationError):
        rho_s = None
    if cfg.expect.get("initial_delta") is not None:
        delta0, _ = lindblad.fluctuation_dissipation_terms(m, rho0)
        checks.add("initial_delta_closed_form", abs(delta0 - cfg.expect["initial_delta"]), 1e-8)
    probe = linalg.check_density(rho0)
    split_err = np.linalg.norm(
        lindblad.apply_l1(m, probe) + lindblad.apply_l2(m, probe) + lindblad.apply_l3(m, probe) - lindblad.apply_lnu(m, probe)
    )
    checks.add("generator_decomposition", split_err, 1e-10)
    rows = []
    for t in cfg.times:
        rho = lindblad.evolve(m, rho0, float(t)) if t > 0 else rho0
        rho = linalg.check_density(rho, tol=1e-9)
        rep = lindblad.entropy_rate_report(m, rho, cfg.fd_step, t=float(t), rho_stationary=rho_s)
        rows.append((t, rep.entropy, rep.delta, rep.psi, rep.rate_fd,
                     math.nan if rep.spohn_pi is None else rep.spohn_pi,
                     math.nan if rep.flux_phi_dot is None else rep.flux_phi_dot))
        checks.add("rate_vs_finite_difference", rep.residual, rep.rate_tol)
        checks.add("delta_from_dqfi", abs(dqfi.delta_from_dqfi(m, rho) - rep.delta),
                   1e-9 * max(1.0, abs(rep.delta)))
        alphas = rng.normal(size=m.n_lindblads) + 1j * rng.normal(size=m.n_lindblads)
        gd, gp = lindblad.fluctuation_dissipation_terms(lindblad.gauge_transform(m, alphas), rho)
        checks.add("gauge_invariance", max(abs(gd - rep.delta), abs(gp - rep.psi)), 1e-8)
        if rho_s is not None:
            checks.add("spohn_nonnegative", max(0.0, -rep.spohn_pi), 1e-6)
    if rho_s is not None:
        pi, phi = lindblad.spohn_production(m, rho_s, rho_s, cfg.fd_step)
        checks.add("spohn_stationary_balance", abs(pi - phi), 1e-6)
    return rows, checks.result()


def _run_classical(cfg):
    m, g0 = cfg.model, cfg.initial_state
    rng = np.random.default_rng(cfg.seed)
    h = cfg.fd_step if cfg.fd_step is not None else 1e-3 / max(1.0, np.linalg.norm(m.drift, 2),
                                                                  np.linalg.norm(m.diffusion, 2))
    checks = _CheckSet()
    rows = []
    g = g0
    prev_t = 0.0
    k = m.noise.shape[1]
    q, _ = np.linalg.qr(rng.normal(size=(k, k)))
    rotated = classical.OuModel(m.drift, m.noise @ q, m.offset)
    for t in cfg.times:
        g = classical.evolve_density(m, g, float(t - prev_t)) if t > prev_t else g
        prev_t = t
        terms = classical.debruijn_rate(m, g)
        fd = _richardson_rate(lambda d, gg=g: classical.shannon_entropy(classical.flow_density(m, gg, d, "expm")), h)
        rows.append((t, classical.shannon_entropy(g), terms.diffusion_term, terms.drift_term, terms.rate, fd))
        checks.add("rate_vs_finite_difference", abs(fd - terms.rate), 1e-6 * max(1.0, abs(terms.rate)))
        parts = classical.langevin_fisher_decomposition(m, g)
        checks.add("langevin_fisher_sum", abs(0.5 * sum(parts) - terms.diffusion_term), 1e-10 * max(1.0, terms.diffusion_term))
        checks.add("stiefel_invariance", abs(classical.debruijn_rate(rotated, g).diffusion_term - terms.diffusion_term),
                   1e-10 * max(1.0, terms.diffusion_term))
        if cfg.expect.get("heat_channel"):
            exact = 1.0 / (2.0 * (g0.covariance[0, 0] + t))
            checks.add("heat_channel_closed_form", abs(terms.rate - exact), 1e-9)
    if cfg.monte_carlo is not None:
        mc = cfg.monte_carlo
        sampler = classical.gaussian_sampler(g0)
        samples = classical.simulate_sde(m, sampler, mc["t"], mc["step"], mc["n_paths"], cfg.seed)
        z = classical.moment_zscores(samples, classical.evolve_density(m, g0, mc["t"]))
        checks.add("monte_carlo_moments", z.max_z, mc["max_z"])
        again = classical.simulate_sde(m, sampler, mc["t"], mc["step"], mc["n_paths"], cfg.seed)
        checks.add("monte_carlo_reproducible", 0.0 if np.array_equal(samples, again) else math.inf, 0.0)
    return rows, checks.result()


def _run_cross(cfg):
    m, s0 = cfg.model, cfg.initial_state
    tr = fock.FockTruncation(m.n_modes, cfg.fock_cutoff, m.hbar)
    rng = np.random.default_rng(cfg.seed)
    checks = _CheckSet()
    rows = []
    state = s0
    prev_t = 0.0
    for t in cfg.times:
        state = gaussian.evolve_moments(m, state, float(t - prev_t)) if t > prev_t else state
        prev_t = t
        rep = fock.cross_validate_rates(m, state, tr, rng=rng)
        rows.append((t, rep.delta_fock, rep.delta_gauss, rep.psi_fock, rep.psi_gauss, rep.eps_trunc))
        for c in rep.checks:
            checks.add(c.name, c.error, c.tolerance)
        if cfg.expect.get("psi_zero"):
            checks.add("psi_zero", max(abs(rep.psi_fock), abs(rep.psi_gauss)), 1e-10)
        if cfg.check_convergence:
            half = fock.FockTruncation(m.n_modes, max(2, cfg.fock_cutoff // 2), m.hbar)
            coarse = fock.cross_validate_rates(m, state, half, tail_tol=None, identity_checks=False)
            # doubling the cutoff must not increase the discrepancy (roundoff floor 1e-10)
            checks.add("cutoff_doubling", max(0.0, rep.discrepancy - max(coarse.discrepancy, 1e-10)), 0.0)
    return rows, checks.result()


_RUNNERS = {
    "gds": _run_gds,
    "finite_lindblad": _run_finite,
    "classical_ou": _run_classical,
    "cross_validate": _run_cross,
}


def run_scenario(cfg):
    """Run a validated scenario; module errors are re-raised with the scenario name."""
    start = time.perf_counter()
    try:
        rows, checks = _RUNNERS[cfg.kind](cfg)
    except QdbError as exc:
        exc.args = (f"scenario {cfg.name!r}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
        raise
    return RunReport(
        name=cfg.name,
        kind=cfg.kind,
        columns=COLUMNS[cfg.kind],
        rows=[tuple(float(v) for v in r) for r in rows],
        checks=checks,
        wall_time=time.perf_counter() - start,
    )


def apply_overrides(cfg, fd_step=None, cutoff=None, seed=None):
    changes = {}
    if fd_step is not None:
        if not fd_step > 0:
            raise ConfigError([("--fd-step", "must be positive")])
        changes["fd_step"] = fd_step
    if cutoff is not None:
        if cutoff < 2:
            raise ConfigError([("--cutoff", "must be >= 2")])
        changes["fock_cutoff"] = cutoff
    if seed is not None:
        if seed < 0:
            raise ConfigError([("--seed", "must be non-negative")])
        changes["seed"] = seed
    return replace(cfg, **changes) if changes else cfg


# -- output ---------------------------------------------------------------------------------


def _fmt(x):
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def format_csv(r):
    lines = [",".join(r.columns)]
    lines.extend(",".join(_fmt(v) for v in row) for row in r.rows)
    return "\n".join(lines) + "\n"


def format_text(r):
    lines = [f"scenario: {r.name}", f"kind: {r.kind}", f"version: {r.version}", f"points: {len(r.rows)}"]
    for c in r.checks:
        status = "PASS" if c.passed else "FAIL"
        lines.append(f"{status} {c.name} max_error={_fmt(c.max_error)} tolerance={_fmt(c.tolerance)}")
    lines.append(f"result: {'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


def emit_report(r, output_dir, stem=None, formats=("csv", "text")):
    """Write ``<stem>.csv`` and/or ``<stem>.txt``; returns the written paths.

    Wall time is left out so identical runs give identical bytes.
    """
    out = Path(output_dir)
    stem = r.name if stem is None else stem
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for fmt in formats:
            if fmt == "csv":
                path, body = out / f"{stem}.csv", format_csv(r)
            elif fmt == "text":
                path, body = out / f"{stem}.txt", format_text(r)
            else:
                raise ValidationError(f"unknown report format {fmt!r}")
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(body)
            written.append(path)
    except OSError as exc:
        raise ValidationError(f"cannot write report to {out}: {exc.strerror}") from None
    return written
