"""Experiment orchestration: configs, initial data, runs, sweeps, studies.

A ScenarioConfig is a flat bag of primitives (parsable from a key = value
text file) that fully determines one simulation: physics, closure,
regularization, resolution, step control, horizon, initial data, and seed.
run() integrates it and persists deterministic artifacts:

* diagnostics.csv   — one DiagnosticsRecord per sample time,
* snapshot_*.csv    — grid profiles (x, f, g, gamma) at selected samples,
* checkpoint.json   — config echo + state + controller state, rewritten at
                      every sample so a run can always be resumed from the
                      last completed sample (bit-exact restart),
* failure.json      — written instead of a final checkpoint when the
                      integrator aborts; partial artifacts are kept.

On top of run() sit the studies: an eps continuation sweep measuring how
the negativity functionals scale as the regularization vanishes, a
resolution sweep, a mu = 0 reduction against an independent single-field
reference solver, and a linear-response study comparing fitted modal decay
rates against the dispersion matrix.
"""

import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .closures import PhysicalParams, SurfactantClosure, quadratic_closure
from .diagnostics import (DiagnosticsRecord, MollifierKernel, collect, energy,
                          dispersion_matrix, kernel_by_name)
from .fluxes import Problem, SpectralState, assemble_rhs
from .regularization import a_eps
from .spectral import CosineBasis, evaluate_coeffs
from .timestepper import StepAux, StepControl, StiffnessAbort, integrate_ode

_CLOSURES = {"quadratic": quadratic_closure}


# ---------------------------------------------------------------------------
# initial data


@dataclass(frozen=True)
class InitialDataSpec:
    """One field's initial profile, parsed from a compact spec string.

    Grammar (modes are cosine modes k of cos(k*pi*x/L)):
      constant:C
      cosine:BASE,AMP@K[,AMP@K...]        exact band-limited profile
      clipped:BASE,AMP@K[,AMP@K...]       max(0, cosine sum), projected
      touching:AMP@K                      AMP*(1+cos(k*pi*x/L))^2/4, exact,
                                          touches zero quadratically
      random:FLOOR,AMP,KMAX               seeded band-limited noise >= FLOOR
    """

    kind: str
    base: float = 0.0
    modes: tuple = ()            # ((k, amp), ...)
    floor: float = 0.0
    amp: float = 0.0
    kmax: int = 0

    @classmethod
    def parse(cls, text: str) -> "InitialDataSpec":
        text = text.strip()
        kind, _, args = text.partition(":")
        try:
            if kind == "constant":
                return cls("constant", base=float(args))
            if kind in ("cosine", "clipped"):
                parts = args.split(",")
                base = float(parts[0])
                modes = []
                for term in parts[1:]:
                    amp_s, _, k_s = term.partition("@")
                    modes.append((int(k_s), float(amp_s)))
                if kind == "clipped" and not modes:
                    raise ValueError("clipped needs at least one mode term")
                return cls(kind, base=base, modes=tuple(modes))
            if kind == "touching":
                amp_s, _, k_s = args.partition("@")
                return cls("touching", amp=float(amp_s), modes=((int(k_s), 0.0),))
            if kind == "random":
                floor_s, amp_s, kmax_s = args.split(",")
                return cls("random", floor=float(floor_s), amp=float(amp_s),
                           kmax=int(kmax_s))
        except (ValueError, IndexError) as exc:
            if isinstance(exc, ValueError) and "needs at least" in str(exc):
                raise
            raise ValueError(f"malformed initial-data spec {text!r}") from exc
        raise ValueError(f"unknown initial-data kind {kind!r} in {text!r}")

    def node_values(self, basis: CosineBasis, rng: np.random.Generator):
        """The specified profile sampled on the collocation nodes."""
        x = basis.nodes
        theta = math.pi / basis.length
        if self.kind == "constant":
            return np.full_like(x, self.base)
        if self.kind in ("cosine", "clipped"):
            vals = np.full_like(x, self.base)
            for k, amp in self.modes:
                vals = vals + amp * np.cos(k * theta * x)
            return np.maximum(vals, 0.0) if self.kind == "clipped" else vals
        if self.kind == "touching":
            k = self.modes[0][0]
            return self.amp * (1.0 + np.cos(k * theta * x)) ** 2 / 4.0
        if self.kind == "random":
            profile = np.zeros_like(x)
            for k in range(1, self.kmax + 1):
                profile = profile + rng.uniform(-1.0, 1.0) * np.cos(k * theta * x)
            return self.floor + self.amp * (profile - profile.min())
        raise AssertionError(self.kind)

    def build(self, basis: CosineBasis, rng: np.random.Generator) -> np.ndarray:
        """Coefficients of the profile; exact where band-limited.

        The sampled profile must be non-negative on the grid (the system's
        hypotheses); a violating spec is rejected.  Projection of the
        non-band-limited kinds may still overshoot slightly negative
        between coefficients — that residue is exactly what the negativity
        functionals are there to measure.
        """
        vals = self.node_values(basis, rng)
        if vals.min() < 0.0:
            raise ValueError(
                f"initial data {self.kind!r} is negative on the grid "
                f"(min {vals.min():.3g}); fields must start non-negative")
        if self.kind == "constant":
            return basis.coeffs_from_cosine(self.base)
        if self.kind == "cosine":
            return basis.coeffs_from_cosine(self.base, dict(self.modes))
        if self.kind == "touching":
            k = self.modes[0][0]
            if 2 * k > basis.n:
                raise ValueError(f"touching mode {k} needs basis order >= {2 * k}")
            return basis.coeffs_from_cosine(
                0.375 * self.amp, {k: 0.5 * self.amp, 2 * k: 0.125 * self.amp})
        return basis.analyze(vals)


# ---------------------------------------------------------------------------
# configuration

# key -> type tag; keys and defaults live on the ScenarioConfig dataclass
_CONFIG_FIELDS = {
    # physics
    "length": "float", "mu": "float", "sigma1c": "float", "sigma2c": "float",
    "diffusivity": "float", "closure": "str", "beta": "float",
    # regularization and resolution
    "eps": "float", "n": "int", "oversample": "float",
    # step control
    "rel_tol": "float", "abs_tol": "float", "safety": "float",
    "c_stab": "float", "dt_init": "optfloat", "dt_min": "float",
    "dt_max": "optfloat", "max_steps": "int", "accumulate": "str",
    # run shape
    "t_end": "float", "n_samples": "int", "snapshot_every": "int",
    "seed": "int", "kernel": "str", "out": "str",
    # initial data
    "f0": "str", "g0": "str", "gamma0": "str",
}


def _parse_value(key: str, tag: str, text: str):
    text = text.strip()
    if tag == "str":
        return text
    if tag == "int":
        return int(text)
    if tag == "float":
        return float(text)
    if tag == "optfloat":
        return None if text.lower() in ("", "none") else float(text)
    raise AssertionError(tag)


def _format_value(tag: str, value) -> str:
    if tag == "optfloat":
        return "none" if value is None else repr(float(value))
    if tag == "float":
        return repr(float(value))
    return str(value)


@dataclass
class ScenarioConfig:
    """Everything one simulation needs, as flat primitives."""

    length: float = 1.0
    mu: float = 0.5
    sigma1c: float = 1.0
    sigma2c: float = 1.0
    diffusivity: float = 0.05
    closure: str = "quadratic"
    beta: float = 0.5
    eps: float = 1e-2
    n: int = 32
    oversample: float = 4.0
    rel_tol: float = 1e-7
    abs_tol: float = 1e-10
    safety: float = 0.9
    c_stab: float = 1.2
    dt_init: Optional[float] = None
    dt_min: float = 1e-13
    dt_max: Optional[float] = None
    max_steps: int = 20_000_000
    accumulate: str = "step"
    t_end: float = 5e-5
    n_samples: int = 20
    snapshot_every: int = 0
    seed: int = 1234
    kernel: str = "polynomial"
    out: str = "runs/demo"
    f0: str = "cosine:1.0,0.2@1"
    g0: str = "constant:0.5"
    gamma0: str = "constant:1.0"

    def __post_init__(self):
        if not (0.0 < self.eps <= 1.0):
            raise ValueError("eps must lie in (0, 1]")
        if self.n < 1:
            raise ValueError("basis order n must be at least 1")
        if self.t_end <= 0 or self.n_samples < 1:
            raise ValueError("need t_end > 0 and at least one sample")
        if self.closure not in _CLOSURES:
            raise ValueError(f"unknown closure {self.closure!r}")
        for spec in (self.f0, self.g0, self.gamma0):
            InitialDataSpec.parse(spec)

    # -- (de)serialization --------------------------------------------------

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ScenarioConfig":
        unknown = sorted(set(mapping) - set(_CONFIG_FIELDS))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {key: _parse_value(key, _CONFIG_FIELDS[key], str(raw))
                  for key, raw in mapping.items()}
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        mapping = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            mapping[key.strip()] = value.strip()
        return cls.from_mapping(mapping)

    def to_mapping(self) -> dict:
        return {key: _format_value(tag, getattr(self, key))
                for key, tag in _CONFIG_FIELDS.items()}

    def write(self, path) -> None:
        lines = [f"{key} = {val}" for key, val in self.to_mapping().items()]
        Path(path).write_text("\n".join(lines) + "\n")

    # -- construction -------------------------------------------------------

    def make_closure(self) -> SurfactantClosure:
        return _CLOSURES[self.closure](self.beta)

    def build(self):
        """(problem, control, kernel, delta) ready to integrate."""
        params = PhysicalParams(length=self.length, mu=self.mu,
                                sigma1c=self.sigma1c, sigma2c=self.sigma2c,
                                diffusivity=self.diffusivity)
        basis = CosineBasis(self.n, self.length, self.oversample)
        problem = Problem(basis, params, self.make_closure(), self.eps)
        control = StepControl(rel_tol=self.rel_tol, abs_tol=self.abs_tol,
                              safety=self.safety, c_stab=self.c_stab,
                              dt_init=self.dt_init, dt_min=self.dt_min,
                              dt_max=self.dt_max, max_steps=self.max_steps)
        return problem, control, kernel_by_name(self.kernel), math.sqrt(self.eps)

    def initial_state(self, problem: Problem) -> SpectralState:
        """Build (f, g, v) coefficients; v = Phi'(Gamma) on the grid."""
        basis = problem.basis
        rng = np.random.default_rng(self.seed)
        f_hat = InitialDataSpec.parse(self.f0).build(basis, rng)
        g_hat = InitialDataSpec.parse(self.g0).build(basis, rng)
        gamma_spec = InitialDataSpec.parse(self.gamma0)
        gamma_vals = gamma_spec.node_values(basis, rng)
        if gamma_vals.min() < 0.0:
            raise ValueError("initial surfactant concentration must be non-negative")
        v_hat = basis.analyze(problem.closure.phi_prime(gamma_vals))
        return SpectralState(f_hat, g_hat, v_hat)

    def sample_times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_samples + 1)[1:]


# ---------------------------------------------------------------------------
# run + resume


@dataclass
class RunArtifacts:
    """Where a run wrote its outputs, and its in-memory results."""

    out_dir: Path
    config: ScenarioConfig
    records: list               # DiagnosticsRecord per sample (incl. t = 0)
    states: list                # SpectralState per sample
    times: list
    energy0: float
    failed: bool = False
    failure: Optional[dict] = None

    @property
    def final_state(self) -> SpectralState:
        return self.states[-1]

    @property
    def diagnostics_path(self) -> Path:
        return self.out_dir / "diagnostics.csv"


def _rhs_for(problem: Problem):
    n = problem.basis.n

    def rhs(t, y):
        res = assemble_rhs(problem, SpectralState.unpack(y, n))
        return res.pack(), StepAux(res.diss_rate, res.stiffness_scale)

    return rhs


def _write_snapshot(path: Path, basis: CosineBasis, problem: Problem,
                    state: SpectralState) -> None:
    f = basis.synthesize(state.f_hat)
    g = basis.synthesize(state.g_hat)
    gamma = problem.closure.w(basis.synthesize(state.v_hat))
    rows = ["x,f,g,gamma"]
    for xi, fi, gi, gam in zip(basis.nodes, f, g, gamma):
        rows.append(",".join("%.17g" % v for v in (xi, fi, gi, gam)))
    path.write_text("\n".join(rows) + "\n")


def _write_checkpoint(path: Path, config: ScenarioConfig, t: float,
                      state: SpectralState, dt_next: float, diss_cum: float,
                      energy0: float, sample_index: int) -> None:
    payload = {
        "format": "twofilm-checkpoint-1",
        "config": config.to_mapping(),
        "time": t,
        "f_hat": state.f_hat.tolist(),
        "g_hat": state.g_hat.tolist(),
        "v_hat": state.v_hat.tolist(),
        "dt_next": dt_next,
        "diss_cum": diss_cum,
        "energy0": energy0,
        "sample_index": sample_index,
    }
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def _execute(config: ScenarioConfig, out_dir: Path, *, t_start: float,
             state0: SpectralState, energy0: float, diss_cum0: float,
             dt_start: Optional[float], sample_times, first_index: int,
             record_initial: bool) -> RunArtifacts:
    """Shared core of run() and resume(): integrate and persist."""
    problem, control, kernel, delta = config.build()
    basis = problem.basis
    out_dir.mkdir(parents=True, exist_ok=True)
    config.write(out_dir / "config.cfg")

    art = RunArtifacts(out_dir=out_dir, config=config, records=[], states=[],
                       times=[], energy0=energy0)
    n_total = config.n_samples
    counter = [first_index]

    csv_file = open(art.diagnostics_path, "w")
    csv_file.write(DiagnosticsRecord.HEADER + "\n")

    def on_sample(t, y, diss_rate, diss_cum, dt_next):
        idx = counter[0]
        counter[0] += 1
        state = SpectralState.unpack(y, config.n)
        rec = collect(problem, state, t, diss_rate, diss_cum, energy0,
                      kernel, delta)
        art.records.append(rec)
        art.states.append(state)
        art.times.append(t)
        csv_file.write(rec.csv_row() + "\n")
        csv_file.flush()
        every = config.snapshot_every
        if idx == 0 or idx == n_total or (every > 0 and idx % every == 0):
            _write_snapshot(out_dir / f"snapshot_{idx:04d}.csv",
                            basis, problem, state)
        _write_checkpoint(out_dir / "checkpoint.json", config, t, state,
                          dt_next, diss_cum, energy0, idx)

    try:
        integrate_ode(_rhs_for(problem), state0.pack(), t_start, sample_times,
                      control, diss_cum0=diss_cum0, dt_start=dt_start,
                      accumulate=config.accumulate,
                      record_initial=record_initial, on_sample=on_sample)
    except StiffnessAbort as exc:
        art.failed = True
        art.failure = {"error": "StiffnessAbort", "message": str(exc),
                       "t": exc.t, "dt": exc.dt, "error_norm": exc.error_norm,
                       "cap": exc.cap, "completed_samples": len(art.records)}
        (out_dir / "failure.json").write_text(
            json.dumps(art.failure, sort_keys=True, indent=1) + "\n")
    finally:
        csv_file.close()
    return art


def run(config: ScenarioConfig, out_dir=None) -> RunArtifacts:
    """Integrate a scenario from t = 0 and persist its artifacts."""
    out = Path(out_dir) if out_dir is not None else Path(config.out)
    problem, _, _, _ = config.build()
    state0 = config.initial_state(problem)
    energy0 = energy(problem, state0)
    return _execute(config, out, t_start=0.0, state0=state0, energy0=energy0,
                    diss_cum0=0.0, dt_start=None,
                    sample_times=config.sample_times(), first_index=0,
                    record_initial=True)


def resume(checkpoint_path, out_dir=None) -> RunArtifacts:
    """Continue a persisted run from its last checkpoint, bit-exactly.

    The restarted trajectory reproduces the uninterrupted run: the stepper
    is deterministic, the checkpoint stores the controller's proposed next
    step and the accumulated dissipation, and the remaining sample grid is
    reconstructed from the config echo.
    """
    payload = json.loads(Path(checkpoint_path).read_text())
    if payload.get("format") != "twofilm-checkpoint-1":
        raise ValueError(f"{checkpoint_path} is not a recognized checkpoint")
    config = ScenarioConfig.from_mapping(payload["config"])
    state = SpectralState(np.asarray(payload["f_hat"], dtype=float),
                          np.asarray(payload["g_hat"], dtype=float),
                          np.asarray(payload["v_hat"], dtype=float))
    t_ck = float(payload["time"])
    remaining = config.sample_times()
    remaining = remaining[remaining > t_ck]
    out = Path(out_dir) if out_dir is not None else \
        Path(checkpoint_path).parent / "resumed"
    if remaining.size == 0:
        raise ValueError("checkpoint is already at the final sample")
    return _execute(config, out, t_start=t_ck, state0=state,
                    energy0=float(payload["energy0"]),
                    diss_cum0=float(payload["diss_cum"]),
                    dt_start=float(payload["dt_next"]),
                    sample_times=remaining,
                    first_index=int(payload["sample_index"]) + 1,
                    record_initial=False)


# ---------------------------------------------------------------------------
# reports


def fit_loglog_slope(xs, ys) -> Optional[float]:
    """Least-squares slope of log(y) against log(x); None if degenerate."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    good = (xs > 0) & (ys > 0)
    if good.sum() < 2:
        return None
    return float(np.polyfit(np.log(xs[good]), np.log(ys[good]), 1)[0])


def _member_run(mapping: dict, out_dir: str):
    """Top-level worker so sweeps can fan out over processes."""
    return run(ScenarioConfig.from_mapping(mapping), out_dir)


def _run_members(configs, out_dirs, jobs: int):
    if jobs <= 1:
        return [run(cfg, out) for cfg, out in zip(configs, out_dirs)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_member_run, cfg.to_mapping(), str(out))
                   for cfg, out in zip(configs, out_dirs)]
        return [fut.result() for fut in futures]


@dataclass
class ScalingReport:
    """How the negativity functionals behave as eps shrinks."""

    eps: list
    chi_max: list           # per eps: max over samples of int chi_sqrt(eps)(f)
    neg_min: list           # per eps: max over samples of -min f
    min_gamma: list         # per eps: min over samples of min Gamma
    pairwise_sup: list      # ||f_{eps_i} - f_{eps_{i+1}}||_inf at t_end
    slope: Optional[float]  # log-log fit of chi_max against eps
    monotone: bool          # chi_max non-increasing as eps decreases
    partial: bool           # any member failed
    member_dirs: list

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def sweep_eps(config: ScenarioConfig, eps_list, out_dir, jobs: int = 1) -> ScalingReport:
    """Run the scenario across a decreasing eps ladder and fit the scaling."""
    eps_list = [float(e) for e in eps_list]
    if any(not (0.0 < e <= 1.0) for e in eps_list):
        raise ValueError("eps values must lie in (0, 1]")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps list must be strictly decreasing")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    members = [dataclasses.replace(config, eps=e, out=str(out / f"eps_{i}"))
               for i, e in enumerate(eps_list)]
    arts = _run_members(members, [m.out for m in members], jobs)

    basis = CosineBasis(config.n, config.length, config.oversample)
    chi_max, neg_min, min_gamma, finals = [], [], [], []
    partial = False
    for art in arts:
        partial = partial or art.failed
        chi_max.append(max(r.chi_f for r in art.records))
        neg_min.append(max(max(-r.min_f, 0.0) for r in art.records))
        min_gamma.append(min(r.min_gamma for r in art.records))
        finals.append(basis.synthesize(art.final_state.f_hat))
    pairwise = [float(np.abs(a - b).max()) for a, b in zip(finals, finals[1:])]

    report = ScalingReport(
        eps=eps_list, chi_max=chi_max, neg_min=neg_min, min_gamma=min_gamma,
        pairwise_sup=pairwise, slope=fit_loglog_slope(eps_list, chi_max),
        monotone=all(b <= a * (1 + 1e-12) for a, b in zip(chi_max, chi_max[1:])),
        partial=partial, member_dirs=[str(a.out_dir) for a in arts])
    (out / "scaling_report.json").write_text(
        json.dumps(report.to_json(), sort_keys=True, indent=1) + "\n")
    return report


@dataclass
class ConvergenceReport:
    """Resolution refinement: distances and energy-budget residuals vs n."""

    n: list
    oversample: list
    rel_tol: list
    pairwise_sup: list       # ||f_{n_i} - f_{n_{i+1}}||_inf at t_end
    energy_residuals: list   # |energy_residual| at t_end per member
    distances_decrease: bool
    residuals_decrease: bool
    partial: bool
    member_dirs: list

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def sweep_n(config: ScenarioConfig, n_list, out_dir, oversample_list=None,
            rel_tol_list=None, jobs: int = 1) -> ConvergenceReport:
    """Refinement study over basis order (optionally quadrature and tol)."""
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n list must be strictly increasing")
    overs = ([float(o) for o in oversample_list] if oversample_list
             else [config.oversample] * len(n_list))
    tols = ([float(t) for t in rel_tol_list] if rel_tol_list
            else [config.rel_tol] * len(n_list))
    if not (len(overs) == len(tols) == len(n_list)):
        raise ValueError("ladder lists must share a length")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    members = [dataclasses.replace(config, n=n, oversample=o, rel_tol=rt,
                                   out=str(out / f"n_{n}"))
               for n, o, rt in zip(n_list, overs, tols)]
    arts = _run_members(members, [m.out for m in members], jobs)

    probe = np.linspace(0.0, config.length, 512, endpoint=False)
    finals = [evaluate_coeffs(a.final_state.f_hat, config.length, probe)
              for a in arts]
    pairwise = [float(np.abs(a - b).max()) for a, b in zip(finals, finals[1:])]
    residuals = [abs(a.records[-1].energy_residual) for a in arts]

    report = ConvergenceReport(
        n=n_list, oversample=overs, rel_tol=tols, pairwise_sup=pairwise,
        energy_residuals=residuals,
        distances_decrease=all(b <= a for a, b in zip(pairwise, pairwise[1:])),
        residuals_decrease=all(b < a for a, b in zip(residuals, residuals[1:])),
        partial=any(a.failed for a in arts),
        member_dirs=[str(a.out_dir) for a in arts])
    (out / "convergence_report.json").write_text(
        json.dumps(report.to_json(), sort_keys=True, indent=1) + "\n")
    return report


@dataclass
class ComparisonReport:
    """Full system at mu = 0 against the single-film reference solver."""

    times: list
    rel_sup: list            # per sample: sup|f_full - f_ref| / sup|f_ref|
    final_rel_sup: float
    gamma_max_dev: float     # max over samples of max|Gamma - Gamma(0)|
    g_max_dev: float
    partial: bool

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def _reference_film_rhs(problem: Problem):
    """RHS of the lone-film equation f_t + (R a_eps(f)^3/3 f_xxx)_x = 0.

    Written directly against the basis (no shared flux code) so it can act
    as an independent oracle for the mu = 0 reduction of the full system.
    """
    basis = problem.basis
    big_r = problem.params.cap_r
    eps = problem.eps
    k_max = basis.wavenumbers[-1]

    def rhs(t, f_hat):
        f = basis.synthesize(f_hat)
        d3f = basis.derivative_on_grid(f_hat, 3)
        mob = big_r * a_eps(f, eps) ** 3 / 3.0
        df = basis.test_against_dx(mob * d3f)
        return df, StepAux(0.0, float(mob.max()) * k_max**4)

    return rhs


def reduction_thinfilm(config: ScenarioConfig, out_dir) -> ComparisonReport:
    """Compare the decoupled f-equation against a one-field reference run."""
    if config.mu != 0.0:
        raise ValueError("the reduction requires mu = 0")
    if not config.gamma0.startswith("constant:"):
        raise ValueError("the reduction requires constant initial surfactant")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    art = run(config, out / "full")
    problem, control, _, _ = config.build()
    rng = np.random.default_rng(config.seed)
    f0_hat = InitialDataSpec.parse(config.f0).build(problem.basis, rng)
    ref = integrate_ode(_reference_film_rhs(problem), f0_hat, 0.0,
                        config.sample_times(), control,
                        accumulate="sample")

    basis = problem.basis
    rel_sup = []
    for state, f_ref_hat in zip(art.states, ref.states):
        f_full = basis.synthesize(state.f_hat)
        f_ref = basis.synthesize(f_ref_hat)
        rel_sup.append(float(np.abs(f_full - f_ref).max()
                             / np.abs(f_ref).max()))
    gamma0_val = float(config.gamma0.partition(":")[2])
    gamma_dev = max(
        float(np.abs(problem.closure.w(basis.synthesize(s.v_hat))
                     - gamma0_val).max())
        for s in art.states)
    g0_vals = basis.synthesize(art.states[0].g_hat)
    g_dev = max(float(np.abs(basis.synthesize(s.g_hat) - g0_vals).max())
                for s in art.states)

    report = ComparisonReport(times=list(art.times), rel_sup=rel_sup,
                              final_rel_sup=rel_sup[-1],
                              gamma_max_dev=gamma_dev, g_max_dev=g_dev,
                              partial=art.failed)
    (out / "comparison_report.json").write_text(
        json.dumps(report.to_json(), sort_keys=True, indent=1) + "\n")
    return report


@dataclass
class DispersionReport:
    """Fitted modal decay rates against the linearization eigenvalues."""

    modes: list
    eigenvalues: list        # excited (least-damped) eigenvalue per mode
    fitted: list             # per mode: {field: fitted rate or None}
    rel_errors: list         # per mode: worst fitted-vs-eigenvalue mismatch
    skipped: list            # per mode: fields skipped (amplitude too small)
    max_rel_error: float
    partial: bool

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def dispersion_study(config: ScenarioConfig, k_list, amplitude: float,
                     out_dir, decay_folds: float = 0.05) -> DispersionReport:
    """Perturb a flat state along least-damped eigenvectors and fit rates.

    Each mode k gets its own short run whose horizon is decay_folds
    e-foldings of the excited eigenvalue, so slow and fast modes are
    resolved equally well.
    """
    for key, spec in (("f0", config.f0), ("g0", config.g0),
                      ("gamma0", config.gamma0)):
        if not spec.startswith("constant:"):
            raise ValueError(f"dispersion study needs constant {key}")
    f_bar = float(config.f0.partition(":")[2])
    g_bar = float(config.g0.partition(":")[2])
    gamma_bar = float(config.gamma0.partition(":")[2])
    flat_scale = min(s for s in (f_bar, g_bar, gamma_bar) if s > 0)
    if amplitude > 1e-5 * flat_scale:
        raise ValueError("perturbation amplitude must stay in the linear "
                         "regime (<= 1e-5 of the flat state)")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem, control, _, _ = config.build()
    basis = problem.basis
    closure = problem.closure
    phi2_bar = float(closure.phi_second(np.asarray(gamma_bar)))
    mode_amp = math.sqrt(config.length / 2.0)   # cos(k pi x/L) per unit coeff

    eigs, fitted_all, errors, skipped_all = [], [], [], []
    partial = False
    for k in k_list:
        k = int(k)
        if k > basis.n:
            raise ValueError(f"mode {k} exceeds the basis order {basis.n}")
        mat = dispersion_matrix(problem, f_bar, g_bar, gamma_bar, k)
        vals, vecs = np.linalg.eig(mat)
        lead = int(np.argmax(vals.real))
        lam = float(vals[lead].real)
        vec = vecs[:, lead].real
        vec = vec / np.abs(vec).max()
        eigs.append(lam)

        state = SpectralState(
            basis.coeffs_from_cosine(f_bar),
            basis.coeffs_from_cosine(g_bar),
            basis.coeffs_from_cosine(float(closure.phi_prime(np.asarray(gamma_bar)))))
        if k > 0:
            state.f_hat[k] += amplitude * vec[0] * mode_amp
            state.g_hat[k] += amplitude * vec[1] * mode_amp
            state.v_hat[k] += amplitude * vec[2] * phi2_bar * mode_amp

        horizon = (decay_folds / abs(lam)) if lam != 0.0 else config.t_end
        samples = np.linspace(0.0, horizon, 9)[1:]
        try:
            traj = integrate_ode(_rhs_for(problem), state.pack(), 0.0,
                                 samples, control, accumulate="sample")
        except StiffnessAbort:
            partial = True
            fitted_all.append({})
            errors.append(float("nan"))
            skipped_all.append(["f", "g", "gamma"])
            continue

        times = np.asarray(traj.times)
        fitted, skipped = {}, []
        worst = 0.0
        for name, row in (("f", 0), ("g", 1), ("gamma", 2)):
            amps = np.array([abs(y[row * (config.n + 1) + k])
                             for y in traj.states])
            if k == 0:
                drift = float(np.abs(amps - amps[0]).max())
                fitted[name] = 0.0 if drift < 1e-12 else None
                continue
            if amps.min() < 1e-14:
                skipped.append(name)
                fitted[name] = None
                continue
            rate = float(np.polyfit(times, np.log(amps), 1)[0])
            fitted[name] = rate
            if lam != 0.0:
                worst = max(worst, abs(rate - lam) / abs(lam))
        fitted_all.append(fitted)
        errors.append(worst)
        skipped_all.append(skipped)

    finite = [e for e in errors if not math.isnan(e)]
    report = DispersionReport(
        modes=[int(k) for k in k_list], eigenvalues=eigs, fitted=fitted_all,
        rel_errors=errors, skipped=skipped_all,
        max_rel_error=max(finite) if finite else float("nan"),
        partial=partial)
    (out / "dispersion_report.json").write_text(
        json.dumps(report.to_json(), sort_keys=True, indent=1) + "\n")
    return report
