"""Experiment runner: config parsing, pipeline subcommands, sweeps, verification.

Subcommands
    model     dump the configured model's term list and spectrum summary
    lindblad  build the truncated Lindbladian, emit per-generator diagnostics
    evolve    run one evolution (dense or trajectory backend), emit time series
    gadget    gadget-channel error scaling for the configured (beta, r, tau)
    compile   variationally compile the per-alpha gadget unitaries
    sweep     Cartesian product over the config's grid axes (at most two)
    verify    run the property suite (fast | full); nonzero exit on failure
    report    summarize an output directory produced by the commands above

Flags: --config PATH --seed U64 --threads N --out DIR.
Exit codes: 0 ok, 2 config error, 3 resource cap exceeded, 4 verification failed.

Config files are strict JSON: unknown keys anywhere are rejected, every
numeric field is validated against the module preconditions at load time, and
the grids (beta, r, tau, noise_p given as arrays) span at most two axes.
Output CSV files are RFC-4180 with one leading '#' comment line carrying the
schema version, the seed and the config hash; the JSON manifest carries the
fully resolved config.  Nothing in the outputs depends on wall-clock time, so
re-running a manifest reproduces every byte.

Trajectory randomness is the counter-based Philox4x64 generator keyed by
(seed, trajectory index); results are independent of thread count because
reductions happen in trajectory order.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .dissipator import (
    DensityMatrix,
    build_lindbladian,
    depolarizing_superop,
    gibbs_state,
    kms_residual,
    lindbladian_superop,
    local_kms_residuals,
    renormalize_envelope,
    steady_state,
)
from .errors import ConfigError, ResourceCapError
from .evolution import (
    TrajectoryKey,
    TrotterPlan,
    deterministic_trotter_evolve,
    mean_channel_superop,
    sample_trajectory,
)
from .gadget import channel_distance_lemma1, gadget_channel
from .hamiltonian import build_model, to_dense
from .lattice import Lattice
from .compiler import (
    AdamConfig,
    compile_gadget,
    ladder_template,
    loss_and_gradient,
    template_unitary,
)
from .noise import DepolarizingModel, gadget_targets, noisy_trajectory_run
from .observables import (
    ObservableReport,
    energy_expectation,
    heat_capacity,
    two_point_correlator,
)
from .spectral import eig_hermitian

SCHEMA_VERSION = 1

_ENVELOPES = ("gaussian", "flat", "smoothed_mh", "fixed_gaussian")
_BACKENDS = ("dense", "trajectories")
_DRAW_MODES = ("per_step", "per_trajectory")
_GADGET_MODES = ("exact_unitary", "compiled")
_OBSERVABLES = ("energy", "correlators", "heat_capacity")
_GRID_FIELDS = ("beta", "r", "tau", "noise_p")


@dataclass
class ExperimentConfig:
    model_name: str = "mfi"
    model_params: dict = field(default_factory=dict)
    extents: tuple = (4,)
    periodic: object = True
    beta: object = 1.0
    r: object = 1
    envelope: str = "gaussian"
    renormalize: bool = False
    tau: object = 0.1
    time: float = 1.0
    backend: str = "dense"
    n_traj: int = 64
    draw_mode: str = "per_step"
    rescale_factor: float = 3.0
    gadget_mode: str = "exact_unitary"
    gadget_modules: int = 4
    gadget_restarts: int = 10
    gadget_iterations: int = 2000
    noise_p: object = 0.0
    observables: tuple = ("energy",)
    seed: int = 0
    out: str = "runs/out"

    def lattice(self):
        return Lattice(self.extents, self.periodic)

    def grid_axes(self):
        axes = []
        for name in _GRID_FIELDS:
            val = getattr(self, name)
            if isinstance(val, (list, tuple)):
                axes.append((name, tuple(val)))
        return axes

    def is_scalar(self):
        return not self.grid_axes()

    def at_point(self, assignment):
        return replace(self, **dict(assignment))

    def steps(self):
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        return int(round(self.time / self.tau))

    def resolved(self):
        """Canonical JSON-able form (used for hashing and the manifest)."""
        return {
            "schema_version": SCHEMA_VERSION,
            "model": {"name": self.model_name, "params": dict(self.model_params)},
            "lattice": {"extents": list(self.extents), "periodic": self.periodic},
            "beta": self.beta,
            "r": self.r,
            "envelope": self.envelope,
            "renormalize": self.renormalize,
            "tau": self.tau,
            "time": self.time,
            "backend": self.backend,
            "n_traj": self.n_traj,
            "draw_mode": self.draw_mode,
            "rescale_factor": self.rescale_factor,
            "gadget": {
                "mode": self.gadget_mode,
                "modules": self.gadget_modules,
                "restarts": self.gadget_restarts,
                "iterations": self.gadget_iterations,
            },
            "noise_p": self.noise_p,
            "observables": list(self.observables),
            "seed": self.seed,
            "out": self.out,
        }


def _reject_unknown(data, allowed, where):
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _scalar_or_grid(val, name, caster, check):
    if isinstance(val, (list, tuple)):
        items = [caster(v) for v in val]
        for v in items:
            check(v)
        return list(items)
    v = caster(val)
    check(v)
    return v


def parse_config(data):
    """Validate a raw JSON dict into an ExperimentConfig (strictly)."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    allowed = {
        "schema_version", "model", "lattice", "beta", "r", "envelope",
        "renormalize", "tau", "time", "backend", "n_traj", "draw_mode",
        "rescale_factor", "gadget", "noise_p", "observables", "seed", "out",
    }
    _reject_unknown(data, allowed, "config")
    if data.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {data.get('schema_version')}")

    cfg = ExperimentConfig()
    model = data.get("model", {"name": cfg.model_name})
    _reject_unknown(model, {"name", "params"}, "model")
    cfg.model_name = str(model.get("name", cfg.model_name))
    cfg.model_params = dict(model.get("params", {}))

    lat = data.get("lattice", {"extents": list(cfg.extents)})
    _reject_unknown(lat, {"extents", "periodic"}, "lattice")
    cfg.extents = tuple(int(e) for e in lat.get("extents", cfg.extents))
    cfg.periodic = lat.get("periodic", True)

    def _pos(v):
        if v <= 0:
            raise ConfigError(f"value must be positive, got {v}")

    def _nonneg(v):
        if v < 0:
            raise ConfigError(f"value must be nonnegative, got {v}")

    def _unit(v):
        if not 0.0 <= v <= 1.0:
            raise ConfigError(f"noise rate must lie in [0, 1], got {v}")

    cfg.beta = _scalar_or_grid(data.get("beta", cfg.beta), "beta", float, _nonneg)
    cfg.r = _scalar_or_grid(data.get("r", cfg.r), "r", int, _nonneg)
    cfg.tau = _scalar_or_grid(data.get("tau", cfg.tau), "tau", float, _pos)
    cfg.noise_p = _scalar_or_grid(data.get("noise_p", cfg.noise_p), "noise_p", float, _unit)

    cfg.envelope = str(data.get("envelope", cfg.envelope))
    if cfg.envelope not in _ENVELOPES:
        raise ConfigError(f"envelope must be one of {_ENVELOPES}")
    cfg.renormalize = bool(data.get("renormalize", False))
    cfg.time = float(data.get("time", cfg.time))
    _nonneg(cfg.time)
    cfg.backend = str(data.get("backend", cfg.backend))
    if cfg.backend not in _BACKENDS:
        raise ConfigError(f"backend must be one of {_BACKENDS}")
    cfg.n_traj = int(data.get("n_traj", cfg.n_traj))
    if cfg.n_traj < 1:
        raise ConfigError("n_traj must be at least 1")
    cfg.draw_mode = str(data.get("draw_mode", cfg.draw_mode))
    if cfg.draw_mode not in _DRAW_MODES:
        raise ConfigError(f"draw_mode must be one of {_DRAW_MODES}")
    cfg.rescale_factor = float(data.get("rescale_factor", cfg.rescale_factor))
    _pos(cfg.rescale_factor)

    gadget = data.get("gadget", {"mode": cfg.gadget_mode})
    _reject_unknown(gadget, {"mode", "modules", "restarts", "iterations"}, "gadget")
    cfg.gadget_mode = str(gadget.get("mode", cfg.gadget_mode))
    if cfg.gadget_mode not in _GADGET_MODES:
        raise ConfigError(f"gadget mode must be one of {_GADGET_MODES}")
    cfg.gadget_modules = int(gadget.get("modules", cfg.gadget_modules))
    _pos(cfg.gadget_modules)
    cfg.gadget_restarts = int(gadget.get("restarts", cfg.gadget_restarts))
    _pos(cfg.gadget_restarts)
    cfg.gadget_iterations = int(gadget.get("iterations", cfg.gadget_iterations))
    _pos(cfg.gadget_iterations)

    obs = data.get("observables", list(cfg.observables))
    if not isinstance(obs, (list, tuple)):
        raise ConfigError("observables must be a list")
    for o in obs:
        if o not in _OBSERVABLES:
            raise ConfigError(f"unknown observable {o!r}; choose from {_OBSERVABLES}")
    cfg.observables = tuple(obs)
    cfg.seed = int(data.get("seed", cfg.seed))
    cfg.out = str(data.get("out", cfg.out))

    if len(cfg.grid_axes()) > 2:
        raise ConfigError("at most two grid axes are supported")

    # Validate the model/lattice combination eagerly (cheap, catches typos).
    try:
        lat_obj = cfg.lattice()
        build_model(cfg.model_name, lat_obj, cfg.model_params)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path):
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config(data)


def config_hash(cfg: ExperimentConfig):
    blob = json.dumps(cfg.resolved(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


# -- artifact writers ---------------------------------------------------------


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return v


def write_csv(path, columns, meta):
    names = list(columns)
    rows = zip(*[columns[name] for name in names]) if names else []
    with open(path, "w", newline="") as f:
        f.write(
            "# localgibbs csv schema=%d %s\n"
            % (SCHEMA_VERSION, " ".join(f"{k}={v}" for k, v in sorted(meta.items())))
        )
        w = csv.writer(f)
        w.writerow(names)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_manifest(out_dir, cfg, command, outputs):
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "tool": "localgibbs",
        "version": __version__,
        "command": command,
        "seed": cfg.seed,
        "config": cfg.resolved(),
        "config_sha256": config_hash(cfg),
        "outputs": sorted(outputs),
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _prepare_out(cfg, out_override):
    out_dir = out_override or cfg.out
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


# -- pipeline pieces ----------------------------------------------------------


def _guard_dimension(lat):
    from .spectral import DIM_CAP

    if 2 ** lat.n_sites > DIM_CAP:
        raise ResourceCapError(
            f"{lat.n_sites} qubits exceed the dense cap of {DIM_CAP} dimensions"
        )


def _build(cfg: ExperimentConfig, beta=None, r=None):
    lat = cfg.lattice()
    _guard_dimension(lat)
    h = build_model(cfg.model_name, lat, cfg.model_params)
    beta = cfg.beta if beta is None else beta
    r = cfg.r if r is None else r
    lind = build_lindbladian(h, beta, r, cfg.envelope)
    if cfg.renormalize:
        lind = renormalize_envelope(lind)
    return h, lind


def _corr_pairs(n):
    """Fig.-4-style separations from the chain midpoint."""
    a1 = n // 2
    out = []
    for ell in range(1, min(n // 2, 6) + 1):
        out.append((ell, a1, (a1 + ell) % n))
    return out


def _evolve_point(cfg: ExperimentConfig, beta, r, tau, noise_p):
    """One evolution run; returns (columns dict, summary dict)."""
    h, lind = _build(cfg, beta=beta, r=r)
    n = h.n_sites
    steps = int(round(cfg.time / tau))
    plan = TrotterPlan(
        tau=tau,
        steps=steps,
        draw_mode=cfg.draw_mode,
        rescale_factor=cfg.rescale_factor,
    )
    rho_beta = gibbs_state(h, beta)
    e_ref = energy_expectation(rho_beta, h)
    want_corr = "correlators" in cfg.observables
    want_heat = "heat_capacity" in cfg.observables
    report = ObservableReport()

    def record(t, state):
        e = energy_expectation(state, h) / n
        extra = {}
        if want_corr:
            for ell, a1, a2 in _corr_pairs(n):
                extra[f"corr_l{ell}"] = two_point_correlator(state, a1, a2, n)
        if want_heat:
            extra["C_beta"] = heat_capacity(state, h, beta)
        report.append(t, e, abs(e - e_ref / n), **extra)

    if cfg.backend == "dense":
        if noise_p > 0:
            raise ConfigError("gate noise requires backend=trajectories with compiled gadgets")
        rho = deterministic_trotter_evolve(
            lind, DensityMatrix.maximally_mixed(n), plan,
            callback=lambda step, m: record((step + 1) * tau, m),
        )
        final_state = rho
    elif cfg.gadget_mode == "compiled":
        compiled = _compile_gadgets(cfg, lind, tau)
        result = noisy_trajectory_run(
            lind, plan, compiled, DepolarizingModel(noise_p),
            n_circuits=cfg.n_traj, shots=1024, seed=cfg.seed,
        )
        report.append(cfg.time, result.energy_density,
                      abs(result.energy_density - e_ref / n),
                      E_stderr=result.stderr)
        final_state = None
    else:
        # Statevector trajectories through the exact gadget unitaries.  The
        # infinite-temperature start is realized by a uniformly random
        # computational basis state per trajectory.  Connected quantities are
        # assembled from ensemble means, not averaged per trajectory.
        if noise_p > 0:
            raise ConfigError("gate noise requires gadget mode 'compiled'")
        from .hamiltonian import pauli_expectation_psi, to_dense as _to_dense

        sums = np.zeros(steps)
        sums2 = np.zeros(steps)
        pairs = _corr_pairs(n) if want_corr else []
        corr_sums = {ell: np.zeros(3) for ell, _, _ in pairs}  # ZZ, Za, Zb at final step
        h2_sums = np.zeros(2)  # <H>, <H^2> at final step
        hd = _to_dense(h) if want_heat else None
        for i in range(cfg.n_traj):
            key = TrajectoryKey.generate(cfg.seed, plan, n, index=i)
            rng = key.measurement_rng()
            start = int(rng.integers(0, 2 ** n))
            psi0 = np.zeros(2 ** n, dtype=complex)
            psi0[start] = 1.0
            traj_e = np.empty(steps)

            def cb(step, psi):
                traj_e[step] = energy_expectation(psi, h) / n

            psi = sample_trajectory(lind, psi0, plan, key, callback=cb)
            sums += traj_e
            sums2 += traj_e ** 2
            for ell, a1, a2 in pairs:
                corr_sums[ell] += [
                    pauli_expectation_psi(psi, [a1, a2], ["Z", "Z"], n).real,
                    pauli_expectation_psi(psi, [a1], ["Z"], n).real,
                    pauli_expectation_psi(psi, [a2], ["Z"], n).real,
                ]
            if want_heat:
                hpsi = hd @ psi
                h2_sums += [np.vdot(psi, hpsi).real, np.vdot(hpsi, hpsi).real]
        means = sums / cfg.n_traj
        var = np.maximum(sums2 / cfg.n_traj - means ** 2, 0.0)
        se = np.sqrt(var / max(cfg.n_traj - 1, 1))
        for step in range(steps):
            extra = {"E_stderr": se[step]}
            last = step == steps - 1
            for ell, _, _ in pairs:
                zz, za, zb = corr_sums[ell] / cfg.n_traj
                extra[f"corr_l{ell}"] = 0.25 * (zz - za * zb) if last else np.nan
            if want_heat:
                e1, e2 = h2_sums / cfg.n_traj
                extra["C_beta"] = beta ** 2 * (e2 - e1 ** 2) if last else np.nan
            report.append((step + 1) * tau, means[step],
                          abs(means[step] - e_ref / n), **extra)
        final_state = None

    columns = report.columns()
    summary = {
        "final_E": report.energy[-1] if report.energy else np.nan,
        "final_dE": report.delta_e[-1] if report.delta_e else np.nan,
        "E_gibbs": e_ref / n,
    }
    return columns, summary, final_state


def _compile_gadgets(cfg, lind, tau):
    """Compile the three per-alpha gadgets on the ladder template."""
    targets = gadget_targets(lind, cfg.rescale_factor * tau)
    compiled = {}
    for alpha, (u, k) in sorted(targets.items()):
        tpl = ladder_template(k, cfg.gadget_modules)
        adam = AdamConfig(
            iterations=cfg.gadget_iterations, restarts=cfg.gadget_restarts
        )
        res = compile_gadget(u, tpl, adam, seed=cfg.seed + alpha)
        compiled[alpha] = (tpl, res.best_theta)
    return compiled


# -- subcommands ---------------------------------------------------------------


def cmd_model(cfg, out_dir):
    lat = cfg.lattice()
    _guard_dimension(lat)
    h = build_model(cfg.model_name, lat, cfg.model_params)
    cols = {
        "term": list(range(len(h.terms))),
        "coefficient": [t.coefficient for t in h.terms],
        "factors": [
            ";".join(f"{s}{ax}" for s, ax in t.factors) for t in h.terms
        ],
    }
    meta = {"seed": cfg.seed, "config": config_hash(cfg)[:16], "command": "model"}
    path = os.path.join(out_dir, "model_terms.csv")
    write_csv(path, cols, meta)
    dec = eig_hermitian(to_dense(h))
    summary = {
        "n_sites": h.n_sites,
        "terms": len(h.terms),
        "locality": h.locality(),
        "ground_energy": float(dec.eigenvalues[0]),
        "ground_energy_density": float(dec.eigenvalues[0] / h.n_sites),
    }
    spath = os.path.join(out_dir, "model_summary.json")
    with open(spath, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    write_manifest(out_dir, cfg, "model", ["model_terms.csv", "model_summary.json"])
    print(f"model {cfg.model_name}: n={h.n_sites} terms={len(h.terms)} "
          f"E0/n={summary['ground_energy_density']:.6f}")
    return 0


def cmd_lindblad(cfg, out_dir):
    if not cfg.is_scalar():
        raise ConfigError("lindblad expects a scalar config (no grids)")
    h, lind = _build(cfg)
    res = local_kms_residuals(lind)
    cols = {
        "site": [g.site for g in lind.generators],
        "alpha": [g.alpha for g in lind.generators],
        "support": [";".join(map(str, g.support.sites)) for g in lind.generators],
        "jump_norm": [float(np.linalg.norm(g.lmat)) for g in lind.generators],
        "coherent_norm": [float(np.linalg.norm(g.gmat)) for g in lind.generators],
        "local_kms_residual": [float(x) for x in res],
    }
    meta = {"seed": cfg.seed, "config": config_hash(cfg)[:16], "command": "lindblad"}
    path = os.path.join(out_dir, "generators.csv")
    write_csv(path, cols, meta)
    write_manifest(out_dir, cfg, "lindblad", ["generators.csv"])
    print(f"lindblad: {len(lind.generators)} generators, "
          f"worst local KMS residual {res.max():.2e}")
    return 0


def cmd_evolve(cfg, out_dir):
    if not cfg.is_scalar():
        raise ConfigError("evolve expects a scalar config; use sweep for grids")
    columns, summary, _ = _evolve_point(cfg, cfg.beta, cfg.r, cfg.tau, cfg.noise_p)
    meta = {"seed": cfg.seed, "config": config_hash(cfg)[:16], "command": "evolve"}
    path = os.path.join(out_dir, "timeseries.csv")
    write_csv(path, columns, meta)
    write_manifest(out_dir, cfg, "evolve", ["timeseries.csv"])
    print(f"evolve: final E={summary['final_E']:.6f} dE={summary['final_dE']:.3e} "
          f"(Gibbs E={summary['E_gibbs']:.6f})")
    return 0


def cmd_gadget(cfg, out_dir):
    if not cfg.is_scalar():
        raise ConfigError("gadget expects a scalar config")
    _, lind = _build(cfg)
    taus = [cfg.tau * (0.5 ** i) for i in range(4)]
    rows = {"alpha": [], "tau": [], "diamond_upper": [], "kraus_defect": []}
    for g in lind.site_generators(0):
        for tau in taus:
            rows["alpha"].append(g.alpha)
            rows["tau"].append(tau)
            rows["diamond_upper"].append(channel_distance_lemma1(g.lmat, g.gmat, tau))
            rows["kraus_defect"].append(
                gadget_channel(g.lmat, g.gmat, tau).completeness_defect()
            )
    meta = {"seed": cfg.seed, "config": config_hash(cfg)[:16], "command": "gadget"}
    path = os.path.join(out_dir, "gadget_errors.csv")
    write_csv(path, rows, meta)
    write_manifest(out_dir, cfg, "gadget", ["gadget_errors.csv"])
    errs = np.array(rows["diamond_upper"]).reshape(3, len(taus))
    slopes = np.polyfit(np.log(taus), np.log(errs.T), 1)[0]
    print(f"gadget: diamond-upper tau-slopes per alpha: {np.round(slopes, 3)}")
    return 0


def cmd_compile(cfg, out_dir):
    if not cfg.is_scalar():
        raise ConfigError("compile expects a scalar config")
    _, lind = _build(cfg)
    targets = gadget_targets(lind, cfg.rescale_factor * cfg.tau)
    adam = AdamConfig(iterations=cfg.gadget_iterations, restarts=cfg.gadget_restarts)
    trace_cols = {"iteration": list(range(1, adam.iterations + 1))}
    best = {}
    for alpha, (u, k) in sorted(targets.items()):
        tpl = ladder_template(k, cfg.gadget_modules)
        res = compile_gadget(u, tpl, adam, seed=cfg.seed + alpha)
        env = np.minimum.accumulate(np.nanmin(res.loss_traces, axis=0))
        trace_cols[f"best_loss_alpha{alpha}"] = [float(x) for x in env]
        best[str(alpha)] = {
            "loss": res.best_loss,
            "theta": [float(x) for x in res.best_theta],
            "modules": cfg.gadget_modules,
            "qubits": k,
        }
    meta = {"seed": cfg.seed, "config": config_hash(cfg)[:16], "command": "compile"}
    path = os.path.join(out_dir, "loss_traces.csv")
    write_csv(path, trace_cols, meta)
    cpath = os.path.join(out_dir, "compiled.json")
    with open(cpath, "w") as f:
        json.dump(best, f, indent=2, sort_keys=True)
        f.write("\n")
    write_manifest(out_dir, cfg, "compile", ["loss_traces.csv", "compiled.json"])
    losses = {a: v["loss"] for a, v in best.items()}
    print(f"compile: m={cfg.gadget_modules} best losses {losses}")
    return 0


def cmd_sweep(cfg, out_dir, threads=1):
    axes = cfg.grid_axes()
    if not axes:
        raise ConfigError("sweep expects at least one grid axis")
    names = [name for name, _ in axes]
    grids = [vals for _, vals in axes]
    import itertools

    points = [dict(zip(names, combo)) for combo in itertools.product(*grids)]

    def run_point(assignment):
        pt = cfg.at_point(assignment)
        cols, summary, _ = _evolve_point(pt, pt.beta, pt.r, pt.tau, pt.noise_p)
        return assignment, cols, summary

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run_point, points))
    else:
        results = [run_point(p) for p in points]

    # One combined CSV: grid columns + the final-row observables per point.
    out_cols = {name: [] for name in names}
    out_cols.update({"final_E": [], "final_dE": [], "E_gibbs": []})
    extra_names = sorted(
        {k for _, cols, _ in results for k in cols if k not in ("t", "E", "dE")}
    )
    for k in extra_names:
        out_cols["final_" + k] = []
    for assignment, cols, summary in results:
        for name in names:
            out_cols[name].append(assignment[name])
        out_cols["final_E"].append(summary["final_E"])
        out_cols["final_dE"].append(summary["final_dE"])
        out_cols["E_gibbs"].append(summary["E_gibbs"])
        for k in extra_names:
            out_cols["final_" + k].append(cols[k][-1] if k in cols else np.nan)
    meta = {"seed": cfg.seed, "config": config_hash(cfg)[:16], "command": "sweep"}
    path = os.path.join(out_dir, "sweep.csv")
    write_csv(path, out_cols, meta)
    write_manifest(out_dir, cfg, "sweep", ["sweep.csv"])
    print(f"sweep: {len(points)} points over axes {names}")
    return 0


def cmd_report(out_dir):
    path = os.path.join(out_dir, "manifest.json")
    try:
        with open(path) as f:
            manifest = json.load(f)
    except OSError as exc:
        raise ConfigError(f"no manifest in {out_dir}: {exc}") from None
    cfg = parse_config(manifest["config"])
    ok_hash = config_hash(cfg) == manifest["config_sha256"]
    lines = [
        f"command: {manifest['command']}",
        f"seed: {manifest['seed']}",
        f"config hash: {manifest['config_sha256'][:16]} "
        f"({'verified' if ok_hash else 'MISMATCH'})",
    ]
    for name in manifest["outputs"]:
        fpath = os.path.join(out_dir, name)
        if not os.path.exists(fpath):
            lines.append(f"output {name}: MISSING")
            continue
        if name.endswith(".csv"):
            with open(fpath) as f:
                rows = sum(1 for _ in f) - 2  # comment + header
            lines.append(f"output {name}: {rows} rows")
        else:
            lines.append(f"output {name}: {os.path.getsize(fpath)} bytes")
    text = "\n".join(lines)
    print(text)
    with open(os.path.join(out_dir, "report.txt"), "w") as f:
        f.write(text + "\n")
    return 0 if ok_hash else 4


# -- verification suite --------------------------------------------------------


def _check(name, value, threshold, results, mode="le"):
    ok = value <= threshold if mode == "le" else value >= threshold
    results.append((name, value, threshold, ok))
    flag = "PASS" if ok else "FAIL"
    op = "<=" if mode == "le" else ">="
    print(f"  [{flag}] {name}: {value:.3e} {op} {threshold:.1e}")
    return ok


def run_verify(level="fast", corrupt_jump=False):
    """Property suite; returns 0 on success, 4 on any failure.

    corrupt_jump is a negative-control hook: it scales one jump operator so
    the KMS check must fail.
    """
    import scipy.linalg

    from .hamiltonian import LocalHamiltonian, PauliString

    results = []
    print(f"verify level={level}")

    lat3 = Lattice([3])
    h3 = build_model("mfi", lat3)
    lind3 = build_lindbladian(h3, 0.5, 1)
    if corrupt_jump:
        g0 = lind3.generators[0]
        bad = list(lind3.generators)
        from .dissipator import LocalGenerator

        bad[0] = LocalGenerator(g0.site, g0.alpha, g0.support, 1.01 * g0.lmat, g0.gmat)
        lind3 = type(lind3)(lind3.beta, lind3.r, lind3.envelope, tuple(bad), h3)
    _check("kms_untruncated_n3", kms_residual(lind3), 1e-8, results)

    lat5 = Lattice([5])
    h5 = build_model("mfi", lat5)
    lind5 = build_lindbladian(h5, 0.5, 1)
    _check("kms_local_n5_r1", float(local_kms_residuals(lind5).max()), 1e-8, results)

    lat2 = Lattice([2])
    h2 = build_model("mfi", lat2)
    lind2 = build_lindbladian(h2, 0.0, 1)
    from .superop import one_one_upper_bound

    diff = lindbladian_superop(lind2) - depolarizing_superop(2)
    _check("beta0_depolarizing_n2", one_one_upper_bound(diff, 4), 1e-10, results)

    lat4 = Lattice([4])
    h4 = build_model("mfi", lat4)
    lind4 = build_lindbladian(h4, 1.0, lat4.diameter)
    rho_ss = steady_state(lind4)
    rho_b = gibbs_state(h4, 1.0)
    tdist = float(np.sum(np.abs(np.linalg.eigvalsh(rho_ss.matrix - rho_b.matrix))))
    _check("fixed_point_n4", tdist, 1e-6, results)

    # randomized Trotter: slope of log error vs log M near -1
    lind2b = build_lindbladian(h2, 0.5, 1)
    s_exact = scipy.linalg.expm(2.0 * lindbladian_superop(lind2b))
    errs, ms = [], [4, 8, 16]
    for m in ms:
        plan = TrotterPlan(tau=2.0 / m, steps=m)
        s_mean = mean_channel_superop(lind2b, plan)
        errs.append(np.linalg.norm(s_mean - s_exact, 2))
    slope = np.polyfit(np.log(ms), np.log(errs), 1)[0]
    _check("trotter_slope_dev", abs(slope + 1.0), 0.3, results)

    # gadget error slope near +2
    hz = LocalHamiltonian(Lattice([1]), [PauliString(0.5, {0: "Z"})])
    lind1 = build_lindbladian(hz, 1.0, 0)
    g = lind1.generators[0]
    taus = np.array([0.2, 0.1, 0.05])
    gerrs = [channel_distance_lemma1(g.lmat, g.gmat, t) for t in taus]
    gslope = np.polyfit(np.log(taus), np.log(gerrs), 1)[0]
    _check("gadget_slope_dev", abs(gslope - 2.0), 0.3, results)

    # compiler gradient vs central finite differences
    tpl = ladder_template(2, 1)
    rng = np.random.Generator(np.random.Philox(key=[7, 7]))
    theta = rng.uniform(0, 2 * np.pi, tpl.n_params)
    u_t = template_unitary(tpl, rng.uniform(0, 2 * np.pi, tpl.n_params))
    _, grad = loss_and_gradient(tpl, theta, u_t)
    from .compiler import compilation_loss

    fd = np.empty_like(grad)
    eps = 1e-6
    for i in range(len(theta)):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += eps
        tm[i] -= eps
        fd[i] = (
            compilation_loss(u_t, template_unitary(tpl, tp))
            - compilation_loss(u_t, template_unitary(tpl, tm))
        ) / (2 * eps)
    rel = np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-300)
    _check("gradient_check", float(rel), 1e-5, results)

    if level == "full":
        lat6 = Lattice([6])
        h6 = build_model("mfi", lat6)
        lind6 = build_lindbladian(h6, 1.0, lat6.diameter)
        rho6 = steady_state(lind6)
        rb6 = gibbs_state(h6, 1.0)
        t6 = float(np.sum(np.abs(np.linalg.eigvalsh(rho6.matrix - rb6.matrix))))
        _check("fixed_point_n6", t6, 1e-6, results)

        lat8 = Lattice([8])
        h8 = build_model("mfi", lat8)
        lind8 = build_lindbladian(h8, 1.0, 1)
        rho8 = steady_state(lind8, residual_target=1e-8)
        rb8 = gibbs_state(h8, 1.0)
        t8 = float(np.sum(np.abs(np.linalg.eigvalsh(rho8.matrix - rb8.matrix))))
        # truncated fixed point differs from Gibbs but must stay close
        _check("steady_state_n8_r1_dist", t8, 0.5, results)

    failed = [r for r in results if not r[3]]
    print(f"verify: {len(results) - len(failed)}/{len(results)} checks passed")
    return 4 if failed else 0


# -- entry point ----------------------------------------------------------------


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="localgibbs",
        description="Dissipative Gibbs-state preparation with local circuits.",
    )
    parser.add_argument("command", choices=[
        "model", "lindblad", "evolve", "gadget", "compile", "sweep", "verify", "report",
    ])
    parser.add_argument("--config", help="path to a JSON experiment config")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=1, help="parallel sweep points")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--level", choices=["fast", "full"], default="fast",
                        help="verification level (verify only)")
    parser.add_argument("--self-test-corrupt", action="store_true",
                        help=argparse.SUPPRESS)  # negative control for verify
    args = parser.parse_args(argv)

    try:
        if args.command == "verify":
            return run_verify(args.level, corrupt_jump=args.self_test_corrupt)
        if args.command == "report":
            if not args.out:
                raise ConfigError("report requires --out DIR")
            return cmd_report(args.out)
        if not args.config:
            raise ConfigError(f"{args.command} requires --config PATH")
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        out_dir = _prepare_out(cfg, args.out)
        if args.command == "model":
            return cmd_model(cfg, out_dir)
        if args.command == "lindblad":
            return cmd_lindblad(cfg, out_dir)
        if args.command == "evolve":
            return cmd_evolve(cfg, out_dir)
        if args.command == "gadget":
            return cmd_gadget(cfg, out_dir)
        if args.command == "compile":
            return cmd_compile(cfg, out_dir)
        if args.command == "sweep":
            return cmd_sweep(cfg, out_dir, threads=max(1, args.threads))
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ResourceCapError as exc:
        print(f"resource cap exceeded: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
