"""Experiment configs and the runner that writes CSV series and JSON metadata."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (ChainConfig, beta_rule, exact_gibbs, greedy_run, mcmc_run,
                       ogp_certificate, ogp_params, standard_probes, total_variation)
from .errors import ParameterError
from .landscape.polytope import SignaturePolytopeSpec, closed_form_value, grid_max_g
from .landscape.sweep import CSV_HEADER, empirical_H_sweep
from .modularity import mean_field_prediction, modularity
from .partitions import (balanced_random_partition, decoy, distance, interpolated_partition,
                         signature)
from .sbm import BlockModelParams, generate_sbm

KINDS = ("score", "landscape", "oracle", "greedy", "mcmc", "gibbs-oracle", "ogp-cert")
TRACE_HEADER = ["step", "modularity", "distance", "region"]


class ConfigError(ParameterError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"config field '{field_name}': {message}")
        self.field_name = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    model: BlockModelParams
    seeds: tuple[int, ...]
    options: dict = field(default_factory=dict)
    out: str = "results"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError("kind", f"must be one of {KINDS}, got {self.kind!r}")
        if not self.seeds:
            raise ConfigError("seeds", "must be a nonempty list")
        if any(not isinstance(s, int) or isinstance(s, bool) or s < 0 for s in self.seeds):
            raise ConfigError("seeds", "must be non-negative integers")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "model": self.model.to_dict(), "seeds": list(self.seeds),
                "options": self.options, "out": self.out}

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        unknown = set(raw) - {"kind", "model", "seeds", "options", "out"}
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown field")
        for name in ("kind", "model", "seeds"):
            if name not in raw:
                raise ConfigError(name, "missing")
        model_raw = raw["model"]
        if not isinstance(model_raw, dict):
            raise ConfigError("model", "must be an object")
        try:
            if {"p", "q"} <= set(model_raw):
                model = BlockModelParams.from_probabilities(model_raw["n"], model_raw["k"],
                                                            model_raw["p"], model_raw["q"])
            else:
                model = BlockModelParams(**model_raw)
        except TypeError as exc:
            raise ConfigError("model", str(exc)) from None
        except ParameterError as exc:
            raise ConfigError("model", str(exc)) from None
        seeds = raw["seeds"]
        if not isinstance(seeds, list):
            raise ConfigError("seeds", "must be a list")
        options = raw.get("options", {})
        if not isinstance(options, dict):
            raise ConfigError("options", "must be an object")
        return cls(raw["kind"], model, tuple(seeds), options, str(raw.get("out", "results")))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        text = Path(path).read_text()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON: {exc}") from None
        return cls.from_dict(raw)

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    def config_hash(self) -> str:
        """sha256 of the canonical JSON without the output directory."""
        body = self.to_dict()
        body.pop("out")
        return hashlib.sha256(json.dumps(body, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


# ---------------------------------------------------------------- option helpers

def _opt(cfg: ExperimentConfig, name: str, default=None, kind=None):
    value = cfg.options.get(name, default)
    if value is None:
        raise ConfigError(f"options.{name}", "missing")
    if kind is not None and (isinstance(value, bool) or not isinstance(value, kind)):
        raise ConfigError(f"options.{name}", f"expected {kind}, got {value!r}")
    return value


def _d_grid(cfg: ExperimentConfig) -> list[float]:
    grid = cfg.options.get("d_grid", 11)
    k = cfg.model.k
    if isinstance(grid, int) and not isinstance(grid, bool):
        if grid < 2:
            raise ConfigError("options.d_grid", "needs at least two points")
        return [i / ((grid - 1) * k) for i in range(grid)]
    if isinstance(grid, list) and grid and all(isinstance(x, (int, float)) for x in grid):
        if any(x < 0 or x > 1.0 / k + 1e-12 for x in grid):
            raise ConfigError("options.d_grid", "distances must lie in [0, 1/k]")
        return [float(x) for x in grid]
    raise ConfigError("options.d_grid", "must be a point count or a list of distances")


def _start(cfg: ExperimentConfig, planted, seed: int):
    name = cfg.options.get("start", "planted")
    k = cfg.model.k
    if name == "planted":
        return planted
    if name == "decoy":
        return decoy(planted, 0, 1)
    if name == "random":
        return balanced_random_partition(cfg.model.n, k, seed)
    if name == "interpolated":
        t = _opt(cfg, "t", kind=(int, float))
        return interpolated_partition(planted, 0, 1, float(t))
    raise ConfigError("options.start", f"unknown start {name!r}")


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return int(x)
    return "" if x is None else x


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, float) and not np.isfinite(x):
        return str(x)
    return x


# ---------------------------------------------------------------- runners (one per kind)

def _run_score(cfg, seed):
    graph, planted = generate_sbm(cfg.model, seed)
    part = _start(cfg, planted, seed)
    br = modularity(graph, part)
    rep = distance(part, planted)
    mf = mean_field_prediction(cfg.model, signature(part, planted))
    row = [seed, cfg.options.get("start", "planted"), rep.distance, br.score, br.coverage,
           br.degree_tax, mf]
    meta = {"distance": rep.distance, "permutation": list(rep.best_permutation),
            "overlap": rep.aligned_overlap, "modularity": br.score}
    return [row], meta


def _run_landscape(cfg, seed):
    graph, planted = generate_sbm(cfg.model, seed)
    pts = empirical_H_sweep(graph, planted, cfg.model, _d_grid(cfg),
                            band=cfg.options.get("band"),
                            search_budget=int(cfg.options.get("search_budget", 200)), seed=seed)
    return [p.csv_row() for p in pts], {"points": len(pts)}


def _run_oracle(cfg, seed):
    k = int(cfg.options.get("k", cfg.model.k))
    n_grid = _opt(cfg, "resolution", 8, kind=int)
    ts = cfg.options.get("t", 0.5)
    ts = ts if isinstance(ts, list) else [ts]
    balanced = bool(cfg.options.get("balanced", False))
    rows, comps = [], []
    for t in ts:
        grid = grid_max_g(SignaturePolytopeSpec(k, float(t), balanced), n_grid,
                          max_resolution=max(12, n_grid))
        closed = float(closed_form_value(k, float(t))) if t <= 1 else None
        gap = None if closed is None else closed - grid.value
        rows.append([k, t, n_grid, closed, grid.value, gap])
        comps.append({"k": k, "t": t, "resolution": n_grid, "balanced": balanced,
                      "closed_form": closed, "grid_max": grid.value, "gap": gap,
                      "maximizer": grid.maximizer})
    return rows, {"comparisons": comps}


def _chain_thresholds(cfg):
    nu = cfg.options.get("nu")
    params = ogp_params(cfg.model, nu)
    nu1 = float(cfg.options.get("nu1", params.nu_close))
    nu2 = float(cfg.options.get("nu2", params.nu2))
    return params, nu1, nu2


def _run_greedy(cfg, seed):
    graph, planted = generate_sbm(cfg.model, seed)
    _, nu1, nu2 = _chain_thresholds(cfg)
    trace = greedy_run(graph, _start(cfg, planted, seed), planted, nu1, nu2)
    meta = {"steps": int(trace.steps[-1]), "final_distance": trace.final_distance,
            "final_modularity": trace.final_modularity, "nu1": nu1, "nu2": nu2, "tau": trace.tau}
    return list(trace.rows()), meta


def _run_mcmc(cfg, seed):
    graph, planted = generate_sbm(cfg.model, seed)
    params, nu1, nu2 = _chain_thresholds(cfg)
    beta = cfg.options.get("beta", "rule")
    c2 = None
    if beta == "rule":
        grid = _d_grid(cfg)
        report = ogp_certificate(graph, planted, params, standard_probes(graph, planted, grid, seed=seed))
        c2 = report.c2
        if c2 is None or c2 <= 0:
            raise ParameterError(f"measured c2 = {c2} is not positive; set options.beta explicitly")
        beta = beta_rule(c2, cfg.model.k)
    elif not isinstance(beta, (int, float)) or isinstance(beta, bool):
        raise ConfigError("options.beta", "must be a number or 'rule'")
    chain = ChainConfig(beta=float(beta), max_steps=int(cfg.options.get("max_steps", 100_000)),
                        nu1=nu1, nu2=nu2, sample_every=int(cfg.options.get("sample_every", 1000)),
                        seed=seed, kernel=cfg.options.get("kernel", "heat-bath"))
    trace = mcmc_run(graph, _start(cfg, planted, seed), planted, chain)
    meta = {"beta": chain.beta, "c2": c2, "nu1": nu1, "nu2": nu2, "tau": trace.tau,
            "first_exit": trace.first_exit, "kernel": chain.kernel, "params": cfg.model.to_dict()}
    return list(trace.rows()), meta


def _run_gibbs(cfg, seed):
    graph, planted = generate_sbm(cfg.model, seed)
    beta = float(_opt(cfg, "beta", kind=(int, float)))
    zeta = float(cfg.options.get("zeta", 0.25))
    table = exact_gibbs(graph, cfg.model.k, beta, planted)
    meta = {"beta": beta, "states": int(len(table.modularity)), "log_z": table.log_z,
            "mass_within_zeta": table.mass_within(zeta), "zeta": zeta}
    rows = [[seed, beta, table.log_z, zeta, meta["mass_within_zeta"]]]
    steps = cfg.options.get("chain_steps")
    if steps:
        chain = ChainConfig(beta=beta, max_steps=int(steps), nu1=0.0, nu2=0.5, seed=seed,
                            sample_every=int(steps), kernel=cfg.options.get("kernel", "heat-bath"))
        trace = mcmc_run(graph, planted, planted, chain, track_occupation=True)
        occ = trace.visits / trace.visits.sum()
        meta["chain_tv_to_gibbs"] = total_variation(occ, table.probabilities)
        meta["chain_tv_to_heat_bath_law"] = total_variation(occ, table.heat_bath_stationary())
    return rows, meta


def _run_ogp(cfg, seed):
    graph, planted = generate_sbm(cfg.model, seed)
    params = ogp_params(cfg.model, cfg.options.get("nu"))
    report = ogp_certificate(graph, planted, params,
                             standard_probes(graph, planted, _d_grid(cfg), seed=seed))
    rows = [[seed, r.name, r.distance, r.modularity, int(r.above), r.cls] for r in report.probes]
    meta = {"params": report.params.to_dict(), "threshold": report.threshold,
            "band_violations": [r.name for r in report.band_violations],
            "witness": report.witness and report.witness.name, "q_star": report.q_star,
            "c1": report.c1, "c2": report.c2, "ok": report.ok}
    return rows, meta


RUNNERS = {
    "score": (_run_score, ["seed", "partition", "distance", "modularity", "coverage",
                           "degree_tax", "mean_field"]),
    "landscape": (_run_landscape, CSV_HEADER),
    "oracle": (_run_oracle, ["k", "t", "resolution", "closed_form", "grid_max", "gap"]),
    "greedy": (_run_greedy, TRACE_HEADER),
    "mcmc": (_run_mcmc, TRACE_HEADER),
    "gibbs-oracle": (_run_gibbs, ["seed", "beta", "log_z", "zeta", "mass_within_zeta"]),
    "ogp-cert": (_run_ogp, ["seed", "probe", "distance", "modularity", "above", "class"]),
}
PER_SEED_CSV = {"greedy", "mcmc"}


@dataclass
class RunResult:
    status: int
    csv_files: list[Path]
    metadata_file: Path


def run(cfg: ExperimentConfig, out: str | None = None) -> RunResult:
    """Execute every seed and persist the artifacts.

    Sweeps are written to one CSV (rows concatenated in seed order); chain
    traces get one CSV per seed. The JSON metadata embeds the config hash,
    the seeds and the artifact version, as do the CSV file names.
    """
    runner, header = RUNNERS[cfg.kind]
    out_dir = Path(out or cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = cfg.config_hash()
    tag = digest[:12]
    kind = cfg.kind.replace("-", "_")
    all_rows, per_seed, csv_files = [], {}, []
    seeds = (cfg.seeds[0],) if cfg.kind == "oracle" else cfg.seeds
    for seed in seeds:
        rows, meta = runner(cfg, seed)
        per_seed[str(seed)] = meta
        if cfg.kind in PER_SEED_CSV:
            path = out_dir / f"{kind}_seed{seed}_{tag}.csv"
            _write_csv(path, header, rows)
            csv_files.append(path)
        else:
            all_rows.extend(rows)
    if cfg.kind not in PER_SEED_CSV:
        path = out_dir / f"{kind}_{tag}.csv"
        _write_csv(path, header, all_rows)
        csv_files.append(path)
    metadata = {"config_hash": digest, "artifact_version": __version__, "config": cfg.to_dict(),
                "seeds": list(seeds), "results": per_seed, "files": [p.name for p in csv_files]}
    meta_path = out_dir / f"{kind}_{tag}.json"
    meta_path.write_text(json.dumps(_jsonable(metadata), indent=2, sort_keys=True) + "\n")
    return RunResult(0, csv_files, meta_path)
