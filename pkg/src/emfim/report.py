"""Config-driven experiments: fit, estimate, compare, report.

An experiment is described by a JSON file (nested key/value). The pipeline
is: build the model, obtain data (simulated from true parameters or read
from a file), fit by EM (or adopt a supplied MLE), compute the requested
information matrices and map-Jacobian estimates, and assemble a report with
eigenvalues, inverse scaled information, and pairwise relative spectral
errors. Everything is deterministic given the config: two runs produce
byte-identical report files.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from . import baselines, gmm, ssm
from .em import Dataset, EMConfig, EMModel, EMTrace, run_em
from .errors import ConfigError, NonConvergenceError, UndefinedMetricError
from .rng import master_rng
from .spsa import SPSAConfig, estimate_fim
from .synthetic import QuadraticModel

MODELS = ("gmm", "ssm", "synthetic-quadratic")
FIM_METHODS = ("spsa", "louis", "oakes", "sem")
DM_METHODS = ("sem", "spsa", "fd")


def spectral_rel_error(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b|| / ||b|| in the spectral norm (largest singular value)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.linalg.norm(b, ord=2)
    if denom == 0.0:
        raise UndefinedMetricError("relative spectral error against a zero matrix")
    return float(np.linalg.norm(a - b, ord=2) / denom)


@dataclass(frozen=True)
class DMConfig:
    c: float = 0.01
    n_samples: int = 50
    seed: int = 0
    stability_tol: float = 1e-4
    fd_step: float = 1e-5


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    params: dict
    n: int
    theta0: tuple | None
    theta_star: tuple | None
    em: EMConfig
    spsa: SPSAConfig
    dm: DMConfig
    fim_methods: tuple[str, ...]
    dm_methods: tuple[str, ...]
    reference: dict
    data_seed: int | None = None
    data_file: str | None = None
    out: str | None = None

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        try:
            return _parse_config(raw)
        except (AttributeError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from exc


def _parse_config(raw: dict) -> ExperimentConfig:
    model = raw.get("model")
    if model not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}, got {model!r}")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params must be a mapping")

    n = int(raw.get("n", 0))
    data = raw.get("data", {})
    data_seed = data.get("seed")
    data_file = data.get("file")
    if data_file is None:
        if data_seed is None:
            raise ConfigError("data needs either a 'seed' (simulate) or a 'file'")
        data_seed = int(data_seed)
        if n < 1:
            raise ConfigError("simulated data needs n >= 1")

    theta0 = raw.get("theta0")
    theta_star = raw.get("theta_star")
    if theta0 is None and theta_star is None:
        raise ConfigError("provide theta0 (fit by EM) or theta_star (skip the fit)")

    em_raw = raw.get("em", {})
    em = EMConfig(
        delta=float(em_raw.get("delta", 1e-8)),
        max_iterations=int(em_raw.get("max_iterations", 10000)),
    )
    spsa_raw = raw.get("spsa", {})
    spsa = SPSAConfig(
        c=float(spsa_raw.get("c", 0.01)),
        n_replicates=int(spsa_raw.get("N", spsa_raw.get("n_replicates", 1000))),
        seed=int(spsa_raw.get("seed", 0)),
        mode=spsa_raw.get("mode", "expected"),
        gradient_source=spsa_raw.get("gradient_source", "score"),
    )
    dm_raw = raw.get("dm", {})
    dm = DMConfig(
        c=float(dm_raw.get("c", spsa.c)),
        n_samples=int(dm_raw.get("n_samples", 50)),
        seed=int(dm_raw.get("seed", spsa.seed)),
        stability_tol=float(dm_raw.get("stability_tol", 1e-4)),
        fd_step=float(dm_raw.get("fd_step", 1e-5)),
    )

    fim_methods = tuple(raw.get("fim_methods", ["spsa"]))
    dm_methods = tuple(raw.get("dm_methods", []))
    for m in fim_methods:
        if m not in FIM_METHODS:
            raise ConfigError(f"unknown fim method {m!r}")
    for m in dm_methods:
        if m not in DM_METHODS:
            raise ConfigError(f"unknown dm method {m!r}")
    needs_trace = "sem" in fim_methods or "sem" in dm_methods
    if needs_trace and theta0 is None:
        raise ConfigError("sem needs an EM trace: provide theta0 rather than theta_star")

    reference = raw.get("reference", "none")
    if reference in ("oracle", "none"):
        reference = {"source": reference}
    elif isinstance(reference, dict) and "file" in reference:
        compare = reference.get("compare", "fim")
        if compare not in ("fim", "inverse_scaled_fim"):
            raise ConfigError(f"reference compare must be 'fim' or 'inverse_scaled_fim', got {compare!r}")
        reference = {"source": "file", "file": reference["file"], "compare": compare}
    else:
        raise ConfigError(f"reference must be 'oracle', 'none', or {{'file': ...}}, got {reference!r}")

    return ExperimentConfig(
        model=model,
        params=params,
        n=n,
        theta0=tuple(theta0) if theta0 is not None else None,
        theta_star=tuple(theta_star) if theta_star is not None else None,
        em=em,
        spsa=spsa,
        dm=dm,
        fim_methods=fim_methods,
        dm_methods=dm_methods,
        reference=reference,
        data_seed=data_seed,
        data_file=data_file,
        out=raw.get("out"),
    )


def _build_model(config: ExperimentConfig) -> tuple[EMModel, np.ndarray | None]:
    """Model instance plus the true parameter used for data simulation."""
    try:
        if config.model == "gmm":
            model = gmm.GaussianMixture()
            if config.data_file is not None:
                return model, None
            theta = np.array(
                [config.params["pi"], config.params["mu1"], config.params["mu2"]], dtype=float
            )
            return model, theta
        if config.model == "ssm":
            model = ssm.DiagonalNoiseStateSpace(ssm.benchmark_spec())
            if config.data_file is not None:
                return model, None
            return model, np.asarray(config.params["q_diag"], dtype=float)
        if config.data_file is not None:
            raise ConfigError("the synthetic model has no data file format; use a data seed")
        model = QuadraticModel(np.asarray(config.params["curvature"], dtype=float))
        return model, np.asarray(config.params["theta"], dtype=float)
    except KeyError as exc:
        raise ConfigError(f"model params missing entry {exc}") from exc


def _load_data(config: ExperimentConfig, model: EMModel, theta_true) -> Dataset:
    if config.data_file is not None:
        if config.model == "gmm":
            return gmm.read_data(config.data_file)
        if config.model == "ssm":
            return ssm.read_data(config.data_file)
        raise ConfigError("the synthetic model has no data file format")
    return model.sample_data(theta_true, config.n, master_rng(config.data_seed))


def _reference_matrix(config: ExperimentConfig, model, theta_star, data):
    source = config.reference["source"]
    if source == "none":
        return None, None
    if source == "file":
        matrix = np.atleast_2d(np.loadtxt(config.reference["file"]))
        if matrix.shape != (model.dim, model.dim):
            raise ConfigError(
                f"reference matrix has shape {matrix.shape}, expected {(model.dim, model.dim)}"
            )
        return matrix, config.reference["compare"]
    if config.model == "gmm":
        return gmm.expected_fim_oracle(theta_star, data.n), "fim"
    if config.model == "ssm":
        return ssm.CAO_REFERENCE_INVERSE_FIM, "inverse_scaled_fim"
    return data.n * model.curvature, "fim"


def _matrix_entry(matrix: np.ndarray, n: int, symmetric: bool = True) -> dict:
    entry: dict[str, Any] = {"matrix": matrix.tolist()}
    if symmetric:
        entry["eigenvalues"] = np.linalg.eigvalsh(0.5 * (matrix + matrix.T)).tolist()
        entry["inverse_scaled"] = np.linalg.inv(matrix / n).tolist()
    else:
        eig = np.linalg.eigvals(matrix)
        order = np.argsort(eig.real)
        entry["eigenvalues"] = [[float(v.real), float(v.imag)] for v in eig[order]]
    return entry


def run_experiment(config: ExperimentConfig) -> dict:
    """Execute the configured pipeline and return the report dict.

    Raises :class:`NonConvergenceError` if an EM fit is required but does
    not converge; model and estimator errors propagate unchanged.
    """
    model, theta_true = _build_model(config)
    data = _load_data(config, model, theta_true)

    report: dict[str, Any] = {
        "config": _echo_config(config),
        "model": config.model,
        "param_names": list(model.param_names),
        "n": data.n,
    }

    trace: EMTrace | None = None
    if config.theta_star is not None:
        theta_star = np.asarray(config.theta_star, dtype=float)
        model.validate(theta_star)
        report["em"] = {"fitted": False}
    else:
        trace = run_em(model, data, np.asarray(config.theta0, dtype=float), config.em)
        if not trace.converged:
            raise NonConvergenceError(
                f"EM did not converge within {config.em.max_iterations} iterations"
            )
        theta_star = trace.theta_star
        report["em"] = {
            "fitted": True,
            "iterations": trace.iterations,
            "converged": trace.converged,
            "final_objective": float(trace.objectives[-1]),
        }
    report["theta_star"] = theta_star.tolist()

    matrices: dict[str, dict] = {}
    fim_names: list[str] = []
    for method in config.fim_methods:
        if method == "spsa":
            estimate = estimate_fim(model, theta_star, data, config.spsa)
            name = f"spsa_{config.spsa.mode}_fim"
            matrices[name] = _matrix_entry(estimate.matrix, data.n)
            matrices[name]["standard_error"] = estimate.standard_error.tolist()
        elif method == "louis":
            name = "louis_fim"
            matrices[name] = _matrix_entry(baselines.louis_fim(model, theta_star, data), data.n)
        elif method == "oakes":
            name = "oakes_fim"
            matrices[name] = _matrix_entry(baselines.oakes_fim(model, theta_star, data), data.n)
        else:
            name = "sem_fim"
            dm = baselines.sem_dm(model, data, trace, theta_star, config.dm.stability_tol)
            matrices[name] = _matrix_entry(baselines.sem_fim(model, dm, theta_star, data), data.n)
        fim_names.append(name)

    dm_names: list[str] = []
    for method in config.dm_methods:
        if method == "sem":
            dm = baselines.sem_dm(model, data, trace, theta_star, config.dm.stability_tol)
        elif method == "spsa":
            dm = baselines.spsa_dm(
                model, data, theta_star, config.dm.c, config.dm.n_samples,
                master_rng(config.dm.seed),
            )
        else:
            dm = baselines.fd_dm(model, data, theta_star, config.dm.fd_step)
        name = f"dm_{method}"
        matrices[name] = _matrix_entry(dm.matrix, data.n, symmetric=False)
        matrices[name]["iterations_used"] = dm.iterations_used
        dm_names.append(name)

    reference, compare_on = _reference_matrix(config, model, theta_star, data)
    if reference is not None:
        matrices["reference"] = {"matrix": reference.tolist(), "compare": compare_on}

    errors: list[dict] = []
    for i, left in enumerate(fim_names):
        for right in fim_names[i + 1:]:
            errors.append(
                {
                    "left": left,
                    "right": right,
                    "on": "fim",
                    "value": spectral_rel_error(
                        np.array(matrices[left]["matrix"]), np.array(matrices[right]["matrix"])
                    ),
                }
            )
    for i, left in enumerate(dm_names):
        for right in dm_names[i + 1:]:
            errors.append(
                {
                    "left": left,
                    "right": right,
                    "on": "dm",
                    "value": spectral_rel_error(
                        np.array(matrices[left]["matrix"]), np.array(matrices[right]["matrix"])
                    ),
                }
            )
    if reference is not None:
        key = "matrix" if compare_on == "fim" else "inverse_scaled"
        for name in fim_names:
            errors.append(
                {
                    "left": name,
                    "right": "reference",
                    "on": compare_on,
                    "value": spectral_rel_error(np.array(matrices[name][key]), reference),
                }
            )

    report["matrices"] = matrices
    report["errors"] = errors
    report["seeds"] = {"data": config.data_seed, "spsa": config.spsa.seed, "dm": config.dm.seed}
    return report


def _echo_config(config: ExperimentConfig) -> dict:
    echo = asdict(config)
    echo["em"] = asdict(config.em)
    echo["spsa"] = asdict(config.spsa)
    echo["dm"] = asdict(config.dm)
    echo.pop("out", None)  # the sink is not part of the experiment identity
    return echo


def _format_matrix(matrix: np.ndarray, names: list[str]) -> str:
    width = max(12, max((len(s) for s in names), default=0) + 2)
    head = " " * 8 + "".join(f"{s:>{width}}" for s in names)
    rows = [head]
    for label, row in zip(names, matrix):
        rows.append(f"{label:>8}" + "".join(f"{v:>{width}.4f}" for v in row))
    return "\n".join(rows)


def format_report(report: dict) -> str:
    """Human-readable summary: matrices at fixed 4-decimal precision."""
    names = report["param_names"]
    lines = [f"model: {report['model']}   n = {report['n']}"]
    theta = ", ".join(f"{s} = {v:.4f}" for s, v in zip(names, report["theta_star"]))
    lines.append(f"theta* : {theta}")
    em = report["em"]
    if em.get("fitted"):
        lines.append(
            f"EM: {em['iterations']} iterations, converged = {em['converged']}, "
            f"final objective = {em['final_objective']:.6f}"
        )
    else:
        lines.append("EM: skipped (theta* supplied)")
    for name, entry in report["matrices"].items():
        lines.append("")
        lines.append(f"[{name}]")
        lines.append(_format_matrix(np.array(entry["matrix"]), names))
        eig = entry.get("eigenvalues")
        if eig is not None:
            if eig and isinstance(eig[0], list):
                shown = ", ".join(f"{re:.4f}{im:+.4f}j" for re, im in eig)
            else:
                shown = ", ".join(f"{v:.4f}" for v in eig)
            lines.append(f"eigenvalues: {shown}")
        if "inverse_scaled" in entry:
            lines.append("inverse scaled information (matrix / n)^-1:")
            lines.append(_format_matrix(np.array(entry["inverse_scaled"]), names))
    if report["errors"]:
        lines.append("")
        lines.append("relative spectral errors:")
        for rec in report["errors"]:
            lines.append(f"  {rec['left']} vs {rec['right']} ({rec['on']}): {rec['value']:.4f}")
    return "\n".join(lines) + "\n"


def write_report(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
