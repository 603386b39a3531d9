"""Command-line entry point.

Commands:
  quench-bench simulate {exact|tdvp}   -- run a quench, write trajectory /
                                          timing / verdict artifacts
  quench-bench estimate {shots|qpu|classical|crossover}
  quench-bench rearrange               -- Monte Carlo vs analytic defect-free
  quench-bench fit {mps|nqs}           -- scaling-law fits from a timing CSV

Every subcommand supports --json for pure machine output.  Module errors are
emitted as a machine-readable error object with a nonzero exit code.  With a
fixed config and seed all numerical outputs are byte-identical; measured wall
times (the timing CSV) and timestamps (manifest.json) are the only
exceptions.
"""

from __future__ import annotations

import functools
import platform
import sys
import warnings
from pathlib import Path

import click

from . import __version__, budget as budget_mod, convergence, costfit, oracle, register
from .config import (
    apply_overrides,
    build_manifest,
    dump_json,
    lattice_from_config,
    load_config,
    manifest_core,
    manifest_digest,
    params_from_config,
)
from .errors import InvalidConfig, QuenchBenchError
from .model import interactions
from .mps import run_quench, write_timing_csv
from .units import format_duration, parse_duration, parse_duration_ns


def handles_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except QuenchBenchError as exc:
            payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
            if kwargs.get("as_json"):
                click.echo(dump_json(payload), err=True, nl=False)
            else:
                click.echo(f"error [{type(exc).__name__}]: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _hardware_tag() -> str:
    return f"cpu-{platform.machine()}"


def _parse_size(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise InvalidConfig(f"size must look like 15x15, got {text!r}")
    return int(parts[0]), int(parts[1])


def _duration_or_none(value: str | None) -> float | None:
    return parse_duration(value) if value is not None else None


@click.group()
@click.version_option(version=__version__, prog_name="quench-bench")
def main() -> None:
    """Resource estimation for post-quench Ising dynamics."""


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

@main.group()
def simulate() -> None:
    """Run exact or MPS-TDVP quench simulations."""


def _prepare_run(config_path, t_pulse, dt, size, mps_overrides=None):
    config = load_config(config_path)
    overrides: dict = {"quench": {}, "lattice": {}, "mps": mps_overrides or {}}
    if t_pulse is not None:
        overrides["quench"]["t_pulse_ns"] = parse_duration_ns(t_pulse)
    if dt is not None:
        overrides["quench"]["dt_ns"] = parse_duration_ns(dt)
    if size is not None:
        lx, ly = _parse_size(size)
        overrides["lattice"] = {"Lx": lx, "Ly": ly}
    config = apply_overrides(config, overrides)
    lattice = lattice_from_config(config)
    params = params_from_config(config, lattice)
    inputs = [config_path] if config_path else []
    manifest = build_manifest(config, config["run"]["seed"], inputs)
    return config, lattice, params, manifest


def _prepend_manifest_comment(path: Path, manifest: dict) -> None:
    body = Path(path).read_text()
    Path(path).write_text(f"# manifest_sha256={manifest_digest(manifest)}\n{body}")


def _emit_verdict(out: Path, manifest: dict, verdict, as_json: bool, extra=None) -> None:
    dump_json(manifest, out / "manifest.json")
    payload = {"verdict": verdict.as_dict(), "manifest": manifest_core(manifest)}
    if extra:
        payload.update(extra)
    dump_json(payload, out / "verdict.json")
    if as_json:
        click.echo(dump_json(payload), nl=False)
    else:
        state = "passed" if verdict.passed else "FAILED"
        click.echo(
            f"verdict {state}: energy drift {verdict.energy_drift_rel:.3e}, "
            f"D8 error {verdict.d8_error_rel:.3e}  -> {out}"
        )


@simulate.command("exact")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--t-pulse", default=None, help="pulse duration with suffix, e.g. 400ns")
@click.option("--dt", default=None, help="step with suffix, e.g. 1ns")
@click.option("--size", default=None, help="lattice size, e.g. 3x3")
@click.option("--json", "as_json", is_flag=True, default=False)
@handles_errors
def simulate_exact(config_path, out_dir, t_pulse, dt, size, as_json) -> None:
    """Dense-statevector evolution (ground truth for small lattices)."""
    config, lattice, params, manifest = _prepare_run(config_path, t_pulse, dt, size)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cutoff = config["physics"]["cutoff_factor"] * params.spacing
    v = interactions(lattice, params, cutoff)
    traj = oracle.evolve_exact(lattice, params, v, params.t_pulse, params.dt)
    path = out / "trajectory.csv"
    oracle.export_trajectory_csv(traj, lattice, path)
    _prepend_manifest_comment(path, manifest)
    e_scale = convergence.energy_scale(lattice, params)
    drift = convergence.energy_drift(traj.energies, e_scale)
    sym = convergence.d8_error(traj.maps[-1])
    verdict = convergence.ConvergenceVerdict(
        energy_drift_rel=drift,
        d8_error_rel=sym,
        passed=drift < convergence.ENERGY_DRIFT_GATE and sym < convergence.D8_ERROR_GATE,
        e_scale=e_scale,
    )
    _emit_verdict(out, manifest, verdict, as_json)


@simulate.command("tdvp")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--t-pulse", default=None)
@click.option("--dt", default=None)
@click.option("--size", default=None)
@click.option("--max-chi", type=int, default=None)
@click.option("--memory-budget-gb", type=float, default=None)
@click.option("--json", "as_json", is_flag=True, default=False)
@handles_errors
def simulate_tdvp(
    config_path, out_dir, t_pulse, dt, size, max_chi, memory_budget_gb, as_json
) -> None:
    """Two-site TDVP evolution with timing instrumentation."""
    mps_overrides = {}
    if max_chi is not None:
        mps_overrides["max_chi"] = max_chi
    if memory_budget_gb is not None:
        mps_overrides["memory_budget_gb"] = memory_budget_gb
    config, lattice, params, manifest = _prepare_run(
        config_path, t_pulse, dt, size, mps_overrides
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mps_cfg = config["mps"]
    budget_bytes = (
        mps_cfg["memory_budget_gb"] * 1e9 if mps_cfg["memory_budget_gb"] is not None else None
    )
    cutoff = config["physics"]["cutoff_factor"] * params.spacing
    result = run_quench(
        lattice,
        params,
        params.t_pulse,
        params.dt,
        max_chi=mps_cfg["max_chi"],
        k_max=mps_cfg["k_max"],
        cutoff=cutoff,
        memory_budget_bytes=budget_bytes,
    )
    traj_path = out / "trajectory.csv"
    _write_mps_trajectory_csv(result, params.dt, traj_path)
    _prepend_manifest_comment(traj_path, manifest)
    if result.records:
        write_timing_csv(
            out / "timing.csv",
            lattice.n_sites,
            mps_cfg["max_chi"],
            params.dt,
            result.records,
            _hardware_tag(),
            append=False,
            header_comment=f"manifest_sha256={manifest_digest(manifest)}",
        )
    verdict = convergence.evaluate_run(result, params)
    # wall timings live only in timing.csv (measurements are exempt from the
    # byte-reproducibility contract); everything in verdict.json is deterministic
    extra = {"run": {"max_chi_used": max((r.max_chi_used for r in result.records), default=1)}}
    _emit_verdict(out, manifest, verdict, as_json, extra=extra)


def _write_mps_trajectory_csv(result, dt: float, path) -> None:
    lattice = result.lattice
    energies = result.energies
    with open(path, "w") as fh:
        fh.write("time_ns,site_row,site_col,n_expect,energy\n")
        for omap in result.maps:
            step = int(round(omap.time / dt)) if dt > 0 else 0
            energy = energies[min(step, len(energies) - 1)]
            for row in range(lattice.ly):
                for col in range(lattice.lx):
                    fh.write(
                        f"{omap.time * 1e9!r},{row},{col},"
                        f"{float(omap.values[row, col])!r},{energy!r}\n"
                    )


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------

@main.group()
def estimate() -> None:
    """Shot, QPU, classical and crossover resource estimates."""


@estimate.command("shots")
@click.option("--p", type=float, default=0.5, show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--json", "as_json", is_flag=True, default=False)
@handles_errors
def estimate_shots(p, alpha, as_json) -> None:
    """Shots needed for precision alpha on a +/-1 observable."""
    n = budget_mod.shots_for_precision(p, alpha)
    if as_json:
        click.echo(dump_json({"p": p, "alpha": alpha, "shots": n}), nl=False)
    else:
        click.echo(str(n))


def _probs_from_config(config) -> register.DefectProbabilities:
    reg = config["register"]
    return register.DefectProbabilities(
        p_transf=reg["p_transf"],
        p_pickup=reg["p_pickup"],
        p_acci=reg["p_acci"],
        p_loss=reg["p_loss"],
    )


@estimate.command("qpu")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--register", "register_size", default=None, help="e.g. 15x15 or an atom count")
@click.option("--alpha", type=float, default=None)
@click.option("--confidence", type=float, default=None)
@click.option("--shot-rate", type=float, default=None, help="Hz")
@click.option("--qpu-power-kw", type=float, default=None)
@click.option("--json", "as_json", is_flag=True, default=False)
@handles_errors
def estimate_qpu(
    config_path, register_size, alpha, confidence, shot_rate, qpu_power_kw, as_json
) -> None:
    """Wall time and energy for one quench task on the QPU."""
    config = load_config(config_path)
    if register_size is None:
        n_register = config["lattice"]["Lx"] * config["lattice"]["Ly"]
    elif "x" in register_size.lower():
        lx, ly = _parse_size(register_size)
        n_register = lx * ly
    else:
        n_register = int(register_size)
    b = config["budget"]
    schedule = budget_mod.qpu_schedule(
        n_register,
        _probs_from_config(config),
        alpha=alpha if alpha is not None else b["alpha"],
        confidence=confidence if confidence is not None else b["confidence"],
        shot_rate=shot_rate if shot_rate is not None else b["shot_rate_hz"],
        qpu_power_watts=(qpu_power_kw if qpu_power_kw is not None else b["qpu_power_kw"]) * 1e3,
    )
    payload = {
        "m_usable": schedule.budget.m_usable,
        "p_defect_free": schedule.budget.p_defect_free,
        "n_attempts": schedule.budget.n_attempts,
        "wall_seconds": schedule.budget.wall_seconds,
        "energy_kwh": schedule.energy_kwh,
        "counts": schedule.counts,
    }
    if as_json:
        click.echo(dump_json(payload), nl=False)
    else:
        click.echo(
            f"N={n_register}: {schedule.budget.n_attempts} attempts for "
            f"{schedule.budget.m_usable} usable shots "
            f"(p_df={schedule.budget.p_defect_free:.4g}) -> "
            f"{format_duration(schedule.budget.wall_seconds)}, {schedule.energy_kwh:.3g} kWh"
        )


@estimate.command("classical")
@click.option("--samples", "samples_path", type=click.Path(exists=True), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--size", default=None, help="lattice size, e.g. 15x15")
@click.option("--chi", type=int, required=True)
@click.option("--t-pulse", default=None)
@click.option("--dt", default=None)
@click.option("--gpu-power-kw", type=float, default=None)
@click.option("--power-log", type=click.Path(exists=True), default=None)
@click.option("--json", "as_json", is_flag=True, default=False)
@handles_errors
def estimate_classical(
    samples_path, config_path, size, chi, t_pulse, dt, gpu_power_kw, power_log, as_json
) -> None:
    """Fit the timing samples and extrapolate one classical simulation."""
    config = load_config(config_path)
    lx, ly = _parse_size(size) if size else (config["lattice"]["Lx"], config["lattice"]["Ly"])
    n = lx * ly
    t_pulse_s = _duration_or_none(t_pulse) or config["quench"]["t_pulse_ns"] * 1e-9
    dt_s = _duration_or_none(dt) or config["quench"]["dt_ns"] * 1e-9
    if power_log is not None:
        power_watts = costfit.mean_power_from_log(power_log)
    elif gpu_power_kw is not None:
        power_watts = gpu_power_kw * 1e3
    else:
        power_watts = costfit.DEFAULT_GPU_POWER_WATTS
    samples = [s for s in costfit.read_timing_csv(samples_path) if s.method == "MPS"]
    model = costfit.fit_mps(samples)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = costfit.extrapolate(model, n, chi, t_pulse_s, dt_s, power_watts)
    payload = {
        "report": report.as_dict(),
        "fit": {
            "a": model.a,
            "b": model.b,
            "c": model.c,
            "residual_relative_rms": model.fit_residual,
            "domain": model.domain,
        },
    }
    if as_json:
        click.echo(dump_json(payload), nl=False)
    else:
        click.echo(costfit.format_resource_table([report]))


@estimate.command("crossover")
@click.option("--samples", "samples_path", type=click.Path(exists=True), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--chi", type=int, required=True)
@click.option("--n-min", type=int, default=25, show_default=True)
@click.option("--n-max", type=int, default=625, show_default=True)
@click.option("--n-step", type=int, default=25, show_default=True)
@click.option("--t-pulse", default=None)
@click.option("--dt", default=None)
@click.option("--gpu-power-kw", type=float, default=None)
@click.option("--json", "as_json", is_flag=True, default=False)
@handles_errors
def estimate_crossover(
    samples_path, config_path, chi, n_min, n_max, n_step, t_pulse, dt, gpu_power_kw, as_json
) -> None:
    """Locate the system size where the QPU beats the classical projection."""
    config = load_config(config_path)
    t_pulse_s = _duration_or_none(t_pulse) or config["quench"]["t_pulse_ns"] * 1e-9
    dt_s = _duration_or_none(dt) or config["quench"]["dt_ns"] * 1e-9
    power_watts = (gpu_power_kw * 1e3) if gpu_power_kw else costfit.DEFAULT_GPU_POWER_WATTS
    samples = [s for s in costfit.read_timing_csv(samples_path) if s.method == "MPS"]
    model = costfit.fit_mps(samples)
    probs = _probs_from_config(config)
    b = config["budget"]

    def classical_fn(n):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return costfit.extrapolate(model, n, chi, t_pulse_s, dt_s, power_watts)

    def qpu_fn(n):
        return budget_mod.qpu_schedule(
            n,
            probs,
            alpha=b["alpha"],
            confidence=b["confidence"],
            shot_rate=b["shot_rate_hz"],
            qpu_power_watts=b["qpu_power_kw"] * 1e3,
        )

    sweep = list(range(n_min, n_max + 1, n_step))
    result = costfit.crossover(classical_fn, qpu_fn, sweep)
    payload = {
        "N_time": result.n_time,
        "N_energy": result.n_energy,
        "at_boundary_time": result.at_boundary_time,
        "at_boundary_energy": result.at_boundary_energy,
        "sweep": {"n_min": n_min, "n_max": n_max, "n_step": n_step, "chi": chi},
    }
    if as_json:
        click.echo(dump_json(payload), nl=False)
    else:
        def fmt(x):
            return "NONE" if x is None else f"{x:.0f}"

        click.echo(f"crossover N*_time={fmt(result.n_time)} N*_energy={fmt(result.n_energy)}")


# ---------------------------------------------------------------------------
# rearrange
# ---------------------------------------------------------------------------

@main.command("rearrange")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--trials", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--register-size", type=int, default=None, help="atoms in the register")
@click.option("--n-traps", type=int, default=None)
@click.option("--fill-p", type=float, default=None)
@click.option("--json", "as_json", is_flag=True, default=False)
@handles_errors
def rearrange(config_path, trials, seed, register_size, n_traps, fill_p, as_json) -> None:
    """Monte Carlo defect-free estimate, side by side with the analytic model."""
    config = load_config(config_path)
    n_register = register_size or config["lattice"]["Lx"] * config["lattice"]["Ly"]
    n_traps = n_traps or config["register"]["n_traps"] or 2 * n_register
    fill = fill_p if fill_p is not None else config["register"]["fill_p"]
    seed = seed if seed is not None else config["run"]["seed"]
    probs = _probs_from_config(config)
    layout = register.make_layout(n_register, n_traps)
    est = register.simulate_defect_free(layout, probs, trials, rng_seed=seed, fill_p=fill)
    all_infeasible = est.counts_mean["infeasible_trials"] >= trials
    analytic_mc = (
        None if all_infeasible else register.defect_free_analytic(est.counts_mean, probs)
    )
    analytic_expected = register.defect_free_analytic(
        register.expected_counts(n_register), probs
    )
    payload = {
        "p_hat": est.p_hat,
        "std_err": est.std_err,
        "trials": est.trials,
        "counts_mean": est.counts_mean,
        "analytic_at_mean_counts": analytic_mc,
        "analytic_at_expected_counts": analytic_expected,
        "layout_model": "register_grid_plus_reservoir_rings",
    }
    if as_json:
        click.echo(dump_json(payload), nl=False)
    else:
        ana = "n/a" if analytic_mc is None else f"{analytic_mc:.4f}"
        click.echo(
            f"N={n_register}, traps={n_traps}: p_hat = {est.p_hat:.4f} +- {est.std_err:.4f} "
            f"(MC, {trials} trials) vs {ana} (analytic at mean counts)"
        )


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

@main.group()
def fit() -> None:
    """Scaling-law fits from timing CSVs."""


@fit.command("mps")
@click.option("--samples", "samples_path", type=click.Path(exists=True), required=True)
@click.option("--json", "as_json", is_flag=True, default=False)
@handles_errors
def fit_mps_cmd(samples_path, as_json) -> None:
    samples = [s for s in costfit.read_timing_csv(samples_path) if s.method == "MPS"]
    model = costfit.fit_mps(samples)
    payload = {
        "a": model.a,
        "b": model.b,
        "c": model.c,
        "residual_relative_rms": model.fit_residual,
        "domain": model.domain,
        "n_samples": len(samples),
    }
    click.echo(dump_json(payload), nl=False)


@fit.command("nqs")
@click.option("--samples", "samples_path", type=click.Path(exists=True), required=True)
@click.option("--normalize-workers/--no-normalize-workers", default=True, show_default=True)
@click.option("--json", "as_json", is_flag=True, default=False)
@handles_errors
def fit_nqs_cmd(samples_path, normalize_workers, as_json) -> None:
    samples = [s for s in costfit.read_timing_csv(samples_path) if s.method == "NQS"]
    model = costfit.fit_nqs(samples, normalize_workers=normalize_workers)
    payload = {
        "a_q": model.a_q,
        "b_q": model.b_q,
        "c_q": model.c_q,
        "residual_relative_rms": model.fit_residual,
        "domain": model.domain,
        "n_samples": len(samples),
    }
    click.echo(dump_json(payload), nl=False)


if __name__ == "__main__":
    main()
