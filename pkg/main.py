import functools
import logging
import time
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import click
import numpy as np
from pydantic import ValidationError

from config import settings
from core.errors import CheckFailedError, ConfigurationError, SimulatorError
from models.configs import RunConfig
from models.quantum import QubitHamiltonian
from services import collision, demon, emulator, export, trajectories, verification
from services.states import correlated_state, thermal_state

logger = logging.getLogger(__name__)


def configure_logging(verbose: bool = False) -> None:
    level = logging.INFO if (verbose or settings.DEBUG) else getattr(logging, settings.LOG_LEVEL.upper(), logging.WARNING)
    handlers = [logging.StreamHandler()]
    if settings.LOG_FILE:
        handlers.append(logging.FileHandler(settings.LOG_FILE))
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers
    )


def load_run_config(path: Optional[Path]) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        return RunConfig.model_validate_json(Path(path).read_bytes())
    except ValidationError as e:
        raise ConfigurationError("Invalid configuration file", details={"path": str(path), "errors": e.error_count()})
    except OSError as e:
        raise ConfigurationError("Cannot read configuration file", details={"path": str(path), "reason": str(e)})


def _override(model, **updates):
    """
    Re-validate ``model`` with the non-None ``updates`` applied
    """
    updates = {k: v for k, v in updates.items() if v is not None}
    if not updates:
        return model
    try:
        return type(model).model_validate({**model.model_dump(), **updates})
    except ValidationError as e:
        raise ConfigurationError(f"Invalid {type(model).__name__} options", details={"errors": str(e).splitlines()[0]})


def _metadata(command: str, section: Any, seed: Optional[int] = None, **extra) -> Dict[str, Any]:
    meta = {"command": command, "app": settings.APP_NAME, "config": section.model_dump(mode="json"), **extra}
    if seed is not None:
        meta["seed"] = seed
    return meta


def handle_errors(command):
    """
    Map simulator errors to their exit codes
    """
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        start_time = time.time()
        try:
            result = command(*args, **kwargs)
        except SimulatorError as e:
            logger.error(f"{command.__name__} failed: {e}")
            click.echo(f"Error: {e}", err=True)
            raise click.exceptions.Exit(e.exit_code)
        logger.info(f"{command.__name__} finished in {time.time() - start_time:.2f} seconds")
        return result
    return wrapper


class Context:
    def __init__(self, run_config: RunConfig, seed: Optional[int], out: Path, fmt: str):
        self.run_config = run_config
        self.seed = seed if seed is not None else run_config.seed
        self.out = out
        self.format = fmt


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None,
              help="JSON run configuration")
@click.option("--seed", type=int, default=None, help="Override every seed in the configuration")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None, help="Output directory")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None, help="Table format")
@click.option("-v", "--verbose", is_flag=True, help="Log at INFO level")
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[Path], seed: Optional[int], out: Optional[Path], fmt: Optional[str], verbose: bool):
    """Entropy production with system-memory correlations: protocols, fluctuation theorems, demon and circuit emulation."""
    configure_logging(verbose)
    try:
        run_config = load_run_config(config_path)
    except ConfigurationError as e:
        click.echo(f"Error: {e}", err=True)
        ctx.exit(e.exit_code)
    ctx.obj = Context(run_config, seed, out or run_config.output_dir, fmt or run_config.format)


@cli.command("collision")
@click.option("--correlation", type=click.Choice(["classical", "quantum", "product"]), default=None)
@click.option("--noise", type=float, default=None, help="Correlation noise eps")
@click.option("--delta-e", type=float, default=None, help="Quench step")
@click.option("--g", type=float, default=None, help="Collision strength")
@click.option("--retain-msr", is_flag=True, help="Keep the S-M-R state to cross-check the CMI identity")
@click.option("--noise-sweep", type=int, default=0, help="Also sweep this many noise values in [0, 1]")
@click.option("--convergence", is_flag=True, help="Also scan the work gap over refined delta_e")
@click.pass_obj
@handle_errors
def cmd_collision(obj: Context, correlation, noise, delta_e, g, retain_msr, noise_sweep, convergence):
    """Quench-and-collide protocol time series."""
    config = obj.run_config.collision
    family = _override(config.correlation, kind=correlation, noise=noise)
    config = _override(config, delta_e=delta_e, g=g, retain_msr=retain_msr or None, correlation=family.model_dump())

    series = collision.run_protocol(config)
    meta = _metadata("collision", config, steps=config.steps, delta_f_s=collision.free_energy_change(config))
    paths = [export.write_timeseries(obj.out / f"collision_{config.correlation.kind}", series, meta, obj.format)]
    if noise_sweep:
        sweep = collision.run_noise_sweep(config, np.linspace(0, 1, noise_sweep).tolist())
        paths.append(export.write_rows(obj.out / "noise_sweep", sweep.rows(), meta, obj.format))
        paths.append(export.write_rows(obj.out / "noise_sweep_grid", sweep.grid_rows(), meta, obj.format))
    if convergence:
        paths.append(export.write_rows(obj.out / "convergence", collision.convergence_scan(config), meta, obj.format))
    for path in paths:
        click.echo(str(path))


def _trajectory_process(config) -> trajectories.TrajectoryProcess:
    rho_sm = correlated_state(config.correlation, config.beta_times_e_system)
    rho_r = thermal_state(QubitHamiltonian(excited_energy=config.beta_times_e_reservoir), 1.0)
    return trajectories.process_from_states(rho_sm, rho_r, collision.xy_unitary(config.g))


@cli.command("trajectories")
@click.option("--scheme", type=click.Choice(["global", "local", "both"]), default=None)
@click.option("--correlation", type=click.Choice(["classical", "quantum", "product"]), default=None)
@click.option("--noise", type=float, default=None)
@click.option("--g", type=float, default=None)
@click.pass_obj
@handle_errors
def cmd_trajectories(obj: Context, scheme, correlation, noise, g):
    """Exact forward/backward distributions, stochastic values and detailed-FT tables."""
    config = obj.run_config.trajectories
    family = _override(config.correlation, kind=correlation, noise=noise)
    config = _override(config, scheme=scheme, g=g, correlation=family.model_dump())
    process = _trajectory_process(config)
    meta = _metadata("trajectories", config)
    schemes: Tuple[str, ...] = ("global", "local") if config.scheme == "both" else (config.scheme,)

    paths = []
    for name in schemes:
        dist_f, dist_b = process.pair(name)
        paths.append(export.write_json(obj.out / f"distributions_{name}.json", {
            "forward": export.distribution_to_json(dist_f),
            "backward": export.distribution_to_json(dist_b),
        }, meta))
        kinds = trajectories.GLOBAL_KINDS if name == "global" else trajectories.LOCAL_KINDS
        ft_rows = []
        for kind in kinds:
            functional = process.functional(kind)
            paths.append(export.write_rows(obj.out / f"values_{kind}", export.functional_rows(functional, dist_f), meta, obj.format))
            if functional.backward:
                ft_rows += export.detailed_ft_rows(trajectories.detailed_ft(dist_f, dist_b, functional))
        paths.append(export.write_rows(obj.out / f"detailed_ft_{name}", ft_rows, meta, obj.format))
    paths.append(export.write_json(obj.out / "averages.json", trajectories.averages_report(process), meta))
    for path in paths:
        click.echo(str(path))


@cli.command("demon")
@click.option("--beta", "betas", type=float, multiple=True, help="Inverse temperatures (repeatable)")
@click.option("--samples", type=int, default=None)
@click.option("--kind", "kinds", type=click.Choice(list(demon.FEEDBACK_KINDS)), multiple=True)
@click.pass_obj
@handle_errors
def cmd_demon(obj: Context, betas, samples, kinds):
    """Random demon gates: entropy change against final correlations."""
    config = _override(obj.run_config.demon, betas=list(betas) or None, num_samples=samples,
                       feedback_kinds=list(kinds) or None, seed=obj.seed)
    for kind in config.feedback_kinds:
        for beta in config.betas:
            records = demon.demon_scatter(beta, config.num_samples, config.seed, kind, config.system_energy)
            meta = _metadata("demon", config, config.seed, beta=beta, feedback_kind=kind)
            path = export.write_demon_scatter(obj.out / f"demon_{kind}_beta{beta:g}", records, meta, obj.format)
            click.echo(str(path))


@cli.command("emulate")
@click.option("--exact", is_flag=True, help="Use exact circuit probabilities instead of shots")
@click.option("--shots", type=int, default=None, help="Shots per replicate")
@click.option("--reps", type=int, default=None)
@click.option("--readout-flip", type=float, default=None, help="Per-qubit readout flip probability")
@click.option("--readout-decay", type=float, default=None, help="Probability a 1 reads as 0 (defaults to --readout-flip)")
@click.option("--printed-thermal-angle", is_flag=True, help="Use 2*arctan(exp(beta*E)) for the reservoir prep")
@click.option("--transitions", is_flag=True, help="Also write theoretical and sampled transition matrices")
@click.option("--counts", is_flag=True, help="Also write per-replicate counts of the preparation and forward circuits")
@click.option("--sweep", is_flag=True, help="Also run the shot-count sweep")
@click.pass_obj
@handle_errors
def cmd_emulate(obj: Context, exact, shots, reps, readout_flip, readout_decay, printed_thermal_angle, transitions, counts, sweep):
    """Shot-noise emulation of the two-point-measurement circuits."""
    config = obj.run_config.emulate
    shot_config = _override(config.shots, shots_per_rep=shots, reps=reps, readout_flip_prob=readout_flip,
                            readout_decay_prob=readout_decay, seed=obj.seed)
    config = _override(config, exact=exact or None, printed_thermal_angle=printed_thermal_angle or None, shots=shot_config.model_dump())
    meta = _metadata("emulate", config, config.shots.seed)

    report = emulator.emulate(config)
    paths = [export.write_json(obj.out / "ft_report.json", export.ft_report_to_json(report), meta)]
    if transitions:
        paths.append(export.write_json(obj.out / "transitions.json", emulator.transition_report(config.g, config.shots), meta))
    if counts:
        p = float(1 / (1 + np.exp(-config.beta_times_e_system)))
        circuits = {
            "prep": (emulator.prep_circuit(p, config.eps_c), (0, 1)),
            "forward": (emulator.full_forward_circuit(p, config.eps_c, config.beta_times_e_reservoir, config.g,
                                                      config.printed_thermal_angle), (emulator.QUBIT_M, emulator.QUBIT_S)),
        }
        for stream, (name, (circuit, measured)) in enumerate(circuits.items()):
            histogram = emulator.sample_circuit(circuit, measured, config.shots, stream=200 + stream)
            paths += export.write_counts(obj.out / "counts", name, histogram, meta)
    if sweep:
        rows = emulator.shot_sweep(config, config.shot_sweep)
        sweep_meta = {**meta, "log_log_slope": emulator.scaling_slope(rows)}
        paths.append(export.write_rows(obj.out / "shot_sweep", rows, sweep_meta, obj.format))
    for path in paths:
        click.echo(str(path))


@cli.command("verify")
@click.option("--instances", type=int, default=None, help="Instances for the inequality fuzz")
@click.option("--ift-instances", type=int, default=None)
@click.option("--scheme", type=click.Choice(["global", "local", "both"]), default=None)
@click.option("--suite", "suites", type=click.Choice(list(verification.SUITES)), multiple=True)
@click.option("--inject-sign-flip", is_flag=True, hidden=True)
@click.pass_obj
@handle_errors
def cmd_verify(obj: Context, instances, ift_instances, scheme, suites, inject_sign_flip):
    """Randomized checks of every identity and inequality; exit 2 on failure."""
    config = _override(obj.run_config.verify, instances=instances, ift_instances=ift_instances, scheme=scheme,
                       inject_sign_flip=inject_sign_flip or None, seed=obj.seed)
    results = verification.run_verification(config, list(suites) or None)
    path = export.write_checks(obj.out / "verify", results, _metadata("verify", config, config.seed))
    click.echo(str(path))
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise CheckFailedError("Checks failed", details={"failed": ",".join(failed)})


if __name__ == "__main__":
    cli()
