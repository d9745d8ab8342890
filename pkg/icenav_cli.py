#!/usr/bin/env python3
"""
icenav CLI - ice field generation, single trials, batches and calibration
"""

import json
import logging
from datetime import datetime
from pathlib import Path

import click
from pydantic import ValidationError

from app import __version__
from app.core.config import settings
from app.core.errors import IceNavError, TrialTimeout
from app.models.profiles import PROFILES, load_config_file, load_profile
from app.models.schemas import ExperimentSpec, PlannerType, TrialRecordFile
from app.services import plot_service
from app.services.batch_service import run_batch
from app.services.metrics_service import calibrate_alpha
from app.services.navigation_service import ship_footprint
from app.services.trial_service import run_trial
from app.simulation.icefield import FieldSpec, field_statistics, generate_field, load_field, save_field

logger = logging.getLogger(__name__)

PLANNER_CHOICES = [p.value for p in PlannerType]


def configure_logging(verbose: bool = False):
    level = logging.DEBUG if verbose else getattr(logging, settings.log_level.upper(), logging.INFO)
    logging.basicConfig(level=level, format=settings.log_format)
    # matplotlib is chatty at DEBUG
    logging.getLogger("matplotlib").setLevel(logging.WARNING)


def fail(message: str):
    click.echo(f"❌ {message}", err=True)
    raise SystemExit(1)


@click.group()
@click.version_option(__version__, prog_name="icenav")
@click.option('--verbose', '-v', is_flag=True, help='Log at DEBUG level')
@click.pass_context
def cli(ctx, verbose):
    """icenav: ship navigation in broken ice"""
    configure_logging(verbose)
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose


@cli.command("gen-fields")
@click.option('--concentration', '-c', type=float, required=True, help='Target ice concentration in (0, 1)')
@click.option('--count', '-n', type=int, default=1, show_default=True, help='Number of fields')
@click.option('--seed', type=int, default=None, help='Seed of the first field (default ICENAV_SEED)')
@click.option('--profile', type=click.Choice(sorted(PROFILES)), default=None, help='Experiment profile')
@click.option('--out', type=click.Path(file_okay=False), default=None, help='Output directory')
def gen_fields(concentration, count, seed, profile, out):
    """Generate ice field JSON files"""
    try:
        config = load_profile(profile or settings.profile)
        spec = FieldSpec.from_config(config, concentration)
        seed = settings.seed if seed is None else seed
        out_dir = Path(out or Path(settings.results_dir) / "fields")

        click.echo(f"\n🧊 Generating {count} field(s) at {concentration:.0%} ({config.profile} profile)")
        click.echo("=" * 60)
        for k in range(count):
            field_ = generate_field(spec, seed + k)
            path = out_dir / f"field_{seed + k}.json"
            save_field(field_, str(path))
            stats = field_statistics(field_)
            click.echo(f"✅ {path}")
            click.echo(f"   Floes: {stats['count']}  mean width {stats['mean_effective_width']:.2f} m  "
                       f"concentration {stats['concentration']:.3f}")
    except IceNavError as e:
        fail(f"Error generating fields: {e}")


@cli.command()
@click.option('--planner', '-p', type=click.Choice(PLANNER_CHOICES), required=True, help='Navigation strategy')
@click.option('--field', 'field_path', type=click.Path(exists=True, dir_okay=False), required=True,
              help='Ice field JSON')
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False), default=None,
              help='Partial experiment config JSON, merged over the profile')
@click.option('--profile', type=click.Choice(sorted(PROFILES)), default=None, help='Experiment profile')
@click.option('--out', type=click.Path(file_okay=False), default=None, help='Output directory')
@click.option('--save-logs', is_flag=True, help='Write the NDJSON event log and CSV trajectory')
def run(planner, field_path, config_path, profile, out, save_logs):
    """Run one closed-loop trial"""
    try:
        config = load_config_file(config_path, profile or settings.profile)
        field_ = load_field(field_path)
        out_dir = Path(out or settings.results_dir)
        name = f"{Path(field_path).stem}_{planner}"
        trials_dir, plots_dir = out_dir / "trials", out_dir / "plots"
        trials_dir.mkdir(parents=True, exist_ok=True)

        click.echo(f"\n🚢 Running {planner} on {field_path} ({len(field_.floes)} floes)")
        try:
            record = run_trial(
                field_, PlannerType(planner), config,
                event_log_path=str(trials_dir / f"{name}.events.ndjson") if save_logs else None,
                trajectory_path=str(trials_dir / f"{name}.trajectory.csv") if save_logs else None,
            )
        except TrialTimeout as e:
            if e.record is not None:
                (trials_dir / f"{name}.partial.json").write_text(e.record.to_file().model_dump_json(indent=2))
            raise

        (trials_dir / f"{name}.json").write_text(record.to_file().model_dump_json(indent=2))
        footprint = ship_footprint(config)
        plot_service.plot_trajectories(field_, {planner: record.trajectory}, str(plots_dir / f"{name}_trajectory.svg"),
                                       footprint=footprint)
        plot_service.plot_hull_impacts(record.events, footprint, str(plots_dir / f"{name}_hull_impacts.svg"))
        if record.first_plan is not None:
            plot_service.plot_plan_snapshot(record.first_plan, field_, str(plots_dir / f"{name}_plan.svg"))

        m = record.metrics
        click.echo("=" * 60)
        click.echo(f"✅ Reached the goal in {m.total_time:.0f} s over {m.path_length:.1f} m")
        click.echo(f"   Collisions: {m.collision_count} with {m.collided_floes} floes, {m.pushed_floes} pushed")
        click.echo(f"   Impact force: mean {m.mean_impact_force / 1e3:.2f} kN, max {m.max_impact_force / 1e3:.2f} kN")
        click.echo(f"   Energy: {m.total_energy / 1e6:.2f} MJ, ship KE loss {m.ship_ke_loss / 1e3:.1f} kJ")
        click.echo(f"   Planning: {record.planning_iterations} iterations, {record.mean_planning_ms:.0f} ms mean")
        click.echo(f"   Results: {trials_dir / (name + '.json')}")
    except IceNavError as e:
        fail(f"Error running trial: {e}")


@cli.command()
@click.option('--spec', 'spec_path', type=click.Path(exists=True, dir_okay=False), required=True,
              help='Experiment spec JSON')
def batch(spec_path):
    """Run an experiment batch"""
    try:
        try:
            spec = ExperimentSpec.model_validate(json.loads(Path(spec_path).read_text()))
        except (json.JSONDecodeError, ValidationError) as e:
            fail(f"Invalid experiment spec {spec_path}: {e}")

        click.echo(f"\n📊 Running batch {spec_path}")
        result = run_batch(spec)
        click.echo("=" * 60)
        for row in result.summary.to_dict(orient="records"):
            click.echo(f"{row['concentration']:.0%}  {row['planner']:<24} trials {row['trials']:>3}  "
                       f"failures {row['failures']:>2}  success {row['success_rate']:5.1f}%  "
                       f"mean impact {row['mean_impact_force'] / 1e3:8.2f} kN")
        if result.degenerate:
            click.echo("⚠️  Only one planner: success rates are 100% by vacuity")
        if result.failures:
            click.echo(f"⚠️  {len(result.failures)} failed trial(s), see {result.output_dir / 'failures.json'}")
        click.echo(f"✅ Results in {result.output_dir}")
    except IceNavError as e:
        fail(f"Error running batch: {e}")


@cli.command()
@click.option('--trials', 'trials_dir', type=click.Path(exists=True, file_okay=False), default=None,
              help='Directory of trial JSON records')
@click.option('--planner', type=click.Choice(PLANNER_CHOICES), default=PlannerType.STRAIGHT.value,
              show_default=True, help='Planner whose records are used')
def calibrate(trials_dir, planner):
    """Compute alpha from Straight trial records"""
    try:
        trials_dir = Path(trials_dir or Path(settings.results_dir) / "trials")
        records = []
        for path in sorted(trials_dir.glob("*.json")):
            try:
                record = TrialRecordFile.model_validate(json.loads(path.read_text()))
            except (json.JSONDecodeError, ValidationError):
                logger.warning(f"Skipping {path}: not a trial record")
                continue
            if record.planner == PlannerType(planner):
                records.append(record)
        click.echo(f"\n📐 Calibrating alpha from {len(records)} {planner} trial(s) in {trials_dir}")
        alpha = calibrate_alpha(records)
        click.echo(f"✅ alpha = {alpha:.4g}")
    except IceNavError as e:
        fail(f"Error calibrating alpha: {e}")


@cli.command()
def status():
    """Show effective settings and the active profile"""
    config = load_profile(settings.profile)
    click.echo(f"\n🏥 icenav {__version__} status:")
    click.echo("=" * 30)
    click.echo(f"✅ Profile: {config.profile}")
    click.echo(f"   Channel: {config.channel.length:g} × {config.channel.width:g} m")
    click.echo(f"   Ship: {config.ship.length:g} × {config.ship.width:g} m, {config.ship.mass:.3g} kg")
    click.echo(f"   Nominal speed: {config.nav.nominal_speed:g} m/s, alpha {config.nav.alpha:.3g}")
    click.echo(f"✅ Worker processes: {settings.threads}")
    click.echo(f"✅ Results directory: {settings.results_dir}")
    click.echo(f"   Seed: {settings.seed}  log level: {settings.log_level}")
    click.echo(f"⏰ Current time: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")


if __name__ == '__main__':
    cli()
