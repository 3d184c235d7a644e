"""Command-line front end of the blow-up laboratory.

Usage:
    python src/scripts/blowup_lab.py <experiment> [--p P] [--grid-n N] [--cfl CFL] \
        [--cutoff EPS] [--mu MU] [--c1 C1] [--seed SEED] [--out DIR] [KEY=VALUE ...]
    python src/scripts/blowup_lab.py replay <manifest_path>
"""

import logging

import click

from blowup.harness import EXPERIMENTS, config_from_flags, replay, run_experiment

logger = logging.getLogger(__name__)


@click.group()
def cli() -> None:
    """Run and replay blow-up experiments."""


def _make_command(experiment: str) -> click.Command:
    @click.command(experiment, help=f"Run the {experiment} experiment.")
    @click.option("--p", type=float, default=None, help="Power of the nonlinearity.")
    @click.option("--grid-n", type=int, default=None, help="Number of grid points.")
    @click.option("--cfl", type=float, default=None, help="CFL fraction of the solver.")
    @click.option("--cutoff", type=float, default=None, help="Similarity grid cutoff.")
    @click.option("--mu", type=float, default=None, help="Lyapunov constant μ.")
    @click.option("--c1", type=float, default=None, help="Center system time scale.")
    @click.option("--seed", type=int, default=None, help="Seed of the random draws.")
    @click.option("--out", type=click.Path(), default=None, help="Output root.")
    @click.argument("overrides", nargs=-1)
    def command(
        p: float | None,
        grid_n: int | None,
        cfl: float | None,
        cutoff: float | None,
        mu: float | None,
        c1: float | None,
        seed: int | None,
        out: str | None,
        overrides: tuple[str, ...],
    ) -> None:
        cfg = config_from_flags(
            experiment=experiment,
            p=p,
            grid_n=grid_n,
            cfl=cfl,
            cutoff=cutoff,
            mu=mu,
            c1=c1,
            seed=seed,
            out=out,
            overrides=overrides,
        )
        manifest = run_experiment(cfg)
        click.echo(f"Wrote {len(manifest['outputs'])} artifacts.")

    return command


for name in EXPERIMENTS:
    cli.add_command(_make_command(name))


@cli.command("replay")
@click.argument("manifest_path", type=click.Path())
def replay_command(manifest_path: str) -> None:
    """Re-run a recorded experiment and compare its CSV artifacts."""
    report = replay(manifest_path)
    click.echo(f"Replay identical: {len(report.compared)} CSV artifacts compared.")


if __name__ == "__main__":
    cli()
