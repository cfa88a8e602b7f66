#!/usr/bin/env python

"""
Near-Field Alignment CLI Tool
-----------------------------

A command-line interface for simulating DFT-codebook near-field beam alignment:
Monte Carlo sweeps, network training, complexity reports and plots.
"""

from pathlib import Path
from typing import Optional

import typer
from rich import print
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table
from typing_extensions import Annotated

from coarse import max_window_length
from config import ConfigError, SimConfig, load_config
from finenet import NetworkParams, NetworkSpec, WeightFileError, load_weights, save_weights
from harness import (
    APPROX_TOLERANCE,
    MetricsRow,
    cost_breakdown,
    emit_csv,
    emit_plot,
    flops_report,
    load_metrics,
    metrics_frame,
    monte_carlo,
)
from training import EpochLog, NumericalAbort, generate_dataset, train

CONFIG_EXIT = 2
NUMERICAL_EXIT = 3
DEFAULT_CONFIG = "nfa.yml"

app = typer.Typer(
    name="nfa",
    help="Near-field alignment - DFT-codebook beam alignment simulator",
    add_completion=False,
    no_args_is_help=True,
)

ConfigOption = Annotated[str, typer.Option("--config", "-c", help="Path to the nfa config file.")]


def _fail(exc: Exception, code: int) -> typer.Exit:
    print(f":cross_mark: [bold red]{exc}[/bold red]")
    return typer.Exit(code=code)


def _parse_schemes(schemes: Optional[str]) -> Optional[list[str]]:
    if not schemes:
        return None
    return [s.strip() for s in schemes.split(",") if s.strip()]


def _load(config_file: str, **overrides) -> SimConfig:
    try:
        return load_config(Path(config_file), **overrides)
    except ConfigError as exc:
        raise _fail(exc, CONFIG_EXIT) from exc


def _network_for(config: SimConfig, explicit_schemes: bool) -> tuple[SimConfig, Optional[NetworkParams]]:
    """Load the fine network when the proposed scheme is requested.

    Without a weights file the proposed scheme is dropped with a warning,
    unless it was asked for on the command line.
    """
    if "proposed" not in config.schemes:
        return config, None
    if config.weights_path is None:
        if explicit_schemes:
            raise ConfigError("The proposed scheme needs trained weights (set weights_path)")
        print(":warning: [yellow]No weights_path configured; skipping the proposed scheme.[/yellow]")
        remaining = [s for s in config.schemes if s != "proposed"]
        return config.model_copy(update={"schemes": remaining}), None
    return config, load_weights(config.weights_path.expanduser())


def _print_metrics(rows: list[MetricsRow]) -> None:
    table = Table(title="Monte Carlo results")
    for column in ["Scheme", "Pt (dBm)", "NMSE r", "NMSE θ", "Gain", "Success", "Rate", "Pilots"]:
        table.add_column(column, justify="left" if column == "Scheme" else "right")

    def fmt(value: Optional[float]) -> str:
        return "-" if value is None else f"{value:.4g}"

    for row in rows:
        table.add_row(
            row.scheme,
            f"{row.p_t_dbm:g}",
            fmt(row.nmse_range),
            fmt(row.nmse_angle),
            f"{row.mean_gain:.4f}",
            f"{row.success_rate:.3f}",
            f"{row.rate_bps_hz:.3f}",
            str(row.pilot_symbols),
        )
    print(table)


def _run_sweep(config: SimConfig, network: Optional[NetworkParams]) -> list[MetricsRow]:
    print(
        f":satellite_antenna: Running [cyan]{config.trials}[/cyan] trials over "
        f"[cyan]{len(config.p_t_dbm)}[/cyan] powers for [green]{', '.join(config.schemes)}[/green]..."
    )
    with Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
    ) as progress:
        task = progress.add_task("Trials", total=config.trials)
        rows = monte_carlo(config, network, on_trial=lambda done: progress.update(task, completed=done))
    return rows


@app.command(name="simulate")
def simulate(
    config_file: ConfigOption = DEFAULT_CONFIG,
    trials: Annotated[Optional[int], typer.Option("--trials", "-n", help="Number of Monte Carlo trials.")] = None,
    seed: Annotated[Optional[int], typer.Option("--seed", "-s", help="Master random seed.")] = None,
    schemes: Annotated[
        Optional[str], typer.Option("--schemes", help="Comma-separated schemes, e.g. coarse,ls,aswje.")
    ] = None,
) -> None:
    """Run the Monte Carlo evaluation and print the metrics.

    Writes the CSV and plots as well when csv_path and plot_dir are configured.
    """
    scheme_list = _parse_schemes(schemes)
    config = _load(config_file, trials=trials, seed=seed, schemes=scheme_list)
    try:
        config, network = _network_for(config, explicit_schemes=scheme_list is not None)
        rows = _run_sweep(config, network)
    except (ConfigError, WeightFileError) as exc:
        raise _fail(exc, CONFIG_EXIT) from exc

    if not rows:
        print(":warning: [yellow]Empty power sweep; nothing to report.[/yellow]")
    else:
        _print_metrics(rows)

    if config.csv_path is not None:
        emit_csv(rows, config.csv_path.expanduser())
        print(f":page_facing_up: Metrics written to [green]{config.csv_path}[/green]")
    if config.plot_dir is not None and rows:
        written = emit_plot(metrics_frame(rows), config.plot_dir.expanduser())
        print(f":bar_chart: Wrote [cyan]{len(written)}[/cyan] plots to [green]{config.plot_dir}[/green]")


@app.command(name="sweep")
def sweep(
    out: Annotated[Path, typer.Option("--out", "-o", help="CSV file to write.")],
    config_file: ConfigOption = DEFAULT_CONFIG,
) -> None:
    """Run the full power sweep and write the metrics CSV."""
    config = _load(config_file)
    try:
        config, network = _network_for(config, explicit_schemes=False)
        rows = _run_sweep(config, network)
    except (ConfigError, WeightFileError) as exc:
        raise _fail(exc, CONFIG_EXIT) from exc

    emit_csv(rows, out)
    print(f":white_check_mark: Wrote [cyan]{len(rows)}[/cyan] rows to [green]{out}[/green]")


@app.command(name="train")
def train_cmd(
    out: Annotated[Path, typer.Option("--out", "-o", help="Weight file to write.")],
    config_file: ConfigOption = DEFAULT_CONFIG,
) -> None:
    """Generate a labelled dataset through the coarse stage and train the fine network."""
    config = _load(config_file)
    print(f":hammer_and_wrench: Generating [cyan]{config.train_samples}[/cyan] samples...")
    try:
        dataset = generate_dataset(config, config.train_samples, config.seed)
    except NumericalAbort as exc:
        raise _fail(exc, NUMERICAL_EXIT) from exc
    print(
        f":wastebasket: Discarded [yellow]{dataset.discarded}[/yellow] of {dataset.attempts} attempts "
        f"([yellow]{dataset.discard_rate:.2%}[/yellow]) with the true index outside the coarse window"
    )

    spec = NetworkSpec(window=max_window_length(config.array, config.epsilon))
    with Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TextColumn("{task.fields[losses]}"),
    ) as progress:
        task = progress.add_task("Epochs", total=config.train_epochs, losses="")

        def report(log: EpochLog) -> None:
            progress.update(
                task,
                completed=log.epoch + 1,
                losses=f"train {log.train_loss:.4f} | val {log.val_loss:.4f} | lr {log.lr:.2e}",
            )

        try:
            result = train(dataset.samples, config, spec=spec, on_epoch=report)
        except NumericalAbort as exc:
            raise _fail(exc, NUMERICAL_EXIT) from exc

    best = result.history[result.best_epoch]
    print(
        f":chart_decreasing: Best epoch [cyan]{result.best_epoch + 1}[/cyan] "
        f"of {len(result.history)}: validation loss [green]{best.val_loss:.4f}[/green]"
    )
    try:
        save_weights(result.params, out)
    except OSError as exc:
        raise _fail(exc, CONFIG_EXIT) from exc
    print(f":floppy_disk: Weights saved to [green]{out}[/green]")


@app.command(name="flops")
def flops(config_file: ConfigOption = DEFAULT_CONFIG) -> None:
    """Print the FLOP count, pilot symbols and trainable parameters of every scheme."""
    config = _load(config_file)
    network = None
    if config.weights_path is not None:
        try:
            network = load_weights(config.weights_path.expanduser())
        except WeightFileError as exc:
            raise _fail(exc, CONFIG_EXIT) from exc
    try:
        report = flops_report(config, network)
    except ConfigError as exc:
        raise _fail(exc, CONFIG_EXIT) from exc

    table = Table(title=f"Complexity at N={config.n_antennas}, n_rf={config.n_rf}")
    table.add_column("Scheme")
    table.add_column("FLOPs", justify="right")
    table.add_column("Pilot symbols", justify="right")
    table.add_column("Parameters", justify="right")
    for row in report:
        table.add_row(
            row.scheme,
            f"{row.flops:,}",
            str(row.pilot_symbols),
            "-" if row.parameters is None else f"{row.parameters:,}",
        )
    print(table)

    cost = cost_breakdown(config, network)
    n = config.n_antennas
    stages = Table(title=f"Proposed scheme cost at U={cost.window}")
    stages.add_column("Stage")
    stages.add_column("FLOPs", justify="right")
    stages.add_row(f"Coarse 17N+7 (N={n})", f"{cost.coarse:,}")
    stages.add_row("Coarse measured", f"{cost.coarse_measured:,}")
    stages.add_row("Fine by layers", f"{cost.fine_layers:,}")
    stages.add_row("Fine by block constants", f"{cost.fine_blocks:,}")
    stages.add_row("Fine 12658U+65280", f"{cost.fine_approx:,}")
    stages.add_row("Total", f"{cost.total:,}")
    print(stages)
    if cost.approx_agrees:
        print(f":white_check_mark: Approximation within {APPROX_TOLERANCE:.0%} ({cost.approx_gap:.1%})")
    else:
        print(f":warning: [yellow]Approximation off by {cost.approx_gap:.1%}, above {APPROX_TOLERANCE:.0%}[/yellow]")


@app.command(name="plot")
def plot(
    csv: Annotated[Path, typer.Option("--csv", help="Metrics CSV written by sweep or simulate.")],
    out_dir: Annotated[Path, typer.Option("--out-dir", "-o", help="Directory for the SVG files.")] = Path("plots"),
) -> None:
    """Render one SVG line chart per metric from a metrics CSV."""
    try:
        frame = load_metrics(csv)
    except ConfigError as exc:
        raise _fail(exc, CONFIG_EXIT) from exc
    for path in emit_plot(frame, out_dir):
        print(f":bar_chart: [green]{path}[/green]")


@app.command(name="info")
def info(config_file: ConfigOption = DEFAULT_CONFIG) -> None:
    """Display the array constants derived from the configuration."""
    config = _load(config_file)
    array = config.array
    print(
        f":satellite_antenna: ULA with [cyan]{array.n_antennas}[/cyan] antennas at [cyan]{config.carrier_ghz:g}[/cyan] GHz"
    )
    print(f"\tWavelength λ: [green]{array.wavelength * 1e3:.4f}[/green] mm")
    print(f"\tSpacing d: [green]{array.spacing * 1e3:.4f}[/green] mm")
    print(f"\tAperture D: [green]{array.aperture:.4f}[/green] m")
    print(f"\tNoise power σ²: [green]{array.noise_power_dbm:.4f}[/green] dBm")
    print(f"\tFresnel distance: [green]{array.fresnel_distance:.2f}[/green] m")
    print(f"\tRayleigh distance: [green]{array.rayleigh_distance:.2f}[/green] m")
    print(f"\tCoverage: [green]{array.r_min:g}[/green] to [green]{array.r_max:g}[/green] m")
    print(f"\tFine-stage input length U: [green]{max_window_length(array, config.epsilon)}[/green]")
    print(f"\tPolar codebook size: [green]{array.n_antennas * config.polar_rings}[/green]")
    if array.r_max > array.rayleigh_distance:
        print("\t:warning: [yellow]r_max lies beyond the Rayleigh distance.[/yellow]")


if __name__ == "__main__":
    app()
