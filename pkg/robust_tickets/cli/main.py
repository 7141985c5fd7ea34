import json
import logging
import math
from collections.abc import Sequence
from pathlib import Path
from typing import Annotated, Any

import typer

from robust_tickets.config import PretrainScheme
from robust_tickets.constants import TransferMode
from robust_tickets.exceptions import ConfigError
from robust_tickets.experiments import (
    REPORT_FILE,
    ExperimentConfig,
    PruningPlan,
    Report,
    dump_experiment_config,
    load_experiment_config,
    load_tasks,
    read_report,
    run,
    sparsity_sweep_export,
)
from robust_tickets.metrics import dataset_fid, evaluate_ticket
from robust_tickets.nn import Checkpoint, load_checkpoint, resolve_spec, save_checkpoint
from robust_tickets.pruning import (
    LmpConfig,
    Ticket,
    group_counts,
    imp,
    lmp,
    load_ticket,
    omp,
    save_ticket,
)
from robust_tickets.transfer import finetune_whole, linear_eval, pretrain

logger = logging.getLogger(__name__)

app = typer.Typer(
    add_completion=False,
    help="Robust lottery tickets: pretrain, prune, transfer and evaluate.",
    no_args_is_help=True,
)

ConfigOption = Annotated[
    Path | None,
    typer.Option("--config", help="Experiment configuration file (YAML)."),
]
CheckpointOption = Annotated[
    Path,
    typer.Option("--checkpoint", help="Pretrained checkpoint file."),
]
TicketOption = Annotated[
    Path | None,
    typer.Option("--ticket", help="Ticket mask file; the dense network if omitted."),
]
SeedOption = Annotated[
    int,
    typer.Option("--seed", help="Seed for initialization, batching and attacks."),
]


def main(argv: Sequence[str] | None = None) -> int:
    try:
        result = app(
            args=list(argv) if argv is not None else None,
            prog_name="robust_tickets",
            standalone_mode=False,
        )
    except typer.Exit as exc:
        return int(exc.exit_code or 0)
    # click hands back the exit code instead of raising when not standalone
    return result if isinstance(result, int) else 0


@app.callback()
def callback(
    verbose: Annotated[
        bool,
        typer.Option("--verbose", "-v", help="Log debug messages."),
    ] = False,
) -> None:
    """Robust lottery tickets: pretrain, prune, transfer and evaluate."""
    _load_dotenv()
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@app.command("pretrain", help="Pretrain a checkpoint on the source task.")
def pretrain_command(
    out: Annotated[Path, typer.Option("--out", help="Checkpoint file to write.")],
    config: ConfigOption = None,
    scheme: Annotated[
        str,
        typer.Option("--scheme", help="Pretraining scheme named in the config."),
    ] = "natural",
    seed: SeedOption = 0,
) -> None:
    try:
        experiment = _load_config(config)
        source, _ = load_tasks(experiment)
        spec = resolve_spec(experiment.model, source.num_classes, source.image_shape)
        train_cfg = experiment.pretrain.model_copy(update={"seed": seed})
        checkpoint = pretrain(
            spec,
            source,
            _find_scheme(experiment, scheme),
            train_cfg,
            init=experiment.init,
            log_path=out.with_suffix(".jsonl"),
        )
        save_checkpoint(checkpoint, out)
        typer.echo(f"Saved {scheme} checkpoint {checkpoint.digest[:12]} to {out}")
    except typer.Exit:
        raise
    except Exception as exc:
        typer.echo(f"Error: {exc}", err=True)
        raise typer.Exit(1) from exc


@app.command("prune", help="Draw a ticket from a checkpoint (OMP, IMP or LMP).")
def prune_command(
    checkpoint_file: CheckpointOption,
    out: Annotated[
        Path,
        typer.Option("--out", help="Ticket file; IMP adds a round suffix."),
    ],
    config: ConfigOption = None,
    scheme: Annotated[str, typer.Option("--scheme", help="omp, imp or lmp.")] = "omp",
    sparsity: Annotated[
        float | None,
        typer.Option("--sparsity", help="Target sparsity; IMP uses the grid."),
    ] = None,
    granularity: Annotated[
        str | None,
        typer.Option("--granularity", help="element, row, kernel or channel."),
    ] = None,
    scope: Annotated[
        str | None,
        typer.Option("--scope", help="global or per-layer ranking."),
    ] = None,
    seed: SeedOption = 0,
) -> None:
    try:
        experiment = _load_config(config)
        plan = _find_plan(experiment, scheme, granularity=granularity, scope=scope)
        checkpoint = load_checkpoint(checkpoint_file)
        source, target = load_tasks(experiment)
        prune_cfg = experiment.prune_train.model_copy(update={"seed": seed})

        tickets: list[tuple[Ticket, Path]] = []
        if plan.scheme == "imp":
            task = target if plan.imp.locus == "downstream" else source
            drawn = imp(checkpoint, task, plan.imp_config(), prune_cfg)
            tickets = [
                (ticket, out.with_name(f"{out.stem}-round{i}{out.suffix}"))
                for i, ticket in enumerate(drawn)
            ]
        else:
            if sparsity is None:
                raise ConfigError(f"--sparsity is required for {plan.scheme}")
            if plan.scheme == "omp":
                ticket = omp(checkpoint, sparsity, plan.granularity, plan.scope)
            else:
                lmp_cfg = LmpConfig(sparsity=sparsity, score_init=plan.lmp_score_init)
                ticket = lmp(checkpoint, target, lmp_cfg, prune_cfg)
            tickets = [(ticket, out)]

        for ticket, path in tickets:
            save_ticket(ticket, path)
            _echo_ticket(ticket, path)
    except typer.Exit:
        raise
    except Exception as exc:
        typer.echo(f"Error: {exc}", err=True)
        raise typer.Exit(1) from exc


@app.command("transfer", help="Transfer a ticket to the target task and evaluate.")
def transfer_command(
    checkpoint_file: CheckpointOption,
    ticket_file: TicketOption = None,
    config: ConfigOption = None,
    mode: Annotated[
        str, typer.Option("--mode", help="linear or finetune.")
    ] = "finetune",
    out: Annotated[
        Path | None,
        typer.Option("--out", help="Write the metrics report here (JSON)."),
    ] = None,
    seed: SeedOption = 0,
) -> None:
    try:
        if mode not in ("linear", "finetune"):
            raise ConfigError(f"unknown transfer mode {mode!r}")
        transfer_mode: TransferMode = "linear" if mode == "linear" else "finetune"
        experiment = _load_config(config)
        ticket = _load_ticket(checkpoint_file, ticket_file)
        _, target = load_tasks(experiment)
        finetune_cfg = experiment.finetune.model_copy(update={"seed": seed})
        transfer = linear_eval if transfer_mode == "linear" else finetune_whole
        result = transfer(
            ticket,
            target,
            finetune_cfg,
            adv_cfg=experiment.adv,
            log_path=out.with_suffix(".jsonl") if out else None,
        )
        _emit(result.report.model_dump(mode="json"), out)
    except typer.Exit:
        raise
    except Exception as exc:
        typer.echo(f"Error: {exc}", err=True)
        raise typer.Exit(1) from exc


@app.command("eval", help="Evaluate a checkpoint (optionally masked) on a task.")
def eval_command(
    checkpoint_file: CheckpointOption,
    ticket_file: TicketOption = None,
    config: ConfigOption = None,
    task: Annotated[
        str, typer.Option("--task", help="source or target test split.")
    ] = "source",
    out: Annotated[
        Path | None,
        typer.Option("--out", help="Write the metrics report here (JSON)."),
    ] = None,
) -> None:
    try:
        experiment = _load_config(config)
        ticket = _load_ticket(checkpoint_file, ticket_file)
        source, target = load_tasks(experiment)
        if task not in ("source", "target"):
            raise ConfigError(f"--task must be source or target, got {task!r}")
        dataset = (source if task == "source" else target).test
        report = evaluate_ticket(
            ticket.network(), ticket.masks, dataset, adv_cfg=experiment.adv
        )
        _emit(report.model_dump(mode="json"), out)
    except typer.Exit:
        raise
    except Exception as exc:
        typer.echo(f"Error: {exc}", err=True)
        raise typer.Exit(1) from exc


@app.command("fid", help="FID between the source and target test splits.")
def fid_command(
    checkpoint_file: CheckpointOption,
    config: ConfigOption = None,
) -> None:
    try:
        experiment = _load_config(config)
        source, target = load_tasks(experiment)
        extractor = load_checkpoint(checkpoint_file).network(requires_grad=False)
        value = dataset_fid(extractor, source.test, target.test)
        typer.echo(f"FID {source.name} -> {target.name}: {value:.6f}")
    except typer.Exit:
        raise
    except Exception as exc:
        typer.echo(f"Error: {exc}", err=True)
        raise typer.Exit(1) from exc


@app.command("run", help="Run the full pretrain, prune and transfer sweep.")
def run_command(
    config: ConfigOption = None,
    out: Annotated[
        Path | None,
        typer.Option("--out", help="Output directory for artifacts and reports."),
    ] = None,
    seeds: Annotated[
        str | None,
        typer.Option("--seeds", help='Comma separated seeds, e.g. "0,1,2".'),
    ] = None,
    resume: Annotated[
        bool,
        typer.Option("--resume", help="Reuse cached artifacts and cells."),
    ] = False,
    jobs: Annotated[
        int,
        typer.Option("--jobs", min=1, help="Worker processes for independent runs."),
    ] = 1,
) -> None:
    try:
        experiment = _load_config(
            config, out_dir=out, seeds=_parse_seeds(seeds) if seeds else None
        )
        report, stats = run(experiment, resume=resume, jobs=jobs)
        failed = report.failed()
        typer.echo(
            f"{len(report.cells) - len(failed)} of {len(report.cells)} cells ok, "
            f"{stats.cells_cached} cached, {stats.total_steps} optimizer steps"
        )
        typer.echo(f"Report written to {experiment.out_dir / REPORT_FILE}")
        for cell in failed:
            typer.echo(
                f"Failed: {cell.key.series()} {cell.key.mode} "
                f"s={cell.key.sparsity:g} seed={cell.key.seed}: {cell.error}",
                err=True,
            )
    except typer.Exit:
        raise
    except Exception as exc:
        typer.echo(f"Error: {exc}", err=True)
        raise typer.Exit(1) from exc

    if not report.ok:
        raise typer.Exit(1)


@app.command("export", help="Write sparsity-sweep CSVs and a markdown summary.")
def export_command(
    report_file: Annotated[
        Path,
        typer.Option("--report", help="Report file written by the run command."),
    ],
    out: Annotated[
        Path | None,
        typer.Option("--out", help="Output directory; defaults beside the report."),
    ] = None,
) -> None:
    try:
        report = read_report(report_file)
        out_dir = out if out is not None else report_file.parent / "export"
        export = sparsity_sweep_export(report, out_dir)
        summary = out_dir / "summary.md"
        summary.write_text(
            _render_summary(report, export.winner_rows, sorted(export.curves)),
            encoding="utf-8",
        )
        typer.echo(f"Exported {len(export.curves)} curves and {summary} to {out_dir}")
    except typer.Exit:
        raise
    except Exception as exc:
        typer.echo(f"Error: {exc}", err=True)
        raise typer.Exit(1) from exc


@app.command("init-config", help="Write the default experiment configuration.")
def init_config_command(
    out: Annotated[
        Path, typer.Option("--out", help="Configuration file to write.")
    ] = Path("experiment.yaml"),
) -> None:
    try:
        if out.exists():
            raise FileExistsError(f"{out} already exists")
        dump_experiment_config(ExperimentConfig(), out)
        typer.echo(f"Wrote {out}")
    except Exception as exc:
        typer.echo(f"Error: {exc}", err=True)
        raise typer.Exit(1) from exc


def _load_dotenv() -> None:
    try:
        from dotenv import load_dotenv
    except ImportError:
        return
    load_dotenv(override=True)


def _load_config(config_file: Path | None, **overrides: Any) -> ExperimentConfig:
    if config_file is not None:
        return load_experiment_config(config_file, **overrides)
    values = {key: value for key, value in overrides.items() if value is not None}
    return ExperimentConfig.model_validate(values)


def _parse_seeds(value: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in value.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f'Invalid --seeds "{value}"; expected "0,1,2"') from exc


def _find_scheme(config: ExperimentConfig, name: str) -> PretrainScheme:
    for scheme in config.pretrain_schemes:
        if scheme.name == name:
            return scheme
    known = ", ".join(scheme.name for scheme in config.pretrain_schemes)
    raise ConfigError(f"pretraining scheme {name!r} not in config; known: {known}")


def _find_plan(
    config: ExperimentConfig,
    scheme: str,
    *,
    granularity: str | None,
    scope: str | None,
) -> PruningPlan:
    base = next((plan for plan in config.pruning if plan.scheme == scheme), None)
    values = base.model_dump() if base is not None else {"scheme": scheme}
    if granularity is not None:
        values["granularity"] = granularity
    if scope is not None:
        values["scope"] = scope
    return PruningPlan.model_validate(values)


def _load_ticket(checkpoint_file: Path, ticket_file: Path | None) -> Ticket:
    checkpoint: Checkpoint = load_checkpoint(checkpoint_file)
    if ticket_file is None:
        return omp(checkpoint, 0.0)
    return load_ticket(ticket_file, checkpoint)


def _echo_ticket(ticket: Ticket, path: Path) -> None:
    typer.echo(
        f"{ticket.scheme} ticket at {ticket.sparsity:.4f} "
        f"(realized {ticket.realized_sparsity:.4f}) -> {path}"
    )
    for name, (alive, total) in group_counts(ticket.masks, ticket.granularity).items():
        typer.echo(f"  {name}: {alive}/{total} {ticket.granularity} groups alive")


def _emit(payload: dict[str, Any], out: Path | None) -> None:
    text = json.dumps(payload, indent=2)
    if out is None:
        typer.echo(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text + "\n", encoding="utf-8")
    typer.echo(f"Wrote {out}")


def _format_accuracy(value: Any) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    return f"{float(value):.4f}"


def _render_summary(
    report: Report,
    winners: list[dict[str, Any]],
    curves: list[tuple[str, str]],
) -> str:
    env = _create_jinja_environment()
    env.filters["accuracy"] = _format_accuracy
    schemes = sorted({cell.key.pretrain_scheme for cell in report.cells})
    return str(
        env.get_template("summary.md.j2").render(
            source=report.source,
            target=report.target,
            config_hash=report.provenance.config_hash,
            total=len(report.cells),
            failed=len(report.failed()),
            fid=report.fid,
            fid_extractor=report.fid_extractor,
            schemes=schemes,
            winners=winners,
            curves=[f"curve-{mode}-{metric}.csv" for mode, metric in curves],
        )
    )


def _create_jinja_environment() -> Any:
    try:
        from jinja2 import Environment, PackageLoader
    except ImportError as exc:
        raise RuntimeError(
            "The export command requires optional dependencies. "
            "Install them with: pip install 'robust-tickets[cli]'"
        ) from exc

    return Environment(
        loader=PackageLoader("robust_tickets.cli", "templates"),
        autoescape=False,
        keep_trailing_newline=True,
        trim_blocks=True,
        lstrip_blocks=True,
    )
