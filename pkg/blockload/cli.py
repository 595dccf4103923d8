#
# cli.py
#
# Copyright 2024 The blockload authors. All rights reserved.
#

"""
Contains the logic to process cli arguments and run the experiments
"""

from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence, Union

import click
from click.shell_completion import CompletionItem
import orjson
import yaml

from blockload.config import DIRS
from blockload.config.settings import DEFAULT_SETTINGS, Settings
from blockload.constants import (
    EXIT_INFEASIBLE,
    EXIT_INVALID_MANIFEST,
    EXIT_OK,
    EXIT_USAGE,
    PRESETS,
    REFERENCE_DELETED,
    REFERENCE_PADDING,
)
from blockload.ddp_sim import (
    assign_to_ranks,
    simulate_epoch,
    units_from_manifest,
    units_from_plan,
)
from blockload.manifest import (
    SHAPES,
    Manifest,
    SyntheticSpec,
    generate_synthetic,
    load_manifest,
    serialize_manifest,
    summarize,
)
from blockload.oracle import optimal_packing
from blockload.packing import (
    Sampling,
    Strategy,
    calibrate_t_mix,
    compute_metrics,
    load_plan,
    pack,
    plan_to_json,
)
from blockload.report import compare, report_plans
from blockload.reset_mask import build_masks
from blockload.utils import log, write_atomic
from blockload.utils.types import (
    InfeasiblePackingError,
    ManifestError,
    OracleError,
    PackingError,
    RunConfig,
    SimulationError,
)


class Rational(click.ParamType):
    """
    A positive rational number, written as an integer, a decimal or a
    fraction. For example:

    1
    0.25
    3/2
    """

    name = "Rational"

    def convert(
        self, value, param: Optional[click.Parameter], ctx: Optional[click.Context]
    ):
        if isinstance(value, Fraction):
            return value
        try:
            number = Fraction(str(value))
        except (ValueError, ZeroDivisionError):
            return self.fail(f"{value} is not a valid number.", param, ctx)
        if number <= 0:
            return self.fail(f"{value} must be greater than 0.", param, ctx)
        return number


class PathList(click.ParamType):
    """
    A comma-separated list of existing files, such as
    naive.json,chunks.json,mixed.json,bload.json
    """

    name = "Paths"

    def convert(
        self, value, param: Optional[click.Parameter], ctx: Optional[click.Context]
    ):
        if isinstance(value, list):
            return value
        paths = [Path(part.strip()) for part in str(value).split(",") if part.strip()]
        if not paths:
            return self.fail("at least one file is required.", param, ctx)
        missing = [str(path) for path in paths if not path.is_file()]
        if missing:
            return self.fail(f"no such file: {', '.join(missing)}", param, ctx)
        return paths

    def shell_complete(self, ctx, param, incomplete):
        head, _, tail = incomplete.rpartition(",")
        prefix = f"{head}," if head else ""
        directory = Path(tail).parent
        return [
            CompletionItem(prefix + str(path))
            for path in sorted(directory.glob(Path(tail).name + "*.json"))
        ]


CONTEXT_SETTINGS = {"help_option_names": ["-h", "--help"]}
EXISTING_FILE = click.Path(exists=True, dir_okay=False, path_type=Path)


def out_option(func):
    """The --out option shared by every subcommand"""
    return click.option(
        "--out",
        "-o",
        type=click.Path(dir_okay=False, path_type=Path),
        help="Write the JSON artifact to this file, atomically.",
    )(func)


def seed_option(func):
    """The --seed option of seeded subcommands; falls back to the global --seed"""
    return click.option(
        "--seed",
        type=int,
        help="Seed for every random choice. Required here or as a global option.",
    )(func)


def calibrate_option(func):
    """The --calibrate-mix flag of commands that pack with the mixed strategy"""
    return click.option(
        "--calibrate-mix",
        is_flag=True,
        help="Pick t_mix so that mixed padding and deleted frames come closest to the \
measured training-split results.",
    )(func)


def settings_option(name: str, *param_decls: str, **kwargs):
    """An option whose default comes from Settings and BLOCKLOAD_<NAME>"""
    return click.option(
        *param_decls,
        default=getattr(DEFAULT_SETTINGS, name),
        envvar=Settings.envvar(name),
        show_default=True,
        **kwargs,
    )


@click.group(context_settings={**CONTEXT_SETTINGS})
@click.version_option(None, "--version", "-V", package_name="blockload")
@click.option(
    "--log-level",
    type=str,
    default="WARN",
    help="What level of verbosity in logs, one of TRACEBACK, DEBUG, INFO, WARN, ERROR. If a + is \
appended to the log level, logs are also saved to a file in the user log directory. \
Defaults to WARN",
    envvar="BLOCKLOAD_LOG_LEVEL",
)
@settings_option(
    "output_format",
    "--format",
    "output_format",
    type=click.Choice(["json", "text"]),
    help="Print results as JSON documents or as human-readable text.",
)
@click.option(
    "--seed",
    type=int,
    help="Default seed for subcommands that do not get their own --seed.",
)
@click.pass_context
def cli(ctx: click.Context, log_level: str, output_format: str, seed: Optional[int]):
    """
    blockload - batching strategies for variable-length sequences

    Generate sequence-length manifests, pack them into fixed-size blocks,
    simulate data-parallel training over the result and compare strategies.

    Run 'blockload COMMAND --help' for more information on a command.
    """
    if log_level.endswith("+"):
        log_level = log_level[:-1]
        valid = log.set_level(log_level)
        log.initialize_development_logging(Path(DIRS.user_log_dir))
    else:
        valid = log.set_level(log_level)
    if not valid:
        log.warn(
            "Invalid log level specified, defaulting to WARN. \
See --help for a list of valid log levels."
        )

    log.debug("Default settings:", DEFAULT_SETTINGS.as_dict())

    ctx.obj = {
        "run_config": RunConfig(
            output_format=output_format, log_level=log_level, seed=seed
        ),
    }


def get_run_config(ctx: click.Context) -> RunConfig:
    """
    Gets the run configuration from the context, or exits if it is not set
    """
    ctx.ensure_object(dict)
    run_config: Optional[RunConfig] = ctx.obj.get("run_config", None)
    if run_config is None:
        raise click.ClickException("No run configuration loaded")
    return run_config


def resolve_seed(ctx: click.Context, seed: Optional[int]) -> int:
    """The subcommand seed, else the global one; there is no time-based default"""
    if seed is not None:
        return seed
    global_seed = get_run_config(ctx).seed
    if global_seed is None:
        raise click.UsageError("--seed is required", ctx=ctx)
    return global_seed


def resolve_t_mix(
    ctx: click.Context, manifest: Manifest, t_mix: Optional[int], calibrate_mix: bool
) -> Optional[int]:
    """The --t-mix value, or the calibrated one with --calibrate-mix"""
    if not calibrate_mix:
        return t_mix
    if t_mix is not None:
        raise click.UsageError("--t-mix and --calibrate-mix are mutually exclusive", ctx=ctx)
    calibrated = calibrate_t_mix(manifest, REFERENCE_PADDING["mixed"], REFERENCE_DELETED["mixed"])
    log.info(f"Calibrated t_mix={calibrated}")
    return calibrated


def emit_artifact(
    ctx: click.Context,
    out: Optional[Path],
    artifact: Union[str, bytes],
    summary: dict,
):
    """
    For commands whose output is a file (manifests, plans): the artifact goes
    to --out or stdout; the summary is printed when it went to a file.
    """
    run_config = get_run_config(ctx)
    if out is not None:
        write_atomic(out, artifact)
        log.info(f"Saved {out}")
        if run_config.output_format == "text":
            click.echo(yaml.safe_dump(summary, sort_keys=False), nl=False)
        else:
            click.echo(orjson.dumps(summary).decode("utf-8"))
        return
    if isinstance(artifact, bytes):
        artifact = artifact.decode("utf-8")
    click.echo(artifact, nl=False)


def emit_result(
    ctx: click.Context,
    out: Optional[Path],
    document: dict,
    text: Optional[str] = None,
):
    """
    For commands whose output is a result: JSON document or text on stdout
    depending on --format, and the JSON document in --out when given.
    """
    encoded = orjson.dumps(document)
    if out is not None:
        write_atomic(out, encoded + b"\n")
        log.info(f"Saved {out}")
    if get_run_config(ctx).output_format == "json":
        click.echo(encoded.decode("utf-8"))
    else:
        click.echo(text if text is not None else yaml.safe_dump(document, sort_keys=False), nl=False)


@cli.command("gen-manifest", context_settings={**CONTEXT_SETTINGS})
@click.option(
    "--preset",
    type=click.Choice(sorted(PRESETS)),
    help="Take count, total frames and length bounds from a known dataset split.",
)
@click.option("--count", type=int, help="Number of sequences.")
@click.option("--total-frames", type=int, help="Exact sum of all sequence lengths.")
@click.option("--min-len", type=int, help="Shortest allowed sequence.")
@click.option("--max-len", type=int, help="Longest sequence; at least one will have it.")
@click.option(
    "--dist",
    type=click.Choice(SHAPES),
    default=SHAPES[1],
    show_default=True,
    help="Shape of the length distribution.",
)
@settings_option(
    "sigma",
    "--sigma",
    type=float,
    help="Spread of the heavy-tailed distribution.",
)
@seed_option
@out_option
@click.pass_context
def gen_manifest(  # pylint: disable=too-many-arguments
    ctx: click.Context,
    preset: Optional[str],
    count: Optional[int],
    total_frames: Optional[int],
    min_len: Optional[int],
    max_len: Optional[int],
    dist: str,
    sigma: float,
    seed: Optional[int],
    out: Optional[Path],
):
    """
    Generates a synthetic manifest.

    The manifest has exactly COUNT sequences summing to TOTAL_FRAMES, with
    lengths between MIN_LEN and MAX_LEN, for example:

    blockload gen-manifest --preset action-genome-train --seed 17 --out ag.jsonl
    """
    values = dict(PRESETS[preset]) if preset else {}
    for name, value in [
        ("count", count),
        ("total_frames", total_frames),
        ("min_len", min_len),
        ("max_len", max_len),
    ]:
        if value is not None:
            values[name] = value
        if name not in values:
            raise click.UsageError(
                f"--{name.replace('_', '-')} is required without a --preset", ctx=ctx
            )
    spec = SyntheticSpec(shape=dist, **values)
    manifest = generate_synthetic(spec, resolve_seed(ctx, seed), sigma=sigma)
    emit_artifact(ctx, out, serialize_manifest(manifest), summarize(manifest).as_dict())


@cli.command("pack", context_settings={**CONTEXT_SETTINGS})
@click.option("--manifest", "manifest_path", type=EXISTING_FILE, required=True)
@click.option(
    "--strategy",
    type=click.Choice([strategy.value for strategy in Strategy]),
    required=True,
    help="Batching strategy.",
)
@click.option("--t-max", type=click.IntRange(min=1), help="bload block size. Defaults to the longest sequence.")
@click.option("--t-block", type=click.IntRange(min=1), help="chunks size. Defaults to the average length.")
@click.option("--t-mix", type=click.IntRange(min=1), help="mixed size. Defaults to the average length.")
@calibrate_option
@settings_option(
    "sampling",
    "--sampling",
    type=click.Choice([sampling.value for sampling in Sampling]),
    help="How bload draws among the sequences that fit.",
)
@seed_option
@out_option
@click.pass_context
def pack_command(  # pylint: disable=too-many-arguments
    ctx: click.Context,
    manifest_path: Path,
    strategy: str,
    t_max: Optional[int],
    t_block: Optional[int],
    t_mix: Optional[int],
    calibrate_mix: bool,
    sampling: str,
    seed: Optional[int],
    out: Optional[Path],
):
    """
    Packs a manifest into a plan of equally sized blocks.
    """
    manifest = load_manifest(manifest_path)
    t_mix = resolve_t_mix(ctx, manifest, t_mix, calibrate_mix)
    plan = pack(
        manifest,
        Strategy(strategy),
        seed=resolve_seed(ctx, seed),
        t_max=t_max,
        t_block=t_block,
        t_mix=t_mix,
        sampling=Sampling(sampling),
    )
    metrics = compute_metrics(plan, manifest)
    emit_artifact(
        ctx,
        out,
        plan_to_json(plan),
        {"strategy": strategy, "capacity": plan.capacity, **metrics.as_dict()},
    )


@cli.command("oracle", context_settings={**CONTEXT_SETTINGS})
@click.option("--manifest", "manifest_path", type=EXISTING_FILE, required=True)
@click.option("--capacity", type=click.IntRange(min=1), required=True)
@out_option
@click.pass_context
def oracle_command(
    ctx: click.Context, manifest_path: Path, capacity: int, out: Optional[Path]
):
    """
    Finds the fewest blocks of CAPACITY frames any packing can use.

    Exhaustive, so limited to small manifests.
    """
    result = optimal_packing(load_manifest(manifest_path), capacity)
    emit_result(ctx, out, result.as_dict())


@cli.command("simulate", context_settings={**CONTEXT_SETTINGS})
@click.option("--plan", "plan_path", type=EXISTING_FILE, help="Simulate the blocks of a plan.")
@click.option("--manifest", "manifest_path", type=EXISTING_FILE, help="Simulate raw sequences.")
@click.option("--raw", is_flag=True, help="Deal the manifest's sequences unpacked.")
@settings_option("world_size", "--world-size", type=click.IntRange(min=1))
@settings_option("batch_size", "--batch-size", type=click.IntRange(min=1))
@settings_option("cost_per_frame", "--cost-per-frame", type=Rational())
@seed_option
@out_option
@click.pass_context
def simulate_command(  # pylint: disable=too-many-arguments
    ctx: click.Context,
    plan_path: Optional[Path],
    manifest_path: Optional[Path],
    raw: bool,
    world_size: int,
    batch_size: int,
    cost_per_frame: Fraction,
    seed: Optional[int],
    out: Optional[Path],
):
    """
    Simulates one epoch of data-parallel training and reports deadlocks.

    Either --plan FILE, or --manifest FILE --raw.
    """
    if (plan_path is None) == (manifest_path is None):
        raise click.UsageError("give exactly one of --plan or --manifest", ctx=ctx)
    if manifest_path is not None and not raw:
        raise click.UsageError("--manifest is only simulated with --raw", ctx=ctx)
    if plan_path is not None:
        units = units_from_plan(load_plan(plan_path))
    else:
        units = units_from_manifest(load_manifest(manifest_path))
    assignment = assign_to_ranks(units, world_size, batch_size, resolve_seed(ctx, seed))
    trace = simulate_epoch(assignment, cost_per_frame)
    emit_result(ctx, out, trace.as_dict(), yaml.safe_dump(trace.summary(), sort_keys=False))


@cli.command("masks", context_settings={**CONTEXT_SETTINGS})
@click.option("--plan", "plan_path", type=EXISTING_FILE, required=True)
@click.option("--block", "block_index", type=click.IntRange(min=0), required=True)
@out_option
@click.pass_context
def masks_command(
    ctx: click.Context, plan_path: Path, block_index: int, out: Optional[Path]
):
    """
    Prints the reset and valid masks of one block as 0/1 arrays.
    """
    plan = load_plan(plan_path)
    if block_index >= len(plan.blocks):
        raise click.BadParameter(
            f"the plan has {len(plan.blocks)} blocks", ctx=ctx, param_hint="--block"
        )
    masks = build_masks(plan.blocks[block_index])
    document = masks.as_dict()
    text = "".join(
        f"{name}: {orjson.dumps(values).decode('utf-8')}\n" for name, values in document.items()
    )
    emit_result(ctx, out, document, text)


@cli.command("report", context_settings={**CONTEXT_SETTINGS})
@click.option("--plans", type=PathList(), required=True, help="Comma-separated plan files.")
@settings_option("world_size", "--world-size", type=click.IntRange(min=1))
@settings_option("cost_per_frame", "--cost-per-frame", type=Rational())
@out_option
@click.pass_context
def report_command(
    ctx: click.Context,
    plans: List[Path],
    world_size: int,
    cost_per_frame: Fraction,
    out: Optional[Path],
):
    """
    Tabulates padding, deleted frames and modelled time of saved plans.
    """
    report = report_plans([load_plan(path) for path in plans], world_size, cost_per_frame)
    emit_result(ctx, out, report.as_dict(), report.render_text())


@cli.command("compare", context_settings={**CONTEXT_SETTINGS})
@click.option("--manifest", "manifest_path", type=EXISTING_FILE, required=True)
@click.option("--t-block", type=click.IntRange(min=1), help="chunks size. Defaults to the average length.")
@click.option("--t-mix", type=click.IntRange(min=1), help="mixed size. Defaults to the average length.")
@calibrate_option
@click.option("--t-max", type=click.IntRange(min=1), help="bload block size. Defaults to the longest sequence.")
@settings_option("world_size", "--world-size", type=click.IntRange(min=1))
@settings_option("cost_per_frame", "--cost-per-frame", type=Rational())
@settings_option(
    "sampling",
    "--sampling",
    type=click.Choice([sampling.value for sampling in Sampling]),
)
@seed_option
@out_option
@click.pass_context
def compare_command(  # pylint: disable=too-many-arguments
    ctx: click.Context,
    manifest_path: Path,
    t_block: Optional[int],
    t_mix: Optional[int],
    calibrate_mix: bool,
    t_max: Optional[int],
    world_size: int,
    cost_per_frame: Fraction,
    sampling: str,
    seed: Optional[int],
    out: Optional[Path],
):
    """
    Packs a manifest with every strategy and tabulates the results.
    """
    manifest = load_manifest(manifest_path)
    report = compare(
        manifest,
        resolve_seed(ctx, seed),
        t_block=t_block,
        t_mix=resolve_t_mix(ctx, manifest, t_mix, calibrate_mix),
        t_max=t_max,
        world_size=world_size,
        cost_per_frame=cost_per_frame,
        sampling=Sampling(sampling),
    )
    emit_result(ctx, out, report.as_dict(), report.render_text())


def _fail(message: str) -> None:
    click.echo(click.style("Error: ", fg="red") + message, err=True)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Runs the command line and returns the exit code: 0 on success, 1 for
    usage and file access errors, 2 for invalid manifests and 3 for
    infeasible packings.
    """
    try:
        result = cli.main(
            args=list(argv) if argv is not None else None,
            prog_name="blockload",
            standalone_mode=False,
        )
        return result if isinstance(result, int) else EXIT_OK
    except click.exceptions.Abort:
        _fail("aborted")
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except ManifestError as exc:
        log.traceback(exc)
        _fail(f"invalid manifest: {exc}")
        return EXIT_INVALID_MANIFEST
    except InfeasiblePackingError as exc:
        log.traceback(exc)
        _fail(f"infeasible packing: {exc}")
        return EXIT_INFEASIBLE
    except (PackingError, OracleError, SimulationError) as exc:
        log.traceback(exc)
        _fail(str(exc))
        return EXIT_USAGE
    except OSError as exc:
        log.traceback(exc)
        _fail(f"cannot access {exc.filename or 'file'}: {exc.strerror or exc}")
        return EXIT_USAGE
    finally:
        log.dump()
