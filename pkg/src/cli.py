"""
Command-line interface of the ordinal panel count estimator.

Commands:
    fit       fit one dataset and write estimates, variances and the baseline band
    simulate  run a Monte Carlo study on a scenario
    select    scan a grid of knot counts and spline orders by AIC and BIC
    generate  write a simulated dataset in the ingestion format
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from src.base_panel_model import NonFiniteLikelihoodError
from src.config_parameters import FitConfig, InferenceConfig, OptimizerConfig, SplineConfig, load_flat_config
from src.enums.panel_enums import BandMethod, CdfConvention, FitMode, KnotPlacement, NuisanceProfile
from src.estimator import SieveEstimator
from src.experiment_runner import run_study
from src.inference import ModelSelectionError, SingularCurvatureError, infer, select_model
from src.load_panel import ingest_csv, write_panel_csv
from src.panel_data import PanelDataError, PanelDataset
from src.plotting import plot_baseline, plot_study_curves
from src.results_writer import emit_results, write_selection, write_study
from src.simulation import PRESETS, SimScenario, gen_dataset

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"

REQUIRED_OPTIONS: Dict[str, Tuple[str, ...]] = {
    "fit": ("data", "out"),
    "simulate": ("scenario", "out"),
    "select": ("data", "out"),
    "generate": ("scenario", "out"),
}


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    """Set the root log level: DEBUG with verbose, WARNING with quiet, else INFO."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


def parse_int_list(text: str) -> List[int]:
    """
    Parse "1:5" (inclusive range) or "1,3,8" into integers.

    Raises:
        argparse.ArgumentTypeError: If the text is not a range or a list of integers.
    """
    try:
        if ":" in text:
            start, stop = (int(part) for part in text.split(":"))
            if stop < start:
                raise ValueError(f"empty range {text}")
            return list(range(start, stop + 1))
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"Invalid integer list {text!r}: {e}") from e


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="Flat TOML file supplying option defaults.")
    parser.add_argument("--seed", type=int, default=None, help="Random seed, echoed into every output.")
    parser.add_argument("--verbose", action="store_true", help="Log optimizer iterations.")
    parser.add_argument("--quiet", action="store_true", help="Log warnings and errors only.")


def _add_fit_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mn", type=int, default=2, help="Number of interior knots.")
    parser.add_argument("--degree", type=int, default=3, help="Spline order l; the basis has mn + l functions.")
    parser.add_argument("--knots", choices=[str(p) for p in KnotPlacement], default=str(KnotPlacement.QUANTILE))
    parser.add_argument(
        "--convention", choices=[str(c) for c in CdfConvention], default=str(CdfConvention.SHIFTED)
    )
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--cutpoints", type=parse_int_list, help="Known integer cut points, e.g. 1,3,8.")
    group.add_argument(
        "--estimate-cutpoints", action="store_true", help="Estimate cut points by pseudo-likelihood."
    )
    parser.add_argument("--abs-tol", type=float, default=1e-6, help="Absolute log-likelihood tolerance.")
    parser.add_argument("--rel-tol", type=float, default=1e-6, help="Relative log-likelihood tolerance.")
    parser.add_argument("--max-iter", type=int, default=500, help="Optimizer iteration cap.")
    parser.add_argument("--perturbation", type=float, default=3.0, help="Constant c of h_n = c / sqrt(n).")
    parser.add_argument(
        "--nuisance-profile",
        choices=[str(p) for p in NuisanceProfile],
        default=str(NuisanceProfile.SPLINE_AND_CUTPOINTS),
    )
    parser.add_argument("--band", choices=[str(b) for b in BandMethod], default=str(BandMethod.DIAGONAL))
    parser.add_argument("--no-baseline-variance", action="store_true", help="Skip the baseline band.")
    parser.add_argument("--workers", type=int, default=1, help="Parallel workers.")


def _add_data_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", type=Path, help="Long-format CSV file.")
    parser.add_argument("--n-levels", type=int, default=None, help="Number of ordinal levels K.")
    parser.add_argument("--merge-above", type=int, default=None, help="Recode responses >= k to k.")


def build_parsers() -> Tuple[argparse.ArgumentParser, Dict[str, argparse.ArgumentParser]]:
    """Top-level parser and the parser of each command: fit, simulate, select and generate."""
    parser = argparse.ArgumentParser(prog="opanel", description="Sieve estimation for ordinal panel count data.")
    commands = parser.add_subparsers(dest="command", required=True)

    fit = commands.add_parser("fit", help="Fit a dataset.")
    _add_data_options(fit)
    _add_fit_options(fit)
    fit.add_argument("--out", type=Path, help="Output directory.")
    fit.add_argument("--plot", action="store_true", help="Also render baseline.png.")

    simulate = commands.add_parser("simulate", help="Run a Monte Carlo study.")
    simulate.add_argument("--scenario", help="Scenario TOML file or preset name.")
    simulate.add_argument("--n", type=int, default=200, help="Subjects per replicate.")
    simulate.add_argument("--reps", type=int, default=200, help="Number of replicates.")
    _add_fit_options(simulate)
    simulate.add_argument("--out", type=Path, help="Output directory.")
    simulate.add_argument("--plot", action="store_true", help="Also render baseline_curves.png.")

    select = commands.add_parser("select", help="Select knot count and order by AIC and BIC.")
    _add_data_options(select)
    _add_fit_options(select)
    select.add_argument("--mn-grid", type=parse_int_list, default=[1, 2, 3, 4, 5], help="Interior knot counts.")
    select.add_argument("--degree-grid", type=parse_int_list, default=[1, 2, 3], help="Spline orders.")
    select.add_argument("--out", type=Path, help="Output directory.")

    generate = commands.add_parser("generate", help="Write a simulated dataset.")
    generate.add_argument("--scenario", help="Scenario TOML file or preset name.")
    generate.add_argument("--n", type=int, default=200, help="Number of subjects.")
    generate.add_argument("--out", type=Path, help="CSV file to write.")

    named = {"fit": fit, "simulate": simulate, "select": select, "generate": generate}
    for command in named.values():
        _add_common(command)
    return parser, named


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """
    Parse the command line, taking defaults from --config when given.

    Options named on the command line override the config file.

    Raises:
        ValueError: If the config file has keys that are not options of the command.
    """
    tokens = list(sys.argv[1:] if argv is None else argv)
    parser, commands = build_parsers()

    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(tokens)
    command = next((token for token in tokens if token in commands), None)
    if known.config is not None and command is not None:
        command_parser = commands[command]
        values = {key.replace("-", "_"): value for key, value in load_flat_config(known.config).items()}
        options = set(vars(command_parser.parse_args([])))
        unknown = sorted(set(values) - options)
        if unknown:
            raise ValueError(f"Unknown options in {known.config}: {unknown}")
        for key in ("cutpoints", "mn_grid", "degree_grid"):
            if isinstance(values.get(key), str):
                values[key] = parse_int_list(values[key])
        command_parser.set_defaults(**values)

    args = parser.parse_args(tokens)
    missing = [f"--{name}" for name in REQUIRED_OPTIONS[args.command] if getattr(args, name) is None]
    if missing:
        commands[args.command].error(f"the following arguments are required: {', '.join(missing)}")
    return args


def build_fit_config(args: argparse.Namespace) -> FitConfig:
    """Fit configuration of the parsed options."""
    mode = FitMode.UNKNOWN_CUTPOINTS if args.estimate_cutpoints else FitMode.KNOWN_CUTPOINTS
    return FitConfig(
        spline=SplineConfig(interior_knots=args.mn, order=args.degree, placement=KnotPlacement(args.knots)),
        optimizer=OptimizerConfig(
            absolute_tolerance=args.abs_tol, relative_tolerance=args.rel_tol, max_iterations=args.max_iter
        ),
        inference=InferenceConfig(
            perturbation_constant=args.perturbation,
            nuisance_profile=NuisanceProfile(args.nuisance_profile),
            band_method=BandMethod(args.band),
            baseline_variance=not args.no_baseline_variance,
            max_workers=args.workers if args.command == "fit" else 1,
        ),
        mode=mode,
        convention=CdfConvention(args.convention),
        cutpoints=tuple(args.cutpoints) if args.cutpoints is not None else None,
    )


def resolve_scenario(name: str) -> SimScenario:
    """
    A preset scenario by name, or a scenario read from a TOML file.

    Raises:
        FileNotFoundError: If `name` is neither a preset nor an existing file.
    """
    if name in PRESETS:
        return PRESETS[name]
    return SimScenario.from_toml(Path(name))


def _load_data(args: argparse.Namespace) -> PanelDataset:
    return ingest_csv(args.data, n_levels=args.n_levels, merge_above=args.merge_above)


def run_fit(args: argparse.Namespace) -> None:
    """Fit a dataset and write its results."""
    dataset = _load_data(args)
    config = build_fit_config(args)
    echo: Dict[str, Any] = {"data": str(args.data), "fit": config.to_dict()}

    estimator = SieveEstimator(dataset, config)
    fit = estimator.fit()
    inference = infer(estimator, fit)
    emit_results(fit, inference, args.out, args.seed, echo)
    if args.plot:
        plot_baseline(inference.baseline, args.out / "baseline.png")


def run_simulate(args: argparse.Namespace) -> None:
    """Run a Monte Carlo study and write its results."""
    scenario = resolve_scenario(args.scenario)
    config = build_fit_config(args)
    seed = scenario.seed if args.seed is None else args.seed
    echo = {"scenario": scenario.to_dict(), "n": args.n, "fit": config.to_dict()}

    study = run_study(
        scenario, args.n, args.reps, config, seed=seed, max_workers=args.workers, progress=not args.quiet
    )
    write_study(study, args.out, seed, echo)
    if args.plot:
        plot_study_curves(study.curves, args.out / "baseline_curves.png", title=f"{scenario.name}, n={args.n}")


def run_select(
    dataset: PanelDataset,
    config: FitConfig,
    interior_grid: Sequence[int],
    order_grid: Sequence[int],
    out_dir: Path,
    seed: Optional[int] = None,
    echo: Optional[Dict[str, Any]] = None,
) -> pd.DataFrame:
    """
    Fit every grid cell, tabulate AIC and BIC with the per-criterion winners, and write them.

    Args:
        dataset (PanelDataset): Observations.
        config (FitConfig): Base configuration.
        interior_grid (Sequence[int]): Interior knot counts.
        order_grid (Sequence[int]): Spline orders.
        out_dir (Path): Output directory.
        seed (int, optional): Seed echoed into the outputs.
        echo (Dict[str, Any], optional): Extra configuration echoed into the outputs.

    Returns:
        pd.DataFrame: The selection table.

    Raises:
        ModelSelectionError: If no grid cell converged.
    """
    table = select_model(dataset, config, interior_grid, order_grid)
    settings = {
        **(echo or {}),
        "fit": config.to_dict(),
        "mn_grid": list(interior_grid),
        "degree_grid": list(order_grid),
    }
    write_selection(table, out_dir, seed, settings)

    for criterion in ("aic", "bic"):
        best = table[table[f"{criterion}_best"]].iloc[0]
        logger.info("%s selects m_n=%d, l=%d", criterion.upper(), best["interior_knots"], best["order"])
    return table


def run_generate(args: argparse.Namespace) -> None:
    """Write a simulated dataset."""
    scenario = resolve_scenario(args.scenario)
    seed = scenario.seed if args.seed is None else args.seed
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_panel_csv(gen_dataset(scenario, args.n, seed), args.out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point of the opanel command.

    Returns:
        int: 0 on success, 1 on invalid input or a failed computation.
    """
    try:
        args = parse_args(argv)
    except (ValueError, FileNotFoundError) as e:
        configure_logging()
        logger.error("%s", e)
        return 1

    configure_logging(args.verbose, args.quiet)
    try:
        if args.command == "fit":
            run_fit(args)
        elif args.command == "simulate":
            run_simulate(args)
        elif args.command == "select":
            run_select(
                _load_data(args),
                build_fit_config(args),
                args.mn_grid,
                args.degree_grid,
                args.out,
                args.seed,
                {"data": str(args.data)},
            )
        else:
            run_generate(args)
    except (
        PanelDataError,
        NonFiniteLikelihoodError,
        SingularCurvatureError,
        ModelSelectionError,
        ValueError,
        OSError,
    ) as e:
        logger.error("%s", e)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
