import argparse
import sys
import shutil
import pathlib
import typing
from . import main as app_main
from .core.base import NORMALIZATION_MODES, TRACKER_INITS, TIE_BREAKS
from .core.evaluation import parse_threshold_range
from .core.synth import SYMMETRIC_KINDS

from importlib.resources import files, as_file


def init_command(args: typing.Any) -> int:
    """Handles the 'uniquerank init' subcommand."""

    try:
        # 'uniquerank.config' maps to the 'uniquerank/config/' directory
        source_config_dir_traversable = files('uniquerank.config')
    except ModuleNotFoundError:
        print('Error: Could not find the package config files. Is \'uniquerank\' installed correctly?',
              file=sys.stderr)
        return 1

    dest_config_dir = pathlib.Path.home() / '.config' / 'uniquerank'

    try:
        dest_config_dir.mkdir(parents=True, exist_ok=True)
        print(f'Created config directory: {dest_config_dir}')
    except OSError as e:
        print(f'Error: Could not create directory {dest_config_dir}. {e}', file=sys.stderr)
        return 1

    with as_file(source_config_dir_traversable) as source_config_path:

        print(f'Copying config files to {dest_config_dir}...')

        allowed_extensions = {'.yaml', '.yml', '.env', '.example'}

        files_to_copy = sorted(
            f for f in source_config_path.rglob('*')
            if f.suffix in allowed_extensions and f.is_file()
        )

        if not files_to_copy:
            print('Warning: No config files (.yaml, .yml, .env, .env.example) found in the package.',
                  file=sys.stderr)
            return 0

        for source_file in files_to_copy:
            relative_path = source_file.relative_to(source_config_path)

            # rename .env.example -> .env
            if source_file.name.endswith('.env.example'):
                relative_path = relative_path.with_name(
                    relative_path.name[:-len('.example')]
                )

            dest_file = dest_config_dir / relative_path
            dest_file.parent.mkdir(parents=True, exist_ok=True)

            if not dest_file.exists() or args.force:
                try:
                    shutil.copy2(source_file, dest_file)
                    print(f'  Copied: {relative_path}')
                except OSError as e:
                    print(f'  Error copying {relative_path}: {e}', file=sys.stderr)
            else:
                print(f'  Skipped (exists): {relative_path}')

    (dest_config_dir / 'py_rankers').mkdir(exist_ok=True)
    print('\nInitialization complete.')
    print(f'Your configuration files are in: {dest_config_dir}')
    return 0


# Argument types


def int_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma-separated integers, got {text!r}')
    if not values or any(value < 1 for value in values):
        raise argparse.ArgumentTypeError(f'expected positive integers, got {text!r}')
    return values


def threshold_list(text: str) -> list[float]:
    try:
        return parse_threshold_range(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma-separated numbers, got {text!r}')


def name_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(',') if part.strip()]


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected an integer, got {text!r}')
    if value < 1:
        raise argparse.ArgumentTypeError(f'expected a positive integer, got {value}')
    return value


# Parser


def common_options() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument('--config', metavar='DIR', help='Directory with base.yaml / evaluation.yaml overrides')
    parser.add_argument('-v', '--verbose', action='store_true', help='Also print debug messages')
    return parser


def graph_options(top_k_list: bool = False) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument('edges', help='Edge list (source,target per line; comma or tab separated)')
    parser.add_argument('attributes', help='Attribute table (header row, node label then numeric columns)')
    parser.add_argument('--directed', action='store_true', help='Treat edges as directed')
    parser.add_argument('--normalization', choices=NORMALIZATION_MODES, help='Attribute column scaling')
    parser.add_argument('--uniform-jump', action='store_true',
                        help='Replace the attribute walk by a uniform jump (no dense similarity matrix)')

    chain = parser.add_argument_group('chain')
    chain.add_argument('--d', type=float, help='Damping factor (probability of a structural step)')
    chain.add_argument('--alpha', type=float, help='Uniqueness trade-off in [0, 1]; 1 gives AttriRank')
    gamma = chain.add_mutually_exclusive_group()
    gamma.add_argument('--gamma', type=float, help='RBF bandwidth')
    gamma.add_argument('--gamma-median', action='store_true', help='Median heuristic for the RBF bandwidth')

    refinement = parser.add_argument_group('refinement')
    if top_k_list:
        refinement.add_argument('--top-k', dest='top_k_list', type=int_list, metavar='K[,K...]',
                                help='Top-k sizes averaged over, e.g. 5,10')
    else:
        refinement.add_argument('--top-k', dest='k_final', type=positive_int, help='Size of the final selection')
    refinement.add_argument('--seed-k', dest='seed_k', type=positive_int, help='Chain candidates handed to refinement')
    refinement.add_argument('--no-refine', action='store_true', help='Take the chain top-k as is')
    refinement.add_argument('--tracker-init', choices=TRACKER_INITS)
    refinement.add_argument('--tie-break', choices=TIE_BREAKS)
    return parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Rank nodes of attributed graphs by importance and attribute uniqueness',
        prog='uniquerank'
    )
    subparsers = parser.add_subparsers(dest='command', help='Available commands')
    common, graph = common_options(), graph_options()

    init_parser = subparsers.add_parser('init', help='Initialize user configuration files')
    init_parser.add_argument(
        '-f', '--force',
        action='store_true',
        help='Overwrite existing configuration files'
    )
    init_parser.set_defaults(func=init_command)

    check_parser = subparsers.add_parser('check-config', parents=[common], help='Validate the configuration')
    check_parser.set_defaults(command_body=app_main.cmd_check_config)

    rank_parser = subparsers.add_parser('rank', parents=[common, graph], help='Rank the nodes of a graph')
    rank_parser.add_argument('--method', default='uniquerank',
                             help='uniquerank, attrirank, pagerank, degree, closeness, eigenvector or a custom ranker')
    rank_parser.add_argument('-o', '--output', default='ranking.csv')
    rank_parser.set_defaults(command_body=app_main.cmd_rank)

    evaluate_parser = subparsers.add_parser('evaluate', parents=[common, graph_options(top_k_list=True)],
                                            help='Disruption grid: efficiency reduction and replacement distance')
    evaluate_parser.add_argument('--methods', type=name_list, help='Comma-separated methods, naive(<t>) allowed')
    evaluate_parser.add_argument('--thresholds', type=threshold_list, help='Replacement similarity thresholds')
    evaluate_parser.add_argument('--search-hops', type=int_list, help='Replacement search radii')
    evaluate_parser.add_argument('--efficiency-hops', type=positive_int, help='Radius of the efficiency neighborhood')
    evaluate_parser.add_argument('--distance-cap', type=positive_int, help='Cap for the nearest-similar distance')
    evaluate_parser.add_argument('--baseline-thresholds', type=threshold_list, metavar='START:STOP:STEP',
                                 help='Naive-baseline thresholds compared against UniqueRank')
    evaluate_parser.add_argument('--include-removed-pairs', action='store_true',
                                 help='Count pairs with the removed node in the efficiency sums')
    evaluate_parser.add_argument('--threads', type=positive_int, help='Worker threads (default UNIQUERANK_THREADS)')
    evaluate_parser.add_argument('-o', '--output', default='evaluation', help='Output directory')
    evaluate_parser.set_defaults(command_body=app_main.cmd_evaluate)

    scatter_parser = subparsers.add_parser('scatter', parents=[common, graph],
                                           help='Importance against log uniqueness, selection flagged')
    scatter_parser.add_argument('-o', '--output', default='scatter.csv')
    scatter_parser.set_defaults(command_body=app_main.cmd_scatter)

    histogram_parser = subparsers.add_parser('histogram', parents=[common, graph],
                                             help='Attribute histograms of all and of selected nodes')
    histogram_parser.add_argument('--selected-from', metavar='RANKING_CSV',
                                  help='Take the top-k of an existing ranking instead of ranking again')
    histogram_parser.add_argument('--bins', type=positive_int)
    histogram_parser.add_argument('-o', '--output', default='histogram.csv')
    histogram_parser.set_defaults(command_body=app_main.cmd_histogram)

    sweep_parser = subparsers.add_parser('sweep', parents=[common, graph], help='Refined selection for several alphas')
    sweep_parser.add_argument('--alphas', type=float_list)
    sweep_parser.add_argument('-o', '--output', default='alpha_sweep.csv')
    sweep_parser.set_defaults(command_body=app_main.cmd_sweep)

    synth_parser = subparsers.add_parser('synth', parents=[common], help='Symmetric graph with perturbed attributes')
    synth_parser.add_argument('kind', choices=list(SYMMETRIC_KINDS))
    synth_parser.add_argument('--n', type=positive_int, required=True,
                              help='Node count (cycle, complete) or dimension (hypercube)')
    synth_parser.add_argument('--perturb', type=int, default=1, help='Number of perturbed nodes (0: none)')
    synth_parser.add_argument('--attribute-count', type=positive_int, default=1)
    synth_parser.add_argument('--seed', type=int, default=0)
    synth_parser.add_argument('--check', action='store_true',
                              help='Report whether the perturbed nodes outrank all others')
    synth_parser.add_argument('--check-gamma', type=float, default=1.0)
    synth_parser.add_argument('-o', '--output', default='synth', help='Output directory')
    synth_parser.set_defaults(command_body=app_main.cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> None:
    """Main entry point for the 'uniquerank' command."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if hasattr(args, 'func'):
        sys.exit(args.func(args))
    if hasattr(args, 'command_body'):
        sys.exit(app_main.run_command(args.command_body, args))
    parser.print_help(sys.stderr)
    sys.exit(app_main.EXIT_USAGE)


if __name__ == '__main__':
    main()
