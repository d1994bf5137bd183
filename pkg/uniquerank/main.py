from pathlib import Path
import argparse
import sys
import time
import typing

import numpy as np
import pandas as pd

import uniquerank.core.base as base
from uniquerank.core.evaluation import (
    ReplacementPolicy,
    alpha_sweep,
    attribute_histogram_export,
    baseline_table,
    metric_table,
    run_grid,
    scatter_export,
)
from uniquerank.core.graph import AttributedGraph, load_graph, normalize_attributes, write_graph
from uniquerank.core.kernel import (
    AttributeKernel,
    Similarity,
    gamma_median_heuristic,
    similarity_matrix,
)
from uniquerank.core.refinement import top_k_by_score
from uniquerank.core.registry import RankContext, RankerLoader, Selection, naive_method
from uniquerank.core.reports import RunManifest, read_frame, write_frame
from uniquerank.core.synth import (
    PerturbationSpec,
    apply_perturbation,
    ground_truth_check,
    make_symmetric_graph,
)

EXIT_OK = 0
EXIT_UNKNOWN = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_INPUT = 4
EXIT_NUMERICAL = 5

RANKING_COLUMNS: list[str] = ['node_label', 'rank_position', 'chain_score', 'importance', 'uniqueness', 'refined']


# Setup shared by the commands


def load_configuration(args: argparse.Namespace, log_messages: base.LogMessages) -> tuple[
        base.ConfigLoader, base.BaseConfig]:
    config_loader: base.ConfigLoader = base.ConfigLoader(Path(args.config) if args.config else None)
    config_loader.reload_env()  # picks up uniquerank.env edits

    config_scan_results: base.LogMessages | bool = base.ConfigScanner(config_loader).scan_config()
    if config_scan_results is not True:
        raise base.ConfigScanFoundError(config_scan_results)  # type: ignore[arg-type]

    base_config: base.BaseConfig = config_loader.load_base_config(log_messages)
    apply_overrides(base_config, args)
    return config_loader, base_config


def apply_overrides(base_config: base.BaseConfig, args: argparse.Namespace) -> None:
    """Command-line flags win over every configuration file"""
    def given(name: str) -> bool:
        return getattr(args, name, None) is not None

    ranking_changes = {name: getattr(args, name) for name in ('d', 'alpha') if given(name)}
    if ranking_changes:
        base_config.ranking = base_config.ranking.replace(**ranking_changes)
        base_config.ranking_values = base_config.ranking.as_dict()

    if getattr(args, 'gamma_median', False):
        base_config.kernel['gamma'] = 'median'
    elif given('gamma'):
        if args.gamma <= 0:
            raise base.ConfigSpecificException(base.LogMessages([base.LogMessage(
                f'--gamma must be positive (got {args.gamma!r})', base.LogLevels.ERROR.key
            )]))
        base_config.kernel['gamma'] = args.gamma

    if given('normalization'):
        base_config.graph['normalization'] = args.normalization
    if getattr(args, 'directed', False):
        base_config.graph['directed'] = True

    for flag, key in (('k_final', 'k_final'), ('seed_k', 'k_seed'),
                      ('tracker_init', 'tracker_init'), ('tie_break', 'tie_break')):
        if given(flag):
            base_config.refinement[key] = getattr(args, flag)

    for flag, key in (('methods', 'methods'), ('top_k_list', 'top_k'), ('thresholds', 'thresholds'),
                      ('search_hops', 'search_hops'), ('distance_cap', 'distance_cap'),
                      ('efficiency_hops', 'efficiency_hops'), ('baseline_thresholds', 'baseline_thresholds'),
                      ('bins', 'histogram_bins'), ('alphas', 'alphas')):
        if given(flag):
            base_config.evaluation[key] = getattr(args, flag)
    if getattr(args, 'include_removed_pairs', False):
        base_config.evaluation['include_removed_pairs'] = True

    log_messages: base.LogMessages = base.LogMessages()
    base_config.validate(log_messages)
    if log_messages.contains_error():
        raise base.ConfigSpecificException(log_messages)


def load_inputs(
        args: argparse.Namespace,
        base_config: base.BaseConfig,
        log_messages: base.LogMessages
) -> AttributedGraph:
    g: AttributedGraph = load_graph(args.edges, args.attributes, base_config.graph['directed'], log_messages)
    return normalize_attributes(g, base_config.graph['normalization'])


def choose_gamma(g: AttributedGraph, base_config: base.BaseConfig, log_messages: base.LogMessages) -> float:
    kernel = base_config.kernel
    if kernel['gamma'] != 'median':
        return float(kernel['gamma'])
    return gamma_median_heuristic(g, kernel['sample_pairs'], kernel['seed'], log_messages)


def build_context(
        args: argparse.Namespace,
        base_config: base.BaseConfig,
        g: AttributedGraph,
        log_messages: base.LogMessages
) -> RankContext:
    gamma: float = choose_gamma(g, base_config, log_messages)
    uniform_jump: bool = getattr(args, 'uniform_jump', False)
    s: Similarity
    if uniform_jump:
        s = AttributeKernel(g.attributes, gamma)
    else:
        s = similarity_matrix(g, gamma, base_config.kernel['dense_cap'])

    return RankContext(
        g, s, base_config.ranking,
        rankers=RankerLoader().load_all(),
        uniform_jump=uniform_jump,
        k_seed=base_config.refinement['k_seed'],
        refine=not getattr(args, 'no_refine', False),
        tracker_init=base_config.refinement['tracker_init'],
        tie_break=base_config.refinement['tie_break'],
        log_messages=log_messages
    )


def manifest_parameters(base_config: base.BaseConfig, context: RankContext) -> dict[str, typing.Any]:
    """Hyperparameters echoed into every report header"""
    kernel = base_config.kernel
    return {
        'ranking': context.config.as_dict(),
        'kernel': {
            'gamma': float(context.s.gamma),
            'gamma_mode': 'median' if kernel['gamma'] == 'median' else 'fixed',
            'sample_pairs': kernel['sample_pairs'],
            'seed': kernel['seed'],
            'dense_cap': kernel['dense_cap'],
        },
        'graph': dict(base_config.graph),
        'refinement': {
            'refine': context.refine,
            'k_final': base_config.refinement['k_final'],
            'k_seed': base_config.refinement['k_seed'],
            'tracker_init': context.tracker_init,
            'tie_break': context.tie_break,
        },
        'uniform_jump': context.uniform_jump,
    }


def graph_inputs(args: argparse.Namespace) -> dict[str, Path]:
    return {'edges': Path(args.edges), 'attributes': Path(args.attributes)}


def ranking_frame(context: RankContext, method: str, selection: Selection) -> pd.DataFrame:
    """Every node: the selection first, then the rest by chain score"""
    scores = context.scores(method)
    chosen = set(selection.nodes)
    order = selection.nodes + [node for node in top_k_by_score(scores, context.g.node_count) if node not in chosen]
    refined = np.zeros(context.g.node_count, dtype=int)
    if selection.refined:
        refined[selection.nodes] = 1

    nodes = np.asarray(order, dtype=np.int64)
    return pd.DataFrame({
        'node_label': [context.g.node_labels[node] for node in order],
        'rank_position': np.arange(1, len(order) + 1),
        'chain_score': scores[nodes],
        'importance': context.importance[nodes],
        'uniqueness': context.uniqueness[nodes],
        'refined': refined[nodes],
    }, columns=RANKING_COLUMNS)


def final_k(base_config: base.BaseConfig, g: AttributedGraph) -> int:
    return min(base_config.refinement['k_final'], g.node_count)


# Commands


def cmd_rank(args: argparse.Namespace, log_messages: base.LogMessages) -> None:
    _, base_config = load_configuration(args, log_messages)
    g = load_inputs(args, base_config, log_messages)
    context = build_context(args, base_config, g, log_messages)

    k = final_k(base_config, g)
    selection = context.select(args.method, k)
    parameters = manifest_parameters(base_config, context) | {'method': args.method}
    manifest = RunManifest('rank', parameters, graph_inputs(args))

    path = write_frame(ranking_frame(context, args.method, selection), Path(args.output), manifest.header_lines())
    log_messages.info(f'Wrote ranking of {g.node_count} nodes by {args.method} to "{path}"')


def cmd_evaluate(args: argparse.Namespace, log_messages: base.LogMessages) -> None:
    config_loader, base_config = load_configuration(args, log_messages)
    g = load_inputs(args, base_config, log_messages)
    context = build_context(args, base_config, g, log_messages)
    evaluation = base_config.evaluation
    threads = config_loader.thread_count(args.threads)

    policy = ReplacementPolicy(
        evaluation['thresholds'][0],
        evaluation['search_hops'][0],
        evaluation['distance_cap'],
        evaluation['efficiency_hops'],
        evaluation['include_removed_pairs']
    )
    parameters = manifest_parameters(base_config, context) | {
        'evaluation': {key: evaluation[key] for key in (
            'methods', 'top_k', 'thresholds', 'search_hops', 'efficiency_hops', 'distance_cap',
            'include_removed_pairs', 'baseline_thresholds'
        )}
    }
    output = Path(args.output)

    started = time.perf_counter()
    grid = run_grid(
        context, evaluation['methods'], evaluation['top_k'], evaluation['thresholds'], policy,
        search_hops=evaluation['search_hops'], threads=threads
    )
    header_lines = RunManifest('evaluate', parameters, graph_inputs(args)).header_lines()
    write_frame(grid, output / 'grid.csv', header_lines)
    for metric in ('efficiency_reduction', 'replacement_distance'):
        write_frame(metric_table(grid, metric), output / f'{metric}.csv', header_lines)

    if evaluation['baseline_thresholds']:
        methods = ['uniquerank'] + [naive_method(t) for t in evaluation['baseline_thresholds']]
        baseline_grid = run_grid(
            context, methods, evaluation['top_k'], evaluation['thresholds'], policy,
            search_hops=evaluation['search_hops'], threads=threads
        )
        write_frame(baseline_grid, output / 'baseline_grid.csv', header_lines)
        for metric in ('efficiency_reduction', 'replacement_distance'):
            write_frame(baseline_table(baseline_grid, metric), output / f'baseline_{metric}.csv', header_lines)

    log_messages.debug(f'Evaluation took {time.perf_counter() - started:.2f} s on {threads} thread(s)')
    log_messages.info(f'Wrote evaluation tables to "{output}"')


def cmd_scatter(args: argparse.Namespace, log_messages: base.LogMessages) -> None:
    _, base_config = load_configuration(args, log_messages)
    g = load_inputs(args, base_config, log_messages)
    context = build_context(args, base_config, g, log_messages)

    selection = context.select('uniquerank', final_k(base_config, g))
    manifest = RunManifest('scatter', manifest_parameters(base_config, context), graph_inputs(args))
    path = scatter_export(
        context.importance, context.uniqueness, selection.nodes, Path(args.output),
        labels=g.node_labels, header_lines=manifest.header_lines()
    )
    log_messages.info(f'Wrote score plane of {g.node_count} nodes to "{path}"')


def selected_from_file(g: AttributedGraph, path: Path, k: int) -> list[int]:
    """Nodes at rank positions 1..k of a ranking report"""
    frame = read_frame(path)
    missing = [column for column in ('node_label', 'rank_position') if column not in frame.columns]
    if missing:
        raise base.GraphFormatError(f'ranking file "{path}" lacks column(s) {", ".join(missing)}')
    top = frame.loc[frame['rank_position'] <= k, 'node_label']
    return [g.index_of(str(label)) for label in top]


def cmd_histogram(args: argparse.Namespace, log_messages: base.LogMessages) -> None:
    _, base_config = load_configuration(args, log_messages)
    g = load_inputs(args, base_config, log_messages)
    k = final_k(base_config, g)
    inputs = graph_inputs(args)

    if args.selected_from:
        selected = selected_from_file(g, Path(args.selected_from), k)
        inputs['selected_from'] = Path(args.selected_from)
        parameters: dict[str, typing.Any] = {'graph': dict(base_config.graph), 'k_final': k}
    else:
        context = build_context(args, base_config, g, log_messages)
        selected = context.select('uniquerank', k).nodes
        parameters = manifest_parameters(base_config, context)
    parameters['histogram_bins'] = base_config.evaluation['histogram_bins']

    manifest = RunManifest('histogram', parameters, inputs)
    path = attribute_histogram_export(
        g, selected, Path(args.output), bins=base_config.evaluation['histogram_bins'],
        header_lines=manifest.header_lines()
    )
    log_messages.info(f'Wrote attribute histograms for {len(selected)} selected node(s) to "{path}"')


def cmd_sweep(args: argparse.Namespace, log_messages: base.LogMessages) -> None:
    _, base_config = load_configuration(args, log_messages)
    g = load_inputs(args, base_config, log_messages)
    context = build_context(args, base_config, g, log_messages)

    alphas = base_config.evaluation['alphas']
    frame = alpha_sweep(context, alphas, final_k(base_config, g))
    parameters = manifest_parameters(base_config, context) | {'alphas': alphas}
    manifest = RunManifest('sweep', parameters, graph_inputs(args))
    path = write_frame(frame, Path(args.output), manifest.header_lines())
    log_messages.info(f'Wrote selections for {len(alphas)} alpha value(s) to "{path}"')


def cmd_synth(args: argparse.Namespace, log_messages: base.LogMessages) -> None:
    _, base_config = load_configuration(args, log_messages)
    g = make_symmetric_graph(args.kind, args.n, args.attribute_count)

    spec: PerturbationSpec | None = None
    if args.perturb > 0:
        spec = PerturbationSpec.random(g, args.perturb, args.seed)
        g = apply_perturbation(g, spec)
    else:
        log_messages.warning('No node perturbed: the generated graph has uniform attributes')

    parameters: dict[str, typing.Any] = {
        'kind': args.kind,
        'size': args.n,
        'attribute_count': args.attribute_count,
        'perturbation': spec.as_dict() if spec is not None else None,
    }
    output = Path(args.output)
    write_graph(g, output / 'edges.csv', output / 'attributes.csv', RunManifest('synth', parameters).header_lines())
    log_messages.info(f'Wrote {args.kind} graph with {g.node_count} nodes and {g.edge_count} edges to "{output}"')

    if args.check and spec is not None:
        passed = ground_truth_check(g, spec, base_config.ranking, gamma=args.check_gamma, log_messages=log_messages)
        print(f'Perturbed nodes outrank every default node: {passed}')


def cmd_check_config(args: argparse.Namespace, log_messages: base.LogMessages) -> None:
    load_configuration(args, log_messages)
    print('Configuration OK.')


# Exit codes


def run_command(
        command: typing.Callable[[argparse.Namespace, base.LogMessages], None],
        args: argparse.Namespace
) -> int:
    """Run one command body, print collected messages to stderr and map failures to exit codes"""
    log_messages: base.LogMessages = base.LogMessages()
    exit_code: int = EXIT_OK
    verbose: bool = getattr(args, 'verbose', False)

    try:
        command(args, log_messages)
    except base.ConfigScanFoundError as e:
        e.log_messages.print_log_messages(heading='Config errors & warnings (found by ConfigScanner):\n')
        exit_code = EXIT_CONFIG
    except base.ConfigFileNotFoundError as e:
        print(f'Config File Not Found Error: {e}', file=sys.stderr)
        exit_code = EXIT_CONFIG
    except base.YAMLParseException as e:
        print(f'Config Error: {e}', file=sys.stderr)
        exit_code = EXIT_CONFIG
    except base.ConfigSpecificException as e:
        e.log_messages.print_log_messages(heading='Config errors & warnings (found at runtime):\n')
        exit_code = EXIT_CONFIG
    except base.UnknownMethodError as e:
        print(f'Usage Error: {e}', file=sys.stderr)
        exit_code = EXIT_USAGE
    except (base.GraphFormatError, base.NodeIndexError) as e:
        print(f'Input Error: {e}', file=sys.stderr)
        exit_code = EXIT_INPUT
    except OSError as e:
        print(f'Input Error: {e}', file=sys.stderr)
        exit_code = EXIT_INPUT
    except (base.KernelError, base.DenseMatrixTooLarge, base.ConvergenceError, base.RefinementError) as e:
        print(f'Numerical Error: {e}', file=sys.stderr)
        exit_code = EXIT_NUMERICAL
    except KeyboardInterrupt:
        print('\nExiting.', file=sys.stderr)
        exit_code = EXIT_UNKNOWN
    except Exception as e:
        unknown = base.UnknownException(log_messages, str(e))
        if not unknown.log_messages.is_empty():
            unknown.log_messages.print_log_messages(heading='Messages before the failure:\n', include_debug=verbose)
            print('-> which results in:\n', file=sys.stderr)
        print(f'Unknown error:\n{unknown.error_message}\n', file=sys.stderr)
        return EXIT_UNKNOWN

    log_messages.print_log_messages(heading='Run messages:\n', include_debug=verbose)
    return exit_code
