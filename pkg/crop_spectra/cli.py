"""Command-line interface for crop_spectra."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from crop_spectra import __version__
from crop_spectra.analysis.pca import export_explained_variance_csv, fit_pca, project
from crop_spectra.analysis.scatter import VALID_GROUP_BY, emit_scatter, export_scores_csv
from crop_spectra.core.constants import (
    CROPS,
    EXIT_DATA,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_USAGE,
    VALID_PRIOR_MODES,
)
from crop_spectra.core.dataset import Dataset, format_summary, summarize
from crop_spectra.core.exceptions import (
    ConfigError,
    DatasetError,
    ModelError,
    NumericalError,
)
from crop_spectra.evaluation.algorithms import fit_algorithm, parse_algorithm
from crop_spectra.evaluation.cross_validation import confusion, run_cv, stratified_kfold
from crop_spectra.evaluation.grid_search import grid_search_reg
from crop_spectra.evaluation.reports import (
    build_results_rows,
    export_cv_report,
    export_grid_report,
    export_json_report,
    export_results_tables,
    results_table,
)
from crop_spectra.ingestion.library_loader import load_ingest_config, load_library, write_library
from crop_spectra.ingestion.synthetic import load_synthetic_spec, separable_spec, synthesize
from crop_spectra.models import discriminant, mlp
from crop_spectra.models.discriminant import DecisionRule, DiscriminantModel, LabelingMode
from crop_spectra.models.mlp import MLPConfig, MLPModel
from crop_spectra.models.serialization import load_model, save_model
from crop_spectra.run_config import RunConfig, load_run_config
from crop_spectra.utils import get_runs_dir, setup_logging, slugify

logger = logging.getLogger(__name__)


class CropSpectraArgumentParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with the usage status (1)."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_dataset_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--dataset', '-d', help='Spectral library CSV file')
    parser.add_argument('--ingest-config', dest='ingest_config', help='IngestConfig YAML (default: built-in GHISACONUS profile)')


def _add_output_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--output-dir', '-o', dest='output_dir', help='Output directory (default: temp/runs)')


def _add_cv_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--folds', '-k', type=int, help='Number of cross-validation folds')
    parser.add_argument('--seed', type=int, help='Fold assignment seed')
    parser.add_argument('--workers', type=int, help='Folds evaluated concurrently')
    parser.add_argument('--priors', choices=VALID_PRIOR_MODES, help='Class priors of discriminant models')
    parser.add_argument('--progress', action='store_true', help='Show progress bars')


def create_parser(config: Optional[RunConfig] = None) -> argparse.ArgumentParser:
    """Create the command-line argument parser; ``config`` supplies option defaults."""
    config = config or RunConfig()
    defaults = config.as_defaults()

    parser = CropSpectraArgumentParser(
        prog='crop_spectra',
        description="Crop Spectra - crop classification from hyperspectral spectral libraries",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument('--config', '-c', type=str, help='Run config YAML; supplies option defaults')
    parser.add_argument('--verbose', '-v', action='store_true', help='Enable verbose output')
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")

    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    validate_parser = subparsers.add_parser('validate', help='Load a library and check its schema and labels')
    _add_dataset_args(validate_parser)

    summarize_parser = subparsers.add_parser('summarize', help='Print and save dataset counts and ranges')
    _add_dataset_args(summarize_parser)
    _add_output_arg(summarize_parser)

    cv_parser = subparsers.add_parser('cv', help='Cross-validate one or more algorithms')
    _add_dataset_args(cv_parser)
    cv_parser.add_argument('--algorithms', '-a', nargs='+', help='Algorithm descriptors, e.g. LDA QDA-Bayes-MMP(0.5) MLP-1HL')
    cv_parser.add_argument('--confusion', action='store_true', help='Print a confusion matrix per algorithm')
    _add_cv_args(cv_parser)
    _add_output_arg(cv_parser)

    grid_parser = subparsers.add_parser('grid', help='Search the regularization grid of a discriminant')
    _add_dataset_args(grid_parser)
    grid_parser.add_argument('--algorithm', '-a', help='Discriminant descriptor, e.g. QDA-Bayes-MMP')
    grid_parser.add_argument('--grid', nargs='+', type=float, help='Shrinkage values, strictly increasing in [0, 1]')
    _add_cv_args(grid_parser)
    _add_output_arg(grid_parser)

    pca_parser = subparsers.add_parser('pca', help='Principal components, scores and scatter plots')
    _add_dataset_args(pca_parser)
    pca_parser.add_argument('--n-components', '-n', dest='n_components', type=int, help='Number of components')
    pca_parser.add_argument('--group-by', dest='group_by', choices=VALID_GROUP_BY, help='One plot per crop, per stage, or one overall')
    pca_parser.add_argument('--components', nargs=2, type=int, metavar=('X', 'Y'), help='Zero-based component pair to plot')
    _add_output_arg(pca_parser)

    train_parser = subparsers.add_parser('train', help='Fit a model on the whole library and save it')
    _add_dataset_args(train_parser)
    train_parser.add_argument('--algorithm', '-a', help='Algorithm descriptor')
    train_parser.add_argument('--model-name', dest='model_name', help='Model file name (default: model_<algorithm>.json)')
    train_parser.add_argument('--priors', choices=VALID_PRIOR_MODES, help='Class priors of discriminant models')
    train_parser.add_argument('--progress', action='store_true', help='Show progress bars')
    _add_output_arg(train_parser)

    predict_parser = subparsers.add_parser('predict', help='Predict crops with a saved model')
    _add_dataset_args(predict_parser)
    predict_parser.add_argument('--model', '-m', help='Model file written by train')
    predict_parser.add_argument('--rule', choices=[r.value for r in DecisionRule], help='Decision rule (default: from the model file)')
    predict_parser.add_argument('--report-name', dest='report_name', default='predictions.json', help='Report file name')
    _add_output_arg(predict_parser)

    synth_parser = subparsers.add_parser('synth', help='Generate a synthetic spectral library')
    synth_parser.add_argument('--spec', help='Synthetic spec YAML (default: built-in separable 3-crop set)')
    synth_parser.add_argument('--seed', type=int, help='Random seed')
    synth_parser.add_argument('--name', default='synthetic.csv', help='Output CSV file name')
    synth_parser.add_argument('--ingest-config', dest='ingest_config', help='IngestConfig YAML for the written layout')
    _add_output_arg(synth_parser)

    for sub in subparsers.choices.values():
        dests = [action.dest for action in sub._actions]
        sub.set_defaults(**{k: v for k, v in defaults.items() if k in dests})
        sub.set_defaults(mlp=dict(config.mlp))

    return parser


def _output_dir(args: argparse.Namespace) -> Path:
    output_dir = Path(args.output_dir) if args.output_dir else get_runs_dir()
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"Cannot create output directory {output_dir}: {exc}") from exc
    return output_dir


def _load_dataset(args: argparse.Namespace) -> Dataset:
    if not args.dataset:
        raise ConfigError("No dataset given; pass --dataset or set 'dataset' in --config")
    ingest = load_ingest_config(Path(args.ingest_config) if args.ingest_config else None)
    return load_library(Path(args.dataset), ingest)


def _mlp_defaults(args: argparse.Namespace) -> MLPConfig:
    return RunConfig(mlp=dict(getattr(args, 'mlp', {}) or {})).mlp_config()


def validate_command(args: argparse.Namespace) -> int:
    """Handle validate command."""
    ds = _load_dataset(args)
    print(format_summary(summarize(ds)))
    print(f"Library {args.dataset} is valid")
    return EXIT_OK


def summarize_command(args: argparse.Namespace) -> int:
    """Handle summarize command."""
    summary = summarize(_load_dataset(args))
    print(format_summary(summary))
    path = export_json_report("summary", summary.to_dict(), Path(_output_dir(args), "summary.json"))
    print(f"Summary saved to {path}")
    return EXIT_OK


def cv_command(args: argparse.Namespace) -> int:
    """Handle cv command: one shared fold assignment for every algorithm."""
    mlp_defaults = _mlp_defaults(args)
    specs = [parse_algorithm(a, mlp_defaults, priors=args.priors) for a in args.algorithms]
    ds = _load_dataset(args)
    folds = stratified_kfold(ds, args.folds, args.seed)
    output_dir = _output_dir(args)

    reports = []
    for spec in specs:
        report = run_cv(ds, spec, folds, progress=args.progress, max_workers=args.workers)
        export_cv_report(report, Path(output_dir, f"cv_{slugify(spec.name)}.json"))
        reports.append(report)
        if args.confusion:
            print(confusion(report))
            print()

    tables = export_results_tables(reports, output_dir)
    print(results_table(build_results_rows(reports)))
    print(f"Reports saved to {output_dir} (table: {tables['markdown'].name})")
    return EXIT_OK


def grid_command(args: argparse.Namespace) -> int:
    """Handle grid command."""
    spec = parse_algorithm(args.algorithm, priors=args.priors)
    ds = _load_dataset(args)
    folds = stratified_kfold(ds, args.folds, args.seed)
    report = grid_search_reg(
        ds, spec, folds, grid=args.grid, progress=args.progress, max_workers=args.workers
    )
    path = export_grid_report(report, Path(_output_dir(args), f"grid_{slugify(report.algorithm)}.json"))
    for lam, cv_report in zip(report.grid, report.reports):
        mark = "  <- selected" if lam == report.selected else ""
        print(f"lambda={lam:g}: {100.0 * cv_report.mean:.1f} +/- {200.0 * cv_report.std:.1f}{mark}")
    print(f"Grid report saved to {path}")
    return EXIT_OK


def pca_command(args: argparse.Namespace) -> int:
    """Handle pca command."""
    ds = _load_dataset(args)
    model = fit_pca(ds, args.n_components)
    output_dir = _output_dir(args)
    table = project(model, ds)
    export_explained_variance_csv(model, Path(output_dir, "pca_variance.csv"))
    components = tuple(args.components)
    if model.n_components < 2 and components == (0, 1):
        logger.warning("One component has no pair to plot; writing scores only")
        written = {"scores": export_scores_csv(table, Path(output_dir, "pca_scores.csv"))}
    else:
        written = emit_scatter(
            table, model, output_dir, group_by=args.group_by, components=components
        )
    ratios = model.explained_variance_ratio
    export_json_report(
        "pca",
        {
            "n_components": model.n_components,
            "means": model.means.tolist(),
            "components": model.components.tolist(),
            "explained_variance": model.explained_variance.tolist(),
            "explained_variance_ratio": ratios.tolist(),
        },
        Path(output_dir, "pca.json"),
    )
    for i, ratio in enumerate(ratios):
        print(f"PC{i + 1}: {100.0 * ratio:.1f}% of variance")
    if model.n_components >= 2:
        print(f"PC1+PC2: {100.0 * (ratios[0] + ratios[1]):.1f}%")
    print(f"Wrote {len(written)} file(s) to {output_dir}")
    return EXIT_OK


def train_command(args: argparse.Namespace) -> int:
    """Handle train command."""
    spec = parse_algorithm(args.algorithm, _mlp_defaults(args), priors=args.priors)
    ds = _load_dataset(args)
    model = fit_algorithm(spec, ds, progress=args.progress)
    name = args.model_name or f"model_{slugify(spec.name)}.json"
    path = save_model(model, Path(_output_dir(args), name), algorithm=spec.name)
    print(f"Trained {spec.name} on {len(ds)} records; model saved to {path}")
    return EXIT_OK


def _prediction_rule(model: DiscriminantModel, algorithm: str, override: Optional[str]) -> DecisionRule:
    """The --rule override, else the rule of the stored algorithm; it must fit the model's labeling."""
    joint = model.mode == LabelingMode.JOINT_CROP_STAGE
    if override:
        rule = DecisionRule(override)
        if (rule == DecisionRule.DIRECT) == joint:
            raise ConfigError(f"--rule {rule.value} does not apply to a {model.mode.value} model")
        return rule
    if not joint:
        return DecisionRule.DIRECT
    try:
        rule = parse_algorithm(algorithm).rule
    except ConfigError:
        rule = DecisionRule.MMP
    return DecisionRule.MMP if rule == DecisionRule.DIRECT else rule


def _prediction_rows(model: Any, spectra: np.ndarray, predicted: np.ndarray, ds: Dataset) -> List[Dict[str, Any]]:
    rows: List[Dict[str, Any]] = []
    for i, record in enumerate(ds.records):
        row: Dict[str, Any] = {
            "record_index": i,
            "true_crop": record.crop.value,
            "true_stage": record.stage.value,
            "predicted_crop": CROPS[int(predicted[i])].value,
        }
        if isinstance(model, MLPModel):
            probs = mlp.predict_proba(model, spectra[i])
            row["crop_probabilities"] = {c.value: float(p) for c, p in zip(CROPS, probs)}
        elif model.mode == LabelingMode.JOINT_CROP_STAGE:
            table = discriminant.joint_posterior_table(model, spectra[i])
            row["crop_probabilities"] = {c.value: float(p) for c, p in zip(CROPS, table.crop_marginals())}
            best = table.argmax_cell()
            row["most_probable_cell"] = {"crop": best.crop.value, "stage": best.stage.value}
            row["joint_posterior"] = table.to_rows()
        else:
            posteriors = np.exp(discriminant.class_log_posteriors(model, spectra[i]))
            probs = {c.value: 0.0 for c in CROPS}
            for label, p in zip(model.classes, posteriors):
                probs[label.value] = float(p)
            row["crop_probabilities"] = probs
        rows.append(row)
    return rows


def predict_command(args: argparse.Namespace) -> int:
    """Handle predict command."""
    if not args.model:
        raise ConfigError("No model given; pass --model")
    model, algorithm = load_model(Path(args.model))
    ds = _load_dataset(args)
    spectra = ds.spectra
    if isinstance(model, DiscriminantModel):
        rule = _prediction_rule(model, algorithm, args.rule)
        predicted = discriminant.decide(model, spectra, rule)
        rule_name = rule.value
    else:
        if args.rule and args.rule != DecisionRule.DIRECT.value:
            raise ConfigError(f"--rule {args.rule} does not apply to an MLP model")
        predicted = np.argmax(np.atleast_2d(mlp.predict_proba(model, spectra)), axis=1)
        rule_name = "argmax"
    rows = _prediction_rows(model, spectra, predicted, ds)
    accuracy = float(np.mean(predicted == ds.crop_indices()))
    path = export_json_report(
        "predictions",
        {
            "model": Path(args.model).name,
            "algorithm": algorithm,
            "rule": rule_name,
            "accuracy": accuracy,
            "predictions": rows,
        },
        Path(_output_dir(args), args.report_name),
    )
    print(f"Predicted {len(rows)} records with {algorithm or 'model'} ({rule_name}); accuracy vs labels {100.0 * accuracy:.1f}%")
    print(f"Predictions saved to {path}")
    return EXIT_OK


def synth_command(args: argparse.Namespace) -> int:
    """Handle synth command."""
    spec = load_synthetic_spec(Path(args.spec)) if args.spec else separable_spec()
    ds = synthesize(spec, args.seed)
    ingest = load_ingest_config(Path(args.ingest_config) if args.ingest_config else None)
    path = write_library(ds, Path(_output_dir(args), args.name), ingest)
    print(f"Wrote {len(ds)} synthetic records ({ds.band_count} bands) to {path}")
    return EXIT_OK


COMMAND_HANDLERS: Dict[str, Callable[[argparse.Namespace], int]] = {
    'validate': validate_command,
    'summarize': summarize_command,
    'cv': cv_command,
    'grid': grid_command,
    'pca': pca_command,
    'train': train_command,
    'predict': predict_command,
    'synth': synth_command,
}


def _config_from_argv(argv: Sequence[str]) -> RunConfig:
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument('--config', '-c')
    known, _ = pre.parse_known_args(list(argv))
    if not known.config:
        return RunConfig()
    return load_run_config(Path(known.config))


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main CLI entry point; returns the process exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        config = _config_from_argv(argv)
    except ConfigError as e:
        print(f"Error: {e.message}", file=sys.stderr)
        return EXIT_USAGE

    parser = create_parser(config)
    args = parser.parse_args(argv)
    setup_logging(args.verbose)

    if not args.command:
        parser.print_help()
        return EXIT_USAGE

    try:
        return COMMAND_HANDLERS[args.command](args)
    except ConfigError as e:
        print(f"Error: {e.message}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, ModelError) as e:
        print(f"Error: {e.message}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as e:
        print(f"Error: {e.message}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == '__main__':
    sys.exit(main())
