"""Pipeline subcommands, registered on the Flask CLI."""
import functools
import glob
import logging
import os
from typing import Any, Callable, Dict, List, Optional, Sequence

import click
import numpy as np
from flask import Blueprint, current_app

from eyeaffect import __version__
from eyeaffect.config import ConfigManager, parse_shifts
from eyeaffect.corpus import (DIMENSIONS, FRAME_RATE, Partition, align_lengths, read_partition,
                              serialize_annotations, serialize_frames, synth_corpus, synth_partition,
                              write_partition)
from eyeaffect.errors import ArgumentError, CheckpointError, FormatError, PipelineError
from eyeaffect.eval import (EvalReport, ccc, evaluate, human_baseline, wilcoxon_rank_sum,
                            write_eval_rows)
from eyeaffect.extensions import executor
from eyeaffect.features import FeatureMatrix, read_feature_csv, write_feature_csv
from eyeaffect.lld import derive_llds
from eyeaffect.model import load_checkpoint, predict, save_checkpoint
from eyeaffect.pipeline import (RunLayout, RunManifest, cached_features, fuse, load_gold_standard,
                                load_subject_data, read_descriptor_csv, write_descriptor_csv)
from eyeaffect.report import (markdown_table, retention_table, shift_series, shift_table, sweep_svg,
                              threshold_table)
from eyeaffect.selection import (Protocol, SelectionReport, best_report, fit_cell, rank_features,
                                 read_sweep_csv, retention_by_group, run_full_protocol, shift_frames,
                                 sweep_protocol, write_sweep_csv)
from eyeaffect.services.factory import get_source
from eyeaffect.utils.file_processor import ensure_dir, read_json, write_json
from eyeaffect.utils.validators import parse_float_list, validate_input_files
from eyeaffect.wavelet import coefficient_rows, dwt_db10

logger = logging.getLogger(__name__)

pipeline = Blueprint('pipeline', __name__, cli_group=None)

PROTOCOL_CHOICES = [p.value for p in Protocol] + ['all']


def _manifest(layout: RunLayout, config: ConfigManager) -> RunManifest:
    manifest = RunManifest.load(layout.manifest)
    manifest.config = config.get_all()
    manifest.seed = config.model_config().seed
    manifest.version = __version__
    return manifest


def pipeline_command(name: str) -> Callable:
    """Register a stage with the shared ``--config``, ``--out`` and ``--show-config`` options.

    Pipeline errors end the command with their exit code and the stage name.
    """
    def decorator(f: Callable) -> Callable:
        @functools.wraps(f)
        def wrapper(config_path: Optional[str], out_dir: Optional[str], show_config: bool, **kwargs: Any) -> None:
            try:
                config = ConfigManager(config_path) if config_path else current_app.extensions['pipeline_config']
                if show_config:
                    click.echo(config.to_ini(), nl=False)
                    return
                layout = RunLayout(ensure_dir(out_dir or current_app.config['OUTPUT_DIR']))
                logger.info(f"{name} started", extra={'stage': name})
                f(config=config, layout=layout, **kwargs)
                logger.info(f"{name} finished", extra={'stage': name})
            except PipelineError as e:
                logger.error(str(e), extra={'stage': name})
                click.echo(f"error [{name}]: {e}", err=True)
                raise click.exceptions.Exit(e.exit_code)

        wrapper = click.option('--show-config', is_flag=True, help='Print the effective configuration and exit.')(wrapper)
        wrapper = click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None,
                               help='Run directory (default: EYEAFFECT_OUTPUT_DIR).')(wrapper)
        wrapper = click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
                               help='Pipeline INI or JSON file.')(wrapper)
        return pipeline.cli.command(name)(wrapper)
    return decorator


def _dimension_option(f: Callable) -> Callable:
    return click.option('--dimension', type=click.Choice(DIMENSIONS), default=None,
                        help='Affect dimension (default: [corpus] dimension).')(f)


def _dimension(config: ConfigManager, dimension: Optional[str]) -> str:
    return dimension or config.get('corpus', 'dimension')


def _partition(layout: RunLayout) -> Partition:
    if not os.path.exists(layout.partition):
        raise FormatError("run has no partition.ini; run the ingest stage first")
    return read_partition(layout.partition)


def _mapper() -> Callable:
    if current_app.config.get('EXECUTOR_MAX_WORKERS', 1) > 1:
        return executor.map
    return map


@pipeline_command('synth')
@click.option('--seed', type=int, default=None)
@click.option('--subjects', 'n_subjects', type=int, default=None)
@click.option('--minutes', type=float, default=None)
@click.option('--lag', type=float, default=None, help='Planted annotation lag in seconds.')
@click.option('--annotators', type=int, default=3)
@_dimension_option
def synth(config: ConfigManager, layout: RunLayout, seed: Optional[int], n_subjects: Optional[int],
          minutes: Optional[float], lag: Optional[float], annotators: int, dimension: Optional[str]) -> None:
    """Write a synthetic RECOLA-format corpus under <out>/corpus."""
    corpus_cfg = config.get('corpus')
    seed = corpus_cfg['synth_seed'] if seed is None else seed
    n_subjects = corpus_cfg['synth_subjects'] if n_subjects is None else n_subjects
    minutes = corpus_cfg['synth_minutes'] if minutes is None else minutes
    lag = corpus_cfg['synth_lag'] if lag is None else lag
    dimension = _dimension(config, dimension)

    frames, traces = synth_corpus(seed, n_subjects, minutes * 60.0, lag, annotators, dimension)
    root = ensure_dir(os.path.join(layout.root, 'corpus'))
    frames_dir = ensure_dir(os.path.join(root, 'frames'))
    labels_dir = ensure_dir(os.path.join(root, 'annotations', dimension))
    written = []
    for subject in sorted(frames):
        path = os.path.join(frames_dir, f'{subject}.csv')
        with open(path, 'wb') as f:
            f.write(serialize_frames(frames[subject], config.column_map()))
        written.append(path)
        path = os.path.join(labels_dir, f'{subject}.csv')
        with open(path, 'wb') as f:
            f.write(serialize_annotations(traces[subject]))
        written.append(path)
    partition_path = os.path.join(root, 'partition.ini')
    write_partition(synth_partition(list(frames)), partition_path)
    written.append(partition_path)

    manifest = _manifest(layout, config)
    manifest.notes['synth'] = {'seed': seed, 'subjects': n_subjects, 'minutes': minutes, 'lag_s': lag}
    manifest.record('synth', written, layout.root)
    manifest.save(layout.manifest)
    click.echo(root)


@pipeline_command('ingest')
@click.option('--corpus', 'corpus_path', type=click.Path(), default=None,
              help='Corpus directory (default: [corpus] path).')
@_dimension_option
def ingest(config: ConfigManager, layout: RunLayout, corpus_path: Optional[str], dimension: Optional[str]) -> None:
    """Parse the corpus, derive frame descriptors and store aligned labels."""
    dimension = _dimension(config, dimension)
    source = get_source(config, corpus_path)
    partition = source.partition()
    if not partition.train:
        raise FormatError("partition has no training subjects present in the corpus")
    thresholds = config.threshold_config()
    written = []
    sources: Dict[str, str] = {}
    for subject in partition.subjects:
        frames = source.load_frames(subject)
        traces = source.load_traces(subject, dimension)
        n_frames = len(frames)
        aligned = []
        for trace in traces:
            n_frames, trace = align_lengths(n_frames, trace, subject)
            aligned.append(trace)
        aligned = [t.with_values(t.values[:n_frames]) for t in aligned]
        series = derive_llds(frames[:n_frames], thresholds, config.ring_indices())
        sources[subject] = series.direct_gaze_source
        write_descriptor_csv(series, layout.llds(subject))
        with open(layout.labels(dimension, subject), 'wb') as f:
            f.write(serialize_annotations(aligned))
        written += [layout.llds(subject), layout.labels(dimension, subject)]
        logger.info(f"{n_frames} frames, {len(aligned)} annotators", extra={'stage': 'ingest', 'subject': subject})
    write_partition(partition, layout.partition)
    written.append(layout.partition)

    manifest = _manifest(layout, config)
    corpus_root = corpus_path or config.get('corpus', 'path')
    if config.get('corpus', 'source') == 'csv':
        corpus_files = sorted(glob.glob(os.path.join(corpus_root, '**', '*.csv'), recursive=True))
        manifest.add_inputs(corpus_files)
    manifest.notes['direct_gaze_source'] = sources
    manifest.notes['thresholds'] = thresholds.as_dict()
    manifest.record('ingest', written, layout.root)
    manifest.save(layout.manifest)


@pipeline_command('features')
@click.option('--wavelet-dump', 'dump_subject', default=None,
              help='Also write the first-window wavelet coefficients of this subject.')
def features(config: ConfigManager, layout: RunLayout, dump_subject: Optional[str]) -> None:
    """Compute the 292-feature matrix of every ingested subject."""
    feature_cfg = config.get('features')
    if feature_cfg['rate'] != FRAME_RATE:
        raise ArgumentError(f"only {FRAME_RATE} Hz input is supported")
    if config.get('wavelet', 'levels') != 7:
        raise ArgumentError("the eye feature catalog is defined for 7 wavelet levels")
    lld_paths = sorted(glob.glob(os.path.join(layout.root, 'llds', '*.csv')))
    if not lld_paths:
        raise FormatError("no descriptor files; run the ingest stage first")
    out_dir = layout.features_dir()
    written = []
    for path in lld_paths:
        subject = os.path.splitext(os.path.basename(path))[0]
        series = read_descriptor_csv(path)
        matrix = cached_features(series, feature_cfg['window'], feature_cfg['stride'])
        target = os.path.join(out_dir, f'{subject}.csv')
        write_feature_csv(matrix, target)
        written.append(target)
        logger.info(f"{len(matrix)} windows", extra={'stage': 'features', 'subject': subject})
        if subject == dump_subject:
            window = series.channel('pupil_diam')[:feature_cfg['window']]
            dump = os.path.join(out_dir, f'{subject}_wavelet.csv')
            with open(dump, 'w', encoding='utf-8') as f:
                f.write('level,type,index,value\n')
                for level, kind, index, value in coefficient_rows(dwt_db10(window)):
                    f.write(f"{level},{kind},{index},{value!r}\n")
            written.append(dump)

    manifest = _manifest(layout, config)
    manifest.record('features', written, layout.root)
    manifest.save(layout.manifest)


def _selection_payload(report: SelectionReport, names: Sequence[str], kind: str, dimension: str,
                       ranking: Dict[str, List[Any]], retention: Dict[str, Any]) -> Dict[str, Any]:
    return {
        'dimension': dimension,
        'features_kind': kind,
        'protocol': report.protocol.value,
        'threshold': report.threshold,
        'shift_s': report.shift,
        'val_ccc': report.val_ccc,
        'n_features': report.n_features,
        'features': list(names),
        'ranking': ranking,
        'retention': retention,
    }


@pipeline_command('select')
@_dimension_option
@click.option('--protocol', type=click.Choice(PROTOCOL_CHOICES), default='all')
@click.option('--thresholds', default=None, help='Comma-separated MI thresholds in nats.')
@click.option('--shifts', default=None, help='start:stop:step or comma-separated seconds.')
@click.option('--threshold', 'fixed_threshold', type=float, default=None, help='Fixed threshold for DURING.')
@click.option('--shift', 'fixed_shift', type=float, default=None, help='Fixed shift (s) for AFTER.')
@click.option('--features-kind', default='features', type=click.Choice(['features', 'fused']))
def select(config: ConfigManager, layout: RunLayout, dimension: Optional[str], protocol: str,
           thresholds: Optional[str], shifts: Optional[str], fixed_threshold: Optional[float],
           fixed_shift: Optional[float], features_kind: str) -> None:
    """Sweep MI thresholds and ground-truth shifts."""
    dimension = _dimension(config, dimension)
    threshold_grid = parse_float_list(thresholds, 'threshold') if thresholds else list(config.selection_thresholds())
    shift_grid = parse_shifts(shifts) if shifts else config.shift_config()
    bins = config.get('selection', 'bins')
    model_config = config.model_config()
    partition = _partition(layout)
    train = load_subject_data(layout, partition.train, dimension, features_kind)
    val = load_subject_data(layout, partition.validation, dimension, features_kind)

    if protocol == 'all':
        results = run_full_protocol(threshold_grid, shift_grid, train, val, model_config, bins, _mapper())
    else:
        mode = Protocol(protocol)
        results = {mode: sweep_protocol(mode, threshold_grid, shift_grid, train, val, model_config,
                                        fixed_threshold, fixed_shift, bins, _mapper())}
    written = []
    for mode, reports in results.items():
        path = layout.sweep(dimension, mode.value)
        write_sweep_csv(reports, path)
        written.append(path)

    best = best_report([r for reports in results.values() for r in reports])
    catalog = train[0].matrix.catalog
    retained = best.retained if best.retained is not None else np.ones(len(catalog), dtype=bool)
    names = [n for n, keep in zip(catalog.names, retained) if keep]
    k = shift_frames(best.shift, shift_grid.rate)
    pairs = [s.aligned(k) for s in train]
    stacked = FeatureMatrix(np.vstack([x for x, _ in pairs]), catalog, np.arange(sum(len(y) for _, y in pairs)))
    ranking = rank_features(stacked, np.concatenate([y for _, y in pairs]), bins=bins)
    retention = {g: list(v) for g, v in retention_by_group(catalog, retained).items()}
    write_json(_selection_payload(best, names, features_kind, dimension, ranking, retention),
               layout.selection(dimension))
    written.append(layout.selection(dimension))

    manifest = _manifest(layout, config)
    manifest.notes[f'selection.{dimension}'] = {'thresholds': list(threshold_grid),
                                                'shifts': list(shift_grid.shifts), 'bins': bins}
    manifest.record('select', written, layout.root)
    manifest.save(layout.manifest)
    click.echo(f"best: protocol={best.protocol.value} threshold={best.threshold} "
               f"shift={best.shift:g}s features={best.n_features} ccc={best.val_ccc:.4f}")


@pipeline_command('train')
@_dimension_option
@click.option('--threshold', type=float, default=None, help='Override the selected MI threshold.')
@click.option('--shift', type=float, default=None, help='Override the selected shift (s).')
@click.option('--no-filter', is_flag=True, help='Train on every feature.')
@click.option('--features-kind', default='features', type=click.Choice(['features', 'fused']))
@click.option('--selection', 'selection_path', type=click.Path(dir_okay=False), default=None,
              help='Selection file to reuse (default: this run\'s selection for the dimension).')
@click.option('--retune-shift/--reuse-shift', default=None,
              help='Re-sweep the shift on fused features instead of reusing the eye-derived one.')
def train(config: ConfigManager, layout: RunLayout, dimension: Optional[str], threshold: Optional[float],
          shift: Optional[float], no_filter: bool, features_kind: str, selection_path: Optional[str],
          retune_shift: Optional[bool]) -> None:
    """Train the final BLSTM at the selected threshold and shift."""
    dimension = _dimension(config, dimension)
    selection_path = selection_path or layout.selection(dimension)
    selection = read_json(selection_path) if os.path.exists(selection_path) else {}
    threshold = threshold if threshold is not None else selection.get('threshold')
    shift = shift if shift is not None else selection.get('shift_s', 0.0)
    if no_filter:
        threshold = None

    partition = _partition(layout)
    train_data = load_subject_data(layout, partition.train, dimension, features_kind)
    val_data = load_subject_data(layout, partition.validation, dimension, features_kind)
    model_config = config.model_config()
    bins = config.get('selection', 'bins')
    if retune_shift is None:
        retune_shift = config.get('fusion', 'retune_shift')
    if retune_shift and features_kind == 'fused':
        none = sweep_protocol(Protocol.NONE, [], config.shift_config(), train_data, val_data, model_config,
                              bins=bins, mapper=_mapper())
        shift = best_report(none).shift
        logger.info(f"re-tuned shift on fused features: {shift:g} s", extra={'stage': 'train'})

    fit = fit_cell(threshold, shift, train_data, val_data, model_config, bins)
    if fit.model is None:
        raise FormatError(f"MI threshold {threshold} retains no features")
    catalog = train_data[0].matrix.catalog.subset(fit.mask)
    model = fit.model
    model.catalog_hash = catalog.hash()
    model.feature_names = catalog.names
    save_checkpoint(model, layout.model(dimension))

    history_path = os.path.join(os.path.dirname(layout.model(dimension)), f'{dimension}_history.csv')
    with open(history_path, 'w', encoding='utf-8') as f:
        f.write('epoch,train_sse,val_sse\n')
        for record in fit.history:
            f.write(f"{record.epoch},{record.train_sse!r},{record.val_sse!r}\n")

    manifest = _manifest(layout, config)
    manifest.notes[f'model.{dimension}'] = {'threshold': threshold, 'shift_s': shift,
                                            'n_features': len(catalog), 'best_epoch': model.best_epoch,
                                            'init': 'uniform', 'init_scale': model_config.init_scale,
                                            'forget_bias': model_config.forget_bias}
    manifest.record('train', [layout.model(dimension), history_path], layout.root)
    manifest.save(layout.manifest)
    click.echo(f"trained on {len(catalog)} features, shift {shift:g}s, best epoch {model.best_epoch}")


def _read_subject_cccs(path: str) -> Dict[str, float]:
    with open(path, 'r', encoding='utf-8') as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != 'subject,ccc':
        raise FormatError(f"{path}: expected a subject,ccc table")
    return {subject: float(value) for subject, value in (line.split(',') for line in lines[1:] if line)}


@pipeline_command('eval')
@_dimension_option
@click.option('--split', type=click.Choice(['validation', 'test']), default='validation')
@click.option('--features-kind', default='features', type=click.Choice(['features', 'fused']))
@click.option('--system', default=None, help='System name in the eval table (default: eye or fused).')
@click.option('--against', type=click.Path(dir_okay=False), default=None,
              help='Per-subject CCC table of another system for a rank-sum comparison.')
def evaluate_model(config: ConfigManager, layout: RunLayout, dimension: Optional[str], split: str,
                   features_kind: str, system: Optional[str], against: Optional[str]) -> None:
    """Score the trained model on a split."""
    dimension = _dimension(config, dimension)
    path = layout.model(dimension)
    if not os.path.exists(path):
        raise CheckpointError(f"no trained {dimension} model in {layout.root}; run the train stage first")
    model = load_checkpoint(path)
    partition = _partition(layout)
    subjects = partition.split(split)
    if not subjects:
        raise FormatError(f"the {split} split is empty")
    data = load_subject_data(layout, subjects, dimension, features_kind, model.feature_names)
    if data[0].matrix.catalog.hash() != model.catalog_hash:
        raise CheckpointError("feature files do not match the catalog the model was trained on")

    k = shift_frames(model.shift_s)
    predictions, truths, per_subject = [], [], {}
    for subject_data in data:
        rows, targets = subject_data.aligned(k)
        output = predict(model, rows)
        predictions.append(output)
        truths.append(targets)
        per_subject[subject_data.subject] = ccc(output, targets)
    standardizer = model.standardizer
    report = evaluate(np.concatenate(predictions), np.concatenate(truths), dimension,
                      standardizer.target_mean, standardizer.target_sd,
                      system=system or ('eye' if features_kind == 'features' else 'fused'), split=split)
    eval_path = os.path.join(layout.eval_dir(), 'eval.csv')
    write_eval_rows([report], eval_path)
    subject_path = os.path.join(layout.eval_dir(), f'{report.system}_{dimension}_{split}_subjects.csv')
    with open(subject_path, 'w', encoding='utf-8') as f:
        f.write('subject,ccc\n')
        for subject, value in per_subject.items():
            f.write(f"{subject},{value!r}\n")

    manifest = _manifest(layout, config)
    if against:
        errors = validate_input_files([against])
        if errors:
            raise FormatError('; '.join(errors))
        other = _read_subject_cccs(against)
        w, p = wilcoxon_rank_sum(list(per_subject.values()), list(other.values()))
        manifest.notes[f'ranksum.{report.system}.{dimension}.{split}'] = {'against': against, 'W': w, 'p': p}
        click.echo(f"rank-sum W={w:g} p={p:.4g}")
    manifest.record('eval', [eval_path, subject_path], layout.root)
    manifest.save(layout.manifest)
    click.echo(f"{dimension} {split}: CCC {report.ccc:.4f} PCC {report.pcc:.4f} SSE {report.sse:.4f}")


@pipeline_command('fuse')
@click.option('--external-dir', type=click.Path(file_okay=False), required=True,
              help='Directory of <subject>.csv external feature files (first column: frame).')
def fuse_features(config: ConfigManager, layout: RunLayout, external_dir: str) -> None:
    """Concatenate eye features with external per-frame features."""
    eye_paths = sorted(glob.glob(os.path.join(layout.root, 'features', '*.csv')))
    eye_paths = [p for p in eye_paths if not p.endswith('_wavelet.csv')]
    if not eye_paths:
        raise FormatError("no eye feature files; run the features stage first")
    out_dir = layout.features_dir('fused')
    written, inputs = [], []
    for path in eye_paths:
        subject = os.path.splitext(os.path.basename(path))[0]
        external_path = os.path.join(external_dir, f'{subject}.csv')
        errors = validate_input_files([external_path])
        if errors:
            raise FormatError('; '.join(errors))
        fused = fuse(read_feature_csv(path), read_feature_csv(external_path))
        target = os.path.join(out_dir, f'{subject}.csv')
        write_feature_csv(fused, target)
        written.append(target)
        inputs.append(external_path)
        logger.info(f"{len(fused.catalog)} fused columns", extra={'stage': 'fuse', 'subject': subject})

    manifest = _manifest(layout, config)
    manifest.add_inputs(inputs)
    manifest.record('fuse', written, layout.root)
    manifest.save(layout.manifest)


@pipeline_command('baseline-humans')
@_dimension_option
@click.option('--split', type=click.Choice(['train', 'validation', 'test']), default='train')
def baseline_humans(config: ConfigManager, layout: RunLayout, dimension: Optional[str], split: str) -> None:
    """Mean pairwise annotator CCC over the subjects of a split."""
    dimension = _dimension(config, dimension)
    subjects = _partition(layout).split(split)
    if not subjects:
        raise FormatError(f"the {split} split is empty")
    scores, frames = [], 0
    for subject in subjects:
        _, traces = load_gold_standard(layout.labels(dimension, subject), dimension, subject=subject)
        scores.append(human_baseline(traces))
        frames += len(traces[0])
    value = float(np.mean(scores))
    report = EvalReport(dimension=dimension, ccc=value, pcc=float('nan'), sse=float('nan'),
                        n_frames=frames, system='humans', split=split)
    eval_path = os.path.join(layout.eval_dir(), 'eval.csv')
    write_eval_rows([report], eval_path)

    manifest = _manifest(layout, config)
    manifest.record('baseline-humans', [eval_path], layout.root)
    manifest.save(layout.manifest)
    click.echo(f"group-of-humans {dimension} CCC ({split}): {value:.4f}")


@pipeline_command('report')
@_dimension_option
@click.option('--svg/--no-svg', default=True, help='Also draw CCC against shift.')
def report(config: ConfigManager, layout: RunLayout, dimension: Optional[str], svg: bool) -> None:
    """Threshold tables, the combined sweep CSV and the shift chart."""
    dimension = _dimension(config, dimension)
    sweeps = {}
    for protocol in Protocol:
        path = layout.sweep(dimension, protocol.value)
        if os.path.exists(path):
            sweeps[protocol] = read_sweep_csv(path)
    if not sweeps:
        raise FormatError(f"no sweep results for {dimension}; run the select stage first")

    out_dir = layout.reports_dir()
    written = []
    sections = [f"# {dimension} feature selection\n"]
    for protocol, reports in sweeps.items():
        if protocol in (Protocol.BEFORE, Protocol.AFTER):
            table = threshold_table(reports)
        else:
            table = shift_table(reports)
        csv_path = os.path.join(out_dir, f'{dimension}_{protocol.value}.csv')
        table.to_csv(csv_path, index=False, lineterminator='\n')
        written.append(csv_path)
        sections.append(f"## {protocol.value}\n\n{markdown_table(table)}")

    selection_path = layout.selection(dimension)
    if os.path.exists(selection_path):
        selection = read_json(selection_path)
        retention = {g: tuple(v) for g, v in selection.get('retention', {}).items()}
        sections.append(f"## retained features by group\n\n{markdown_table(retention_table(retention))}")

    markdown_path = os.path.join(out_dir, f'{dimension}_tables.md')
    with open(markdown_path, 'w', encoding='utf-8') as f:
        f.write('\n'.join(sections))
    combined = os.path.join(out_dir, f'{dimension}_sweep.csv')
    write_sweep_csv([r for reports in sweeps.values() for r in reports], combined)
    written += [markdown_path, combined]

    series = shift_series([r for reports in sweeps.values() for r in reports])
    if svg and series:
        svg_path = os.path.join(out_dir, f'{dimension}_shift.svg')
        with open(svg_path, 'w', encoding='utf-8') as f:
            f.write(sweep_svg(series))
        written.append(svg_path)

    manifest = _manifest(layout, config)
    manifest.record('report', written, layout.root)
    manifest.save(layout.manifest)
