import os
import sys
import tempfile
import time

import numpy as np

from eyeaffect import create_app
from eyeaffect.corpus import read_partition
from eyeaffect.features import FeatureMatrix
from eyeaffect.pipeline import RunLayout, load_subject_data
from eyeaffect.selection import best_report, mi_filter, read_sweep_csv, shift_frames
from eyeaffect.utils.file_processor import read_json

app = create_app()

PLANTED_LAG = 2.0
# Channels synth_corpus fills with noise: gaze angles, direct gaze, blink.
NOISE_GROUPS = ('gaze', 'closure')
# Windowed features are strongly autocorrelated, so two-minute subjects give
# noise columns up to ~0.15 nats at 32 bins; 8 bins keeps them well below 0.1.
RECOVERY_BINS = 8


def run(*args):
    result = app.test_cli_runner().invoke(args=list(args))
    if result.exit_code != 0:
        print(result.output)
        sys.exit(result.exit_code)
    return result.output


def retained_noise(layout, threshold, shift):
    train = load_subject_data(layout, read_partition(layout.partition).train, 'arousal')
    pairs = [s.aligned(shift_frames(shift)) for s in train]
    rows = np.vstack([x for x, _ in pairs])
    catalog = train[0].matrix.catalog
    mask, _ = mi_filter(FeatureMatrix(rows, catalog, np.arange(len(rows))),
                        np.concatenate([y for _, y in pairs]), threshold, RECOVERY_BINS)
    return [e.name for e, keep in zip(catalog.entries, mask) if keep and e.group in NOISE_GROUPS]


def recover_protocol(out_dir):
    started = time.time()
    os.makedirs(out_dir, exist_ok=True)
    config = os.path.join(out_dir, 'recovery.ini')
    with open(config, 'w', encoding='utf-8') as f:
        f.write(f"[selection]\nbins = {RECOVERY_BINS}\n")
    run('synth', '--out', out_dir, '--config', config, '--subjects', '12', '--minutes', '2',
        '--lag', str(PLANTED_LAG))
    run('ingest', '--out', out_dir, '--config', config, '--corpus', os.path.join(out_dir, 'corpus'))
    run('features', '--out', out_dir, '--config', config)
    print(run('select', '--out', out_dir, '--config', config).strip())

    layout = RunLayout(out_dir)
    selection = read_json(layout.selection('arousal'))
    during = best_report(read_sweep_csv(layout.sweep('arousal', 'during')))
    noisy = retained_noise(layout, during.threshold, during.shift)
    elapsed = (time.time() - started) / 60.0

    checks = {
        'shift within 0.2 s of planted lag': abs(during.shift - PLANTED_LAG) <= 0.2 + 1e-9,
        'noise channels removed at the selected threshold': not noisy,
        'validation CCC > 0.5': selection['val_ccc'] > 0.5,
        'finished within 30 min': elapsed < 30.0,
    }
    for name, ok in checks.items():
        print(f"{'ok  ' if ok else 'FAIL'} {name}")
    print(f"during shift={during.shift:g}s threshold={during.threshold} ccc={during.val_ccc:.4f}; "
          f"best protocol={selection['protocol']} shift={selection['shift_s']}s "
          f"features={selection['n_features']} ccc={selection['val_ccc']:.4f} "
          f"workers={app.config['EXECUTOR_MAX_WORKERS']} minutes={elapsed:.1f}")
    if noisy:
        print("retained noise features: " + ", ".join(noisy[:10]))
    return all(checks.values())


if __name__ == '__main__':
    out_dir = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix='recovery-')
    with app.app_context():
        ok = recover_protocol(out_dir)
    sys.exit(0 if ok else 1)
