import glob
import os
from typing import Tuple, Union

from flask import Blueprint, Response, current_app, jsonify

from eyeaffect.errors import DataError
from eyeaffect.pipeline import MANIFEST_NAME
from eyeaffect.selection import read_sweep_csv
from eyeaffect.utils.file_processor import read_json

main = Blueprint('main', __name__)


@main.route('/api/config')
def pipeline_config() -> Response:
    return jsonify(current_app.extensions['pipeline_config'].get_all())


@main.route('/api/sweeps/<dimension>')
def sweeps(dimension: str) -> Union[Response, Tuple[Response, int]]:
    pattern = os.path.join(current_app.config['OUTPUT_DIR'], 'selection', dimension, 'sweep_*.csv')
    paths = sorted(glob.glob(pattern))
    if not paths:
        return jsonify({'error': f'no sweeps for {dimension}'}), 404
    rows = []
    try:
        for path in paths:
            rows.extend(report.as_row() for report in read_sweep_csv(path))
    except DataError as e:
        current_app.logger.error(f"unreadable sweep file: {e}")
        return jsonify({'error': str(e)}), 500
    return jsonify({'dimension': dimension, 'rows': rows})


@main.route('/api/manifest')
def manifest() -> Union[Response, Tuple[Response, int]]:
    path = os.path.join(current_app.config['OUTPUT_DIR'], MANIFEST_NAME)
    if not os.path.exists(path):
        return jsonify({'error': 'no run manifest yet'}), 404
    return jsonify(read_json(path))
