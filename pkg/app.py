import json
import logging
import os

from flask import Flask, jsonify

from config import DEBUG, LOG_LEVEL, RESULTS_DIR
from errors import SweepConfigError, WalkerError
from plot_data import figure_dataset
from sweep_orchestrator import MANIFEST_FILE, RESULTS_FILE, load_results

logger = logging.getLogger(__name__)

app = Flask(__name__)
app.config['RESULTS_DIR'] = RESULTS_DIR


def _run_dir(name):
    return os.path.join(app.config['RESULTS_DIR'], name)


def _is_run(name):
    return os.path.isfile(os.path.join(_run_dir(name), MANIFEST_FILE))


@app.route('/api/runs')
def api_list_runs():
    """List sweep runs found in the results directory."""
    runs = []
    results_dir = app.config['RESULTS_DIR']
    if os.path.isdir(results_dir):
        for name in sorted(os.listdir(results_dir)):
            if not _is_run(name):
                continue
            try:
                with open(os.path.join(_run_dir(name), MANIFEST_FILE), 'r') as f:
                    manifest = json.load(f)
                runs.append({
                    'name': name,
                    'grid_size': manifest.get('grid_size'),
                    'records': manifest.get('records'),
                    'version': manifest.get('version'),
                    'finished': manifest.get('finished'),
                })
            except Exception as e:
                logger.warning(f"Error loading run {name}: {str(e)}")
    return jsonify(runs)


@app.route('/api/runs/<name>')
def api_get_run(name):
    """Manifest, records and baseline of one run."""
    if not _is_run(name):
        return jsonify({'error': 'Run not found'}), 404
    try:
        result = load_results(os.path.join(_run_dir(name), RESULTS_FILE))
        return jsonify({
            'manifest': result.manifest,
            'records': result.records,
            'baseline': result.baseline,
        })
    except Exception as e:
        return jsonify({'error': str(e)}), 500


@app.route('/api/runs/<name>/figure/<figure_id>')
def api_get_figure(name, figure_id):
    """Dataset of one figure for a run, as columns and rows."""
    if not _is_run(name):
        return jsonify({'error': 'Run not found'}), 404
    try:
        result = load_results(os.path.join(_run_dir(name), RESULTS_FILE))
        columns, rows = figure_dataset(result, figure_id)
        return jsonify({'figure': figure_id, 'columns': columns, 'rows': rows})
    except SweepConfigError as e:
        return jsonify({'error': str(e)}), 400
    except (WalkerError, OSError) as e:
        return jsonify({'error': str(e)}), 500


if __name__ == '__main__':
    logging.basicConfig(
        level=getattr(logging, LOG_LEVEL, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    )
    app.run(debug=DEBUG, port=5000)
