import logging
from pathlib import Path

from django.http import JsonResponse
from django.views.decorators.http import require_GET

from . import figure_data
from .models import ExperimentRun

logger = logging.getLogger(__name__)


def _run_summary(run: ExperimentRun) -> dict:
    return {
        'id': run.id,
        'scenario': run.scenario,
        'config_hash': run.config_hash,
        'status': run.status,
        'output_dir': run.output_dir,
        'started_at': run.started_at.isoformat(),
        'finished_at': run.finished_at.isoformat() if run.finished_at else None,
    }


@require_GET
def run_list(request):
    runs = ExperimentRun.objects.all()
    scenario = request.GET.get('scenario')
    if scenario:
        runs = runs.filter(scenario=scenario)
    return JsonResponse({'runs': [_run_summary(run) for run in runs]})


@require_GET
def run_detail(request, run_id):
    try:
        run = ExperimentRun.objects.get(id=run_id)
    except ExperimentRun.DoesNotExist:
        return JsonResponse({'error': 'Run not found'}, status=404)
    payload = _run_summary(run)
    payload.update({'config': run.config, 'summary': run.summary, 'error': run.error})
    return JsonResponse(payload)


@require_GET
def figure_data_view(request, run_id):
    """Plot-ready arrays read from the run's figure CSVs."""
    try:
        run = ExperimentRun.objects.get(id=run_id)
        directory = Path(run.output_dir)
        if not directory.is_dir():
            return JsonResponse({'error': 'Run outputs not found'}, status=404)
        frames = figure_data.load_figure_frames(directory)
        if not frames:
            return JsonResponse({'error': 'Run has no figure data'}, status=404)
        return JsonResponse({'run': run.id, 'figures': figure_data.figure_payload(frames)})
    except ExperimentRun.DoesNotExist:
        return JsonResponse({'error': 'Run not found'}, status=404)
    except Exception as exc:
        logger.error("Error loading figure data for run %s: %s", run_id, str(exc), exc_info=True)
        return JsonResponse({'error': f'An error occurred: {str(exc)}'}, status=500)
