"""
Plot-ready data for experiment runs.

Builds long-format frames (one chart each) from the per-t and per-replicate
experiment outputs, and converts them into JSON-safe arrays of plain
floats for the web views. Nothing is rendered here.
"""
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .reports import read_frame

logger = logging.getLogger(__name__)

FIGURE_PREFIX = 'figure_'


def mse_curves(mse_frame: pd.DataFrame) -> pd.DataFrame:
    """Mean MSE over replicates per (point, estimator, t)."""
    return (
        mse_frame.groupby(['point', 'estimator', 't'], sort=False)['mse']
        .mean()
        .reset_index()
    )


def ratio_sweep(replicates: pd.DataFrame, slopes: Mapping[str, Tuple[float, float]]) -> pd.DataFrame:
    """Average MSE against rho/tau with the fitted power law alongside."""
    frame = (
        replicates.groupby(['estimator', 'ratio'], sort=False)['avg_mse']
        .mean()
        .reset_index()
    )
    fitted = []
    for estimator, ratio in zip(frame['estimator'], frame['ratio']):
        slope, intercept = slopes.get(estimator, (math.nan, math.nan))
        fitted.append(math.exp(intercept) * ratio ** slope)
    frame['fitted'] = fitted
    return frame


def dependence_sweep(replicates: pd.DataFrame, parameter: str) -> pd.DataFrame:
    """Average MSE per noise level and dependence knob (``beta`` or ``alpha``)."""
    return (
        replicates.groupby(['estimator', 'sigma_xi', parameter], sort=False)['avg_mse']
        .mean()
        .reset_index()
    )


def time_resolution(replicates: pd.DataFrame) -> pd.DataFrame:
    return replicates.groupby(['estimator', 'T'], sort=False)['avg_mse'].mean().reset_index()


def build_figure_frames(
    scenario: str,
    mse_frame: pd.DataFrame,
    replicates: pd.DataFrame,
    slopes: Optional[Mapping[str, Tuple[float, float]]] = None,
) -> Dict[str, pd.DataFrame]:
    frames = {f'{FIGURE_PREFIX}mse_curves': mse_curves(mse_frame)}
    if scenario == 'rho_tau_sweep':
        frames[f'{FIGURE_PREFIX}ratio_sweep'] = ratio_sweep(replicates, slopes or {})
    elif scenario == 'noise_dependence':
        frames[f'{FIGURE_PREFIX}dependence'] = dependence_sweep(replicates, 'beta')
    elif scenario == 'design_dependence':
        frames[f'{FIGURE_PREFIX}dependence'] = dependence_sweep(replicates, 'alpha')
    elif scenario == 'real_data':
        frames[f'{FIGURE_PREFIX}time_resolution'] = time_resolution(replicates)
    return frames


def load_figure_frames(directory: Union[str, Path]) -> Dict[str, pd.DataFrame]:
    """Every ``figure_*.csv`` of a run directory, keyed by chart name."""
    directory = Path(directory)
    return {
        path.stem[len(FIGURE_PREFIX):]: read_frame(path)
        for path in sorted(directory.glob(f'{FIGURE_PREFIX}*.csv'))
    }


def _plain(value: Any) -> Any:
    """Python scalars only; NaN and infinities become None."""
    if isinstance(value, (np.generic,)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def figure_payload(frames: Mapping[str, pd.DataFrame]) -> Dict[str, Dict[str, list]]:
    """Column arrays per chart, e.g. ``{'mse_curves': {'t': [...], 'mse': [...]}}``."""
    payload = {}
    for name, frame in frames.items():
        payload[name] = {column: [_plain(v) for v in frame[column].tolist()] for column in frame.columns}
        logger.debug("Figure %s: %d rows", name, len(frame))
    return payload


def frame_records(frame: pd.DataFrame) -> List[Dict[str, Any]]:
    """Rows as JSON-safe dicts."""
    return [{column: _plain(value) for column, value in row.items()} for row in frame.to_dict(orient='records')]
