"""
Reading and writing panels.

A panel directory holds a ``panel.json`` sidecar describing the family and
listing the payload files:

* completion  - ``triplets.csv`` with header ``t,row,col,value``
* convolution - ``centers.csv`` with the same header (row/col are centers)
* sensing     - per time index a stacked DMR1 file of designs and a
  one-column CSV of responses
"""
import json
import logging
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd

from .designs import DesignBatch, DesignFamily, DesignKind, ObservationBatch, Panel
from .exceptions import DimMismatch, ParseError, UnsupportedFamily
from .matrix_io import read_stacked_dmr1, write_stacked_dmr1

logger = logging.getLogger(__name__)

TRIPLET_COLUMNS = ['t', 'row', 'col', 'value']
SIDECAR = 'panel.json'

PathLike = Union[str, Path]


def panel_to_frame(panel: Panel) -> pd.DataFrame:
    if panel.family.kind is DesignKind.SENSING:
        raise UnsupportedFamily("dense designs cannot be written as triplets")
    parts = []
    for t, batch in enumerate(panel.batches):
        parts.append(pd.DataFrame({
            't': np.full(len(batch), t, dtype=np.int64),
            'row': batch.designs.rows,
            'col': batch.designs.cols,
            'value': batch.y,
        }))
    if not parts:
        return pd.DataFrame(columns=TRIPLET_COLUMNS)
    return pd.concat(parts, ignore_index=True)[TRIPLET_COLUMNS]


def frame_to_panel(frame: pd.DataFrame, family: DesignFamily, T: Optional[int] = None) -> Panel:
    missing = [c for c in TRIPLET_COLUMNS if c not in frame.columns]
    if missing:
        raise ParseError(f"missing columns {missing}", line=1)
    if T is None:
        T = int(frame['t'].max()) + 1 if len(frame) else 0
    if len(frame) and (frame['t'].min() < 0 or frame['t'].max() >= T):
        raise DimMismatch(f"time index outside 0..{T - 1}")
    groups = {int(t): g for t, g in frame.groupby('t', sort=True)}
    batches = []
    for t in range(T):
        group = groups.get(t)
        if group is None:
            batches.append(ObservationBatch(DesignBatch.empty(family.kind, family.dims), np.zeros(0)))
            continue
        designs = DesignBatch(
            family.kind, family.dims,
            rows=group['row'].to_numpy(dtype=np.int64),
            cols=group['col'].to_numpy(dtype=np.int64),
        )
        batches.append(ObservationBatch(designs, group['value'].to_numpy(dtype=np.float64)))
    return Panel(family, tuple(batches))


def read_triplet_frame(path: PathLike) -> pd.DataFrame:
    """Parse a ``t,row,col,value`` CSV, reporting the first bad line."""
    raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [c for c in TRIPLET_COLUMNS if c not in raw.columns]
    if missing:
        raise ParseError(f"missing columns {missing}", line=1)
    frame = pd.DataFrame(index=raw.index)
    for column in TRIPLET_COLUMNS:
        values = pd.to_numeric(raw[column], errors='coerce')
        bad = values.isna()
        if column != 'value':
            bad |= values.notna() & (values != values.round())
        if bad.any():
            first = int(np.flatnonzero(bad.to_numpy())[0])
            raise ParseError(f"invalid {column} value {raw[column].iloc[first]!r}", line=first + 2)
        frame[column] = values
    for column in ('t', 'row', 'col'):
        frame[column] = frame[column].astype(np.int64)
    exact = pd.read_csv(path, usecols=['value'], float_precision='round_trip', dtype={'value': np.float64})
    frame['value'] = exact['value'].to_numpy()
    return frame


def write_triplets(panel: Panel, path: PathLike) -> Path:
    path = Path(path)
    panel_to_frame(panel).to_csv(path, index=False)
    logger.info("Wrote %d observations over T=%d to %s", sum(panel.batch_sizes), panel.T, path)
    return path


def read_triplets(path: PathLike, dims: Tuple[int, int], T: Optional[int] = None,
                  kind: DesignKind = DesignKind.COMPLETION) -> Panel:
    return frame_to_panel(read_triplet_frame(path), DesignFamily(kind, tuple(dims)), T)


def write_panel(panel: Panel, directory: PathLike) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    family = panel.family
    sidecar = {
        'kind': family.kind.value,
        'dims': list(family.dims),
        'T': panel.T,
        'sigma_x': family.sigma_x,
    }
    if family.kind is DesignKind.SENSING:
        files = []
        for t, batch in enumerate(panel.batches):
            designs_name = f'designs_t{t:04d}.dmr1'
            responses_name = f'responses_t{t:04d}.csv'
            write_stacked_dmr1(directory / designs_name, batch.designs.xs)
            pd.DataFrame({'value': batch.y}).to_csv(directory / responses_name, index=False)
            files.append({'t': t, 'designs': designs_name, 'responses': responses_name})
        sidecar['batches'] = files
    else:
        name = 'triplets.csv' if family.kind is DesignKind.COMPLETION else 'centers.csv'
        write_triplets(panel, directory / name)
        sidecar['triplets'] = name
    (directory / SIDECAR).write_text(json.dumps(sidecar, indent=2))
    return directory


def read_panel(directory: PathLike) -> Panel:
    directory = Path(directory)
    try:
        sidecar = json.loads((directory / SIDECAR).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read {directory / SIDECAR}: {exc}") from exc
    family = DesignFamily(DesignKind(sidecar['kind']), tuple(sidecar['dims']), float(sidecar.get('sigma_x', 1.0)))
    T = int(sidecar['T'])
    if family.kind is not DesignKind.SENSING:
        return frame_to_panel(read_triplet_frame(directory / sidecar['triplets']), family, T)
    batches = []
    for entry in sorted(sidecar['batches'], key=lambda e: e['t']):
        xs = read_stacked_dmr1(directory / entry['designs'], family.dims[0])
        y = pd.read_csv(directory / entry['responses'], float_precision='round_trip')['value'].to_numpy()
        batches.append(ObservationBatch(DesignBatch(family.kind, family.dims, xs=xs), y))
    if len(batches) != T:
        raise ParseError(f"manifest lists {len(batches)} batches, expected T={T}")
    return Panel(family, tuple(batches))
