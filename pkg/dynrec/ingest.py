"""
Rating-triplet ingestion.

Reads ``timestamp,row,col,value`` records (user, item, rating), applies
optional frequency filters, remaps ids to dense 0-based indices, splits the
records chronologically into T equal-count bins and draws a per-bin
train/test split.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from .designs import DesignBatch, DesignFamily, DesignKind, ObservationBatch, Panel
from .exceptions import EmptyBin, InvalidDims, ParseError

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ['timestamp', 'row', 'col', 'value']


@dataclass(frozen=True)
class IngestFilters:
    """Generic preprocessing filters; None disables a filter."""

    min_col_count: Optional[int] = None
    min_row_count: Optional[int] = None
    max_rows: Optional[int] = None


@dataclass
class IngestResult:
    train: Panel
    test: Panel
    row_ids: pd.Index
    col_ids: pd.Index

    def id_map(self) -> pd.DataFrame:
        """Original id -> dense index table for both axes."""
        return pd.concat([
            pd.DataFrame({'axis': 'row', 'original_id': self.row_ids.astype(str), 'index': np.arange(len(self.row_ids))}),
            pd.DataFrame({'axis': 'col', 'original_id': self.col_ids.astype(str), 'index': np.arange(len(self.col_ids))}),
        ], ignore_index=True)


def normalize_timestamp(raw: pd.Series) -> pd.Series:
    """Numeric timestamps pass through; anything else is parsed as a date."""
    numeric = pd.to_numeric(raw, errors='coerce')
    if numeric.notna().all():
        return numeric
    parsed = pd.to_datetime(raw, errors='coerce', utc=True)
    bad = parsed.isna()
    if bad.any():
        first = int(np.flatnonzero(bad.to_numpy())[0])
        raise ParseError(f"unparseable timestamp {raw.iloc[first]!r}", line=first + 2)
    return parsed


def read_rating_frame(path: Union[str, Path]) -> pd.DataFrame:
    raw = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    original = {str(c).strip().lower(): c for c in raw.columns}
    raw.columns = [str(c).strip().lower() for c in raw.columns]
    missing = [c for c in REQUIRED_COLUMNS if c not in raw.columns]
    if missing:
        raise ParseError(f"missing columns {missing}", line=1)
    frame = pd.DataFrame({
        'timestamp': normalize_timestamp(raw['timestamp'].str.strip()),
        'row': raw['row'].str.strip(),
        'col': raw['col'].str.strip(),
    })
    values = pd.to_numeric(raw['value'], errors='coerce')
    bad = values.isna() | (frame['row'] == '') | (frame['col'] == '')
    if bad.any():
        first = int(np.flatnonzero(bad.to_numpy())[0])
        raise ParseError(f"invalid record {raw.iloc[first].to_dict()}", line=first + 2)
    exact = pd.read_csv(path, usecols=[original['value']], float_precision='round_trip',
                        dtype={original['value']: np.float64}, skipinitialspace=True)
    frame['value'] = exact[original['value']].to_numpy()
    return frame


def apply_filters(frame: pd.DataFrame, filters: IngestFilters, rng: np.random.Generator) -> pd.DataFrame:
    if filters.min_col_count is not None:
        counts = frame['col'].map(frame['col'].value_counts())
        frame = frame[counts >= filters.min_col_count]
    if filters.min_row_count is not None:
        counts = frame['row'].map(frame['row'].value_counts())
        frame = frame[counts >= filters.min_row_count]
    if filters.max_rows is not None:
        rows = np.sort(frame['row'].unique())
        if len(rows) > filters.max_rows:
            chosen = rng.choice(rows, size=filters.max_rows, replace=False)
            frame = frame[frame['row'].isin(chosen)]
    logger.info("%d records left after filtering", len(frame))
    return frame


def ingest_triplets(
    csv_path: Union[str, Path],
    T: int,
    split: float = 0.8,
    seed: int = 0,
    filters: IngestFilters = IngestFilters(),
) -> IngestResult:
    if T < 1:
        raise InvalidDims(f"T must be positive, got {T}")
    if not 0.0 < split <= 1.0:
        raise InvalidDims(f"train fraction must lie in (0, 1], got {split}")
    rng = np.random.default_rng(seed)
    frame = apply_filters(read_rating_frame(csv_path), filters, rng)
    if len(frame) < T:
        raise EmptyBin(f"{len(frame)} usable records cannot fill T={T} bins")

    frame = frame.sort_values('timestamp', kind='stable').reset_index(drop=True)
    row_idx, row_ids = pd.factorize(frame['row'], sort=True)
    col_idx, col_ids = pd.factorize(frame['col'], sort=True)
    family = DesignFamily(DesignKind.COMPLETION, (len(row_ids), len(col_ids)))
    values = frame['value'].to_numpy()

    train, test = [], []
    # array_split gives the earliest bins the extra records.
    for t, positions in enumerate(np.array_split(np.arange(len(frame)), T)):
        order = rng.permutation(positions.size)
        n_train = int(math.ceil(split * positions.size))
        for target, chosen in ((train, order[:n_train]), (test, order[n_train:])):
            picked = np.sort(positions[chosen])
            designs = DesignBatch(family.kind, family.dims, rows=row_idx[picked].astype(np.int64),
                                  cols=col_idx[picked].astype(np.int64))
            target.append(ObservationBatch(designs, values[picked]))
        logger.debug("Bin %d: %d train / %d test", t, n_train, positions.size - n_train)

    logger.info("Ingested %d records into T=%d bins over a %dx%d matrix", len(frame), T, *family.dims)
    return IngestResult(Panel(family, tuple(train)), Panel(family, tuple(test)), pd.Index(row_ids), pd.Index(col_ids))
