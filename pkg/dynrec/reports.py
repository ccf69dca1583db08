"""
CSV and workbook output for experiment runs.
"""
import logging
from pathlib import Path
from typing import Dict, Mapping, Sequence, Union

import pandas as pd
from openpyxl.styles import Alignment, Font, PatternFill

from .solver import SolveTrace

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PARTIAL_SUFFIX = '.partial'
HEADER_FILL = PatternFill(start_color="366092", end_color="366092", fill_type="solid")
HEADER_FONT = Font(bold=True, size=11, color="FFFFFF")


def write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    """Write without index; floats keep their shortest round-trip repr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path


def read_frame(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, float_precision='round_trip')


def trace_frame(traces: Sequence[SolveTrace]) -> pd.DataFrame:
    """Long per-iteration objectives; iteration 0 is the starting point."""
    rows = [(t, i, value) for t, trace in enumerate(traces, start=1) for i, value in enumerate(trace.objective_path)]
    return pd.DataFrame(rows, columns=['t', 'iter', 'objective'])


def write_frames(frames: Mapping[str, pd.DataFrame], directory: PathLike, partial: bool = False) -> Dict[str, Path]:
    """Write ``name.csv`` per frame; with ``partial`` the files get a ``.partial`` suffix."""
    directory = Path(directory)
    suffix = PARTIAL_SUFFIX if partial else ''
    written = {}
    for name, frame in frames.items():
        written[name] = write_frame(frame, directory / f"{name}.csv{suffix}")
        logger.info("Wrote %s (%d rows)", written[name], len(frame))
    return written


def write_summary_workbook(frames: Mapping[str, pd.DataFrame], path: PathLike) -> Path:
    """One styled sheet per frame: coloured bold header, right-aligned data, fitted widths."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with pd.ExcelWriter(path, engine="openpyxl") as writer:
        for sheet_name, data in frames.items():
            sheet_df = data if not data.empty else pd.DataFrame({"Info": ["No data"]})
            sheet_df.to_excel(writer, sheet_name=sheet_name[:31], index=False)
            worksheet = writer.sheets[sheet_name[:31]]

            for cell in worksheet[1]:
                cell.fill = HEADER_FILL
                cell.font = HEADER_FONT
                cell.alignment = Alignment(horizontal="center", vertical="center")

            data_alignment = Alignment(horizontal="right", vertical="center")
            for row in worksheet.iter_rows(min_row=2, max_row=worksheet.max_row):
                for cell in row:
                    cell.alignment = data_alignment

            for column in worksheet.columns:
                width = max(len(str(cell.value)) for cell in column if cell.value is not None)
                worksheet.column_dimensions[column[0].column_letter].width = min(width + 2, 50)
    logger.info("Wrote workbook %s", path)
    return path
