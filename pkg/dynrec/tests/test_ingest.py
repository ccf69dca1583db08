"""
Tests for rating-triplet ingestion.
"""
import math

import numpy as np
import pandas as pd
import pytest

from dynrec.exceptions import EmptyBin, InvalidDims, ParseError
from dynrec.ingest import IngestFilters, ingest_triplets, read_rating_frame


def _write_ratings(path, rows):
    pd.DataFrame(rows, columns=['timestamp', 'row', 'col', 'value']).to_csv(path, index=False)
    return path


def _ratings(count, seed=0):
    rng = np.random.default_rng(seed)
    return [
        (1000 + 7 * i, f'u{rng.integers(0, 6)}', f'i{rng.integers(0, 4)}', float(rng.integers(1, 6)))
        for i in range(count)
    ]


def _records(panel):
    out = []
    for batch in panel.batches:
        out.extend(zip(batch.designs.rows.tolist(), batch.designs.cols.tolist(), batch.y.tolist()))
    return out


def test_single_bin_holds_everything(tmp_path):
    """Test T=1 puts every record into one bin."""
    path = _write_ratings(tmp_path / 'r.csv', _ratings(25))
    result = ingest_triplets(path, T=1, split=0.8)
    assert result.train.T == result.test.T == 1
    assert result.train.batch_sizes == [20]
    assert result.test.batch_sizes == [5]


def test_ten_rows_two_bins(tmp_path):
    """Test ten records and T=2 give two bins of five, four train and one test each."""
    path = _write_ratings(tmp_path / 'r.csv', _ratings(10))
    result = ingest_triplets(path, T=2, split=0.8)
    assert result.train.batch_sizes == [4, 4]
    assert result.test.batch_sizes == [1, 1]


@pytest.mark.parametrize('count,T', [(23, 4), (37, 5), (50, 7)])
def test_train_counts_are_ceiling_of_split(tmp_path, count, T):
    """Test every bin trains on ceil(0.8 b) of its b records."""
    path = _write_ratings(tmp_path / 'r.csv', _ratings(count))
    result = ingest_triplets(path, T=T, split=0.8, seed=3)
    bins = [len(part) for part in np.array_split(np.arange(count), T)]
    assert result.train.batch_sizes == [math.ceil(0.8 * b) for b in bins]
    assert [a + b for a, b in zip(result.train.batch_sizes, result.test.batch_sizes)] == bins


def test_full_split_keeps_every_record(tmp_path):
    """Test split=1.0 keeps the exact multiset of triplets in training."""
    rows = _ratings(30, seed=4)
    path = _write_ratings(tmp_path / 'r.csv', rows)
    result = ingest_triplets(path, T=3, split=1.0)
    assert result.test.batch_sizes == [0, 0, 0]
    id_map = result.id_map()
    row_of = dict(zip(id_map[id_map.axis == 'row'].original_id, id_map[id_map.axis == 'row']['index']))
    col_of = dict(zip(id_map[id_map.axis == 'col'].original_id, id_map[id_map.axis == 'col']['index']))
    expected = sorted((row_of[r], col_of[c], v) for _, r, c, v in rows)
    assert sorted(_records(result.train)) == expected


def test_bins_follow_time_order(tmp_path):
    """Test earlier timestamps land in earlier bins whatever the file order."""
    rows = [(ts, 'a', 'x', float(ts)) for ts in (50, 10, 40, 20, 30, 60)]
    result = ingest_triplets(_write_ratings(tmp_path / 'r.csv', rows), T=3, split=1.0)
    assert [sorted(b.y.tolist()) for b in result.train.batches] == [[10.0, 20.0], [30.0, 40.0], [50.0, 60.0]]


def test_date_timestamps_and_dense_ids(tmp_path):
    """Test ISO dates sort chronologically and ids map to dense sorted indices."""
    rows = [
        ('2021-03-01', 'bob', 'film', 4.0),
        ('2021-01-01', 'alice', 'book', 5.0),
        ('2021-02-01', 'alice', 'film', 3.0),
    ]
    result = ingest_triplets(_write_ratings(tmp_path / 'r.csv', rows), T=3, split=1.0)
    assert result.train.dims == (2, 2)
    assert list(result.row_ids) == ['alice', 'bob']
    assert list(result.col_ids) == ['book', 'film']
    assert [b.y.tolist() for b in result.train.batches] == [[5.0], [3.0], [4.0]]


def test_values_are_read_exactly(tmp_path):
    """Test rating values keep every bit of their decimal text."""
    path = tmp_path / 'r.csv'
    path.write_text('timestamp,row,col,value\n1,a,b,0.1\n2,a,c,3.0000000000000004\n')
    result = ingest_triplets(path, T=1, split=1.0)
    assert sorted(result.train.batches[0].y.tolist()) == [0.1, 3.0000000000000004]


def test_headers_are_case_insensitive(tmp_path):
    """Test header names are matched after trimming and lower-casing."""
    path = tmp_path / 'r.csv'
    path.write_text('Timestamp, Row ,COL,Value\n1,a,b,2\n')
    frame = read_rating_frame(path)
    assert frame['value'].tolist() == [2.0]


def test_parse_errors_report_line(tmp_path):
    """Test malformed values and missing columns carry their line number."""
    path = tmp_path / 'bad.csv'
    path.write_text('timestamp,row,col,value\n1,a,b,2\n2,a,b,oops\n')
    with pytest.raises(ParseError) as excinfo:
        ingest_triplets(path, T=1)
    assert excinfo.value.line == 3

    path.write_text('timestamp,row,value\n1,a,2\n')
    with pytest.raises(ParseError) as excinfo:
        ingest_triplets(path, T=1)
    assert excinfo.value.line == 1

    path.write_text('timestamp,row,col,value\nyesterday-ish,a,b,2\n')
    with pytest.raises(ParseError) as excinfo:
        ingest_triplets(path, T=1)
    assert excinfo.value.line == 2


def test_too_few_records_for_bins(tmp_path):
    """Test fewer records than bins raises EmptyBin."""
    path = _write_ratings(tmp_path / 'r.csv', _ratings(3))
    with pytest.raises(EmptyBin):
        ingest_triplets(path, T=4)


def test_argument_validation(tmp_path):
    """Test T and the train fraction are checked before reading."""
    path = tmp_path / 'unused.csv'
    with pytest.raises(InvalidDims):
        ingest_triplets(path, T=0)
    with pytest.raises(InvalidDims):
        ingest_triplets(path, T=2, split=0.0)
    with pytest.raises(InvalidDims):
        ingest_triplets(path, T=2, split=1.5)


def test_frequency_filters(tmp_path):
    """Test rare columns and light rows are dropped before binning."""
    rows = [(i, 'heavy', f'c{i % 3}', 1.0) for i in range(9)]
    rows += [(100, 'light', 'c0', 2.0), (101, 'heavy', 'rare', 3.0)]
    path = _write_ratings(tmp_path / 'r.csv', rows)
    result = ingest_triplets(path, T=1, split=1.0, filters=IngestFilters(min_col_count=2, min_row_count=2))
    assert list(result.col_ids) == ['c0', 'c1', 'c2']
    assert list(result.row_ids) == ['heavy']
    assert result.train.batch_sizes == [9]


def test_max_rows_subsamples_users(tmp_path):
    """Test max_rows keeps a seeded subset of row ids."""
    rows = [(i, f'u{i % 10}', 'x', 1.0) for i in range(40)]
    path = _write_ratings(tmp_path / 'r.csv', rows)
    first = ingest_triplets(path, T=2, split=1.0, seed=5, filters=IngestFilters(max_rows=4))
    second = ingest_triplets(path, T=2, split=1.0, seed=5, filters=IngestFilters(max_rows=4))
    assert len(first.row_ids) == 4
    assert list(first.row_ids) == list(second.row_ids)
    assert sum(first.train.batch_sizes) == 16
