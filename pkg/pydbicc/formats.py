"""Input and output file formats of the dbicc command line.

Three inputs are understood, told apart by their first line:
 vectors:     header 'individual,replicate,f1,...,fp', one observation per row
 timeseries:  header 'individual,replicate,path'; each path a headerless
              m x p CSV (rows are time points), relative to the manifest
 distances:   a headerless n x n matrix CSV plus a groups CSV with header
              'row,individual,replicate' (row is 0-based)

An optional ROI file lists 0-based region indices, comma- or newline-separated,
to restrict scans or matrices to one network.

Results are written as JSON with floats at 17 significant digits, so they
round-trip exactly, and as plain CSV for plotting."""

import codecs
import csv
import io
import json
import logging
import math
import os

import numpy as np

from .errors import ParseError
from .grouped import PayloadKind, DistanceMatrix, build_grouped_sample

__all__ = [
    'VECTORS',
    'TIMESERIES',
    'DISTANCES',
    'FORMATS',
    'detect_format',
    'read_numeric_csv',
    'read_vector_csv',
    'read_manifest',
    'read_distance_input',
    'read_roi_file',
    'write_matrix_csv',
    'write_manifest',
    'write_rows_csv',
    'dumps_json',
]

logger = logging.getLogger(__name__)

VECTORS = 'vectors'
TIMESERIES = 'timeseries'
DISTANCES = 'distances'
FORMATS = (VECTORS, TIMESERIES, DISTANCES)

MANIFEST_HEADER = ['individual', 'replicate', 'path']
GROUPS_HEADER = ['row', 'individual', 'replicate']


def _read_text(path):
    """The decoded text of path; undecodable bytes are a ParseError at their line and column"""
    with open(path, 'rb') as f:
        data = f.read()
    if data.startswith(codecs.BOM_UTF8):
        data = data[len(codecs.BOM_UTF8):]
    try:
        return data.decode('utf-8')
    except UnicodeDecodeError as e:
        line_start = data.rfind(b'\n', 0, e.start) + 1
        raise ParseError(path, data.count(b'\n', 0, e.start) + 1,
                         len(data[line_start:e.start].decode('utf-8', 'replace')) + 1,
                         'invalid UTF-8 byte 0x%02x' % data[e.start])


def _csv_rows(path):
    return csv.reader(io.StringIO(_read_text(path), newline = ''))


def _header(path):
    for row in _csv_rows(path):
        return [cell.strip().lower() for cell in row]
    raise ParseError(path, None, None, 'file is empty')


def detect_format(path):
    """Guesses the input format of a file from its header line"""
    header = _header(path)
    if header[:3] == MANIFEST_HEADER and len(header) == 3:
        return TIMESERIES
    if header[:2] == ['individual', 'replicate']:
        return VECTORS
    return DISTANCES


def _to_float(text, path, line, column):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(path, line, column, 'not a number: %r' % text)
    if not math.isfinite(value):
        raise ParseError(path, line, column, 'non-finite value: %r' % text)
    return value


def _scan_numeric(path, skip = 0):
    """Slow path of read_numeric_csv: parses cell by cell to locate the error"""
    rows = []
    width = None
    for line, row in enumerate(_csv_rows(path), 1):
        if line <= skip or not row or all(not cell.strip() for cell in row):
            continue
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(path, line, min(len(row), width) + 1,
                             'expected %d columns, found %d' % (width, len(row)))
        rows.append([_to_float(cell, path, line, column) for column, cell in enumerate(row, 1)])
    if not rows:
        raise ParseError(path, None, None, 'no numeric rows')
    return np.array(rows)


def read_numeric_csv(path, skip = 0):
    """Reads a headerless numeric CSV into a 2-d array.

    numpy's reader handles the common case; on failure the file is rescanned
    so the error can name the exact line and column."""
    try:
        values = np.loadtxt(path, delimiter = ',', skiprows = skip, ndmin = 2, encoding = 'utf-8-sig')
    except (ValueError, IndexError):
        values = _scan_numeric(path, skip)
    if values.size == 0:
        raise ParseError(path, None, None, 'no numeric rows')
    if not np.all(np.isfinite(values)):
        return _scan_numeric(path, skip)
    return values


def _data_rows(path, width):
    """(line, row) for every non-blank row after the header, each exactly width cells wide"""
    for line, row in enumerate(_csv_rows(path), 1):
        if line == 1 or not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != width:
            raise ParseError(path, line, min(len(row), width) + 1,
                             'expected %d columns, found %d' % (width, len(row)))
        yield line, row


def _check_key(seen, path, line, individual, replicate):
    key = (individual, replicate)
    if key in seen:
        raise ParseError(path, line, 2, 'individual %r has replicate %r twice (first on line %d)'
                         % (individual, replicate, seen[key]))
    seen[key] = line


def read_vector_csv(path):
    """Reads a vector CSV into a GroupedSample of vectors"""
    header = _header(path)
    if header[:2] != ['individual', 'replicate'] or len(header) < 3:
        raise ParseError(path, 1, 1, "header must be 'individual,replicate,f1,...,fp'")
    records = []
    seen = {}
    for line, row in _data_rows(path, len(header)):
        individual, replicate = row[0].strip(), row[1].strip()
        _check_key(seen, path, line, individual, replicate)
        features = [_to_float(cell, path, line, column) for column, cell in enumerate(row[2:], 3)]
        records.append((individual, replicate, features))
    if not records:
        raise ParseError(path, None, None, 'no observations')
    return build_grouped_sample(records, PayloadKind.VECTOR)


def read_manifest(path, payload_kind = PayloadKind.TIMESERIES):
    """Reads a manifest of per-scan CSV files into a GroupedSample.

    payload_kind says whether each file holds a scan (time series) or an
    already-computed p x p matrix."""
    base = os.path.dirname(os.path.abspath(path))
    if _header(path) != MANIFEST_HEADER:
        raise ParseError(path, 1, 1, "header must be 'individual,replicate,path'")
    records = []
    seen = {}
    for line, row in _data_rows(path, 3):
        individual, replicate = row[0].strip(), row[1].strip()
        _check_key(seen, path, line, individual, replicate)
        scan = os.path.join(base, row[2].strip())
        if not os.path.exists(scan):
            raise ParseError(path, line, 3, 'no such file: %s' % scan)
        records.append((individual, replicate, read_numeric_csv(scan)))
    if not records:
        raise ParseError(path, None, None, 'manifest lists no scans')
    logger.debug('read %d scans from %s', len(records), path)
    return build_grouped_sample(records, payload_kind)


def read_distance_input(matrix_path, groups_path = None):
    """Reads a distance matrix and its row grouping.

    The groups file defaults to groups.csv beside the matrix. Individual and
    replicate labels are mapped to indices in order of first appearance and
    of sorted replicate label respectively."""
    if groups_path is None:
        groups_path = os.path.join(os.path.dirname(os.path.abspath(matrix_path)), 'groups.csv')
    if not os.path.exists(groups_path):
        raise ParseError(groups_path, None, None, 'groups file not found')
    values = read_numeric_csv(matrix_path)
    if values.shape[0] != values.shape[1]:
        raise ParseError(matrix_path, None, None, 'distance matrix must be square, got %d x %d' % values.shape)

    if _header(groups_path) != GROUPS_HEADER:
        raise ParseError(groups_path, 1, 1, "header must be 'row,individual,replicate'")
    labels = {}
    seen = {}
    for line, row in _data_rows(groups_path, 3):
        try:
            index = int(row[0])
        except ValueError:
            raise ParseError(groups_path, line, 1, 'row must be an integer: %r' % row[0])
        if not 0 <= index < values.shape[0]:
            raise ParseError(groups_path, line, 1, 'row %d outside the %d-row matrix' % (index, values.shape[0]))
        if index in labels:
            raise ParseError(groups_path, line, 1, 'row %d listed twice' % index)
        labels[index] = (row[1].strip(), row[2].strip())
        _check_key(seen, groups_path, line, *labels[index])
    if len(labels) != values.shape[0]:
        raise ParseError(groups_path, None, None, 'grouping covers %d of %d rows' % (len(labels), values.shape[0]))

    individuals = []
    for index in range(values.shape[0]):
        if labels[index][0] not in individuals:
            individuals.append(labels[index][0])
    replicates = {}
    for index in range(values.shape[0]):
        replicates.setdefault(labels[index][0], []).append(labels[index][1])
    groups = []
    for index in range(values.shape[0]):
        individual, replicate = labels[index]
        order = sorted(replicates[individual], key = _replicate_key(replicates[individual]))
        groups.append((individuals.index(individual), order.index(replicate)))
    return DistanceMatrix.from_square(values, groups), individuals


def read_roi_file(path):
    """Reads 0-based ROI indices, comma- or newline-separated, from a text file"""
    rois = []
    for line, row in enumerate(_csv_rows(path), 1):
        for column, cell in enumerate(row, 1):
            if not cell.strip():
                continue
            try:
                rois.append(int(cell))
            except ValueError:
                raise ParseError(path, line, column, 'ROI index must be an integer: %r' % cell)
    if not rois:
        raise ParseError(path, None, None, 'no ROI indices')
    return rois


def _replicate_key(labels):
    try:
        [float(label) for label in labels]
        return float
    except ValueError:
        return str


def write_matrix_csv(path, values):
    np.savetxt(path, np.atleast_2d(values), delimiter = ',', fmt = '%.17g')


def write_manifest(path, rows):
    """Writes a manifest of (individual, replicate, relative path) rows"""
    with open(path, 'w', newline = '', encoding = 'utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(MANIFEST_HEADER)
        for row in rows:
            writer.writerow(row)


def _cell(value):
    if isinstance(value, float):
        return format(value, '.17g')
    return value


def write_rows_csv(stream, header, rows):
    writer = csv.writer(stream, lineterminator = '\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(value) for value in row])


def _encode(value):
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return 'null'
        text = format(value, '.17g')
        if text.lstrip('-').isdigit():
            text += '.0'
        return text
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        return '{' + ', '.join('%s: %s' % (json.dumps(str(k)), _encode(v)) for k, v in value.items()) + '}'
    if isinstance(value, (list, tuple, np.ndarray)):
        return '[' + ', '.join(_encode(v) for v in value) + ']'
    raise TypeError('cannot encode %r as JSON' % (value,))


def dumps_json(document):
    """JSON text with every float at 17 significant digits; NaN and inf become null"""
    return _encode(document) + '\n'
