import json

import numpy as np
import pytest

from pydbicc import formats
from pydbicc.errors import InvalidDistanceMatrixError, ParseError
from pydbicc.grouped import PayloadKind


def write(path, text):
    path.write_text(text, encoding = 'utf-8')
    return str(path)


def test_detect_format(tmp_path):
    assert formats.detect_format(write(tmp_path / 'v.csv', 'individual,replicate,f1\na,1,0\n')) == formats.VECTORS
    assert formats.detect_format(write(tmp_path / 'm.csv', 'individual,replicate,path\n')) == formats.TIMESERIES
    assert formats.detect_format(write(tmp_path / 'd.csv', '0,1\n1,0\n')) == formats.DISTANCES
    with pytest.raises(ParseError):
        formats.detect_format(write(tmp_path / 'empty.csv', ''))


def test_read_vector_csv(tmp_path):
    path = write(tmp_path / 'v.csv', 'individual,replicate,f1,f2\nb,2,1,2\nb,1,3,4\na,1,5,6\na,2,7,8\n')
    sample = formats.read_vector_csv(path)
    assert sample.ids == ['b', 'a']
    assert sample.payloads()[0].tolist() == [3.0, 4.0]


def test_vector_parse_errors_name_line_and_column(tmp_path):
    path = write(tmp_path / 'v.csv', 'individual,replicate,f1,f2\na,1,0,1\na,2,x,1\n')
    with pytest.raises(ParseError) as info:
        formats.read_vector_csv(path)
    assert (info.value.line, info.value.column) == (3, 3)
    assert ':3:3:' in str(info.value)

    path = write(tmp_path / 'short.csv', 'individual,replicate,f1,f2\na,1,0\n')
    with pytest.raises(ParseError) as info:
        formats.read_vector_csv(path)
    assert info.value.line == 2

    with pytest.raises(ParseError):
        formats.read_vector_csv(write(tmp_path / 'nan.csv', 'individual,replicate,f1\na,1,nan\n'))


def test_read_numeric_csv_reports_bad_cell(tmp_path):
    with pytest.raises(ParseError) as info:
        formats.read_numeric_csv(write(tmp_path / 'x.csv', '1,2\n3,oops\n'))
    assert (info.value.line, info.value.column) == (2, 2)
    values = formats.read_numeric_csv(write(tmp_path / 'y.csv', '1,2\n3,4\n'))
    assert values.tolist() == [[1.0, 2.0], [3.0, 4.0]]


def test_read_manifest_resolves_relative_paths(tmp_path):
    scans = tmp_path / 'scans'
    scans.mkdir()
    rows = []
    for individual in ('a', 'b'):
        for replicate in (1, 2):
            name = '%s%d.csv' % (individual, replicate)
            formats.write_matrix_csv(str(scans / name), np.arange(12.0).reshape(4, 3) * replicate)
            rows.append((individual, replicate, 'scans/' + name))
    manifest = str(tmp_path / 'manifest.csv')
    formats.write_manifest(manifest, rows)
    sample = formats.read_manifest(manifest)
    assert sample.payload_kind is PayloadKind.TIMESERIES
    assert sample.payloads()[1].tolist() == (np.arange(12.0).reshape(4, 3) * 2).tolist()

    formats.write_manifest(manifest, rows + [('c', 1, 'scans/missing.csv')])
    with pytest.raises(ParseError) as info:
        formats.read_manifest(manifest)
    assert info.value.line == 6


def test_read_distance_input(tmp_path):
    matrix = np.array([[0, 2, 0, 2], [2, 0, 2, 0], [0, 2, 0, 2], [2, 0, 2, 0]], dtype = float)
    formats.write_matrix_csv(str(tmp_path / 'distances.csv'), matrix)
    write(tmp_path / 'groups.csv', 'row,individual,replicate\n0,a,1\n1,a,2\n2,b,2\n3,b,1\n')
    D, individuals = formats.read_distance_input(str(tmp_path / 'distances.csv'))
    assert individuals == ['a', 'b']
    assert D.groups == [(0, 0), (0, 1), (1, 1), (1, 0)]

    write(tmp_path / 'groups.csv', 'row,individual,replicate\n0,a,1\n1,a,2\n2,b,1\n')
    with pytest.raises(ParseError):
        formats.read_distance_input(str(tmp_path / 'distances.csv'))

    matrix[0, 1] = 3.0
    formats.write_matrix_csv(str(tmp_path / 'bad.csv'), matrix)
    write(tmp_path / 'groups.csv', 'row,individual,replicate\n0,a,1\n1,a,2\n2,b,1\n3,b,2\n')
    with pytest.raises(InvalidDistanceMatrixError):
        formats.read_distance_input(str(tmp_path / 'bad.csv'))


def test_missing_groups_file(tmp_path):
    formats.write_matrix_csv(str(tmp_path / 'distances.csv'), np.zeros((2, 2)))
    with pytest.raises(ParseError):
        formats.read_distance_input(str(tmp_path / 'distances.csv'))


def test_matrix_csv_round_trips_exactly(tmp_path):
    values = np.random.default_rng(1).standard_normal((3, 4))
    formats.write_matrix_csv(str(tmp_path / 'm.csv'), values)
    assert np.array_equal(formats.read_numeric_csv(str(tmp_path / 'm.csv')), values)


def test_dumps_json():
    text = formats.dumps_json({'a': 0.1, 'b': 1.0, 'c': float('nan'), 'd': [1, np.float64(2.5)],
                               'e': None, 'f': True, 'g': 'l2', 'h': np.arange(2)})
    assert '"a": 0.10000000000000001' in text
    assert '"b": 1.0' in text
    document = json.loads(text)
    assert document['a'] == 0.1
    assert document['c'] is None
    assert document['d'] == [1, 2.5]
    assert document['f'] is True
    assert document['h'] == [0, 1]
    third = 1.0 / 3.0
    assert json.loads(formats.dumps_json([third]))[0] == third


def test_invalid_utf8_is_a_parse_error(tmp_path):
    path = tmp_path / 'latin.csv'
    path.write_bytes(b'individual,replicate,f1\na,1,0\n\xff\xfe,2,1\n')
    with pytest.raises(ParseError) as info:
        formats.read_vector_csv(str(path))
    assert (info.value.line, info.value.column) == (3, 1)
    with pytest.raises(ParseError):
        formats.detect_format(str(path))
    with pytest.raises(ParseError):
        formats.read_numeric_csv(str(path))


def test_repeated_replicate_is_a_parse_error(tmp_path):
    path = write(tmp_path / 'v.csv', 'individual,replicate,f1\na,1,0\na,2,1\nb,1,0\na,2,3\n')
    with pytest.raises(ParseError) as info:
        formats.read_vector_csv(path)
    assert info.value.line == 5
    assert 'line 3' in str(info.value)

    formats.write_matrix_csv(str(tmp_path / 'distances.csv'), np.ones((3, 3)) - np.eye(3))
    write(tmp_path / 'groups.csv', 'row,individual,replicate\n0,a,1\n1,a,1\n2,b,1\n')
    with pytest.raises(ParseError) as info:
        formats.read_distance_input(str(tmp_path / 'distances.csv'))
    assert info.value.line == 3


def test_non_square_distance_matrix_is_a_parse_error(tmp_path):
    formats.write_matrix_csv(str(tmp_path / 'distances.csv'), np.zeros((2, 3)))
    write(tmp_path / 'groups.csv', 'row,individual,replicate\n0,a,1\n1,b,1\n')
    with pytest.raises(ParseError):
        formats.read_distance_input(str(tmp_path / 'distances.csv'))


def test_read_roi_file(tmp_path):
    assert formats.read_roi_file(write(tmp_path / 'dmn.txt', '3,1\n\n7\n')) == [3, 1, 7]
    with pytest.raises(ParseError) as info:
        formats.read_roi_file(write(tmp_path / 'bad.txt', '3\n1,x\n'))
    assert (info.value.line, info.value.column) == (2, 2)
    with pytest.raises(ParseError):
        formats.read_roi_file(write(tmp_path / 'empty.txt', '\n'))
