import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nsqstab.blocks import BlockStructure, Detuning, GainMatrix, PlantMatrix
from nsqstab.errors import MatrixFileError
from nsqstab.formats import format_matrix_file, parse_matrix_file, parse_matrix_text
from nsqstab.report import dumps, matrix_hash, plain

WORKED = """\
# 2 groups, 3 inputs
2 3
2 1
1 2 3
4 5 6
"""


def test_minimal():
    mf = parse_matrix_text("1 1\n1\n2.5\n")
    assert mf.A.structure.p == (1,)
    assert mf.A.data.tolist() == [[2.5]]
    assert mf.K is None and mf.E is None


def test_worked_file(tmp_path):
    path = tmp_path / "w.txt"
    path.write_text(WORKED + "K\n1 2\n3\nE\n0 1\n0.5\n")
    mf = parse_matrix_file(path)
    assert mf.A.structure.p == (2, 1)
    np.testing.assert_array_equal(mf.A.data, [[1, 2, 3], [4, 5, 6]])
    assert mf.K.values.tolist() == [1, 2, 3]
    assert mf.E.values.tolist() == [0, 1, 0.5]


def test_comments_and_blank_lines():
    text = "\n# header follows\n2 2  # m n\n\n1 1\n1 0\n0 1 # last row\n"
    assert parse_matrix_text(text).A.data.tolist() == [[1, 0], [0, 1]]


@pytest.mark.parametrize("text,line,col,needle", [
    ("2 3\n1 1\n1 2 3\n4 5 6\n", 1, None, "sum to 2"),
    ("2 3\n2 1\n1 x 3\n4 5 6\n", 3, 3, "non-numeric"),
    ("2 3\n2 1\n1 2 3\n4 5\n", 4, 1, "needs 3"),
    ("2 3\n2 1\n1 2 3\n4 5 6\nK\n1 -2\n3\n", 6, 3, "nonnegative"),
    ("2 3\n2 1\n1 2 3\n4 5 6\nE\n1 1\n", 6, None, "end of file"),
    ("2 3\n2 1\n1 2 3\n4 5 6\nQ\n", 5, 1, "block marker"),
    ("2 3\n2 1\n1 2 nan\n4 5 6\n", 3, 5, "non-finite"),
    ("1 1 1\n", 1, 1, "header"),
    ("2 3\n2 0 1\n", 2, 1, "expected 2 group sizes"),
])
def test_diagnostics(text, line, col, needle):
    with pytest.raises(MatrixFileError) as exc:
        parse_matrix_text(text, "in.txt")
    err = exc.value
    assert err.line == line and err.column == col
    assert needle in str(err)
    assert str(err).startswith("in.txt:")


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(st.lists(st.integers(1, 3), min_size=1, max_size=3).flatmap(
    lambda p: st.tuples(st.just(tuple(p)),
                        arrays(np.float64, (len(p), sum(p)), elements=finite),
                        arrays(np.float64, sum(p), elements=st.floats(0, 1e300)))))
def test_round_trip_bit_exact(args):
    p, data, gains = args
    s = BlockStructure(p)
    A, K = PlantMatrix(s, data), GainMatrix(s, gains)
    back = parse_matrix_text(format_matrix_file(A, K, Detuning.ones(s)))
    assert back.A.data.tobytes() == A.data.tobytes()
    assert back.K.values.tobytes() == K.values.tobytes()
    assert format_matrix_file(back.A, back.K, back.E) == format_matrix_file(A, K, Detuning.ones(s))


class TestReport:
    def test_deterministic_floats(self):
        text = dumps({"b": 0.1, "a": [1, 2.0, math.inf, -math.inf, math.nan], "c": None})
        assert text == '{"b":0.10000000000000001,"a":[1,2.0,"Infinity","-Infinity","NaN"],"c":null}'
        assert json.loads(text)["b"] == 0.1

    def test_plain_numpy_and_tuple_keys(self):
        doc = plain({(0, 2): np.float64(1.5), "x": np.arange(2)})
        assert doc == {"0,2": 1.5, "x": [0, 1]}

    def test_unserializable(self):
        with pytest.raises(TypeError):
            dumps(object())

    def test_matrix_hash(self):
        data = np.array([[1.0, 2.0]])
        h = matrix_hash((2,), data)
        assert h == matrix_hash([2], data.copy())
        assert h != matrix_hash((1, 1), data)
        assert h != matrix_hash((2,), np.nextafter(data, 3))
