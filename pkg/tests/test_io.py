import numpy as np
import pytest

from esgd.errors import InvalidInputError
from esgd.io import load_sparse_dataset, read_pgm, write_pgm
from esgd.problems import ImageGrid


def write(tmp_path, text, name="d.svm"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_svmlight_example_with_unicode_minus(tmp_path):
    design, labels = load_sparse_dataset(write(tmp_path, "+1 1:2.0 3:1.0\n−1 2:5.0\n"))
    np.testing.assert_array_equal(design, [[2, 0, 1], [0, 5, 0]])
    np.testing.assert_array_equal(labels, [1, -1])


def test_svmlight_sparse_and_comments(tmp_path):
    design, labels = load_sparse_dataset(
        write(tmp_path, "# header\n-1 2:1.5  # trailing\n\n1 1:1 qid:3\n"), sparse=True)
    assert design.shape == (2, 2)
    np.testing.assert_array_equal(design.toarray(), [[0, 1.5], [1, 0]])
    np.testing.assert_array_equal(labels, [-1, 1])


def test_svmlight_empty(tmp_path):
    with pytest.raises(InvalidInputError):
        load_sparse_dataset(write(tmp_path, ""))


def test_svmlight_remap_by_sorted_order(tmp_path):
    _, labels = load_sparse_dataset(write(tmp_path, "4 1:1\n2 1:2\n4 2:1\n"))
    np.testing.assert_array_equal(labels, [1, -1, 1])


def test_svmlight_three_classes(tmp_path):
    with pytest.raises(InvalidInputError, match="two classes"):
        load_sparse_dataset(write(tmp_path, "1 1:1\n2 1:1\n3 1:1\n"))


def test_svmlight_parse_error_line_number(tmp_path):
    with pytest.raises(InvalidInputError, match=":2:"):
        load_sparse_dataset(write(tmp_path, "1 1:1\n-1 x:1\n"))
    with pytest.raises(InvalidInputError, match=":1:"):
        load_sparse_dataset(write(tmp_path, "1 0:1\n"))


def test_pgm_p2_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    img = ImageGrid(5, 3, rng.integers(0, 256, 15) / 255)
    write_pgm(tmp_path / "a.pgm", img)
    back = read_pgm(tmp_path / "a.pgm")
    assert (back.width, back.height) == (5, 3)
    np.testing.assert_allclose(back.pixels, img.pixels, atol=1e-12)
    text = (tmp_path / "a.pgm").read_text().split()
    assert text[:4] == ["P2", "5", "3", "255"]


def test_pgm_p5_and_comments(tmp_path):
    data = bytes([0, 128, 255, 64, 32, 16])
    (tmp_path / "b.pgm").write_bytes(b"P5\n# made by hand\n3 2\n255\n" + data)
    img = read_pgm(tmp_path / "b.pgm")
    np.testing.assert_allclose(img.as_array(), np.array(list(data)).reshape(2, 3) / 255)


def test_pgm_bad_inputs(tmp_path):
    (tmp_path / "c.pgm").write_text("P3\n1 1\n255\n0 0 0\n")
    with pytest.raises(InvalidInputError):
        read_pgm(tmp_path / "c.pgm")
    (tmp_path / "d.pgm").write_text("P2\n2 2\n255\n1 2 3\n")
    with pytest.raises(InvalidInputError):
        read_pgm(tmp_path / "d.pgm")
    (tmp_path / "e.pgm").write_text("P2\n1 1\n10\n11\n")
    with pytest.raises(InvalidInputError):
        read_pgm(tmp_path / "e.pgm")
