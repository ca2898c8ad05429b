import numpy as np
import pytest

from pgbaseline._validation import (check_gamma, check_positive_int, check_probability_vector,
                                    check_random_state, check_step_size, check_vector,
                                    replica_rng)
from pgbaseline.csvio import SchemaError, format_value, read_table, render_table, write_table


@pytest.mark.parametrize("gamma", [0, 0.0, 0.5, np.float32(0.9), 1 - 1e-12])
def test_valid_discount_factors(gamma):
    assert check_gamma(gamma) == float(gamma)


@pytest.mark.parametrize("gamma", [1.0, -0.1, np.nan, "0.5", None])
def test_invalid_discount_factors(gamma):
    with pytest.raises(ValueError):
        check_gamma(gamma)


def test_step_size():
    assert check_step_size(0.1) == 0.1
    assert check_step_size(0, allow_zero=True) == 0.0
    for bad in (0, -1.0, np.inf):
        with pytest.raises(ValueError):
            check_step_size(bad)


def test_vectors_and_probabilities():
    np.testing.assert_array_equal(check_vector([1, 2], "x", dim=2), [1.0, 2.0])
    with pytest.raises(ValueError, match="dimension"):
        check_vector([1, 2], "x", dim=3)
    with pytest.raises(ValueError, match="1-dimensional"):
        check_vector([[1]], "x")
    check_probability_vector([0.25, 0.75])
    with pytest.raises(ValueError, match="sums"):
        check_probability_vector([0.5, 0.6])


def test_positive_ints():
    assert check_positive_int(np.int64(3), "n") == 3
    assert check_positive_int(0, "n", minimum=0) == 0
    for bad in (True, 2.0, 0):
        with pytest.raises(ValueError):
            check_positive_int(bad, "n")


def test_random_state_and_replica_streams():
    g = np.random.default_rng(0)
    assert check_random_state(g) is g
    assert check_random_state(5).random() == np.random.default_rng(5).random()
    with pytest.raises(ValueError):
        check_random_state("seed")
    assert replica_rng(3, 1).random() == replica_rng(3, 1).random()
    assert replica_rng(3, 1).random() != replica_rng(3, 2).random()


def test_csv_formatting_round_trips_floats(tmp_path):
    assert format_value(True) == "1" and format_value(0.1) == "0.10000000000000001"
    assert float(format_value(1 / 3)) == 1 / 3
    text = render_table("note", ["a", "b"], [[1, 0.5]])
    assert text == "# note\na,b\n1,0.5\n"
    path = tmp_path / "t.csv"
    write_table(path, "note", ["a", "b"], [["x", 2.0]])
    assert read_table(path) == ("note", ["a", "b"], [["x", "2"]])


def test_malformed_table(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError):
        read_table(path)
