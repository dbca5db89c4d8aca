import pytest

from fcopt.config import parse_config_text, load_config, coerce_value, merge_params


def test_coerce_scalars():
    assert coerce_value("42") == 42
    assert isinstance(coerce_value("42"), int)
    assert coerce_value("0.25") == 0.25
    assert coerce_value("1e-3") == 1e-3
    assert coerce_value("true") is True
    assert coerce_value("False") is False
    assert coerce_value("identity") == "identity"


def test_coerce_lists():
    assert coerce_value("8,16,32") == (8, 16, 32)
    assert coerce_value("0.1, 0.2") == (0.1, 0.2)
    assert coerce_value("a, b") == ("a", "b")
    with pytest.raises(ValueError, match="empty"):
        coerce_value("8,,16")


def test_parse_basic():
    text = """
    # comment line
    eps0 = 0.1
    steps = 14   # trailing comment
    levels = 8,16,32,64

    c2 = identity
    """
    out = parse_config_text(text)
    assert out == {"eps0": 0.1, "steps": 14, "levels": (8, 16, 32, 64),
                   "c2": "identity"}


def test_parse_duplicate_key_last_wins():
    out = parse_config_text("x = 1\nx = 2\n")
    assert out == {"x": 2}


def test_parse_errors():
    with pytest.raises(ValueError, match="key=value"):
        parse_config_text("just some words\n")
    with pytest.raises(ValueError, match="empty key"):
        parse_config_text("= 3\n")


def test_load_config_roundtrip(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("experiment = wave-obs\nT = 0.2\nmodes = 8,16,32\n")
    out = load_config(str(path))
    assert out == {"experiment": "wave-obs", "T": 0.2, "modes": (8, 16, 32)}


def test_load_config_missing_file():
    with pytest.raises(ValueError, match="not found"):
        load_config("/nonexistent/path.cfg")


def test_merge_params_layering():
    base = {"a": 1, "b": 2.0, "c": "x"}
    out = merge_params(base, {"a": 5}, None, {"c": "y"})
    assert out == {"a": 5, "b": 2.0, "c": "y"}
    assert base == {"a": 1, "b": 2.0, "c": "x"}


def test_merge_params_unknown_key():
    with pytest.raises(ValueError, match="unknown parameter"):
        merge_params({"a": 1}, {"zz": 3})
