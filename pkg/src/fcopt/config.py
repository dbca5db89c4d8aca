"""Flat key=value configuration files shared by the command line tools.

A configuration file is a plain text file with one ``key = value`` entry
per line.  Blank lines are skipped and ``#`` starts a comment that runs
to the end of the line.  Values are coerced in a fixed order: integers,
floats, booleans, comma-separated tuples of the former, and finally raw
strings.  Command-line flags override file entries which override the
experiment defaults.
"""

import os

__all__ = ["parse_config_text", "load_config", "coerce_value", "merge_params"]


def coerce_value(text):
    """Coerce a raw config string to int, float, bool, tuple, or str.

    Parameters
    ----------
    text : str
        Raw value text, already stripped of comments and whitespace.

    Returns
    -------
    object
        ``int`` if the text parses as one, else ``float``, else ``True``
        / ``False`` for the literals ``true`` / ``false`` (any case),
        else a tuple of coerced scalars when the text contains commas,
        else the stripped string itself.
    """
    text = str(text).strip()
    if "," in text:
        parts = [p.strip() for p in text.split(",")]
        if any(not p for p in parts):
            raise ValueError("empty entry in list value %r" % text)
        return tuple(coerce_value(p) for p in parts)
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if text.lower() == "true":
        return True
    if text.lower() == "false":
        return False
    return text


def parse_config_text(text):
    """Parse ``key = value`` lines into a dict of coerced values.

    Parameters
    ----------
    text : str
        File contents.

    Returns
    -------
    dict
        Mapping key -> coerced value, in file order.  Later duplicate
        keys overwrite earlier ones.

    Raises
    ------
    ValueError
        If a non-blank, non-comment line has no ``=`` or an empty key.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(
                "config line %d: expected key=value, got %r" % (lineno, raw.strip()))
        key, _, val = line.partition("=")
        key = key.strip()
        if not key:
            raise ValueError("config line %d: empty key" % lineno)
        out[key] = coerce_value(val)
    return out


def load_config(path):
    """Read and parse a flat key=value config file.

    Parameters
    ----------
    path : str
        Path to the file.

    Returns
    -------
    dict
        Parsed key -> value mapping.

    Raises
    ------
    ValueError
        If the file does not exist or a line is malformed.
    """
    if not os.path.isfile(path):
        raise ValueError("config file not found: %s" % path)
    with open(path, "r") as fh:
        return parse_config_text(fh.read())


def merge_params(defaults, *layers):
    """Layer override dicts on top of defaults, rejecting unknown keys.

    Parameters
    ----------
    defaults : dict
        Known keys with their default values.
    *layers : dict
        Override mappings applied in order; ``None`` layers are skipped.

    Returns
    -------
    dict
        A fresh dict with the same keys as ``defaults``.

    Raises
    ------
    ValueError
        If any layer contains a key absent from ``defaults``.
    """
    merged = dict(defaults)
    for layer in layers:
        if not layer:
            continue
        for key, val in layer.items():
            if key not in defaults:
                raise ValueError(
                    "unknown parameter %r (known: %s)"
                    % (key, ", ".join(sorted(defaults))))
            merged[key] = val
    return merged
