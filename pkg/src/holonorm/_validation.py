"""Input coercion shared by the estimators and the command line."""
from __future__ import annotations

import json
import os

import numpy as np

from .chain import ContractionChain
from .dynamics.maps import ProjectiveEndomorphism, normalize_point
from .exceptions import ValidationError
from .spectrum import LyapunovSpectrum


def load_json(source):
    """A dict from a dict, a JSON string or a path to a JSON file."""
    if isinstance(source, dict):
        return source
    if isinstance(source, (str, os.PathLike)):
        text = str(source)
        if os.path.exists(text):
            with open(text) as fh:
                text = fh.read()
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"not valid JSON: {exc}") from exc
    raise ValidationError(f"cannot read a JSON document from {type(source).__name__}")


def check_chain(X) -> ContractionChain:
    if isinstance(X, ContractionChain):
        return X
    try:
        return ContractionChain.from_dict(load_json(X))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed chain: {exc}") from exc


def check_spectrum(X) -> LyapunovSpectrum:
    if isinstance(X, LyapunovSpectrum):
        return X
    d = load_json(X)
    if "spectrum" in d:
        d = d["spectrum"]
    try:
        return LyapunovSpectrum.from_dict(d)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed spectrum: {exc}") from exc


def check_endomorphism(X) -> ProjectiveEndomorphism:
    if isinstance(X, ProjectiveEndomorphism):
        f = X
    else:
        f = ProjectiveEndomorphism.from_dict(load_json(X))
    if f.k not in (1, 2):
        raise ValidationError(f"only k = 1, 2 are supported, got k = {f.k}")
    f.check_nondegenerate()
    return f


def parse_point(value, k):
    """Homogeneous point from ``[[re, im], ...]`` (``k + 1`` entries) or complex numbers."""
    try:
        arr = np.array([complex(*c) if isinstance(c, (list, tuple)) else complex(c) for c in value])
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"malformed point {value!r}") from exc
    if arr.shape != (k + 1,) or not np.all(np.isfinite(arr)) or not np.any(arr):
        raise ValidationError(f"a point of P^{k} needs {k + 1} finite, not all zero coordinates")
    return normalize_point(arr)


def check_points(X, k):
    """Complex array of shape ``(n, k)``."""
    X = np.asarray(X, dtype=complex)
    if X.ndim == 1 and k == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[1] != k:
        raise ValidationError(f"expected points of shape (n, {k}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("points must be finite")
    return X


def check_positive(name, value, allow_none=True):
    if value is None and allow_none:
        return None
    if not np.isfinite(value) or value <= 0:
        raise ValidationError(f"{name} must be positive, got {value!r}")
    return float(value)
