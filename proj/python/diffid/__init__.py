"""Reference-assisted face-swap detection.

Thin wrappers over the compiled core that decode its JSON results into dicts.
"""
import json as _json

from . import _core
from ._core import (
    BackendError,
    DiffIdError,
    InvalidArgument,
    IoError,
    PreprocessError,
    ShapeError,
    angle,
    auc,
    calibrate,
    jpeg_degrade,
    read_image,
    write_png,
)

__all__ = [
    "BackendError", "DiffIdError", "InvalidArgument", "IoError", "PreprocessError", "ShapeError",
    "angle", "auc", "calibrate", "jpeg_degrade", "read_image", "write_png",
    "default_world_config", "metric", "make_corpus", "evaluate", "detect",
]


def _dump(obj):
    return "" if obj is None else _json.dumps(obj)


def default_world_config():
    return _json.loads(_core.default_world_config())


def metric(ref, test, eps=1e-8):
    """Score from two (l_recon, l_recon_id, l_id) triples."""
    return _json.loads(_core.metric(tuple(ref), tuple(test), eps))


def make_corpus(out_dir, world_config=None, spec=None):
    return _core.make_corpus(str(out_dir), _dump(world_config), _dump(spec))


def evaluate(manifest, config=None, generator=None):
    """Evaluate a manifest with the synthetic backend. `generator` overrides world keys."""
    return _json.loads(_core.evaluate(str(manifest), _dump(config), _dump(generator)))


def detect(ref, test, world_config=None, threshold=0.6, use_mask=True):
    return _json.loads(_core.detect(str(ref), str(test), _dump(world_config), threshold, use_mask))
