import io
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

from rest_framework.parsers import JSONParser
from rest_framework.renderers import JSONRenderer


def render_json(data) -> bytes:
    """Render ``data`` the way every toolkit artifact is written: indented, newline-terminated."""
    return JSONRenderer().render(data, renderer_context={"indent": 2}) + b"\n"


def parse_json(raw: bytes):
    return JSONParser().parse(io.BytesIO(raw))


def read_json(path):
    return parse_json(Path(path).read_bytes())


@contextmanager
def atomic_path(path):
    """Yield a temporary sibling of ``path``; it replaces ``path`` only if the block succeeds."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    # the real suffixes stay visible to writers that infer compression from them
    fd, tmp = tempfile.mkstemp(
        dir=target.parent, prefix=f".{target.name}.", suffix="".join(target.suffixes)
    )
    os.close(fd)
    tmp_path = Path(tmp)
    try:
        yield tmp_path
        os.replace(tmp_path, target)
    finally:
        if tmp_path.exists():
            tmp_path.unlink()


def write_atomic(path, data):
    if isinstance(data, str):
        data = data.encode("utf-8")
    with atomic_path(path) as tmp:
        tmp.write_bytes(data)


def sidecar_path(path) -> Path:
    """``data.csv.gz`` -> ``data.csv.gz.meta.json``"""
    path = Path(path)
    return path.with_name(path.name + ".meta.json")
