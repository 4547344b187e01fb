"""Small file-output helpers."""

import os
import tempfile


def atomic_write_text(path: str, text: str):
    """Write via a sibling temp file and rename, so readers never see a
    partial file and failed writes leave nothing behind."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
