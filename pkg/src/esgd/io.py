"""File formats: svmlight-style datasets and 8-bit grayscale PGM images."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .problems import ImageGrid


def load_sparse_dataset(path, sparse: bool = False):
    """Read ``label idx:val idx:val ...`` lines with 1-based feature indices.

    Returns ``(design, labels)`` with labels in ``{-1, +1}``. Two arbitrary
    class values are mapped by sorted order: the smaller becomes -1. Blank
    lines and ``#`` comments are skipped. With ``sparse=True`` the design is
    a ``scipy.sparse.csr_matrix``.
    """
    rows, cols, vals, raw_labels = [], [], [], []
    n_features = 0
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].replace("−", "-").strip()
        if not line:
            continue
        tokens = line.split()
        try:
            raw_labels.append(float(tokens[0]))
            for tok in tokens[1:]:
                key, val = tok.split(":", 1)
                if key == "qid":
                    continue
                idx = int(key)
                if idx < 1:
                    raise ValueError(f"feature index must be >= 1, got {idx}")
                rows.append(len(raw_labels) - 1)
                cols.append(idx - 1)
                vals.append(float(val))
                n_features = max(n_features, idx)
        except ValueError as exc:
            raise InvalidInputError(f"{path}:{lineno}: cannot parse line: {exc}") from None
    if not raw_labels:
        raise InvalidInputError(f"{path}: no samples found")
    classes = sorted(set(raw_labels))
    if len(classes) > 2:
        raise InvalidInputError(f"{path}: expected two classes, found {len(classes)}")
    if set(classes) <= {-1.0, 1.0}:
        labels = np.asarray(raw_labels)
    else:
        # by sorted order; a lone class maps to +1
        mapping = {classes[-1]: 1.0}
        if len(classes) == 2:
            mapping[classes[0]] = -1.0
        labels = np.array([mapping[c] for c in raw_labels])
    shape = (len(raw_labels), n_features)
    if sparse:
        from scipy.sparse import csr_matrix

        return csr_matrix((vals, (rows, cols)), shape=shape), labels
    design = np.zeros(shape)
    np.add.at(design, (rows, cols), vals)
    return design, labels


def _pgm_tokens(data: bytes):
    """Yield header tokens and the offset just past the last one consumed."""
    pos = 0
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            start = pos
            while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
                pos += 1
            yield data[start:pos], pos


def read_pgm(path) -> ImageGrid:
    """Read a P2 (ASCII) or P5 (binary) grayscale PGM, scaled to [0, 1]."""
    data = Path(path).read_bytes()
    tokens = _pgm_tokens(data)
    try:
        magic, _ = next(tokens)
        width = int(next(tokens)[0])
        height = int(next(tokens)[0])
        maxval_tok, end = next(tokens)
        maxval = int(maxval_tok)
    except (StopIteration, ValueError):
        raise InvalidInputError(f"{path}: malformed PGM header") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise InvalidInputError(f"{path}: bad PGM dimensions or maxval")
    count = width * height
    if magic == b"P5":
        dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
        raw = np.frombuffer(data, dtype=dtype, count=count, offset=end + 1)
    elif magic == b"P2":
        try:
            raw = np.array([int(next(tokens)[0]) for _ in range(count)])
        except (StopIteration, ValueError):
            raise InvalidInputError(f"{path}: truncated or malformed P2 pixel data") from None
    else:
        raise InvalidInputError(f"{path}: unsupported PGM magic {magic!r}")
    pixels = raw.astype(float) / maxval
    if pixels.max() > 1.0:
        raise InvalidInputError(f"{path}: pixel value exceeds maxval")
    return ImageGrid(width=width, height=height, pixels=pixels)


def write_pgm(path, image: ImageGrid, maxval: int = 255) -> None:
    """Write an ASCII (P2) PGM; intensities are clipped to [0, 1] first."""
    px = np.clip(np.asarray(image.pixels, dtype=float), 0.0, 1.0)
    levels = np.rint(px * maxval).astype(int).reshape(image.height, image.width)
    with open(path, "w") as fh:
        fh.write(f"P2\n{image.width} {image.height}\n{maxval}\n")
        for row in levels:
            fh.write(" ".join(map(str, row)) + "\n")
