"""Image ingestion, label-map serialization, and corpus manifests.

Images come in as PNG or binary PPM/PGM and leave as 3 x H x W float64
tensors in [0, 1] (plain /255, no mean subtraction — the network's first
normalization layer absorbs affine shifts). Label maps are interchanged
as 16-bit big-endian PGM so they stay inspectable with standard tools
and bit-exact, and rendered for humans as PNG through a fixed 256-color
palette.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


class ImageFormatError(ValueError):
    """Unreadable or unsupported image data."""


def load_image(path) -> np.ndarray:
    """Decode a PNG or binary PPM/PGM file to a 3 x H x W tensor in [0, 1].

    8-bit channels are divided by 255; grayscale is replicated to three
    channels.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if data.startswith(_PNG_MAGIC):
        arr = _decode_png(data, path)
    elif data[:2] in (b"P6", b"P5"):
        arr = _decode_pnm_image(data, path)
    else:
        raise ImageFormatError(f"{path}: unknown image format (expected PNG or binary PPM/PGM)")
    if arr.ndim == 2:
        arr = np.repeat(arr[None, :, :], 3, axis=0)
    if arr.shape[1] == 0 or arr.shape[2] == 0:
        raise ImageFormatError(f"{path}: zero-dimension image")
    return arr


def _decode_png(data, path):
    import io

    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            if im.mode == "L":
                return np.asarray(im, dtype=np.float64) / 255.0
            if im.mode in ("RGB", "P", "RGBA", "LA", "1"):
                rgb = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
                return rgb.transpose(2, 0, 1)
            raise ImageFormatError(f"{path}: unsupported PNG mode {im.mode!r} (8-bit only)")
    except ImageFormatError:
        raise
    except Exception as exc:
        raise ImageFormatError(f"{path}: broken PNG ({exc})") from exc


def _tokenize_pnm_header(data, n_tokens):
    """Read whitespace-separated header tokens, honoring # comments.

    Returns (tokens, offset_of_payload). The payload starts after the
    single whitespace byte that terminates the last token.
    """
    tokens = []
    i = 0
    while len(tokens) < n_tokens:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < len(data) and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise ImageFormatError("truncated PNM header")
        tokens.append(data[start:i])
    if i >= len(data) or not data[i : i + 1].isspace():
        raise ImageFormatError("PNM header not terminated by whitespace")
    return tokens, i + 1


def _parse_pnm(data, path):
    try:
        tokens, offset = _tokenize_pnm_header(data, 4)
    except ImageFormatError as exc:
        raise ImageFormatError(f"{path}: {exc}") from None
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ImageFormatError(f"{path}: non-numeric PNM header fields {tokens[1:]}") from None
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"{path}: zero-dimension image ({width}x{height})")
    if not 1 <= maxval <= 65535:
        raise ImageFormatError(f"{path}: PNM maxval {maxval} out of range")
    return magic, width, height, maxval, data[offset:]


def _decode_pnm_image(data, path):
    magic, width, height, maxval, payload = _parse_pnm(data, path)
    if maxval != 255:
        raise ImageFormatError(f"{path}: only 8-bit images supported, got maxval {maxval}")
    channels = 3 if magic == b"P6" else 1
    expected = width * height * channels
    if len(payload) < expected:
        raise ImageFormatError(f"{path}: truncated pixel data ({len(payload)} < {expected} bytes)")
    raw = np.frombuffer(payload[:expected], dtype=np.uint8).astype(np.float64) / 255.0
    if channels == 3:
        return raw.reshape(height, width, 3).transpose(2, 0, 1)
    return raw.reshape(height, width)


def save_image_ppm(image, path):
    """Write a 3 x H x W tensor in [0, 1] as binary PPM (maxval 255)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError(f"image must be 3 x H x W, got shape {image.shape}")
    data = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = image.shape[1], image.shape[2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.transpose(1, 2, 0).tobytes())


def save_image_png(image, path):
    """Write a 3 x H x W tensor in [0, 1] as 8-bit RGB PNG."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError(f"image must be 3 x H x W, got shape {image.shape}")
    data = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(data.transpose(1, 2, 0), mode="RGB").save(path, format="PNG")


def label_palette() -> np.ndarray:
    """Fixed 256-entry RGB palette with pairwise-distinct colors.

    Spreads the 8 bits of the index across the high bits of the three
    channels (the classic segmentation colormap construction), so any
    two distinct indices get distinct colors.
    """
    palette = np.zeros((256, 3), dtype=np.uint8)
    for i in range(256):
        r = g = b = 0
        c = i
        for shift in range(8):
            r |= ((c >> 0) & 1) << (7 - shift)
            g |= ((c >> 1) & 1) << (7 - shift)
            b |= ((c >> 2) & 1) << (7 - shift)
            c >>= 3
        palette[i] = (r, g, b)
    return palette


_PALETTE = label_palette()


def write_label_png(labels, path):
    """Render a label map to PNG through the fixed palette (label mod 256)."""
    labels = _check_labels(labels)
    rgb = _PALETTE[labels % 256]
    Image.fromarray(rgb, mode="RGB").save(path, format="PNG")


def _check_labels(labels):
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.size == 0:
        raise ValueError(f"labels must be a non-empty H x W array, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValueError(f"labels must be integers, got dtype {labels.dtype}")
    if labels.min() < 0:
        raise ValueError("labels must be non-negative")
    return labels


def write_label_raw(labels, path):
    """Write a label map as 16-bit big-endian binary PGM (maxval 65535)."""
    labels = _check_labels(labels)
    if labels.max() >= 65536:
        raise ValueError(f"label {labels.max()} does not fit in 16 bits")
    h, w = labels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(labels.astype(">u2").tobytes())


def read_label_raw(path) -> np.ndarray:
    """Exact inverse of :func:`write_label_raw`; also accepts 8-bit PGM."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic, width, height, maxval, payload = _parse_pnm(data, path)
    if magic != b"P5":
        raise ImageFormatError(f"{path}: raw label maps must be P5, got {magic!r}")
    dtype = ">u2" if maxval > 255 else np.uint8
    expected = width * height * np.dtype(dtype).itemsize
    if len(payload) < expected:
        raise ImageFormatError(f"{path}: truncated label data ({len(payload)} < {expected} bytes)")
    values = np.frombuffer(payload[:expected], dtype=dtype).astype(np.int64)
    if values.max(initial=0) > maxval:
        raise ImageFormatError(f"{path}: sample exceeds declared maxval {maxval}")
    return values.reshape(height, width)


@dataclass
class ManifestEntry:
    image_path: str
    gt_paths: list


def read_manifest(path) -> list:
    """Parse a corpus manifest: ``image_path<TAB>gt_path[,gt_path...]``.

    Relative paths resolve against the manifest's directory. Blank lines
    and ``#`` comments are skipped; the ground-truth column is optional.
    """
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            image = parts[0].strip()
            if not image:
                raise ValueError(f"{path}:{lineno}: empty image path")
            gts = []
            if len(parts) > 1 and parts[1].strip():
                gts = [p.strip() for p in parts[1].split(",") if p.strip()]
            entries.append(ManifestEntry(
                image_path=_resolve(base, image),
                gt_paths=[_resolve(base, g) for g in gts],
            ))
    return entries


def _resolve(base, p):
    return p if os.path.isabs(p) else os.path.join(base, p)
