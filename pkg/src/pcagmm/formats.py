"""File formats: binary PGM for 2D images, a raw volume container for 3D,
and the mixture-model container.

Intensities are [0, 1] floats in memory. Integer image formats scale by
their maximum sample value; writes clip to [0, 1] before quantization.
"""

import struct

import numpy as np

from .errors import (
    CorruptHeader,
    InvalidShape,
    NotPositiveDefinite,
    UnsupportedFormat,
    VersionMismatch,
)
from .gmm import GmmParams
from .patches import PatchGeometry
from .pca_gmm import PcaGmmModel

MODEL_MAGIC = b"PGMM1\n"
VOLUME_MAGIC = b"VOL1"
_VOL_DTYPES = {0: "<f4", 1: "<f8", 2: "u1", 3: "<u2"}
_VOL_CODES = {np.dtype(v): k for k, v in _VOL_DTYPES.items()}


# ---------------------------------------------------------------- images


def _parse_pgm(raw):
    if raw[:2] != b"P5":
        raise UnsupportedFormat("not a binary PGM (P5) file")
    pos, fields = 2, []
    while len(fields) < 3:
        if pos >= len(raw):
            raise CorruptHeader("truncated PGM header")
        c = raw[pos : pos + 1]
        if c == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(raw) and not raw[pos : pos + 1].isspace():
                pos += 1
            fields.append(raw[start:pos])
    pos += 1  # single whitespace byte after maxval
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise CorruptHeader("non-numeric PGM header field") from exc
    if not 1 <= maxval <= 65535:
        raise CorruptHeader(f"PGM maxval {maxval} out of range")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height
    payload = raw[pos : pos + count * dtype.itemsize]
    if len(payload) != count * dtype.itemsize:
        raise CorruptHeader("truncated PGM payload")
    data = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return data.astype(float) / maxval


def _write_pgm(path, image, maxval):
    if image.ndim != 2:
        raise InvalidShape("PGM stores 2D images only")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    quantized = np.rint(np.clip(image, 0.0, 1.0) * maxval).astype(dtype)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n%d\n" % (image.shape[1], image.shape[0], maxval))
        fh.write(quantized.tobytes())


def _parse_volume(raw):
    if raw[:4] != VOLUME_MAGIC:
        raise UnsupportedFormat("not a VOL1 volume file")
    if len(raw) < 20:
        raise CorruptHeader("truncated VOL1 header")
    nx, ny, nz, code = struct.unpack("<4I", raw[4:20])
    if code not in _VOL_DTYPES:
        raise CorruptHeader(f"unknown VOL1 dtype code {code}")
    dtype = np.dtype(_VOL_DTYPES[code])
    count = nx * ny * nz
    payload = raw[20:]
    if len(payload) != count * dtype.itemsize:
        raise CorruptHeader("VOL1 payload length does not match the extents")
    data = np.frombuffer(payload, dtype=dtype).reshape(nz, ny, nx)
    if dtype.kind == "u":
        return data.astype(float) / np.iinfo(dtype).max
    return data.astype(float)


def _write_volume(path, volume, dtype):
    if volume.ndim != 3:
        raise InvalidShape("VOL1 stores 3D volumes only")
    dtype = np.dtype(dtype)
    if dtype not in _VOL_CODES:
        raise UnsupportedFormat(f"unsupported VOL1 dtype {dtype}")
    if dtype.kind == "u":
        data = np.rint(np.clip(volume, 0.0, 1.0) * np.iinfo(dtype).max).astype(dtype)
    else:
        data = volume.astype(dtype)
    nz, ny, nx = volume.shape
    with open(path, "wb") as fh:
        fh.write(VOLUME_MAGIC)
        fh.write(struct.pack("<4I", nx, ny, nz, _VOL_CODES[dtype]))
        fh.write(data.tobytes())


def read_image(path):
    """Load a .pgm image or .vol volume as a float array in [0, 1]."""
    path = str(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if path.endswith(".pgm"):
        return _parse_pgm(raw)
    if path.endswith(".vol"):
        return _parse_volume(raw)
    raise UnsupportedFormat(f"unknown image extension in {path!r}")


def write_image(path, image, maxval=255, vol_dtype="<f8"):
    """Write a 2D image to .pgm (clipped and quantized) or a 3D volume to
    .vol (float64 by default, hence lossless)."""
    path = str(path)
    image = np.asarray(image, dtype=float)
    if path.endswith(".pgm"):
        _write_pgm(path, image, maxval)
    elif path.endswith(".vol"):
        _write_volume(path, image, vol_dtype)
    else:
        raise UnsupportedFormat(f"unknown image extension in {path!r}")


# ---------------------------------------------------------------- models


def _format_float(x):
    return repr(float(x))


def save_model(path, model, geom=None):
    """Serialize a mixture model with its patch geometry.

    Little-endian float64 payload after a human-readable key=value header
    line; the round trip is bit exact.
    """
    if isinstance(model, PcaGmmModel):
        kind, n, d, sigma = "pcagmm", model.dim, model.reduced_dim, model.sigma
    elif isinstance(model, GmmParams):
        kind, n, d, sigma = "gmm", model.dim, model.dim, 0.0
    else:
        raise InvalidShape(f"unsupported model type {type(model).__name__}")
    K = model.n_components
    q, tau, dims = (geom.q, geom.tau, geom.dims) if geom is not None else (0, 0, 0)
    header = (
        f"kind={kind} K={K} n={n} d={d} sigma={_format_float(sigma)} "
        f"q={q} tau={tau} dims={dims}\n"
    )
    chunks = [np.ascontiguousarray(model.alpha, dtype="<f8")]
    for k in range(K):
        if kind == "pcagmm":
            chunks.append(np.ascontiguousarray(model.bases[k], dtype="<f8"))
            chunks.append(np.ascontiguousarray(model.offsets[k], dtype="<f8"))
        chunks.append(np.ascontiguousarray(model.means[k], dtype="<f8"))
        chunks.append(np.ascontiguousarray(model.covs[k], dtype="<f8"))
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(header.encode("ascii"))
        for chunk in chunks:
            fh.write(chunk.tobytes())


def load_model(path):
    """Deserialize (model, geometry); geometry is None when the file was
    saved without one."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:6] != MODEL_MAGIC:
        if raw[:4] == MODEL_MAGIC[:4]:
            raise VersionMismatch(f"unsupported model magic {raw[:6]!r}")
        raise CorruptHeader("not a mixture-model file")
    newline = raw.find(b"\n", 6)
    if newline < 0:
        raise CorruptHeader("missing model header line")
    try:
        fields = dict(
            item.split("=", 1) for item in raw[6:newline].decode("ascii").split()
        )
        kind = fields["kind"]
        K, n, d = int(fields["K"]), int(fields["n"]), int(fields["d"])
        sigma = float(fields["sigma"])
        q, tau, dims = int(fields["q"]), int(fields["tau"]), int(fields["dims"])
    except (KeyError, ValueError, UnicodeDecodeError) as exc:
        raise CorruptHeader("malformed model header line") from exc
    if kind not in ("gmm", "pcagmm"):
        raise CorruptHeader(f"unknown model kind {kind!r}")
    payload = np.frombuffer(raw[newline + 1 :], dtype="<f8")
    per_comp = (n * d + n + d + d * d) if kind == "pcagmm" else (n + n * n)
    if payload.size != K + K * per_comp:
        raise CorruptHeader("model payload length does not match the header")

    alpha = payload[:K].copy()
    pos = K
    geom = PatchGeometry(tau=tau, q=q, dims=dims) if q else None
    if kind == "gmm":
        means = np.empty((K, n))
        covs = np.empty((K, n, n))
        for k in range(K):
            means[k] = payload[pos : pos + n]
            pos += n
            covs[k] = payload[pos : pos + n * n].reshape(n, n)
            pos += n * n
        return _validated(GmmParams(alpha=alpha, means=means, covs=covs)), geom
    bases = np.empty((K, n, d))
    offsets = np.empty((K, n))
    means = np.empty((K, d))
    covs = np.empty((K, d, d))
    for k in range(K):
        bases[k] = payload[pos : pos + n * d].reshape(n, d)
        pos += n * d
        offsets[k] = payload[pos : pos + n]
        pos += n
        means[k] = payload[pos : pos + d]
        pos += d
        covs[k] = payload[pos : pos + d * d].reshape(d, d)
        pos += d * d
    model = PcaGmmModel(
        alpha=alpha, bases=bases, offsets=offsets, means=means, covs=covs, sigma=sigma
    )
    return _validated(model), geom


def _validated(model):
    try:
        model.validate()
    except (AssertionError, NotPositiveDefinite) as exc:
        raise CorruptHeader(f"model file fails parameter invariants: {exc}") from exc
    return model
