"""Channel encoding and the TOPO1 on-disk sample container.

TOPO1 byte layout (normative; all integers little-endian):

    magic          5 bytes   b"TOPO1"
    version        u16       currently 1
    nely           u16
    nelx           u16
    channel_count  u16
    channel_count times:
        name_len   u8
        name       ASCII bytes
        data       nely*nelx float32, row-major
    target         nely*nelx float32, row-major
    meta_len       u32
    meta           UTF-8 canonical JSON (sorted keys, no whitespace)
    crc32          u32       zlib CRC32 over every preceding byte

Channels are stored unnormalized; per-channel affine normalization statistics
are computed over the train split only and live in the dataset manifest.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .domain import DesignDomain, ProblemSpec, catalog_json
from .errors import (
    BadMagic,
    ChecksumMismatch,
    ShapeMismatch,
    TruncatedFile,
    UnknownCombo,
    VersionMismatch,
)
from .fem import FieldBundle

MAGIC = b"TOPO1"
FORMAT_VERSION = 1
GENERATOR_VERSION = "0.1.0"

#: Fixed storage order of the named channels.
CHANNEL_ORDER = (
    "vf", "bc_code", "load_x", "load_y",
    "ux", "uy", "s11", "s22", "s12", "e11", "e22", "e12", "svm", "w",
)

_X_CHANNELS = ("vf", "bc_code", "load_x", "load_y")

#: Field-selection combos (Table-style ids); 9 ("load path") is unsupported.
COMBO_CHANNELS: dict[int, tuple[str, ...]] = {
    0: _X_CHANNELS,
    1: _X_CHANNELS + ("ux", "uy"),
    2: _X_CHANNELS + ("w",),
    3: _X_CHANNELS + ("svm",),
    4: _X_CHANNELS + ("svm", "w"),
    5: _X_CHANNELS + ("s11", "s22", "s12"),
    6: _X_CHANNELS + ("e11", "e22", "e12"),
    7: _X_CHANNELS + ("s11", "s22", "s12", "e11", "e22", "e12"),
    8: _X_CHANNELS + ("ux", "uy", "svm", "w"),
}

MANIFEST_NAME = "manifest.json"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def catalog_hash(catalog) -> str:
    return hashlib.sha256(catalog_json(catalog).encode("ascii")).hexdigest()


@dataclass
class SampleRecord:
    """One encoded sample: named float32 channels, target density, metadata."""

    channels: dict[str, np.ndarray]
    target: np.ndarray
    meta: dict

    @property
    def sample_id(self) -> int:
        return int(self.meta["sample_id"])

    @property
    def shape(self) -> tuple[int, int]:
        return self.target.shape

    def spec(self) -> ProblemSpec:
        return ProblemSpec.from_dict(self.meta["spec"])

    def validate(self) -> None:
        shape = self.target.shape
        if set(self.channels) != set(CHANNEL_ORDER):
            raise ShapeMismatch("record does not carry the full channel set")
        for name in CHANNEL_ORDER:
            ch = self.channels[name]
            if ch.shape != shape:
                raise ShapeMismatch(f"channel {name} shape {ch.shape} != {shape}")
            if ch.dtype != np.float32:
                raise ShapeMismatch(f"channel {name} must be float32")
        vf = np.float32(self.meta["spec"]["vf_target"])
        if not np.all(self.channels["vf"] == vf):
            raise ValueError("vf channel must be constant and equal to the target VF")
        bc = self.channels["bc_code"]
        if not np.isin(bc, (0.0, 1.0, 2.0, 3.0)).all():
            raise ValueError("bc_code entries must be in {0,1,2,3}")
        if self.channels["svm"].min() < 0.0:
            raise ValueError("svm must be nonnegative")
        if self.channels["w"].min() < 0.0:
            raise ValueError("w must be nonnegative")
        if self.target.min() < 0.0 or self.target.max() > 1.0:
            raise ValueError("target densities must lie in [0, 1]")


def encode_sample(spec: ProblemSpec, fields: FieldBundle, target: np.ndarray,
                  domain: DesignDomain, sample_id: int,
                  split: str | None = None,
                  extra_meta: dict | None = None) -> SampleRecord:
    """Assemble the channel stack for one problem.

    Input channels x = (vf, bc_code, load_x, load_y) are rasterized from the
    spec; field channels pass through from the FEM bundle; everything is
    stored at float32, the container precision.
    """
    from .domain import rasterize_bc, rasterize_load

    field_mats = fields.as_dict()
    for name, mat in field_mats.items():
        if mat.shape != (domain.nely, domain.nelx):
            raise ShapeMismatch(f"field {name} shape {mat.shape} vs domain grid")
    if target.shape != (domain.nely, domain.nelx):
        raise ShapeMismatch(f"target shape {target.shape} vs domain grid")

    load_x, load_y = rasterize_load(spec, domain)
    channels = {
        "vf": np.full((domain.nely, domain.nelx), spec.vf_target),
        "bc_code": rasterize_bc(spec.scenario, domain).astype(np.float64),
        "load_x": load_x,
        "load_y": load_y,
    }
    channels.update(field_mats)
    channels = {k: np.ascontiguousarray(v, dtype=np.float32) for k, v in channels.items()}

    meta = {
        "sample_id": int(sample_id),
        "spec": spec.to_dict(),
        "scenario_id": spec.scenario.scenario_id,
        "split": split,
        "generator_version": GENERATOR_VERSION,
    }
    if extra_meta:
        meta.update(extra_meta)
    record = SampleRecord(
        channels=channels,
        target=np.ascontiguousarray(target, dtype=np.float32),
        meta=meta,
    )
    record.validate()
    return record


def select_field_combo(record: SampleRecord, combo: int) -> np.ndarray:
    """Stack the combo's channels as one (C, nely, nelx) float32 array."""
    if combo not in COMBO_CHANNELS:
        raise UnknownCombo(f"combo {combo} is not one of 0..8")
    names = COMBO_CHANNELS[combo]
    return np.stack([record.channels[n] for n in names])


def combo_channel_names(combo: int) -> tuple[str, ...]:
    if combo not in COMBO_CHANNELS:
        raise UnknownCombo(f"combo {combo} is not one of 0..8")
    return COMBO_CHANNELS[combo]


def record_to_bytes(record: SampleRecord) -> bytes:
    nely, nelx = record.target.shape
    out = bytearray()
    out += MAGIC
    out += struct.pack("<HHHH", FORMAT_VERSION, nely, nelx, len(record.channels))
    for name in CHANNEL_ORDER:
        encoded = name.encode("ascii")
        out += struct.pack("<B", len(encoded))
        out += encoded
        out += np.ascontiguousarray(record.channels[name], dtype="<f4").tobytes()
    out += np.ascontiguousarray(record.target, dtype="<f4").tobytes()
    meta = canonical_json(record.meta).encode("utf-8")
    out += struct.pack("<I", len(meta))
    out += meta
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    return bytes(out)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedFile(
                f"need {n} bytes at offset {self.pos}, file has {len(self.buf)}"
            )
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def record_from_bytes(buf: bytes) -> SampleRecord:
    rd = _Reader(buf)
    magic = rd.take(len(MAGIC))
    if magic != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, got {magic!r}")
    version, nely, nelx, n_channels = rd.unpack("<HHHH")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"container version {version}, reader supports {FORMAT_VERSION}")
    size = nely * nelx

    def matrix() -> np.ndarray:
        data = np.frombuffer(rd.take(4 * size), dtype="<f4")
        return data.reshape(nely, nelx).copy()

    channels: dict[str, np.ndarray] = {}
    for _ in range(n_channels):
        (name_len,) = rd.unpack("<B")
        name = rd.take(name_len).decode("ascii")
        channels[name] = matrix()
    target = matrix()
    (meta_len,) = rd.unpack("<I")
    meta = json.loads(rd.take(meta_len).decode("utf-8"))
    (stored_crc,) = rd.unpack("<I")
    actual_crc = zlib.crc32(buf[:rd.pos - 4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise ChecksumMismatch(f"crc {stored_crc:#010x} != computed {actual_crc:#010x}")
    return SampleRecord(channels=channels, target=target, meta=meta)


def write_sample(record: SampleRecord, path) -> str:
    with open(path, "wb") as fh:
        fh.write(record_to_bytes(record))
    return str(path)


def read_sample(path) -> SampleRecord:
    with open(path, "rb") as fh:
        return record_from_bytes(fh.read())


def records_equal(a: SampleRecord, b: SampleRecord) -> bool:
    """Bitwise equality of channels, target, and metadata."""
    if set(a.channels) != set(b.channels) or a.meta != b.meta:
        return False
    if a.target.tobytes() != b.target.tobytes():
        return False
    return all(a.channels[n].tobytes() == b.channels[n].tobytes() for n in a.channels)


def sample_filename(sample_id: int) -> str:
    return f"sample_{sample_id:05d}.topo1"


def write_manifest(manifest: dict, directory) -> str:
    """Write manifest.json atomically (tmp file + rename)."""
    path = os.path.join(str(directory), MANIFEST_NAME)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")
    os.replace(tmp, path)
    return path


def read_manifest(directory) -> dict:
    with open(os.path.join(str(directory), MANIFEST_NAME)) as fh:
        return json.load(fh)


def load_dataset(directory, split: str | None = None) -> dict[int, SampleRecord]:
    """Read every sample listed in the manifest (optionally one split only).

    Raises if a listed file is missing or corrupt; the manifest is the source
    of truth for membership and split labels, never the file listing.
    """
    manifest = read_manifest(directory)
    records: dict[int, SampleRecord] = {}
    for entry in manifest["samples"]:
        if split is not None and entry.get("split") != split:
            continue
        record = read_sample(os.path.join(str(directory), entry["file"]))
        if record.sample_id != entry["id"]:
            raise ValueError(
                f"file {entry['file']} carries id {record.sample_id}, manifest says {entry['id']}"
            )
        records[record.sample_id] = record
    return records


def compute_normalization(records) -> dict[str, dict[str, float]]:
    """Per-channel mean/std over the given (train) records, float64 accumulation."""
    stats: dict[str, dict[str, float]] = {}
    for name in CHANNEL_ORDER:
        data = np.concatenate([r.channels[name].ravel().astype(np.float64) for r in records])
        stats[name] = {"mean": float(data.mean()), "std": float(data.std())}
    return stats


def write_pgm(matrix: np.ndarray, path, lo: float | None = None,
              hi: float | None = None) -> str:
    """8-bit binary PGM export of one channel or density, min-max scaled."""
    m = np.asarray(matrix, dtype=np.float64)
    lo = float(m.min()) if lo is None else lo
    hi = float(m.max()) if hi is None else hi
    if hi <= lo:
        scaled = np.zeros_like(m)
    else:
        scaled = (m - lo) / (hi - lo)
    pixels = np.clip(np.rint(scaled * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{m.shape[1]} {m.shape[0]}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
    return str(path)
