"""On-disk formats and the experiment configuration schema.

Dataset files ("CSID")::

    magic  b"CSID"
    u32    version
    u8     kind          0 = CSI matrices, 1 = time-domain channels, 2 = statistical profiles
    u32 *  dims          kind 0: (N_t, N_sb); kind 1: (N_r, N_t, N_d); kind 2: (N_t, N_r, N_d)
    u64    count
    payload              count records of little-endian f64 (re, im) pairs, row-major
    sections*            b"TIDX" / b"PROV", each followed by a u64 byte length

A kind-2 record is the complex vector ``[ue_id, power (N_d), R_tx (N_d, N_t, N_t),
R_rx (N_d, N_r, N_r)]``; the imaginary part of each power entry is 1.0 for a
degenerate tap and 0.0 otherwise. ``TIDX`` is an integer boundary table (u32
column count, u64 row count, i64 entries); ``PROV`` is sorted-key JSON.

Checkpoints ("CSIM") hold a u32 version, a u32-length JSON header (model
config, array names and shapes, provenance) and the parameter arrays as
little-endian f64 in declaration order.
"""

from __future__ import annotations

import hashlib
import io as _io
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import __version__
from .augment import StatProfile
from .autoencoder import ModelConfig, ModelParams
from .core import ConfigError

DATASET_MAGIC = b"CSID"
CHECKPOINT_MAGIC = b"CSIM"
FORMAT_VERSION = 1
KIND_CSI, KIND_CHANNEL, KIND_PROFILE = 0, 1, 2
_N_DIMS = {KIND_CSI: 2, KIND_CHANNEL: 3, KIND_PROFILE: 3}


class FormatError(OSError):
    """A file is truncated, has the wrong magic, or disagrees with its header."""


# -- datasets ----------------------------------------------------------------


def record_size(kind: int, dims: tuple[int, ...]) -> int:
    """Complex entries per record."""
    if kind == KIND_PROFILE:
        n_t, n_r, n_d = dims
        return 1 + n_d + n_d * n_t * n_t + n_d * n_r * n_r
    return int(np.prod(dims))


@dataclass
class Dataset:
    kind: int
    dims: tuple[int, ...]
    records: np.ndarray  # (count, record_size) complex128; reshaped views below
    index: np.ndarray | None = None
    provenance: dict | None = None

    @property
    def count(self) -> int:
        return self.records.shape[0]

    def arrays(self) -> np.ndarray:
        """Records in their natural shape (kinds 0 and 1)."""
        if self.kind == KIND_PROFILE:
            raise ValueError("profile records have no array shape; use profiles()")
        return self.records.reshape(self.count, *self.dims)

    def profiles(self) -> list[StatProfile]:
        if self.kind != KIND_PROFILE:
            raise ValueError("not a profile dataset")
        return [_record_to_profile(r, self.dims) for r in self.records]


def _profile_to_record(p: StatProfile) -> np.ndarray:
    power = p.power + 1j * p.degenerate.astype(float)
    return np.concatenate([[complex(p.ue_id)], power, p.r_tx.ravel(), p.r_rx.ravel()])


def _record_to_profile(rec: np.ndarray, dims: tuple[int, ...]) -> StatProfile:
    n_t, n_r, n_d = dims
    k = 1 + n_d
    power = rec[1:k]
    r_tx = rec[k : k + n_d * n_t * n_t].reshape(n_d, n_t, n_t)
    r_rx = rec[k + n_d * n_t * n_t :].reshape(n_d, n_r, n_r)
    return StatProfile(
        power=power.real.copy(),
        r_tx=r_tx.copy(),
        r_rx=r_rx.copy(),
        ue_id=int(rec[0].real),
        degenerate=power.imag != 0.0,
    )


def profile_dims(profiles: list[StatProfile]) -> tuple[int, int, int]:
    if not profiles:
        raise ValueError("need at least one profile")
    dims = {(p.n_t, p.n_r, p.n_d) for p in profiles}
    if len(dims) != 1:
        raise ValueError("profiles disagree on dimensions")
    return dims.pop()


class DatasetWriter:
    """Streaming writer; the record count is patched into the header on close."""

    def __init__(self, path: str | Path, kind: int, dims: tuple[int, ...]):
        if kind not in _N_DIMS or len(dims) != _N_DIMS[kind]:
            raise ValueError(f"kind {kind} needs {_N_DIMS.get(kind)} dims, got {dims}")
        self.kind, self.dims = kind, tuple(int(d) for d in dims)
        self.rsize = record_size(kind, self.dims)
        self.count = 0
        self._f: BinaryIO = open(path, "wb")
        head = DATASET_MAGIC + struct.pack("<IB", FORMAT_VERSION, kind)
        head += struct.pack(f"<{len(dims)}I", *self.dims)
        self._f.write(head)
        self._count_at = self._f.tell()
        self._f.write(struct.pack("<Q", 0))

    def write(self, records) -> None:
        arr = np.asarray(records, dtype=np.complex128).reshape(-1, self.rsize)
        self._f.write(arr.astype("<c16", copy=False).tobytes())
        self.count += arr.shape[0]

    def close(self, index: np.ndarray | None = None, provenance: dict | None = None) -> None:
        f = self._f
        if index is not None:
            _write_section(f, b"TIDX", _pack_index(index))
        if provenance is not None:
            _write_section(f, b"PROV", _canonical_json(provenance).encode())
        f.seek(self._count_at)
        f.write(struct.pack("<Q", self.count))
        f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if not self._f.closed:
            self._f.close()


def _write_section(f: BinaryIO, tag: bytes, body: bytes) -> None:
    f.write(tag + struct.pack("<Q", len(body)) + body)


def _pack_index(index: np.ndarray) -> bytes:
    idx = np.asarray(index, dtype=np.int64)
    if idx.ndim != 2:
        raise ValueError("index table must be 2-D")
    return struct.pack("<IQ", idx.shape[1], idx.shape[0]) + idx.astype("<i8").tobytes()


def write_dataset(
    path: str | Path,
    kind: int,
    data,
    index: np.ndarray | None = None,
    provenance: dict | None = None,
) -> None:
    """Write a whole dataset: an array stack for kinds 0/1, a profile list for kind 2."""
    if kind == KIND_PROFILE:
        dims = profile_dims(list(data))
        records = np.stack([_profile_to_record(p) for p in data])
    else:
        arr = np.asarray(data, dtype=np.complex128)
        dims = arr.shape[1:]
        records = arr
    w = DatasetWriter(path, kind, dims)
    w.write(records)
    w.close(index, provenance)


def _read_exact(f: BinaryIO, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated file while reading {what}")
    return buf


def read_dataset(path: str | Path) -> Dataset:
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != DATASET_MAGIC:
            raise FormatError(f"{path}: not a CSID dataset")
        version, kind = struct.unpack("<IB", _read_exact(f, 5, "header"))
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        if kind not in _N_DIMS:
            raise FormatError(f"{path}: unknown record kind {kind}")
        nd = _N_DIMS[kind]
        dims = struct.unpack(f"<{nd}I", _read_exact(f, 4 * nd, "dims"))
        (count,) = struct.unpack("<Q", _read_exact(f, 8, "count"))
        rsize = record_size(kind, dims)
        payload = _read_exact(f, 16 * rsize * count, "payload")
        records = np.frombuffer(payload, dtype="<c16").astype(np.complex128).reshape(count, rsize)
        index = provenance = None
        while tag := f.read(4):
            if len(tag) != 4:
                raise FormatError(f"{path}: trailing garbage")
            (n,) = struct.unpack("<Q", _read_exact(f, 8, "section length"))
            body = _read_exact(f, n, tag.decode(errors="replace"))
            if tag == b"TIDX":
                cols, rows = struct.unpack("<IQ", body[:12])
                index = np.frombuffer(body[12:], dtype="<i8").astype(np.int64).reshape(rows, cols)
            elif tag == b"PROV":
                provenance = json.loads(body)
            else:
                raise FormatError(f"{path}: unknown section {tag!r}")
    return Dataset(kind, tuple(dims), records, index, provenance)


# -- checkpoints -------------------------------------------------------------


def write_checkpoint(path: str | Path, params: ModelParams, provenance: dict | None = None) -> None:
    cfg = params.config
    header = {
        "model": {
            "n_t": cfg.n_t,
            "n_sb": cfg.n_sb,
            "hidden": list(cfg.hidden),
            "bits": cfg.bits,
            "bits_per_dim": cfg.bits_per_dim,
            "activation": cfg.activation,
        },
        "arrays": [[k, list(v.shape)] for k, v in params.arrays.items()],
        "provenance": provenance or {},
    }
    head = _canonical_json(header).encode()
    buf = _io.BytesIO()
    buf.write(CHECKPOINT_MAGIC + struct.pack("<II", FORMAT_VERSION, len(head)) + head)
    for v in params.arrays.values():
        buf.write(np.asarray(v, dtype="<f8").tobytes())
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def read_checkpoint(path: str | Path) -> tuple[ModelParams, dict]:
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != CHECKPOINT_MAGIC:
            raise FormatError(f"{path}: not a CSIM checkpoint")
        version, n = struct.unpack("<II", _read_exact(f, 8, "header"))
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        header = json.loads(_read_exact(f, n, "header json"))
        m = header["model"]
        cfg = ModelConfig(m["n_t"], m["n_sb"], tuple(m["hidden"]), m["bits"], m["bits_per_dim"], m["activation"])
        arrays = {}
        for name, shape in header["arrays"]:
            size = int(np.prod(shape))
            raw = _read_exact(f, 8 * size, name)
            arrays[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
        if f.read(1):
            raise FormatError(f"{path}: trailing bytes after the last array")
    expected = [f"{p}.{s}" for p, _, _ in cfg.layer_sizes() for s in ("w", "b")]
    if sorted(expected) != sorted(arrays):
        raise FormatError(f"{path}: arrays do not match the model config")
    return ModelParams(cfg, arrays), header.get("provenance", {})


# -- CSV / JSON --------------------------------------------------------------


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_json(path: str | Path, obj) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True, indent=2, allow_nan=False)
        f.write("\n")


def write_csv(path: str | Path, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    """Plain CSV; floats in ``repr`` form so values round-trip exactly."""
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(repr(float(x)) if isinstance(x, float) else str(x) for x in row) + "\n")


# -- configuration -----------------------------------------------------------


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SystemSection(_Strict):
    n_sc: int = Field(624, gt=0)
    n_gran: int = Field(48, gt=0)
    n_sb: int | None = None
    n_h: int = Field(8, gt=0)
    n_v: int = Field(2, gt=0)
    polarization: Literal["single", "dual"] = "dual"
    n_r: int = Field(4, gt=0)

    @model_validator(mode="after")
    def _subbands(self):
        if self.n_sc % self.n_gran:
            raise ValueError(f"n_sc={self.n_sc} is not a multiple of n_gran={self.n_gran}")
        if self.n_sb is not None and self.n_sb != self.n_sc // self.n_gran:
            raise ValueError(f"n_sb={self.n_sb} disagrees with n_sc / n_gran = {self.n_sc // self.n_gran}")
        return self

    @property
    def subbands(self) -> int:
        return self.n_sc // self.n_gran

    @property
    def dual_pol(self) -> bool:
        return self.polarization == "dual"

    @property
    def n_t(self) -> int:
        return self.n_h * self.n_v * (2 if self.dual_pol else 1)


class MetaSection(_Strict):
    T: int = Field(8000, gt=0)
    epsilon: float = Field(0.25, ge=0.0, le=1.0)
    g: int = Field(32, gt=0)
    max_ue: int = Field(16, gt=0)
    max_slot: int = Field(16, gt=0)
    P: int | None = Field(4, gt=0)
    l_task: int = Field(6, gt=0)
    m_task: int = Field(6, gt=0)
    alpha: float = Field(0.75, gt=0.0, le=1.0)
    beta: float = Field(0.75, gt=0.0, le=1.0)
    basis: Literal["dft", "svd", "smt"] = "dft"
    o_h: int = Field(2, gt=0)
    o_v: int = Field(2, gt=0)
    incomplete_basis: tuple[int, int] | None = None

    @model_validator(mode="after")
    def _groups(self):
        if self.basis == "dft" and self.P is not None and self.P != self.o_h * self.o_v:
            raise ValueError(f"DFT basis has o_h*o_v={self.o_h * self.o_v} groups, but P={self.P}")
        return self


class ModelSection(_Strict):
    B: int = Field(64, gt=0)
    B_q: int = Field(2, gt=0)
    hidden: tuple[int, ...] = (256, 128)
    activation: Literal["tanh", "relu"] = "tanh"
    lr: float = Field(1e-3, gt=0.0)
    batch_size: int = Field(32, gt=0)


class TargetSection(_Strict):
    scenario: str = "short_delay"
    seed_ues: int = Field(300, gt=0)
    seed_slots: int = Field(10, gt=0)
    n_aug: int = Field(100, gt=0)
    test_ues: int = Field(100, gt=0)
    test_slots: int = Field(4, gt=0)
    steps: int = Field(2000, ge=0)
    eval_every: int = Field(10, gt=0)
    threshold: float | None = None


class ExperimentConfig(_Strict):
    system: SystemSection = SystemSection()
    meta: MetaSection = MetaSection()
    model: ModelSection = ModelSection()
    target: TargetSection = TargetSection()
    seed: int = Field(0, ge=0)

    def model_config_obj(self) -> ModelConfig:
        m = self.model
        return ModelConfig(self.system.n_t, self.system.subbands, m.hidden, m.B, m.B_q, m.activation)

    def digest(self) -> str:
        return hashlib.sha256(_canonical_json(self.model_dump(mode="json")).encode()).hexdigest()

    def provenance(self, seed: int | None = None, **extra) -> dict:
        out = {"config_sha256": self.digest(), "seed": self.seed if seed is None else seed, "version": __version__}
        out.update(extra)
        return out


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a YAML config; any problem raises :class:`ConfigError`."""
    with open(path) as f:
        try:
            raw = yaml.safe_load(f)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: malformed YAML: {exc}") from exc
    try:
        return ExperimentConfig.model_validate(raw or {})
    except ValidationError as exc:
        raise ConfigError(f"{path}: invalid config:\n{exc}") from exc
