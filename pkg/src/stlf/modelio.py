"""Binary persistence for fitted models.

Forests are far too large for text formats, so everything is packed
little-endian behind a magic header, a format version, a model-type tag and
a trailing SHA-256 checksum. Loading a saved model reproduces its forecasts
bit-identically.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from stlf import arima, dshw, narxrf
from stlf.errors import ChecksumError, VersionError

MAGIC = b"STLF"
VERSION = 1
_DIGEST_BYTES = 32


class _Writer:
    def __init__(self):
        self.parts: list[bytes] = []

    def u8(self, v: int):
        self.parts.append(struct.pack("<B", v))

    def u16(self, v: int):
        self.parts.append(struct.pack("<H", v))

    def i64(self, v: int):
        self.parts.append(struct.pack("<q", v))

    def u64(self, v: int):
        self.parts.append(struct.pack("<Q", v))

    def f64(self, v: float):
        self.parts.append(struct.pack("<d", v))

    def text(self, s: str):
        raw = s.encode()
        self.u16(len(raw))
        self.parts.append(raw)

    def array(self, x: np.ndarray, dtype: str):
        x = np.ascontiguousarray(x, dtype=dtype)
        self.u64(x.shape[0])
        self.parts.append(x.tobytes())

    def payload(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def _take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ChecksumError("model file payload ends prematurely")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return struct.unpack("<B", self._take(1))[0]

    def u16(self) -> int:
        return struct.unpack("<H", self._take(2))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self._take(8))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self._take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self._take(8))[0]

    def text(self) -> str:
        return self._take(self.u16()).decode()

    def array(self, dtype: str) -> np.ndarray:
        n = self.u64()
        item = np.dtype(dtype).itemsize
        return np.frombuffer(self._take(n * item), dtype=dtype).copy()


def _pack_dshw(w: _Writer, model: dshw.DshwModel):
    p, s = model.params, model.state
    w.text(p.variant)
    for v in (p.alpha, p.gamma_day, p.gamma_week, p.phi):
        w.f64(v)
    w.f64(s.level)
    w.f64(s.last_y)
    w.f64(s.last_fit)
    w.i64(s.clock)
    w.array(s.day_ring, "<f8")
    w.array(s.week_ring, "<f8")


def _unpack_dshw(r: _Reader) -> dshw.DshwModel:
    variant = r.text()
    alpha, gamma_day, gamma_week, phi = (r.f64() for _ in range(4))
    level, last_y, last_fit = r.f64(), r.f64(), r.f64()
    clock = r.i64()
    day = r.array("<f8")
    week = r.array("<f8")
    params = dshw.DshwParams(alpha, gamma_day, gamma_week, phi, variant)
    state = dshw.DshwState(level, day, week, last_y, last_fit, clock)
    return dshw.DshwModel(params, state)


def _pack_arma(w: _Writer, fit: arima.ArmaFit):
    w.u8(fit.spec.p)
    w.u8(fit.spec.d)
    w.u8(fit.spec.q)
    w.u8(int(fit.spec.include_mean))
    w.u8(int(fit.converged))
    w.f64(fit.mean)
    w.f64(fit.sigma2)
    w.f64(fit.css)
    w.i64(fit.n_eff)
    w.array(fit.ar, "<f8")
    w.array(fit.ma, "<f8")
    w.array(fit.state.last_w, "<f8")
    w.array(fit.state.last_e, "<f8")
    w.f64(fit.state.last_raw)
    w.i64(fit.state.clock)


def _unpack_arma(r: _Reader) -> arima.ArmaFit:
    p, d, q, mean_flag, converged = (r.u8() for _ in range(5))
    mean, sigma2, css = r.f64(), r.f64(), r.f64()
    n_eff = r.i64()
    ar = r.array("<f8")
    ma = r.array("<f8")
    last_w = r.array("<f8")
    last_e = r.array("<f8")
    last_raw = r.f64()
    clock = r.i64()
    spec = arima.ArmaSpec(p, d, q, bool(mean_flag))
    state = arima.ArmaState(last_w, last_e, last_raw, clock)
    return arima.ArmaFit(spec, ar, ma, mean, sigma2, css, n_eff, state, bool(converged))


def _pack_narx(w: _Writer, model: narxrf.NarxRfModel):
    w.u8(len(model.forests))
    for h in sorted(model.forests):
        forest = model.forests[h]
        w.u8(h)
        w.u8(forest.mtry)
        w.i64(forest.sample_size)
        w.u64(forest.rng_seed)
        w.u64(len(forest.trees))
        for tree in forest.trees:
            w.array(tree.feature, "<i4")
            w.array(tree.threshold, "<f8")
            w.array(tree.left, "<i4")
            w.array(tree.right, "<i4")
            w.array(tree.value, "<f8")


def _unpack_narx(r: _Reader) -> narxrf.NarxRfModel:
    n_forests = r.u8()
    forests = {}
    for _ in range(n_forests):
        h = r.u8()
        mtry = r.u8()
        sample_size = r.i64()
        seed = r.u64()
        n_trees = r.u64()
        trees = []
        for _ in range(n_trees):
            feature = r.array("<i4")
            threshold = r.array("<f8")
            left = r.array("<i4")
            right = r.array("<i4")
            value = r.array("<f8")
            trees.append(narxrf.RegressionTree(feature, threshold, left, right, value))
        forests[h] = narxrf.Forest(trees, mtry, sample_size, narxrf.FeatureRecipe(h), seed)
    return narxrf.NarxRfModel(forests)


_PACKERS = {
    "dshw": (dshw.DshwModel, _pack_dshw, _unpack_dshw),
    "avgarima": (arima.ArmaFit, _pack_arma, _unpack_arma),
    "narxrf": (narxrf.NarxRfModel, _pack_narx, _unpack_narx),
}


def model_tag(model) -> str:
    for tag, (cls, _, _) in _PACKERS.items():
        if isinstance(model, cls):
            return tag
    raise TypeError(f"cannot serialize model of type {type(model).__name__}")


def save_model(path, model) -> None:
    """Write a fitted model file (magic, version, type tag, payload, digest)."""
    tag = model_tag(model)
    w = _Writer()
    w.text(tag)
    _PACKERS[tag][1](w, model)
    body = struct.pack("<H", VERSION) + w.payload()
    digest = hashlib.sha256(body).digest()
    Path(path).write_bytes(MAGIC + body + digest)


def load_model(path):
    """Read a model file back; returns the same kind of object that was saved."""
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 2 + _DIGEST_BYTES or raw[: len(MAGIC)] != MAGIC:
        raise ChecksumError(f"{path}: not a model file or truncated")
    body, digest = raw[len(MAGIC) : -_DIGEST_BYTES], raw[-_DIGEST_BYTES:]
    version = struct.unpack("<H", body[:2])[0]
    if version != VERSION:
        raise VersionError(f"{path}: format version {version}, reader supports {VERSION}")
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError(f"{path}: checksum mismatch")
    r = _Reader(body[2:])
    tag = r.text()
    if tag not in _PACKERS:
        raise ChecksumError(f"{path}: unknown model tag {tag!r}")
    return _PACKERS[tag][2](r)
