"""Model bundle files.

Layout::

    NESC-BUNDLE\\n
    <one line of UTF-8 JSON: version, config, array directory, metadata>\\n
    <raw little-endian float64 arrays, back to back>

The header records the payload size and SHA-256 so truncation or bit rot is
detected before any array is handed out.  Embeddings read from a file are not
stored, only their checksum; randomly initialised embeddings are stored along
with their vocabulary.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .calibration import IsotonicCalibrator
from .config import Config
from .errors import BundleError
from .features import EmbeddingTable
from .ner import NerModel, NerParams
from .nesc import NescParams
from .sampling import LengthDistribution

MAGIC = b"NESC-BUNDLE\n"
FORMAT_VERSION = 1
_DTYPE = np.dtype("<f8")


@dataclass
class ModelBundle:
    config: Config
    ner: NerParams
    embeddings: Optional[EmbeddingTable] = None
    embedding_checksum: Optional[str] = None
    nesc: Optional[NescParams] = None
    length_distribution: Optional[LengthDistribution] = None
    calibrator: Optional[IsotonicCalibrator] = None
    version: int = FORMAT_VERSION

    def ner_model(self) -> NerModel:
        if self.embeddings is None:
            raise BundleError("this bundle was trained on an embedding file; supply the same file with --embeddings")
        return NerModel(self.ner, self.embeddings)


def _arrays(bundle: ModelBundle) -> Dict[str, np.ndarray]:
    out = {f"ner/{k}": v for k, v in bundle.ner.arrays.items()}
    if bundle.nesc is not None:
        out.update({f"nesc/{k}": v for k, v in bundle.nesc.arrays.items()})
    if bundle.embeddings is not None and bundle.embedding_checksum is None:
        out["embeddings/matrix"] = bundle.embeddings.matrix
        out["embeddings/unk"] = bundle.embeddings.unk
    if bundle.length_distribution is not None:
        out["length/lengths"] = np.array(bundle.length_distribution.lengths, dtype=np.float64)
        out["length/probs"] = np.array(bundle.length_distribution.probs, dtype=np.float64)
    if bundle.calibrator is not None:
        out["calibrator/thresholds"] = bundle.calibrator.thresholds
        out["calibrator/values"] = bundle.calibrator.values
    return out


def save_bundle(bundle: ModelBundle, path) -> None:
    """Write atomically: a partially written file never replaces a good one."""
    arrays = _arrays(bundle)
    directory, chunks, offset = [], [], 0
    for name, arr in arrays.items():
        raw = np.ascontiguousarray(arr, dtype=_DTYPE).tobytes()
        directory.append({"name": name, "shape": list(np.shape(arr)), "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    stored_vocab = bundle.embeddings is not None and bundle.embedding_checksum is None
    header = {
        "version": bundle.version,
        "config": bundle.config.to_dict(),
        "arrays": directory,
        "payload_bytes": len(payload),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
        "ner": {"dropout": bundle.ner.dropout},
        "nesc": None if bundle.nesc is None else {
            "context_size": bundle.nesc.context_size, "w_pos": bundle.nesc.w_pos, "w_neg": bundle.nesc.w_neg,
        },
        "embedding_checksum": bundle.embedding_checksum,
        "embedding_vocab": bundle.embeddings.words if stored_vocab else None,
    }
    blob = MAGIC + json.dumps(header, ensure_ascii=False, sort_keys=True).encode("utf-8") + b"\n" + payload
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(blob)
    os.replace(tmp, path)


def load_bundle(path, embeddings: Optional[EmbeddingTable] = None) -> ModelBundle:
    try:
        blob = open(path, "rb").read()
    except OSError as exc:
        raise BundleError(f"{path}: cannot read bundle ({exc.strerror})") from None
    if not blob.startswith(MAGIC):
        raise BundleError(f"{path}: not a model bundle")
    end = blob.find(b"\n", len(MAGIC))
    if end < 0:
        raise BundleError(f"{path}: corrupt bundle (header truncated)")
    try:
        header = json.loads(blob[len(MAGIC): end].decode("utf-8"))
        version = header["version"]
    except (ValueError, KeyError, TypeError):
        raise BundleError(f"{path}: corrupt bundle (unreadable header)") from None
    if version != FORMAT_VERSION:
        raise BundleError(f"{path}: bundle format version {version} is not supported (expected {FORMAT_VERSION})")
    payload = blob[end + 1:]
    if len(payload) != header.get("payload_bytes"):
        raise BundleError(f"{path}: corrupt bundle (payload is {len(payload)} bytes, "
                          f"header says {header.get('payload_bytes')})")
    if hashlib.sha256(payload).hexdigest() != header.get("payload_sha256"):
        raise BundleError(f"{path}: corrupt bundle (payload checksum mismatch)")

    arrays: Dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        raw = payload[entry["offset"]: entry["offset"] + entry["nbytes"]]
        if len(raw) != int(np.prod(shape, dtype=np.int64)) * _DTYPE.itemsize:
            raise BundleError(f"{path}: array {entry['name']} does not match its shape {shape}")
        arrays[entry["name"]] = np.frombuffer(raw, dtype=_DTYPE).astype(np.float64).reshape(shape)

    def group(prefix):
        return {k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)}

    config = Config.from_dict(header["config"])
    ner = NerParams(group("ner/"), header["ner"]["dropout"])
    _check_shapes(path, ner, config)

    nesc = None
    if header["nesc"] is not None:
        meta = header["nesc"]
        nesc = NescParams(group("nesc/"), meta["context_size"], meta["w_pos"], meta["w_neg"])
        if nesc.input_size != 2 * config.hidden_size or nesc.hidden_size != config.nesc_hidden:
            raise BundleError(f"{path}: span head shapes do not match the stored config")

    checksum = header.get("embedding_checksum")
    if checksum is None and "embeddings/matrix" in arrays:
        embeddings = EmbeddingTable(header["embedding_vocab"], arrays["embeddings/matrix"], arrays["embeddings/unk"])
    elif checksum is not None and embeddings is not None and embeddings.checksum != checksum:
        raise BundleError(f"{path}: embedding file checksum {embeddings.checksum} does not match "
                          f"the one used in training ({checksum})")
    elif checksum is None:
        embeddings = None

    dist = None
    if "length/lengths" in arrays:
        dist = LengthDistribution(tuple(int(x) for x in arrays["length/lengths"]),
                                  tuple(float(x) for x in arrays["length/probs"]))
    calibrator = None
    if "calibrator/thresholds" in arrays:
        calibrator = IsotonicCalibrator(arrays["calibrator/thresholds"], arrays["calibrator/values"])
    return ModelBundle(config, ner, embeddings, checksum, nesc, dist, calibrator, version)


def _check_shapes(path, ner: NerParams, config: Config) -> None:
    H = config.hidden_size
    expected = {
        "fwd.Wh": (4 * H, H), "bwd.Wh": (4 * H, H), "fwd.b": (4 * H,), "bwd.b": (4 * H,),
        "dense.W": (11, 2 * H), "dense.b": (11,), "transitions": (13, 13),
    }
    for name, shape in expected.items():
        got = ner.arrays.get(name)
        if got is None or got.shape != shape:
            raise BundleError(f"{path}: tagger array {name} has shape "
                              f"{None if got is None else got.shape}, config implies {shape}")
