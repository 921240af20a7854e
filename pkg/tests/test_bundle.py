import json

import numpy as np
import pytest

from nesc.bundle import FORMAT_VERSION, MAGIC, ModelBundle, load_bundle, save_bundle
from nesc.calibration import fit_pav
from nesc.errors import BundleError, DataError
from nesc.features import EmbeddingTable
from nesc.nesc import NescParams, score_span
from nesc.sampling import fit_length_distribution


@pytest.fixture(scope="module")
def bundle(small_ner, small_config, small_corpus):
    head = NescParams.init(2 * small_config.hidden_size, small_config.nesc_hidden, np.random.default_rng(3),
                           small_config.context_size, 3.5, 1.0)
    cal = fit_pav([0.1, 0.4, 0.5, 0.9], [0, 1, 0, 1])
    return ModelBundle(small_config, small_ner.params, small_ner.embeddings, None, head,
                       fit_length_distribution(small_corpus), cal)


def test_round_trip_bit_exact(tmp_path, bundle):
    p = tmp_path / "m.bundle"
    save_bundle(bundle, p)
    back = load_bundle(p)
    assert back.config == bundle.config and back.version == FORMAT_VERSION
    for k, v in bundle.ner.arrays.items():
        assert back.ner.arrays[k].tobytes() == v.tobytes()
    for k, v in bundle.nesc.arrays.items():
        assert back.nesc.arrays[k].tobytes() == v.tobytes()
    assert (back.nesc.context_size, back.nesc.w_pos, back.nesc.w_neg) == (2, 3.5, 1.0)
    assert back.embeddings.words == bundle.embeddings.words
    assert back.embeddings.matrix.tobytes() == bundle.embeddings.matrix.tobytes()
    assert back.length_distribution == bundle.length_distribution
    np.testing.assert_array_equal(back.calibrator.values, bundle.calibrator.values)


def test_score_span_preserved(tmp_path, bundle, small_corpus):
    p = tmp_path / "m.bundle"
    save_bundle(bundle, p)
    back = load_bundle(p)
    for s in small_corpus.sentences[:5]:
        for span in [(0, 0), (1, len(s) - 1)]:
            a = score_span(s, span, bundle.ner_model(), bundle.nesc, bundle.calibrator)
            b = score_span(s, span, back.ner_model(), back.nesc, back.calibrator)
            assert a == b


def test_save_is_deterministic(tmp_path, bundle):
    save_bundle(bundle, tmp_path / "a")
    save_bundle(bundle, tmp_path / "b")
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
    assert not list(tmp_path.glob("*.tmp"))


def test_truncated(tmp_path, bundle):
    p = tmp_path / "m.bundle"
    save_bundle(bundle, p)
    blob = p.read_bytes()
    for cut in (5, len(MAGIC) + 10, len(blob) - 8):
        p.write_bytes(blob[:cut])
        with pytest.raises(BundleError, match="corrupt|not a model bundle"):
            load_bundle(p)


def test_flipped_byte(tmp_path, bundle):
    p = tmp_path / "m.bundle"
    save_bundle(bundle, p)
    blob = bytearray(p.read_bytes())
    blob[-3] ^= 0xFF
    p.write_bytes(bytes(blob))
    with pytest.raises(BundleError, match="checksum"):
        load_bundle(p)


def rewrite_header(p, edit):
    blob = p.read_bytes()
    end = blob.index(b"\n", len(MAGIC))
    header = json.loads(blob[len(MAGIC):end])
    edit(header)
    p.write_bytes(MAGIC + json.dumps(header).encode() + blob[end:])


def test_version_error_names_both(tmp_path, bundle):
    p = tmp_path / "m.bundle"
    save_bundle(bundle, p)
    rewrite_header(p, lambda h: h.update(version=FORMAT_VERSION + 1))
    with pytest.raises(BundleError, match=rf"version {FORMAT_VERSION + 1}.*expected {FORMAT_VERSION}"):
        load_bundle(p)


def test_shape_mismatch(tmp_path, bundle):
    p = tmp_path / "m.bundle"
    save_bundle(bundle, p)
    rewrite_header(p, lambda h: h["config"].update(hidden_size=h["config"]["hidden_size"] + 1))
    with pytest.raises(BundleError, match="shape"):
        load_bundle(p)


def test_embedding_checksum(tmp_path, small_ner, small_config):
    emb_path = tmp_path / "emb.txt"
    rows = np.random.default_rng(0).normal(size=(2, 200))
    emb_path.write_text("".join(f"w{i} " + " ".join(repr(float(x)) for x in r) + "\n" for i, r in enumerate(rows)),
                        encoding="utf-8")
    emb = EmbeddingTable.load(emb_path)
    p = tmp_path / "m.bundle"
    save_bundle(ModelBundle(small_config, small_ner.params, emb, emb.checksum), p)
    assert b"embeddings/matrix" not in p.read_bytes()
    assert load_bundle(p, emb).embedding_checksum == emb.checksum
    with pytest.raises(BundleError, match="embedding"):
        load_bundle(p).ner_model()
    emb_path.write_text(emb_path.read_text() + "extra " + " ".join(["0.0"] * 200) + "\n", encoding="utf-8")
    with pytest.raises(BundleError, match="checksum"):
        load_bundle(p, EmbeddingTable.load(emb_path))


def test_not_a_bundle(tmp_path):
    p = tmp_path / "x"
    p.write_bytes(b"hello\n")
    with pytest.raises(BundleError):
        load_bundle(p)
    with pytest.raises(DataError):
        load_bundle(tmp_path / "missing")
