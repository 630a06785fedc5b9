import json
import struct
from pathlib import Path

import numpy as np
import pytest

from flanemb_exporter import ExportJob, export, fnv1a_64, text_key
from flanemb_exporter.cli import main
from flanemb_exporter.encoders import EncoderUnavailable, HashEncoder, get_encoder
from flanemb_exporter.export import read_texts

DATA = Path(__file__).parent / "data"


def _read_flanemb(path):
    """Minimal independent reader for the on-disk format."""
    raw = Path(path).read_bytes()
    assert raw[:8] == b"FLANEMB1"
    dim, count = struct.unpack_from("<II", raw, 8)
    records = {}
    offset = 16
    for _ in range(count):
        (key,) = struct.unpack_from("<Q", raw, offset)
        vec = np.frombuffer(raw, dtype="<f4", count=dim, offset=offset + 8)
        records[key] = vec.copy()
        offset += 8 + 4 * dim
    assert offset == len(raw)
    return dim, records


def _write_texts(path, texts):
    with open(path, "w", encoding="utf-8") as fh:
        for t in texts:
            fh.write(json.dumps({"text": t}, ensure_ascii=False) + "\n")


def test_fnv_published_vectors():
    assert fnv1a_64(b"") == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a_64(b"foobar") == 0x85944171F73967E8


def test_keys_match_shared_vector_file():
    mismatches = 0
    for line in (DATA / "hash_vectors.jsonl").read_text().splitlines():
        rec = json.loads(line)
        if text_key(rec["text"]) != int(rec["key"]):
            mismatches += 1
    assert mismatches == 0


def test_export_minimal_file(tmp_path):
    texts_path = tmp_path / "texts.jsonl"
    _write_texts(texts_path, ["alpha", "beta", "gamma"])
    out = tmp_path / "embeds.bin"
    count = export(ExportJob(str(texts_path), str(out), "hash:16:0", batch_size=2))
    assert count == 3
    dim, records = _read_flanemb(out)
    assert dim == 16
    assert set(records) == {text_key(t) for t in ("alpha", "beta", "gamma")}


def test_export_dedupes_texts(tmp_path):
    texts_path = tmp_path / "texts.jsonl"
    _write_texts(texts_path, ["alpha", "alpha", "beta"])
    out = tmp_path / "embeds.bin"
    assert export(ExportJob(str(texts_path), str(out), "hash:8:0")) == 2


def test_reexport_byte_identical(tmp_path):
    texts_path = tmp_path / "texts.jsonl"
    _write_texts(texts_path, [f"text number {i}" for i in range(50)])
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    export(ExportJob(str(texts_path), str(a), "hash:32:7", batch_size=8))
    export(ExportJob(str(texts_path), str(b), "hash:32:7", batch_size=8))
    assert a.read_bytes() == b.read_bytes()


def test_batch_size_does_not_change_output(tmp_path):
    texts_path = tmp_path / "texts.jsonl"
    _write_texts(texts_path, [f"text number {i}" for i in range(23)])
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    export(ExportJob(str(texts_path), str(a), "hash:16:0", batch_size=3))
    export(ExportJob(str(texts_path), str(b), "hash:16:0", batch_size=64))
    assert a.read_bytes() == b.read_bytes()


def test_normalize_flag(tmp_path):
    texts_path = tmp_path / "texts.jsonl"
    _write_texts(texts_path, ["some text"])
    out = tmp_path / "n.bin"
    export(ExportJob(str(texts_path), str(out), "hash:16:0", normalize=True))
    _, records = _read_flanemb(out)
    vec = next(iter(records.values()))
    assert abs(np.linalg.norm(vec) - 1.0) < 1e-6


def test_no_temp_file_left_behind(tmp_path):
    texts_path = tmp_path / "texts.jsonl"
    _write_texts(texts_path, ["x"])
    out = tmp_path / "embeds.bin"
    export(ExportJob(str(texts_path), str(out), "hash:8:0"))
    assert [p.name for p in tmp_path.iterdir() if p.suffix == ".tmp"] == []


def test_hash_encoder_deterministic():
    enc = HashEncoder(12, seed=5)
    a = enc.encode(["claim text"])
    b = enc.encode(["claim text"])
    assert np.array_equal(a, b)
    assert a.dtype == np.float32


def test_bad_encoder_spec():
    with pytest.raises(ValueError):
        get_encoder("hash:")


def test_unavailable_pretrained_encoder():
    with pytest.raises(EncoderUnavailable):
        get_encoder("no-such-org/no-such-model-xyz")


def test_read_texts_rejects_garbage(tmp_path):
    path = tmp_path / "texts.jsonl"
    path.write_text("not json\n")
    with pytest.raises(ValueError):
        read_texts(path)


def test_cli_round_trip(tmp_path, capsys):
    texts_path = tmp_path / "texts.jsonl"
    _write_texts(texts_path, ["one", "two"])
    out = tmp_path / "embeds.bin"
    rc = main(["--input", str(texts_path), "--output", str(out),
               "--encoder", "hash:8:0", "--batch", "1"])
    assert rc == 0
    assert "wrote 2 records" in capsys.readouterr().out
    dim, records = _read_flanemb(out)
    assert dim == 8 and len(records) == 2


def test_cli_encoder_unavailable_exit_code(tmp_path):
    texts_path = tmp_path / "texts.jsonl"
    _write_texts(texts_path, ["one"])
    rc = main(["--input", str(texts_path), "--output", str(tmp_path / "o.bin"),
               "--encoder", "no-such-org/no-such-model-xyz"])
    assert rc == 3
