import json
import shutil

from offswitch import goldens


def copy_goldens(tmp_path):
    dst = tmp_path / "g"
    shutil.copytree(goldens.default_dir(), dst)
    return dst


def test_pristine_vectors_pass():
    assert goldens.verify_goldens() == []


def test_regenerate_matches_committed(tmp_path):
    goldens.regenerate(tmp_path)
    for name in (goldens.BUNDLES, goldens.SIGNATURES):
        assert (tmp_path / name).read_bytes() == (goldens.default_dir() / name).read_bytes()


def test_flipped_hex_byte_is_named(tmp_path):
    d = copy_goldens(tmp_path)
    data = json.loads((d / goldens.BUNDLES).read_text())
    case = data["nonce"][-1]
    raw = bytearray.fromhex(case["hex"])
    raw[-1] ^= 0x01
    case["hex"] = raw.hex()
    (d / goldens.BUNDLES).write_text(json.dumps(data))
    problems = goldens.verify_goldens(d)
    assert [where for where, _ in problems] == [f"{goldens.BUNDLES}#{case['name']}"]


def test_flipped_verdict_is_named(tmp_path):
    d = copy_goldens(tmp_path)
    lines = (d / goldens.SIGNATURES).read_text().splitlines()
    idx = next(i for i, line in enumerate(lines) if line.endswith(" accept"))
    lines[idx] = lines[idx][: -len("accept")] + "reject"
    (d / goldens.SIGNATURES).write_text("\n".join(lines) + "\n")
    problems = goldens.verify_goldens(d)
    assert len(problems) == 1 and problems[0][0].startswith(goldens.SIGNATURES)


def test_missing_files(tmp_path):
    wheres = {w for w, _ in goldens.verify_goldens(tmp_path)}
    assert goldens.BUNDLES in wheres and goldens.SIGNATURES in wheres
