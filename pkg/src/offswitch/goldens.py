"""Checked-in wire vectors and signature vectors.

``bundles.json`` holds hex encodings with their expected decoded form;
``signatures.txt`` holds one ``scheme payload public signature verdict`` line
per vector. :func:`verify_goldens` checks both directions byte-exactly.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import List, Optional, Tuple

from . import crypto, transport
from .types import BlockId, license_payload

BUNDLES = "bundles.json"
SIGNATURES = "signatures.txt"


def default_dir() -> Path:
    return Path(str(resources.files("offswitch") / "data" / "goldens"))


# -- canonical vectors ------------------------------------------------------------


def _nonce_cases():
    yield "nonce_empty", transport.NonceBundle(0)
    yield "nonce_single_trng", transport.NonceBundle(7, (transport.NonceRecord(3, 0, 0x0123456789ABCDEF_FEDCBA9876543210),))
    yield "nonce_mixed", transport.NonceBundle(0xDEADBEEF, (
        transport.NonceRecord(0, 0, (1 << 128) - 1),
        transport.NonceRecord(1, 1, (0xDEADBEEF << 64) | (1 << 32) | 5),
        transport.NonceRecord(2, 2, 42),
        transport.NonceRecord(9, 3, positions=(0, 17, 9999)),
    ))


def _license_cases():
    yield "license_empty", transport.LicenseBundle(0, 0)
    yield "license_two", transport.LicenseBundle(7, 3, (
        transport.LicenseRecord(3, 0x0123456789ABCDEF_FEDCBA9876543210, 72, 259_200, bytes(range(64))),
        transport.LicenseRecord(4, 1, 1, 0, b""),
    ))


def _nonce_to_obj(b: transport.NonceBundle) -> dict:
    return {"chip_id": b.chip_id, "records": [
        {"index": r.index, "kind": r.kind, "nonce_value": f"{r.nonce_value:032x}",
         "positions": list(r.positions) if r.positions is not None else None} for r in b.records]}


def _nonce_from_obj(o: dict) -> transport.NonceBundle:
    recs = []
    for r in o["records"]:
        if r["positions"] is not None:
            recs.append(transport.NonceRecord(r["index"], r["kind"], positions=tuple(r["positions"])))
        else:
            recs.append(transport.NonceRecord(r["index"], r["kind"], int(r["nonce_value"], 16)))
    return transport.NonceBundle(o["chip_id"], tuple(recs))


def _license_to_obj(b: transport.LicenseBundle) -> dict:
    return {"chip_id": b.chip_id, "batch_id": b.batch_id, "records": [
        {"index": r.index, "nonce_echo": f"{r.nonce_echo:032x}", "grant_ops": r.grant_ops, "expiry": r.expiry,
         "proof": r.proof.hex()} for r in b.records]}


def _license_from_obj(o: dict) -> transport.LicenseBundle:
    return transport.LicenseBundle(o["chip_id"], o["batch_id"], tuple(
        transport.LicenseRecord(r["index"], int(r["nonce_echo"], 16), r["grant_ops"], r["expiry"],
                                bytes.fromhex(r["proof"])) for r in o["records"]))


def _signature_cases():
    block = BlockId(7, 3)
    payload = license_payload(3, block, 0x0123456789ABCDEF_FEDCBA9876543210, 72, 259_200)
    tampered = license_payload(3, block, 0x0123456789ABCDEF_FEDCBA9876543210, 73, 259_200)
    for scheme, seed in ((crypto.Scheme.ECDSA_P256, 1), (crypto.Scheme.ED25519, 2)):
        pair = crypto.generate_keypair(scheme, seed)
        sig = crypto.sign_license(pair, payload)
        yield scheme.value, payload, pair.public.data, sig, True
        yield scheme.value, tampered, pair.public.data, sig, False


def build_bundles() -> dict:
    out = {"nonce": [], "license": []}
    for name, b in _nonce_cases():
        out["nonce"].append({"name": name, "hex": transport.encode_nonce_bundle(b).hex(), "decoded": _nonce_to_obj(b)})
    for name, b in _license_cases():
        out["license"].append({"name": name, "hex": transport.encode_license_bundle(b).hex(),
                               "decoded": _license_to_obj(b)})
    return out


def build_signatures() -> str:
    lines = ["# scheme payload_hex public_hex signature_hex verdict"]
    for scheme, payload, public, sig, ok in _signature_cases():
        lines.append(f"{scheme} {payload.hex()} {public.hex()} {sig.hex()} {'accept' if ok else 'reject'}")
    return "\n".join(lines) + "\n"


def regenerate(directory: Optional[Path] = None) -> List[Path]:
    """Rewrite the vector files. Review the diff before committing."""
    d = Path(directory) if directory else default_dir()
    d.mkdir(parents=True, exist_ok=True)
    (d / BUNDLES).write_text(json.dumps(build_bundles(), indent=2, sort_keys=True) + "\n")
    (d / SIGNATURES).write_text(build_signatures())
    return [d / BUNDLES, d / SIGNATURES]


# -- verification --------------------------------------------------------------------


def verify_goldens(directory: Optional[Path] = None) -> List[Tuple[str, str]]:
    """Empty list on success, else ``(file, problem)`` pairs."""
    d = Path(directory) if directory else default_dir()
    problems: List[Tuple[str, str]] = []
    try:
        data = json.loads((d / BUNDLES).read_text())
    except (OSError, ValueError) as exc:
        problems.append((BUNDLES, f"unreadable: {exc}"))
        data = {"nonce": [], "license": []}
    codecs = {"nonce": (_nonce_from_obj, transport.encode_nonce_bundle, transport.decode_nonce_bundle),
              "license": (_license_from_obj, transport.encode_license_bundle, transport.decode_license_bundle)}
    for section, (from_obj, encode, decode) in codecs.items():
        for case in data.get(section, []):
            tag = f"{BUNDLES}#{case.get('name')}"
            try:
                raw = bytes.fromhex(case["hex"])
                expected = from_obj(case["decoded"])
                if encode(expected) != raw:
                    problems.append((tag, "re-encoding differs from stored hex"))
                elif decode(raw) != expected:
                    problems.append((tag, "decoding differs from stored fields"))
            except (KeyError, ValueError) as exc:
                problems.append((tag, f"malformed vector: {exc}"))
    try:
        lines = (d / SIGNATURES).read_text().splitlines()
    except OSError as exc:
        problems.append((SIGNATURES, f"unreadable: {exc}"))
        lines = []
    for n, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#"):
            continue
        tag = f"{SIGNATURES}:{n}"
        try:
            scheme, payload, public, sig, verdict = line.split()
            pub = crypto.PublicKey(crypto.Scheme.parse(scheme), bytes.fromhex(public))
            ok = crypto.verify_signature(pub, bytes.fromhex(payload), bytes.fromhex(sig))
        except ValueError as exc:
            problems.append((tag, f"malformed vector: {exc}"))
            continue
        if ok != (verdict == "accept"):
            problems.append((tag, f"expected {verdict}, verifier said {'accept' if ok else 'reject'}"))
    return problems
