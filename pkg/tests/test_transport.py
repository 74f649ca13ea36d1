import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from offswitch import transport as tp
from offswitch.types import BlockKind

u32 = st.integers(0, 2**32 - 1)
u64 = st.integers(0, 2**64 - 1)
u128 = st.integers(0, 2**128 - 1)

nonce_records = st.one_of(
    st.builds(tp.NonceRecord, u32, st.sampled_from([0, 1, 2]), u128),
    st.builds(lambda i, pos: tp.NonceRecord(i, 3, positions=tuple(pos)), u32,
              st.lists(st.integers(0, 65535), max_size=60)),
)
nonce_bundles = st.builds(tp.NonceBundle, u64, st.lists(nonce_records, max_size=8).map(tuple))
license_records = st.builds(tp.LicenseRecord, u32, u128, u32, u64, st.binary(max_size=80))
license_bundles = st.builds(tp.LicenseBundle, u64, u32, st.lists(license_records, max_size=8).map(tuple))


@settings(max_examples=300)
@given(nonce_bundles)
def test_nonce_roundtrip(bundle):
    wire = tp.encode_nonce_bundle(bundle)
    assert tp.decode_nonce_bundle(wire) == bundle
    assert tp.encode_nonce_bundle(tp.decode_nonce_bundle(wire)) == wire


@settings(max_examples=300)
@given(license_bundles)
def test_license_roundtrip(bundle):
    wire = tp.encode_license_bundle(bundle)
    assert tp.decode_license_bundle(wire) == bundle


@given(nonce_bundles, st.data())
def test_truncation_detected(bundle, data):
    wire = tp.encode_nonce_bundle(bundle)
    cut = data.draw(st.integers(0, len(wire) - 1))
    with pytest.raises(tp.BundleError):
        tp.decode_nonce_bundle(wire[:cut])


def test_sizes():
    assert len(tp.encode_nonce_bundle(tp.NonceBundle(0))) == 15
    one_k = tp.NonceBundle(0, tuple(tp.NonceRecord(i, 0, i) for i in range(1000)))
    assert len(tp.encode_nonce_bundle(one_k)) == 21_015 == tp.nonce_bundle_size({0: 1000})
    pre = tp.NonceBundle(0, (tp.NonceRecord(0, 3, positions=tuple(range(50))),))
    assert len(tp.encode_nonce_bundle(pre)) == tp.nonce_bundle_size({3: 1}, k=50)


def test_header_errors():
    good = tp.encode_nonce_bundle(tp.NonceBundle(1))
    with pytest.raises(tp.BadMagic):
        tp.decode_nonce_bundle(b"XXXX" + good[4:])
    with pytest.raises(tp.BadMagic):
        tp.decode_license_bundle(good)
    with pytest.raises(tp.BadVersion):
        tp.decode_nonce_bundle(good[:4] + b"\x09" + good[5:])
    with pytest.raises(tp.Truncated):
        tp.decode_nonce_bundle(good[:2])
    with pytest.raises(tp.CountMismatch):
        tp.decode_nonce_bundle(good + b"\x00")


def test_unknown_kind():
    wire = bytearray(tp.encode_nonce_bundle(tp.NonceBundle(0, (tp.NonceRecord(0, 0, 1),))))
    wire[15 + 4] = 7
    with pytest.raises(tp.BundleError):
        tp.decode_nonce_bundle(bytes(wire))


def test_preshared_record_echo_is_digest():
    rec = tp.NonceRecord(0, BlockKind.PRESHARED_BITS, positions=(1, 2, 3))
    from offswitch.types import positions_digest

    assert rec.nonce_value == positions_digest((1, 2, 3))


class TestChannel:
    def test_outage_window(self):
        ch = tp.ChannelModel(outages=[(10, 20)])
        assert isinstance(tp.transmit(ch, b"", 9), tp.Delivered)
        assert tp.transmit(ch, b"", 10) == tp.Lost("outage")
        assert isinstance(tp.transmit(ch, b"", 20), tp.Delivered)

    def test_latency(self):
        assert tp.transmit(tp.ChannelModel(latency=2.5), b"", 1) == tp.Delivered(3.5)

    def test_loss_is_seeded(self):
        ch1, ch2 = tp.ChannelModel(loss_probability=0.5, seed=3), tp.ChannelModel(loss_probability=0.5, seed=3)
        r1 = [type(tp.transmit(ch1, b"", 0)) for _ in range(50)]
        r2 = [type(tp.transmit(ch2, b"", 0)) for _ in range(50)]
        assert r1 == r2 and tp.Lost in r1 and tp.Delivered in r1

    def test_bad_windows(self):
        with pytest.raises(ValueError):
            tp.ChannelModel(outages=[(5, 1)])
        with pytest.raises(ValueError):
            tp.ChannelModel(outages=[(0, 10), (5, 15)])
        with pytest.raises(ValueError):
            tp.ChannelModel(loss_probability=2)
