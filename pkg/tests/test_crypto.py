import random

import pytest

from podcore.crypto import SCHEMES, SigningKeyError, scheme_by_name

TRIALS = 1000


@pytest.fixture(params=sorted(SCHEMES))
def scheme(request):
    return scheme_by_name(request.param)


def test_sign_verify(scheme):
    rng = random.Random(0)
    key = scheme.keygen(rng)
    for _ in range(50):
        m = rng.randbytes(rng.randint(0, 64))
        assert scheme.verify(key.pk, m, scheme.sign(key.sk, m))


def test_other_message_rejected(scheme):
    rng = random.Random(1)
    key = scheme.keygen(rng)
    for _ in range(TRIALS):
        m = rng.randbytes(16)
        other = rng.randbytes(16)
        if other == m:
            continue
        assert not scheme.verify(key.pk, other, scheme.sign(key.sk, m))


def test_other_key_rejected(scheme):
    rng = random.Random(2)
    m = b"message"
    for _ in range(TRIALS):
        k1, k2 = scheme.keygen(rng), scheme.keygen(rng)
        assert not scheme.verify(k2.pk, m, scheme.sign(k1.sk, m))


def test_bit_flip_rejected(scheme):
    rng = random.Random(3)
    key = scheme.keygen(rng)
    m = b"vote body"
    sig = scheme.sign(key.sk, m)
    assert not scheme.verify(key.pk, m, bytes(len(sig)))
    for _ in range(TRIALS):
        bit = rng.randrange(len(sig) * 8)
        flipped = bytearray(sig)
        flipped[bit // 8] ^= 1 << (bit % 8)
        assert not scheme.verify(key.pk, m, bytes(flipped))


def test_malformed_inputs(scheme):
    key = scheme.keygen(random.Random(4))
    with pytest.raises(SigningKeyError):
        scheme.sign(b"short", b"m")
    assert not scheme.verify(b"short", b"m", b"x" * 64)
    assert not scheme.verify(key.pk, b"m", b"")


def test_seeded_keys_are_reproducible(scheme):
    assert scheme.keygen(random.Random(9)) == scheme.keygen(random.Random(9))


def test_unknown_scheme():
    with pytest.raises(ValueError):
        scheme_by_name("rsa")
