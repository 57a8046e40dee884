"""Signature schemes behind a single interface.

``Ed25519Scheme`` is the production scheme. ``HmacTestScheme`` signs with a
keyed SHA-256 MAC whose key doubles as the "public" key; it is deterministic and
fast, which keeps large simulation sweeps reproducible. Neither scheme raises on
garbage input to ``verify``.
"""
from __future__ import annotations

import hmac
import random
from dataclasses import dataclass
from typing import Protocol

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)


class SigningKeyError(ValueError):
    """Raised when a secret key cannot be used for signing."""


@dataclass(frozen=True)
class KeyPair:
    sk: bytes
    pk: bytes


class SignatureScheme(Protocol):
    name: str

    def keygen(self, rng: random.Random | None = None) -> KeyPair: ...

    def sign(self, sk: bytes, message: bytes) -> bytes: ...

    def verify(self, pk: bytes, message: bytes, sig: bytes) -> bool: ...


class Ed25519Scheme:
    name = "ed25519"

    def keygen(self, rng: random.Random | None = None) -> KeyPair:
        if rng is None:
            key = Ed25519PrivateKey.generate()
        else:
            key = Ed25519PrivateKey.from_private_bytes(rng.randbytes(32))
        sk = key.private_bytes_raw()
        return KeyPair(sk=sk, pk=key.public_key().public_bytes_raw())

    def sign(self, sk: bytes, message: bytes) -> bytes:
        try:
            key = Ed25519PrivateKey.from_private_bytes(sk)
        except (ValueError, TypeError) as exc:
            raise SigningKeyError(f"malformed ed25519 secret key: {exc}") from None
        return key.sign(message)

    def verify(self, pk: bytes, message: bytes, sig: bytes) -> bool:
        try:
            Ed25519PublicKey.from_public_bytes(pk).verify(sig, message)
        except (InvalidSignature, ValueError, TypeError):
            return False
        return True


class HmacTestScheme:
    name = "hmac-test"

    KEY_LEN = 32

    def keygen(self, rng: random.Random | None = None) -> KeyPair:
        rng = rng or random.Random()
        secret = rng.randbytes(self.KEY_LEN)
        return KeyPair(sk=secret, pk=secret)

    def sign(self, sk: bytes, message: bytes) -> bytes:
        if not isinstance(sk, (bytes, bytearray)) or len(sk) != self.KEY_LEN:
            raise SigningKeyError("hmac test key must be 32 bytes")
        return hmac.digest(sk, message, "sha256")

    def verify(self, pk: bytes, message: bytes, sig: bytes) -> bool:
        if not isinstance(pk, (bytes, bytearray)) or len(pk) != self.KEY_LEN:
            return False
        if not isinstance(sig, (bytes, bytearray)):
            return False
        expected = hmac.digest(pk, message, "sha256")
        return hmac.compare_digest(expected, sig)


SCHEMES: dict[str, type] = {
    Ed25519Scheme.name: Ed25519Scheme,
    HmacTestScheme.name: HmacTestScheme,
}


def scheme_by_name(name: str) -> SignatureScheme:
    try:
        return SCHEMES[name]()
    except KeyError:
        raise ValueError(f"unknown signature scheme {name!r}") from None
