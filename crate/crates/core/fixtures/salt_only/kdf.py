from Crypto.Protocol.KDF import PBKDF2
from Crypto.Random import get_random_bytes


def secure_derive_key(password):
    salt = get_random_bytes(16)
    return PBKDF2(password, salt, dkLen=32, count=200000)
