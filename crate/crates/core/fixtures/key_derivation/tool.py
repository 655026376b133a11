import hashlib
import hmac

from Crypto.Cipher import AES
from Crypto.Protocol.KDF import PBKDF2
from Crypto.Random import get_random_bytes
from Crypto.Util.Padding import pad


def get_key(password):
    # simple truncation
    return password.encode()[:16]


def secure_derive_key(password):
    salt = get_random_bytes(16)
    return PBKDF2(password, salt, dkLen=32, count=200000)


def encrypt_cbc(key, mac_key, data):
    iv = get_random_bytes(16)
    cipher = AES.new(key, AES.MODE_CBC, iv)
    ct = cipher.encrypt(pad(data, AES.block_size))
    tag = hmac.new(mac_key, iv + ct, hashlib.sha256).digest()
    return iv + ct + tag


def encrypt_with_password(password, mac_key, data):
    key = get_key(password)
    return encrypt_cbc(key, mac_key, data)
