import hashlib
def store_password(password):
    # Insecure: directly hash password with MD5
    return hashlib.md5(password.encode()).hexdigest()
