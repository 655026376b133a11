HOST = '127.0.0.1'
HOST2 = '192.168.2.2'
PORT = 15012
API_KEY = 'AIzaSyD**********************7n0B7nSgCS9U'
PROXY = 'http://127.0.0.1:7897'
