from .decodelab import *
