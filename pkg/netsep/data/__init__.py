# init file for netsep/data
DATA_PATH = __path__[0]
