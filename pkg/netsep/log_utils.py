import logging
import sys

LOG_FORMAT = '%(asctime)s [%(levelname)s] %(name)s: %(message)s'


def setup_logging(level='INFO', stream=None):
    """
    Attaches a single stderr handler to the ``netsep`` logger and returns it.
    Calling it again only changes the level.
    - level:	Logging level name or number. Default is INFO.
    - stream:	Stream for the handler. Default is sys.stderr.
    """
    logger = logging.getLogger('netsep')
    if isinstance(level, str):
        level = getattr(logging, level.upper(), None)
        if not isinstance(level, int):
            raise ValueError('log level {} is not recognized'.format(level))
    logger.setLevel(level)
    if not any(getattr(h, '_netsep', False) for h in logger.handlers):
        handler = logging.StreamHandler(stream or sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._netsep = True
        logger.addHandler(handler)
    logger.propagate = False
    return logger
